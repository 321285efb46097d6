#pragma once

// Raster containers shared across the pipeline: RGB images with float
// channels in [0,1], boolean masks, and disparity grids with per-pixel
// validity. All three index as (x, y) with row-major storage, y down.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace declutter {

inline void require_dims(int width, int height, const char* what) {
    if (width <= 0 || height <= 0)
        throw std::runtime_error(std::string(what) + ": dimensions must be positive, got " +
                                 std::to_string(width) + "x" + std::to_string(height));
    if (int64_t(width) * int64_t(height) > int64_t(1) << 28)
        throw std::runtime_error(std::string(what) + ": implausibly large raster " +
                                 std::to_string(width) + "x" + std::to_string(height));
}

struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels; // RGB interleaved, size = width*height*3

    Image() = default;
    Image(int w, int h, std::array<float, 3> fill = {0.f, 0.f, 0.f}) : width(w), height(h) {
        require_dims(w, h, "Image");
        pixels.resize(size_t(w) * h * 3);
        for (size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = fill[0];
            pixels[i + 1] = fill[1];
            pixels[i + 2] = fill[2];
        }
    }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    float& at(int x, int y, int c) { return pixels[(size_t(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return pixels[(size_t(y) * width + x) * 3 + c]; }

    std::array<float, 3> rgb(int x, int y) const {
        size_t i = (size_t(y) * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }

    void set_rgb(int x, int y, std::array<float, 3> c) {
        size_t i = (size_t(y) * width + x) * 3;
        pixels[i] = c[0];
        pixels[i + 1] = c[1];
        pixels[i + 2] = c[2];
    }

    bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits; // 0 or 1, size = width*height

    Mask() = default;
    Mask(int w, int h, bool fill = false) : width(w), height(h) {
        require_dims(w, h, "Mask");
        bits.assign(size_t(w) * h, fill ? 1 : 0);
    }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[size_t(y) * width + x] = v ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += (b != 0);
        return n;
    }
    bool empty() const { return count() == 0; }
};

struct DisparityGrid {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // 32-bit so PFM round-trips bit-exact
    std::vector<uint8_t> valid; // 0 or 1

    DisparityGrid() = default;
    DisparityGrid(int w, int h) : width(w), height(h) {
        require_dims(w, h, "DisparityGrid");
        values.assign(size_t(w) * h, 0.f);
        valid.assign(size_t(w) * h, 0);
    }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    float value(int x, int y) const { return values[size_t(y) * width + x]; }
    bool is_valid(int x, int y) const { return valid[size_t(y) * width + x] != 0; }

    // marks the sample invalid unless it is finite and positive
    void set(int x, int y, float v) {
        size_t i = size_t(y) * width + x;
        bool ok = std::isfinite(v) && v > 0.f;
        values[i] = v;
        valid[i] = ok ? 1 : 0;
    }

    void set_invalid(int x, int y) { valid[size_t(y) * width + x] = 0; }

    size_t valid_count() const {
        size_t n = 0;
        for (uint8_t b : valid) n += (b != 0);
        return n;
    }
};

// Bilinear disparity at a continuous pixel coordinate (integer coordinates
// are pixel centers). Empty unless every stencil pixel is in range and valid,
// so samples never mix surface and hole. Exact wherever disparity is affine
// in pixel coordinates, i.e. on planar surface patches.
inline std::optional<double> sample_disparity(const DisparityGrid& g, double x, double y) {
    double fx = std::floor(x), fy = std::floor(y);
    int x0 = int(fx), y0 = int(fy);
    double tx = x - fx, ty = y - fy;
    int x1 = tx > 0.0 ? x0 + 1 : x0;
    int y1 = ty > 0.0 ? y0 + 1 : y0;
    if (x0 < 0 || y0 < 0 || x1 >= g.width || y1 >= g.height) return std::nullopt;
    if (!g.is_valid(x0, y0) || !g.is_valid(x1, y0) || !g.is_valid(x0, y1) || !g.is_valid(x1, y1))
        return std::nullopt;
    double top = (1.0 - tx) * g.value(x0, y0) + tx * g.value(x1, y0);
    double bot = (1.0 - tx) * g.value(x0, y1) + tx * g.value(x1, y1);
    return (1.0 - ty) * top + ty * bot;
}

// Chebyshev (square structuring element) dilation, separable in two passes.
inline Mask dilate(const Mask& mask, int radius) {
    if (radius < 0) throw std::runtime_error("dilate: radius must be >= 0");
    if (mask.width <= 0 || mask.height <= 0) throw std::runtime_error("dilate: empty mask");
    if (radius == 0) return mask;

    Mask horiz(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool on = false;
            int lo = std::max(0, x - radius), hi = std::min(mask.width - 1, x + radius);
            for (int i = lo; i <= hi && !on; ++i) on = mask.at(i, y);
            horiz.set(x, y, on);
        }
    }
    Mask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        int lo = std::max(0, y - radius), hi = std::min(mask.height - 1, y + radius);
        for (int x = 0; x < mask.width; ++x) {
            bool on = false;
            for (int j = lo; j <= hi && !on; ++j) on = horiz.at(x, j);
            out.set(x, y, on);
        }
    }
    return out;
}

// Keeps pixels under the mask, replaces the rest with fill.
inline Image mask_apply(const Image& image, const Mask& mask,
                        std::array<float, 3> fill = {0.f, 0.f, 0.f}) {
    if (image.width != mask.width || image.height != mask.height)
        throw std::runtime_error("mask_apply: image " + std::to_string(image.width) + "x" +
                                 std::to_string(image.height) + " vs mask " +
                                 std::to_string(mask.width) + "x" + std::to_string(mask.height));
    Image out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (!mask.at(x, y)) out.set_rgb(x, y, fill);
    return out;
}

inline double image_mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_dims(b)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) sum += std::abs(double(a.pixels[i]) - b.pixels[i]);
    return a.pixels.empty() ? 0.0 : sum / double(a.pixels.size());
}

inline Mask image_nonzero_mask(const Image& image) {
    Mask m(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            auto c = image.rgb(x, y);
            m.set(x, y, c[0] != 0.f || c[1] != 0.f || c[2] != 0.f);
        }
    return m;
}

inline double mask_iou(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::runtime_error("mask_iou: dimension mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        bool pa = a.bits[i], pb = b.bits[i];
        inter += (pa && pb);
        uni += (pa || pb);
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

} // namespace declutter
