#pragma once

// File I/O for the raster types.
//
//  PNG  8-bit RGB, via libpng. Alpha is dropped on load, gray is expanded.
//       Decode failures report the byte offset reached in the stream.
//  PFM  grayscale "Pf", little-endian (scale -1.0), rows bottom-up.
//       Non-positive or non-finite samples load as invalid; invalid samples
//       save as 0.0.
//
// Masks travel as PNGs where any nonzero channel byte means true.

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <png.h>

#include "raster.hpp"

namespace declutter {

struct PngReadState {
    const uint8_t* data;
    size_t size;
    size_t pos;
    bool truncated = false;
};

namespace detail {

inline void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + count > st->size) {
        st->truncated = true;
        png_error(png, "unexpected end of stream");
    }
    std::memcpy(out, st->data + st->pos, count);
    st->pos += count;
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

// decodes to tightly packed 8-bit RGB
inline void decode_png_rgb8(const std::string& path, std::vector<uint8_t>& rgb, int& width,
                            int& height) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    PngReadState state{bytes.data(), bytes.size(), 0};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }

    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        size_t offset = state.pos;
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG decode error in " + path + " at byte " +
                                 std::to_string(offset));
    }

    png_set_read_fn(png, &state, detail::png_mem_read);
    png_read_info(png, info);

    width = int(png_get_image_width(png, info));
    height = int(png_get_image_height(png, info));
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    require_dims(width, height, "PNG");
    rgb.assign(size_t(width) * height * 3, 0);
    row_ptrs.resize(height);
    for (int y = 0; y < height; ++y) row_ptrs[y] = rgb.data() + size_t(y) * width * 3;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

} // namespace detail

inline Image load_image_png(const std::string& path) {
    std::vector<uint8_t> rgb;
    int w = 0, h = 0;
    detail::decode_png_rgb8(path, rgb, w, h);
    Image img(w, h);
    for (size_t i = 0; i < rgb.size(); ++i) img.pixels[i] = float(rgb[i]) / 255.f;
    return img;
}

inline Mask load_mask_png(const std::string& path) {
    std::vector<uint8_t> rgb;
    int w = 0, h = 0;
    detail::decode_png_rgb8(path, rgb, w, h);
    Mask m(w, h);
    for (size_t i = 0; i < m.bits.size(); ++i) {
        size_t j = i * 3;
        m.bits[i] = (rgb[j] | rgb[j + 1] | rgb[j + 2]) ? 1 : 0;
    }
    return m;
}

inline void save_image_png(const Image& image, const std::string& path) {
    require_dims(image.width, image.height, "PNG");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("libpng init failed");
    }
    std::vector<uint8_t> rgb(size_t(image.width) * image.height * 3);
    std::vector<png_bytep> row_ptrs(image.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("PNG encode error for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    for (size_t i = 0; i < rgb.size(); ++i) {
        float v = std::clamp(image.pixels[i], 0.f, 1.f);
        rgb[i] = uint8_t(std::lround(v * 255.f));
    }
    for (int y = 0; y < image.height; ++y)
        row_ptrs[y] = rgb.data() + size_t(y) * image.width * 3;
    png_set_rows(png, info, row_ptrs.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline void save_mask_png(const Mask& mask, const std::string& path) {
    Image img(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) img.set_rgb(x, y, {1.f, 1.f, 1.f});
    save_image_png(img, path);
}

// ---------------------------------------------------------------- PFM ----

inline void save_disparity_pfm(const DisparityGrid& grid, const std::string& path) {
    require_dims(grid.width, grid.height, "PFM");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path);
    std::fprintf(fp, "Pf\n%d %d\n-1.0\n", grid.width, grid.height);
    // bottom row first, little-endian floats (we only target LE hosts)
    static_assert(sizeof(float) == 4);
    for (int y = grid.height - 1; y >= 0; --y) {
        std::vector<float> row(grid.width);
        for (int x = 0; x < grid.width; ++x)
            row[x] = grid.is_valid(x, y) ? grid.value(x, y) : 0.f;
        if (std::fwrite(row.data(), 4, row.size(), fp) != row.size()) {
            std::fclose(fp);
            throw std::runtime_error("short write to " + path);
        }
    }
    std::fclose(fp);
}

inline DisparityGrid load_disparity_pfm(const std::string& path) {
    std::vector<uint8_t> bytes = detail::read_file_bytes(path);
    size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        size_t start = pos;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
        if (start == pos) throw std::runtime_error("PFM header truncated in " + path);
        return std::string(bytes.begin() + start, bytes.begin() + pos);
    };

    std::string magic = next_token();
    if (magic == "PF") throw std::runtime_error(path + ": color PFM not supported, expected Pf");
    if (magic != "Pf") throw std::runtime_error(path + ": not a PFM file (magic '" + magic + "')");
    int w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        scale = std::stod(next_token());
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed PFM header");
    }
    require_dims(w, h, "PFM");
    if (scale == 0.0) throw std::runtime_error(path + ": PFM scale must be nonzero");
    bool little_endian = scale < 0.0;
    if (pos >= bytes.size()) throw std::runtime_error(path + ": PFM header truncated");
    ++pos; // single whitespace byte after the scale line

    size_t need = size_t(w) * h * 4;
    if (bytes.size() - pos < need)
        throw std::runtime_error(path + ": PFM payload truncated (" +
                                 std::to_string(bytes.size() - pos) + " of " +
                                 std::to_string(need) + " bytes)");

    DisparityGrid grid(w, h);
    for (int row = 0; row < h; ++row) {
        int y = h - 1 - row; // stored bottom-up
        for (int x = 0; x < w; ++x) {
            uint8_t b[4];
            std::memcpy(b, bytes.data() + pos, 4);
            pos += 4;
            if (!little_endian) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
            float v;
            std::memcpy(&v, b, 4);
            grid.set(x, y, v);
        }
    }
    return grid;
}

} // namespace declutter
