#pragma once

// Cross-layer disparity alignment. Monocular disparity is only defined up to
// an unknown per-image remapping, so each layer after the first gets a small
// coordinate-based network that predicts a per-pixel correction:
//
//     refined_n(x, y) = D_n(x, y) + f_n(nx, ny, D_n(x, y), R, G, B)
//
// The first layer is the fixed reference and is passed through untouched.
// Training minimizes the summed absolute disparity difference between
// consecutive layers on pixels outside the mask of the object removed between
// them (those pixels image the same surface, so their true disparity agrees).
// The networks are 3-layer perceptrons (SiLU) with a zero-initialized output
// layer, so refinement starts exactly at the identity; optimization is Adam
// on a smoothed |.| (sqrt(r^2 + eps^2)) while reported losses use exact |.|.

#include "rng.hpp"
#include "raster.hpp"

namespace declutter {

struct RefineConfig {
    int hidden_width = 16;
    double learning_rate = 5e-3;
    // cosine decay from learning_rate down to learning_rate * final_lr_fraction
    double final_lr_fraction = 0.02;
    int steps = 2000;
    int batch_size = 512;
    uint64_t seed = 0;

    void validate() const {
        if (hidden_width < 1) throw std::runtime_error("RefineConfig: hidden_width must be >= 1");
        if (learning_rate <= 0) throw std::runtime_error("RefineConfig: learning_rate must be > 0");
        if (final_lr_fraction <= 0 || final_lr_fraction > 1.0)
            throw std::runtime_error("RefineConfig: final_lr_fraction must be in (0, 1]");
        if (steps < 0) throw std::runtime_error("RefineConfig: steps must be >= 0");
        if (batch_size < 1) throw std::runtime_error("RefineConfig: batch_size must be >= 1");
    }
};

struct RefineResult {
    std::vector<DisparityGrid> disparities;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps = 0;
};

// Exact consistency loss: sum over consecutive layer pairs of |D_n - D_n+1|
// on pixels valid in both grids and outside mask n.
inline double consistency_loss(const std::vector<DisparityGrid>& grids,
                               const std::vector<Mask>& masks) {
    if (grids.empty()) throw std::runtime_error("consistency_loss: no disparity grids");
    if (masks.size() + 1 != grids.size())
        throw std::runtime_error("consistency_loss: need one mask per consecutive pair");
    double total = 0.0;
    for (size_t n = 0; n + 1 < grids.size(); ++n) {
        const DisparityGrid& a = grids[n];
        const DisparityGrid& b = grids[n + 1];
        const Mask& m = masks[n];
        if (a.width != b.width || a.height != b.height || m.width != a.width ||
            m.height != a.height)
            throw std::runtime_error("consistency_loss: dimension mismatch at pair " +
                                     std::to_string(n));
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                if (m.at(x, y) || !a.is_valid(x, y) || !b.is_valid(x, y)) continue;
                total += std::abs(double(a.value(x, y)) - double(b.value(x, y)));
            }
    }
    return total;
}

namespace detail {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

} // namespace detail

// Residual perceptron 6 -> H -> H -> 1 with SiLU activations. Parameters live
// in one flat vector [W1, b1, W2, b2, w3, b3]; the output layer starts at
// zero so the network is the zero function at initialization.
struct RefinementNet {
    int hidden = 0;
    std::vector<double> params;

    static constexpr int kInputs = 6;

    explicit RefinementNet(int hidden_width = 0) : hidden(hidden_width) {
        if (hidden > 0) params.assign(param_count(hidden), 0.0);
    }

    static size_t param_count(int h) {
        return size_t(h) * kInputs + h + size_t(h) * h + h + h + 1;
    }
    size_t size() const { return params.size(); }

    // offsets into the flat vector
    size_t off_w1() const { return 0; }
    size_t off_b1() const { return size_t(hidden) * kInputs; }
    size_t off_w2() const { return off_b1() + hidden; }
    size_t off_b2() const { return off_w2() + size_t(hidden) * hidden; }
    size_t off_w3() const { return off_b2() + hidden; }
    size_t off_b3() const { return off_w3() + hidden; }

    // Glorot-uniform hidden weights, zero biases, zero output layer
    void init(SeededRng& rng) {
        double lim1 = std::sqrt(6.0 / (kInputs + hidden));
        double lim2 = std::sqrt(6.0 / (hidden + hidden));
        double* w1 = params.data() + off_w1();
        for (int i = 0; i < hidden * kInputs; ++i) w1[i] = rng.uniform(-lim1, lim1);
        double* w2 = params.data() + off_w2();
        for (int i = 0; i < hidden * hidden; ++i) w2[i] = rng.uniform(-lim2, lim2);
        // b1, b2, w3, b3 stay zero
    }

    struct Trace {
        std::vector<double> in;  // 6
        std::vector<double> z1, h1, z2, h2; // hidden each
    };

    double forward(const double* in, Trace* trace = nullptr) const {
        const double* w1 = params.data() + off_w1();
        const double* b1 = params.data() + off_b1();
        const double* w2 = params.data() + off_w2();
        const double* b2 = params.data() + off_b2();
        const double* w3 = params.data() + off_w3();
        double b3 = params[off_b3()];

        std::vector<double> z1(hidden), h1(hidden), z2(hidden), h2(hidden);
        for (int j = 0; j < hidden; ++j) {
            double acc = b1[j];
            const double* row = w1 + size_t(j) * kInputs;
            for (int i = 0; i < kInputs; ++i) acc += row[i] * in[i];
            z1[j] = acc;
            h1[j] = detail::silu(acc);
        }
        for (int k = 0; k < hidden; ++k) {
            double acc = b2[k];
            const double* row = w2 + size_t(k) * hidden;
            for (int j = 0; j < hidden; ++j) acc += row[j] * h1[j];
            z2[k] = acc;
            h2[k] = detail::silu(acc);
        }
        double out = b3;
        for (int k = 0; k < hidden; ++k) out += w3[k] * h2[k];
        if (trace) {
            trace->in.assign(in, in + kInputs);
            trace->z1 = std::move(z1);
            trace->h1 = std::move(h1);
            trace->z2 = std::move(z2);
            trace->h2 = std::move(h2);
        }
        return out;
    }

    // accumulates d(out)/d(params) * upstream into grad (same layout as params)
    void backward(const Trace& t, double upstream, double* grad) const {
        const double* w2 = params.data() + off_w2();
        const double* w3 = params.data() + off_w3();
        double* g_w1 = grad + off_w1();
        double* g_b1 = grad + off_b1();
        double* g_w2 = grad + off_w2();
        double* g_b2 = grad + off_b2();
        double* g_w3 = grad + off_w3();

        std::vector<double> d_h1(hidden, 0.0);
        for (int k = 0; k < hidden; ++k) {
            g_w3[k] += upstream * t.h2[k];
            double d_z2 = upstream * w3[k] * detail::silu_grad(t.z2[k]);
            g_b2[k] += d_z2;
            double* row = g_w2 + size_t(k) * hidden;
            const double* w2_row = w2 + size_t(k) * hidden;
            for (int j = 0; j < hidden; ++j) {
                row[j] += d_z2 * t.h1[j];
                d_h1[j] += d_z2 * w2_row[j];
            }
        }
        grad[off_b3()] += upstream;
        for (int j = 0; j < hidden; ++j) {
            double d_z1 = d_h1[j] * detail::silu_grad(t.z1[j]);
            g_b1[j] += d_z1;
            double* row = g_w1 + size_t(j) * kInputs;
            for (int i = 0; i < kInputs; ++i) row[i] += d_z1 * t.in[i];
        }
    }
};

// Training engine for one layer stack. Exposed so tests can evaluate the
// batch loss and its gradient at arbitrary parameter vectors.
class DepthRefiner {
public:
    static constexpr double kSmoothingEps = 1e-6;

    DepthRefiner(const std::vector<Image>& images, const std::vector<Mask>& masks,
                 const std::vector<DisparityGrid>& disparities, RefineConfig cfg)
        : images_(images), masks_(masks), grids_(disparities), cfg_(cfg) {
        cfg_.validate();
        if (grids_.empty()) throw std::runtime_error("refine: empty layer list");
        if (images_.size() != grids_.size() || masks_.size() + 1 != grids_.size())
            throw std::runtime_error("refine: expected N images, N disparities, N-1 masks");
        width_ = grids_[0].width;
        height_ = grids_[0].height;
        for (size_t i = 0; i < grids_.size(); ++i)
            if (grids_[i].width != width_ || grids_[i].height != height_ ||
                images_[i].width != width_ || images_[i].height != height_)
                throw std::runtime_error("refine: layer " + std::to_string(i) +
                                         " dimensions do not match layer 0");
        for (const Mask& m : masks_)
            if (m.width != width_ || m.height != height_)
                throw std::runtime_error("refine: mask dimensions do not match layers");

        size_t n_layers = grids_.size();
        SeededRng rng(cfg_.seed);
        nets_.reserve(n_layers);
        nets_.emplace_back(0); // layer 0 is the fixed reference, no net
        for (size_t k = 1; k < n_layers; ++k) {
            nets_.emplace_back(cfg_.hidden_width);
            nets_.back().init(rng);
        }

        pools_.resize(n_layers - 1);
        for (size_t n = 0; n + 1 < n_layers; ++n)
            for (int y = 0; y < height_; ++y)
                for (int x = 0; x < width_; ++x) {
                    if (masks_[n].at(x, y)) continue;
                    if (!grids_[n].is_valid(x, y) || !grids_[n + 1].is_valid(x, y)) continue;
                    pools_[n].push_back(y * width_ + x);
                }
    }

    struct Sample {
        int pair;  // consecutive layer pair index
        int pixel; // linear pixel index
    };

    size_t parameter_count() const {
        size_t n = 0;
        for (const RefinementNet& net : nets_) n += net.size();
        return n;
    }

    std::vector<double> get_parameters() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (const RefinementNet& net : nets_)
            out.insert(out.end(), net.params.begin(), net.params.end());
        return out;
    }

    void set_parameters(const std::vector<double>& flat) {
        if (flat.size() != parameter_count())
            throw std::runtime_error("refine: parameter vector size mismatch");
        size_t off = 0;
        for (RefinementNet& net : nets_) {
            std::copy(flat.begin() + off, flat.begin() + off + net.size(), net.params.begin());
            off += net.size();
        }
    }

    const std::vector<std::vector<int>>& pixel_pools() const { return pools_; }

    std::vector<Sample> draw_batch(SeededRng& rng) const {
        std::vector<Sample> batch;
        for (size_t n = 0; n < pools_.size(); ++n) {
            if (pools_[n].empty()) continue;
            for (int i = 0; i < cfg_.batch_size; ++i)
                batch.push_back({int(n), pools_[n][rng.uniform_int(0, int(pools_[n].size()) - 1)]});
        }
        return batch;
    }

    // mean smoothed |refined_n - refined_n+1| over the batch
    double batch_loss(const std::vector<Sample>& batch) const {
        return loss_impl(batch, nullptr);
    }

    double batch_loss_and_gradient(const std::vector<Sample>& batch,
                                   std::vector<double>& grad) const {
        grad.assign(parameter_count(), 0.0);
        return loss_impl(batch, grad.data());
    }

    RefineResult run() {
        RefineResult res;
        res.initial_loss = consistency_loss(grids_, masks_);

        size_t eligible = 0;
        for (const auto& p : pools_) eligible += p.size();
        if (eligible > 0 && cfg_.steps > 0) {
            SeededRng rng = SeededRng(cfg_.seed).fork(1);
            size_t np = parameter_count();
            std::vector<double> grad, m(np, 0.0), v(np, 0.0), params = get_parameters();
            constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
            double ema = 0.0, ema_initial = 0.0;
            for (int step = 0; step < cfg_.steps; ++step) {
                std::vector<Sample> batch = draw_batch(rng);
                double loss = batch_loss_and_gradient(batch, grad);
                if (step == 0) {
                    ema = ema_initial = loss;
                } else {
                    ema = 0.9 * ema + 0.1 * loss;
                    // divergence tripwire: optimization must never blow up
                    if (ema > 10.0 * ema_initial + 1e-12)
                        throw std::runtime_error(
                            "refine: smoothed loss exceeded 10x its initial value at step " +
                            std::to_string(step));
                }
                double bc1 = 1.0 - std::pow(beta1, step + 1);
                double bc2 = 1.0 - std::pow(beta2, step + 1);
                constexpr double pi = 3.1415926535897932384626433832795;
                double progress = cfg_.steps > 1 ? double(step) / double(cfg_.steps - 1) : 0.0;
                double lr = cfg_.learning_rate *
                            (cfg_.final_lr_fraction +
                             (1.0 - cfg_.final_lr_fraction) * 0.5 * (1.0 + std::cos(pi * progress)));
                for (size_t i = 0; i < np; ++i) {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / bc1) /
                                 (std::sqrt(v[i] / bc2) + adam_eps);
                }
                set_parameters(params);
                res.steps += 1;
            }
        }

        res.disparities = refined_grids();
        res.final_loss = consistency_loss(res.disparities, masks_);
        return res;
    }

    // applies the current networks to every valid pixel
    std::vector<DisparityGrid> refined_grids() const {
        std::vector<DisparityGrid> out;
        out.reserve(grids_.size());
        out.push_back(grids_[0]); // bit-exact pass-through of the reference
        double feat[RefinementNet::kInputs];
        for (size_t k = 1; k < grids_.size(); ++k) {
            DisparityGrid g = grids_[k];
            for (int y = 0; y < height_; ++y)
                for (int x = 0; x < width_; ++x) {
                    if (!grids_[k].is_valid(x, y)) continue;
                    features(int(k), y * width_ + x, feat);
                    double refined = double(grids_[k].value(x, y)) + nets_[k].forward(feat);
                    g.set(x, y, float(refined));
                }
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    void features(int layer, int pixel, double* out) const {
        int x = pixel % width_, y = pixel / width_;
        out[0] = 2.0 * (x + 0.5) / width_ - 1.0;
        out[1] = 2.0 * (y + 0.5) / height_ - 1.0;
        out[2] = grids_[layer].values[size_t(pixel)];
        const float* px = images_[layer].pixels.data() + size_t(pixel) * 3;
        out[3] = px[0];
        out[4] = px[1];
        out[5] = px[2];
    }

    double loss_impl(const std::vector<Sample>& batch, double* grad) const {
        if (batch.empty()) return 0.0;
        size_t grad_off_next = 0; // offset of net k in the flat vector
        std::vector<size_t> offsets(nets_.size());
        for (size_t k = 0; k < nets_.size(); ++k) {
            offsets[k] = grad_off_next;
            grad_off_next += nets_[k].size();
        }

        double total = 0.0;
        double upstream_scale = 1.0 / double(batch.size());
        double feat[RefinementNet::kInputs];
        RefinementNet::Trace trace_a, trace_b;
        for (const Sample& s : batch) {
            int n = s.pair;
            if (n < 0 || n + 1 >= int(grids_.size()))
                throw std::runtime_error("refine: sample pair index out of range");
            int x = s.pixel % width_, y = s.pixel / width_;
            if (!grids_[n].is_valid(x, y) || !grids_[n + 1].is_valid(x, y)) continue;

            double a = grids_[n].values[size_t(s.pixel)];
            if (n > 0) {
                features(n, s.pixel, feat);
                a += nets_[n].forward(feat, grad ? &trace_a : nullptr);
            }
            features(n + 1, s.pixel, feat);
            double b = double(grids_[n + 1].values[size_t(s.pixel)]) +
                       nets_[n + 1].forward(feat, grad ? &trace_b : nullptr);

            double r = a - b;
            double phi = std::sqrt(r * r + kSmoothingEps * kSmoothingEps);
            total += phi;
            if (grad) {
                double d_r = (r / phi) * upstream_scale;
                if (n > 0) nets_[n].backward(trace_a, d_r, grad + offsets[n]);
                nets_[n + 1].backward(trace_b, -d_r, grad + offsets[n + 1]);
            }
        }
        return total * upstream_scale;
    }

    std::vector<Image> images_;
    std::vector<Mask> masks_;
    std::vector<DisparityGrid> grids_;
    RefineConfig cfg_;
    int width_ = 0, height_ = 0;
    std::vector<RefinementNet> nets_; // index 0 unused
    std::vector<std::vector<int>> pools_;
};

inline RefineResult refine_disparities(const std::vector<Image>& images,
                                       const std::vector<Mask>& masks,
                                       const std::vector<DisparityGrid>& disparities,
                                       const RefineConfig& cfg) {
    if (disparities.size() < 2) {
        // nothing to align against; pass layers through
        RefineResult res;
        res.disparities = disparities;
        if (disparities.empty()) throw std::runtime_error("refine: empty layer list");
        return res;
    }
    DepthRefiner refiner(images, masks, disparities, cfg);
    return refiner.run();
}

} // namespace declutter
