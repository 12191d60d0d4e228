#pragma once

#include <string>
#include <vector>

#include "hwf/config_file.hpp"
#include "hwf/image.hpp"
#include "hwf/model.hpp"

namespace hwf {

enum class LossNorm { per_pixel_mean, raw_sum };

// Optimizer hyperparameters, schedule, data pipeline knobs and the RNG seed.
struct TrainConfig {
    double sigma = 25.0;  // AWGN std on the 0..255 scale
    int64_t batch_size = 8;
    int64_t epochs = 28;
    double base_lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    int64_t patch_size = 96;
    int64_t patches_per_image = 48;
    uint64_t seed = 0;
    bool augmentation = true;
    LossNorm loss_norm = LossNorm::per_pixel_mean;
    std::vector<int64_t> lr_halve_epochs = {15, 22, 24, 25, 26, 27, 28};
    int64_t max_steps = 0;        // 0 = run all epochs
    double val_fraction = 0.05;   // held out by sorted-name hash rank

    void validate() const;
    static TrainConfig from_kv(const KvMap& kv);
    KvMap to_kv() const;
};

// Per-parameter Adam moment buffers, aligned with the weight registry order.
template <typename T>
struct OptimState {
    int64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
};

// Base LR halved once at each listed epoch boundary, cumulatively.
double lr_at(int64_t epoch, double base, const std::vector<int64_t>& halve_epochs);
double lr_at(int64_t epoch, double base);  // the paper's epochs {15,22,24,25,26,27,28}

// noisy = clean + N(0, sigma^2) i.i.d. per pixel/channel, unclipped.
void add_awgn_inplace(ImageBuffer& img, double sigma, RngStream& rng);
ImageBuffer add_awgn(const ImageBuffer& clean, double sigma, RngStream rng);

// Deterministic validation split: ceil(fraction*n) images, chosen by ranking
// sorted names on their FNV-1a hash. Returns indices into the sorted list.
std::vector<size_t> validation_indices(const std::vector<std::string>& sorted_names,
                                       double fraction);

// (1/2N) * sum_i ||pred_i - target_i||^2 with the norm taken as a per-pixel
// mean (per_pixel_mean) or a raw sum (raw_sum) over each sample.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target,
                   LossNorm norm = LossNorm::per_pixel_mean) {
    if (pred.shape() != target.shape())
        throw UsageError("mse_loss: prediction and target shapes differ");
    if (pred.rank() < 1) throw UsageError("mse_loss: rank >= 1 required");
    const int64_t n = pred.dim(0);
    Tensor<T> d = sub(pred, target);
    Tensor<T> total = sum(mul(d, d));
    const int64_t per_sample = norm == LossNorm::per_pixel_mean ? pred.numel() / n : 1;
    return scale(total, static_cast<T>(1.0 / (2.0 * static_cast<double>(n) *
                                              static_cast<double>(per_sample))));
}

template <typename T>
OptimState<T> make_optim_state(ModelWeights<T>& weights) {
    OptimState<T> st;
    for (auto& [name, t] : weights.registry()) {
        st.m.emplace_back(t->numel(), T(0));
        st.v.emplace_back(t->numel(), T(0));
    }
    return st;
}

// Bias-corrected Adam update over every registered parameter. Rejects
// non-finite gradients before mutating anything.
template <typename T>
void adam_step(ModelWeights<T>& weights, OptimState<T>& state, double lr, const TrainConfig& cfg) {
    auto reg = weights.registry();
    if (state.m.size() != reg.size() || state.v.size() != reg.size())
        throw UsageError("adam_step: optimizer state does not match the registry");
    for (auto& [name, t] : reg) {
        if (!t->grad()) throw UsageError("adam_step: parameter " + name + " has no gradient");
        if (!all_finite(*t->grad()))
            throw NumericError("adam_step: non-finite gradient in " + name);
    }
    const int64_t t_step = state.step + 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_step));
    for (size_t i = 0; i < reg.size(); ++i) {
        auto& p = reg[i].second->mutable_data();
        const auto& g = *reg[i].second->grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
            const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            p[j] -= static_cast<T>(lr * (mj / corr1) / (std::sqrt(vj / corr2) + cfg.adam_eps));
        }
    }
    state.step = t_step;
}

// Unit-scale planar tensor [1,C,H,W] from a 0..255 interleaved buffer.
// The scale factor is 1/256 — a power of two — so the conversion round-trips
// bitwise in both precisions and identity models stay exact end to end.
template <typename T>
Tensor<T> image_to_tensor(const ImageBuffer& img) {
    Tensor<T> t(Shape{1, img.channels, img.height, img.width});
    auto& d = t.mutable_data();
    for (int64_t c = 0; c < img.channels; ++c)
        for (int64_t y = 0; y < img.height; ++y)
            for (int64_t x = 0; x < img.width; ++x)
                d[(c * img.height + y) * img.width + x] =
                    static_cast<T>(img.at(y, x, c)) * static_cast<T>(0x1.0p-8);
    return t;
}

template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t) {
    if (t.rank() != 4 || t.dim(0) != 1) throw UsageError("tensor_to_image: expects [1,C,H,W]");
    const int64_t C = t.dim(1), H = t.dim(2), W = t.dim(3);
    ImageBuffer img = ImageBuffer::make(W, H, C);
    const auto& d = t.data();
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                img.at(y, x, c) = static_cast<double>(d[(c * H + y) * W + x]) * 256.0;
    return img;
}

struct TrainResult {
    int64_t steps_run = 0;
    std::vector<double> step_losses;
    std::vector<double> epoch_mean_losses;
    std::vector<double> epoch_val_psnr;
    double best_val_psnr = 0;
    std::string checkpoint_path;
    std::string best_checkpoint_path;
};

template <typename T>
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg, const std::string& dataset_dir,
                  const std::string& out_checkpoint, const std::string& log_path);

}  // namespace hwf

#include "hwf/train_loop.hpp"
