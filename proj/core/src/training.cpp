#include "hwf/training.hpp"

#include <algorithm>

namespace hwf {

void TrainConfig::validate() const {
    if (sigma < 0) throw ConfigError("train: sigma must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(base_lr > 0)) throw ConfigError("train: lr must be positive");
    if (patch_size < 8) throw ConfigError("train: patch_size must be >= 8");
    if (patches_per_image < 1) throw ConfigError("train: patches_per_image must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
        throw ConfigError("train: betas must lie in [0,1)");
    if (!(adam_eps > 0)) throw ConfigError("train: adam_eps must be positive");
    if (!(val_fraction >= 0 && val_fraction < 1))
        throw ConfigError("train: val_fraction must lie in [0,1)");
    for (int64_t e : lr_halve_epochs)
        if (e < 1) throw ConfigError("train: halve epochs must be >= 1");
}

TrainConfig TrainConfig::from_kv(const KvMap& kv) {
    TrainConfig def;
    TrainConfig cfg;
    cfg.sigma = kv_double_or(kv, "train.sigma", def.sigma);
    cfg.batch_size = kv_int_or(kv, "train.batch_size", def.batch_size);
    cfg.epochs = kv_int_or(kv, "train.epochs", def.epochs);
    cfg.base_lr = kv_double_or(kv, "train.lr", def.base_lr);
    cfg.beta1 = kv_double_or(kv, "train.beta1", def.beta1);
    cfg.beta2 = kv_double_or(kv, "train.beta2", def.beta2);
    cfg.adam_eps = kv_double_or(kv, "train.adam_eps", def.adam_eps);
    cfg.patch_size = kv_int_or(kv, "train.patch_size", def.patch_size);
    cfg.patches_per_image = kv_int_or(kv, "train.patches_per_image", def.patches_per_image);
    cfg.seed = static_cast<uint64_t>(kv_int_or(kv, "train.seed", 0));
    cfg.augmentation = kv_bool_or(kv, "train.augmentation", def.augmentation);
    const std::string norm = kv_str_or(kv, "train.loss_norm", "per_pixel_mean");
    if (norm == "per_pixel_mean")
        cfg.loss_norm = LossNorm::per_pixel_mean;
    else if (norm == "raw_sum")
        cfg.loss_norm = LossNorm::raw_sum;
    else
        throw ConfigError("train.loss_norm must be 'per_pixel_mean' or 'raw_sum'");
    if (kv.count("train.lr_halve_epochs")) {
        cfg.lr_halve_epochs.clear();
        std::string s = kv.at("train.lr_halve_epochs");
        size_t pos = 0;
        while (pos < s.size()) {
            size_t comma = s.find(',', pos);
            if (comma == std::string::npos) comma = s.size();
            cfg.lr_halve_epochs.push_back(std::stoll(s.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    cfg.max_steps = kv_int_or(kv, "train.max_steps", def.max_steps);
    cfg.val_fraction = kv_double_or(kv, "train.val_fraction", def.val_fraction);
    cfg.validate();
    return cfg;
}

KvMap TrainConfig::to_kv() const {
    KvMap kv;
    kv["train.sigma"] = format_double(sigma);
    kv["train.batch_size"] = std::to_string(batch_size);
    kv["train.epochs"] = std::to_string(epochs);
    kv["train.lr"] = format_double(base_lr);
    kv["train.beta1"] = format_double(beta1);
    kv["train.beta2"] = format_double(beta2);
    kv["train.adam_eps"] = format_double(adam_eps);
    kv["train.patch_size"] = std::to_string(patch_size);
    kv["train.patches_per_image"] = std::to_string(patches_per_image);
    kv["train.seed"] = std::to_string(seed);
    kv["train.augmentation"] = augmentation ? "1" : "0";
    kv["train.loss_norm"] = loss_norm == LossNorm::per_pixel_mean ? "per_pixel_mean" : "raw_sum";
    std::string epochs_str;
    for (size_t i = 0; i < lr_halve_epochs.size(); ++i) {
        if (i) epochs_str += ',';
        epochs_str += std::to_string(lr_halve_epochs[i]);
    }
    kv["train.lr_halve_epochs"] = epochs_str;
    kv["train.max_steps"] = std::to_string(max_steps);
    kv["train.val_fraction"] = format_double(val_fraction);
    return kv;
}

double lr_at(int64_t epoch, double base, const std::vector<int64_t>& halve_epochs) {
    if (epoch < 1) throw UsageError("lr_at: epochs start at 1");
    double lr = base;
    for (int64_t h : halve_epochs)
        if (epoch >= h) lr *= 0.5;
    return lr;
}

double lr_at(int64_t epoch, double base) {
    static const std::vector<int64_t> paper_epochs = {15, 22, 24, 25, 26, 27, 28};
    return lr_at(epoch, base, paper_epochs);
}

void add_awgn_inplace(ImageBuffer& img, double sigma, RngStream& rng) {
    if (sigma < 0) throw ConfigError("add_awgn: sigma must be >= 0");
    if (sigma == 0) return;
    for (double& v : img.data) v += sigma * rng.next_gaussian();
}

ImageBuffer add_awgn(const ImageBuffer& clean, double sigma, RngStream rng) {
    ImageBuffer noisy = clean;
    add_awgn_inplace(noisy, sigma, rng);
    return noisy;
}

std::vector<size_t> validation_indices(const std::vector<std::string>& sorted_names,
                                       double fraction) {
    const size_t n = sorted_names.size();
    if (n == 0 || fraction <= 0) return {};
    const size_t take = std::min<size_t>(
        n - 1, static_cast<size_t>(std::ceil(fraction * static_cast<double>(n))));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const uint64_t ha = fnv1a64(sorted_names[a]), hb = fnv1a64(sorted_names[b]);
        return ha != hb ? ha < hb : sorted_names[a] < sorted_names[b];
    });
    std::vector<size_t> val(order.begin(), order.begin() + static_cast<long>(take));
    std::sort(val.begin(), val.end());
    return val;
}

}  // namespace hwf
