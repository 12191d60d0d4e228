#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "hwf/checkpoint.hpp"
#include "hwf/metrics.hpp"

namespace hwf {

namespace train_detail {

// Substream tags; combined with (epoch, image, patch) keys they make every
// random draw independent of iteration order.
inline constexpr uint64_t kCropStream = 1;
inline constexpr uint64_t kNoiseStream = 2;
inline constexpr uint64_t kShuffleStream = 3;
inline constexpr uint64_t kValNoiseStream = 4;
inline constexpr uint64_t kEvalNoiseStream = 5;

inline void clamp_to_byte_range(ImageBuffer& img) {
    for (double& v : img.data) v = std::min(255.0, std::max(0.0, v));
}

template <typename T>
void copy_sample_into(Tensor<T>& batch, int64_t sample, const ImageBuffer& img) {
    const int64_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    auto& d = batch.mutable_data();
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                d[((sample * C + c) * H + y) * W + x] =
                    static_cast<T>(img.at(y, x, c)) * static_cast<T>(0x1.0p-8);
}

}  // namespace train_detail

template <typename T>
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg, const std::string& dataset_dir,
                  const std::string& out_checkpoint, const std::string& log_path) {
    using namespace train_detail;
    mcfg.validate();
    tcfg.validate();

    const std::vector<std::string> names = list_pnm_files(dataset_dir);
    if (names.empty()) throw DataError("no PGM/PPM images found in " + dataset_dir);
    std::vector<ImageBuffer> images;
    images.reserve(names.size());
    for (const std::string& name : names) {
        ImageBuffer img = read_image((std::filesystem::path(dataset_dir) / name).string());
        if (img.channels != mcfg.in_channels)
            throw DataError(name + ": has " + std::to_string(img.channels) +
                            " channels, model expects " + std::to_string(mcfg.in_channels));
        if (img.width < tcfg.patch_size || img.height < tcfg.patch_size)
            throw DataError(name + ": smaller than the training patch size");
        images.push_back(std::move(img));
    }

    const std::vector<size_t> val_idx = validation_indices(names, tcfg.val_fraction);
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < names.size(); ++i)
        if (!std::binary_search(val_idx.begin(), val_idx.end(), i)) train_idx.push_back(i);
    if (train_idx.empty()) throw DataError("validation split left no training images");

    ModelWeights<T> weights = make_initialized_weights<T>(mcfg, tcfg.seed);
    weights.set_requires_grad(true);
    OptimState<T> optim = make_optim_state(weights);
    RngStream root(tcfg.seed);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw DataError("cannot open log file: " + log_path);
        log << "epoch,step,lr,loss,val_psnr\n";
    }

    TrainResult res;
    const std::string best_path = out_checkpoint.empty() ? "" : out_checkpoint + ".best";
    res.best_val_psnr = -1;
    int64_t step = 0;
    bool done = false;

    struct PatchRef {
        size_t image;
        int64_t j, y0, x0;
        int aug;
    };

    for (int64_t epoch = 1; epoch <= tcfg.epochs && !done; ++epoch) {
        const double lr = lr_at(epoch, tcfg.base_lr, tcfg.lr_halve_epochs);

        std::vector<PatchRef> patches;
        patches.reserve(train_idx.size() * static_cast<size_t>(tcfg.patches_per_image));
        for (size_t img_i : train_idx) {
            const ImageBuffer& img = images[img_i];
            for (int64_t j = 0; j < tcfg.patches_per_image; ++j) {
                RngStream ps = root.split({kCropStream, static_cast<uint64_t>(epoch),
                                           static_cast<uint64_t>(img_i), static_cast<uint64_t>(j)});
                PatchRef ref;
                ref.image = img_i;
                ref.j = j;
                ref.y0 = static_cast<int64_t>(ps.next_below(img.height - tcfg.patch_size + 1));
                ref.x0 = static_cast<int64_t>(ps.next_below(img.width - tcfg.patch_size + 1));
                ref.aug = tcfg.augmentation ? static_cast<int>(ps.next_below(8)) : 0;
                patches.push_back(ref);
            }
        }
        RngStream shuffle = root.split({kShuffleStream, static_cast<uint64_t>(epoch)});
        for (size_t i = patches.size(); i > 1; --i)
            std::swap(patches[i - 1], patches[shuffle.next_below(i)]);

        double epoch_loss = 0;
        int64_t epoch_steps = 0;
        for (size_t start = 0; start < patches.size() && !done; start += tcfg.batch_size) {
            const int64_t b = std::min<int64_t>(tcfg.batch_size, patches.size() - start);
            Tensor<T> noisy_t(Shape{b, mcfg.in_channels, tcfg.patch_size, tcfg.patch_size});
            Tensor<T> clean_t(Shape{b, mcfg.in_channels, tcfg.patch_size, tcfg.patch_size});
            for (int64_t s = 0; s < b; ++s) {
                const PatchRef& ref = patches[start + s];
                ImageBuffer patch =
                    augment(crop(images[ref.image], ref.y0, ref.x0, tcfg.patch_size), ref.aug);
                copy_sample_into(clean_t, s, patch);
                RngStream ns = root.split({kNoiseStream, static_cast<uint64_t>(epoch),
                                           static_cast<uint64_t>(ref.image),
                                           static_cast<uint64_t>(ref.j)});
                add_awgn_inplace(patch, tcfg.sigma, ns);
                copy_sample_into(noisy_t, s, patch);
            }

            Tape<T> tape;
            double loss_value;
            {
                TapeScope<T> scope(tape);
                Tensor<T> pred = model_forward(noisy_t, weights, mcfg);
                Tensor<T> loss = mse_loss(pred, clean_t, tcfg.loss_norm);
                loss_value = static_cast<double>(loss.item());
                if (!std::isfinite(loss_value))
                    throw NumericError("training diverged: non-finite loss at step " +
                                       std::to_string(step + 1));
                weights.zero_grads();
                tape.backward(loss);
            }
            adam_step(weights, optim, lr, tcfg);

            ++step;
            ++epoch_steps;
            epoch_loss += loss_value;
            res.step_losses.push_back(loss_value);
            if (log) log << epoch << ',' << step << ',' << format_double(lr) << ','
                         << format_double(loss_value) << ",\n";
            if (tcfg.max_steps > 0 && step >= tcfg.max_steps) done = true;
        }
        if (epoch_steps > 0) res.epoch_mean_losses.push_back(epoch_loss / epoch_steps);

        double val_psnr = 0;
        if (!val_idx.empty()) {
            for (size_t vi : val_idx) {
                RngStream ns = root.split({kValNoiseStream, static_cast<uint64_t>(vi)});
                ImageBuffer noisy = add_awgn(images[vi], tcfg.sigma, ns);
                Tensor<T> out = model_forward(image_to_tensor<T>(noisy), weights, mcfg);
                ImageBuffer denoised = tensor_to_image(out);
                clamp_to_byte_range(denoised);
                val_psnr += psnr(denoised, images[vi]);
            }
            val_psnr /= static_cast<double>(val_idx.size());
        }
        res.epoch_val_psnr.push_back(val_psnr);
        if (log) {
            log << epoch << ',' << step << ',' << format_double(lr) << ','
                << format_double(epoch_steps ? epoch_loss / epoch_steps : 0.0) << ','
                << format_double(val_psnr) << '\n';
            log.flush();
        }
        if (!best_path.empty() && (res.best_val_psnr < 0 || val_psnr > res.best_val_psnr)) {
            res.best_val_psnr = val_psnr;
            save_checkpoint(weights, &optim, mcfg, tcfg.to_kv(), best_path);
            res.best_checkpoint_path = best_path;
        }
    }

    res.steps_run = step;
    if (!out_checkpoint.empty()) {
        save_checkpoint(weights, &optim, mcfg, tcfg.to_kv(), out_checkpoint);
        res.checkpoint_path = out_checkpoint;
    }
    return res;
}

}  // namespace hwf
