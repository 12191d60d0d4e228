#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "hwf/train_loop.hpp"

namespace hwf {

// Full-image denoising through overlapping tiles processed independently;
// overlaps are blended by uniform averaging, so an identity model stays the
// identity for any tile/overlap configuration. Border tiles are shifted
// inward to keep every tile full-sized.
template <typename T>
ImageBuffer tile_denoise(const ModelWeights<T>& weights, const ModelConfig& cfg,
                         const ImageBuffer& image, int64_t tile, int64_t overlap) {
    if (tile < 8) throw UsageError("tile_denoise: tile must be >= 8");
    if (overlap < 0 || overlap >= tile)
        throw UsageError("tile_denoise: overlap must lie in [0, tile)");
    if (image.channels != cfg.in_channels)
        throw UsageError("tile_denoise: image channels do not match the model");

    auto positions = [](int64_t extent, int64_t tile_len, int64_t stride) {
        std::vector<int64_t> pos;
        if (tile_len >= extent) {
            pos.push_back(0);
            return pos;
        }
        for (int64_t p = 0;; p += stride) {
            if (p + tile_len >= extent) {
                pos.push_back(extent - tile_len);
                break;
            }
            pos.push_back(p);
        }
        return pos;
    };
    const int64_t stride = tile - overlap;
    const int64_t tile_h = std::min(tile, image.height);
    const int64_t tile_w = std::min(tile, image.width);
    const std::vector<int64_t> ys = positions(image.height, tile_h, stride);
    const std::vector<int64_t> xs = positions(image.width, tile_w, stride);

    std::vector<double> acc(image.data.size(), 0.0);
    std::vector<double> count(image.data.size(), 0.0);
    for (int64_t y0 : ys)
        for (int64_t x0 : xs) {
            ImageBuffer patch = ImageBuffer::make(tile_w, tile_h, image.channels);
            for (int64_t y = 0; y < tile_h; ++y)
                for (int64_t x = 0; x < tile_w; ++x)
                    for (int64_t c = 0; c < image.channels; ++c)
                        patch.at(y, x, c) = image.at(y0 + y, x0 + x, c);
            Tensor<T> out = model_forward(image_to_tensor<T>(patch), weights, cfg);
            const ImageBuffer restored = tensor_to_image(out);
            for (int64_t y = 0; y < tile_h; ++y)
                for (int64_t x = 0; x < tile_w; ++x)
                    for (int64_t c = 0; c < image.channels; ++c) {
                        const size_t at =
                            static_cast<size_t>(((y0 + y) * image.width + (x0 + x)) * image.channels + c);
                        acc[at] += restored.at(y, x, c);
                        count[at] += 1.0;
                    }
        }

    ImageBuffer out = ImageBuffer::make(image.width, image.height, image.channels);
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = acc[i] / count[i];
    return out;
}

// Corrupts every image in the dataset with seeded AWGN, denoises it, and
// reports PSNR/SSIM against the clean original. The noise stream is keyed by
// (image name, sigma), so reports are comparable across models.
template <typename T>
EvalReport evaluate(const ModelWeights<T>& weights, const ModelConfig& cfg,
                    const std::string& dataset_dir, double sigma, uint64_t seed, int64_t tile,
                    int64_t overlap, const std::string& model_id = "") {
    EvalReport report;
    report.model_id = model_id;
    const std::vector<std::string> names = list_pnm_files(dataset_dir);
    if (names.empty()) throw DataError("no PGM/PPM images found in " + dataset_dir);

    uint64_t sigma_key;
    static_assert(sizeof(double) == sizeof(uint64_t));
    std::memcpy(&sigma_key, &sigma, sizeof(sigma_key));

    for (const std::string& name : names) {
        ImageBuffer clean;
        try {
            clean = read_image((std::filesystem::path(dataset_dir) / name).string());
            if (clean.channels != cfg.in_channels)
                throw DataError(name + ": channel count does not match the model");
        } catch (const DataError& e) {
            std::fprintf(stderr, "warning: skipping %s (%s)\n", name.c_str(), e.what());
            ++report.skipped;
            continue;
        }
        RngStream ns =
            RngStream(seed).split({train_detail::kEvalNoiseStream, fnv1a64(name), sigma_key});
        const ImageBuffer noisy = add_awgn(clean, sigma, ns);

        const auto t0 = std::chrono::steady_clock::now();
        ImageBuffer denoised = tile_denoise(weights, cfg, noisy, tile, overlap);
        const auto t1 = std::chrono::steady_clock::now();
        train_detail::clamp_to_byte_range(denoised);

        EvalRow row;
        row.name = name;
        row.sigma = sigma;
        row.psnr_noisy = psnr(noisy, clean);
        row.psnr_denoised = psnr(denoised, clean);
        row.ssim_denoised = ssim(denoised, clean);
        row.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
        report.rows.push_back(std::move(row));
    }
    report.finalize();
    return report;
}

}  // namespace hwf
