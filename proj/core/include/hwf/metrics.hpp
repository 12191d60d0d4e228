#pragma once

#include <string>
#include <vector>

#include "hwf/image.hpp"

namespace hwf {

// 10*log10(255^2 / MSE) over all pixels and channels; +infinity when the
// images are identical.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// L=255, averaged over valid window positions. RGB inputs are reduced to
// BT.601 luma first.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct EvalRow {
    std::string name;
    double sigma = 0;
    double psnr_noisy = 0;
    double psnr_denoised = 0;
    double ssim_denoised = 0;
    double millis = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::string model_id;
    int64_t skipped = 0;
    double mean_psnr_noisy = 0;
    double mean_psnr_denoised = 0;
    double mean_ssim_denoised = 0;

    void finalize();  // recomputes the aggregate means from the rows
    std::string to_csv() const;
    std::string to_table() const;
};

}  // namespace hwf
