#include "hwf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hwf {

namespace {

void check_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw UsageError(std::string(op) + ": image dimensions differ");
}

std::vector<double> to_luma(const ImageBuffer& img) {
    std::vector<double> out(static_cast<size_t>(img.pixels()));
    if (img.channels == 1) {
        out.assign(img.data.begin(), img.data.end());
    } else {
        for (int64_t i = 0; i < img.pixels(); ++i)
            out[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                     0.114 * img.data[i * 3 + 2];
    }
    return out;
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

const std::vector<double>& ssim_kernel() {
    static const std::vector<double> kernel = [] {
        std::vector<double> k(kSsimWindow * kSsimWindow);
        const int half = kSsimWindow / 2;
        double total = 0;
        for (int y = 0; y < kSsimWindow; ++y)
            for (int x = 0; x < kSsimWindow; ++x) {
                const double dy = y - half, dx = x - half;
                k[y * kSsimWindow + x] = std::exp(-(dy * dy + dx * dx) / (2 * kSsimSigma * kSsimSigma));
                total += k[y * kSsimWindow + x];
            }
        for (double& v : k) v /= total;
        return k;
    }();
    return kernel;
}

std::string fmt(double v, int prec) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_shape(a, b, "psnr");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_same_shape(a, b, "ssim");
    if (a.width < kSsimWindow || a.height < kSsimWindow)
        throw UsageError("ssim: image smaller than the 11x11 window");
    const std::vector<double> xa = to_luma(a);
    const std::vector<double> xb = to_luma(b);
    const std::vector<double>& k = ssim_kernel();

    constexpr double kL = 255.0;
    constexpr double c1 = (0.01 * kL) * (0.01 * kL);
    constexpr double c2 = (0.03 * kL) * (0.03 * kL);

    const int64_t W = a.width, H = a.height;
    double total = 0;
    int64_t count = 0;
    for (int64_t y = 0; y + kSsimWindow <= H; ++y) {
        for (int64_t x = 0; x + kSsimWindow <= W; ++x) {
            double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
            for (int wy = 0; wy < kSsimWindow; ++wy)
                for (int wx = 0; wx < kSsimWindow; ++wx) {
                    const double wgt = k[wy * kSsimWindow + wx];
                    const double pa = xa[(y + wy) * W + (x + wx)];
                    const double pb = xb[(y + wy) * W + (x + wx)];
                    ma += wgt * pa;
                    mb += wgt * pb;
                    va += wgt * pa * pa;
                    vb += wgt * pb * pb;
                    cov += wgt * pa * pb;
                }
            va -= ma * ma;
            vb -= mb * mb;
            cov -= ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

void EvalReport::finalize() {
    mean_psnr_noisy = mean_psnr_denoised = mean_ssim_denoised = 0;
    if (rows.empty()) return;
    for (const EvalRow& r : rows) {
        mean_psnr_noisy += r.psnr_noisy;
        mean_psnr_denoised += r.psnr_denoised;
        mean_ssim_denoised += r.ssim_denoised;
    }
    const double n = static_cast<double>(rows.size());
    mean_psnr_noisy /= n;
    mean_psnr_denoised /= n;
    mean_ssim_denoised /= n;
}

std::string EvalReport::to_csv() const {
    std::string out = "name,sigma,psnr_noisy,psnr_denoised,ssim_denoised,millis\n";
    for (const EvalRow& r : rows)
        out += r.name + "," + fmt(r.sigma, 2) + "," + fmt(r.psnr_noisy, 4) + "," +
               fmt(r.psnr_denoised, 4) + "," + fmt(r.ssim_denoised, 6) + "," + fmt(r.millis, 2) +
               "\n";
    out += "aggregate,," + fmt(mean_psnr_noisy, 4) + "," + fmt(mean_psnr_denoised, 4) + "," +
           fmt(mean_ssim_denoised, 6) + ",\n";
    return out;
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-28s %8s %12s %14s %14s %10s\n", "image", "sigma",
                  "psnr_noisy", "psnr_denoised", "ssim_denoised", "ms");
    out << line;
    for (const EvalRow& r : rows) {
        std::snprintf(line, sizeof(line), "%-28s %8.2f %12s %14s %14s %10.1f\n", r.name.c_str(),
                      r.sigma, fmt(r.psnr_noisy, 3).c_str(), fmt(r.psnr_denoised, 3).c_str(),
                      fmt(r.ssim_denoised, 5).c_str(), r.millis);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-28s %8s %12s %14s %14s %10s\n", "aggregate", "-",
                  fmt(mean_psnr_noisy, 3).c_str(), fmt(mean_psnr_denoised, 3).c_str(),
                  fmt(mean_ssim_denoised, 5).c_str(), "-");
    out << line;
    if (skipped > 0) out << "(skipped " << skipped << " unreadable images)\n";
    return out.str();
}

}  // namespace hwf
