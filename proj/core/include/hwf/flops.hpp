#pragma once

#include <vector>

#include "hwf/model_config.hpp"

// Closed-form parameter and FLOPs accounting. Conventions: one multiply-add
// is two FLOPs; convolution cost is 2*H*W*Cout*Cin*k^2 (bias excluded);
// softmax costs 5 FLOPs per score; layer norms, residual adds and other
// elementwise terms are excluded. Windowed stages are charged on the
// reflection-padded extent they actually process.

namespace hwf {

int64_t params_conv(int64_t cin, int64_t cout, int64_t k, bool with_bias = true);
int64_t params_fcl(int64_t din, int64_t dout, bool with_bias = true);
int64_t flops_conv2d(int64_t h, int64_t w, int64_t cin, int64_t cout, int64_t k);
int64_t flops_matmul(int64_t m, int64_t n, int64_t p);

struct FlopsReport {
    int64_t total = 0;
    int64_t attention = 0;  // projections, scores, softmax, AV, output projection
    int64_t conv = 0;       // head, tail and feed-forward convolutions
    int64_t fcl = 0;        // sparse feed-forward token FCLs
};

int64_t count_params(const ModelConfig& cfg);
FlopsReport count_flops(const ModelConfig& cfg, int64_t image_h, int64_t image_w);

// One row of the window-size sweep: the model rebuilt with both window
// scales set to `window` at a fixed image size.
struct BenchRow {
    int64_t window = 0;
    int64_t params = 0;
    int64_t flops_total = 0;
    int64_t flops_attention = 0;
};

std::vector<BenchRow> window_sweep(const ModelConfig& base, const std::vector<int64_t>& windows,
                                   int64_t image, int64_t patch);

}  // namespace hwf
