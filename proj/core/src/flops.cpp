#include "hwf/flops.hpp"

namespace hwf {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Attention cost of one window: Q/K/V projections, scaled-dot scores,
// softmax, attention-weighted values and the output projection.
int64_t window_attention_flops(const ModelConfig& cfg, bool gte) {
    const int64_t C = cfg.base_channels;
    const int64_t w = gte ? cfg.gte_window : cfg.tde_window;
    const int64_t p = gte ? cfg.patch : cfg.tde_patch;
    const int64_t d = C * p * p;
    const int64_t t = (w / p) * (w / p);
    const int64_t h = cfg.heads;
    const bool rel = gte ? cfg.rel_bias_gte : cfg.rel_bias_tde;

    int64_t f = 0;
    if (gte)
        f += 3 * flops_conv2d(w, w, C, C, 3);  // conv projections
    else
        f += 3 * flops_matmul(t, d, d);  // FCL projections
    f += 2 * t * t * d;                  // scores QK^T across heads
    f += t * t;                          // 1/sqrt(dh) scaling
    if (rel) f += h * t * t;             // relative-position bias add
    f += 5 * h * t * t;                  // softmax
    f += 2 * t * t * d;                  // attention x V
    f += flops_matmul(t, d, d);          // Wo
    return f;
}

}  // namespace

int64_t params_conv(int64_t cin, int64_t cout, int64_t k, bool with_bias) {
    return cout * cin * k * k + (with_bias ? cout : 0);
}

int64_t params_fcl(int64_t din, int64_t dout, bool with_bias) {
    return din * dout + (with_bias ? dout : 0);
}

int64_t flops_conv2d(int64_t h, int64_t w, int64_t cin, int64_t cout, int64_t k) {
    return 2 * h * w * cout * cin * k * k;
}

int64_t flops_matmul(int64_t m, int64_t n, int64_t p) { return 2 * m * n * p; }

int64_t count_params(const ModelConfig& cfg) {
    const int64_t C = cfg.base_channels;
    int64_t total = 0;

    total += params_conv(cfg.in_channels, C, 3);
    total += 4 * params_conv(C, C, 3);

    const int64_t dg = cfg.gte_token_dim();
    int64_t gte = 3 * params_conv(C, C, 3);  // conv Q/K/V
    gte += params_fcl(dg, dg);               // Wo
    if (cfg.rel_bias_gte) {
        const int64_t g = cfg.gte_grid();
        gte += cfg.heads * (2 * g - 1) * (2 * g - 1);
    }
    gte += 2 * params_conv(C, C, 3);  // conv feed-forward
    total += 2 * gte;

    const int64_t dt = cfg.tde_token_dim();
    int64_t tde = 4 * params_fcl(dt, dt);  // Wq, Wk, Wv, Wo
    tde += params_fcl(9 * dt, dt);         // sparse FFN first layer
    tde += params_fcl(dt, dt);             // sparse FFN second layer
    if (cfg.rel_bias_tde) {
        const int64_t g = cfg.tde_grid();
        tde += cfg.heads * (2 * g - 1) * (2 * g - 1);
    }
    total += 8 * tde;

    total += params_conv(C, cfg.in_channels, 3);
    return total;
}

FlopsReport count_flops(const ModelConfig& cfg, int64_t image_h, int64_t image_w) {
    const int64_t C = cfg.base_channels;
    FlopsReport r;

    r.conv += flops_conv2d(image_h, image_w, cfg.in_channels, C, 3);
    r.conv += 4 * flops_conv2d(image_h, image_w, C, C, 3);

    {
        const int64_t w = cfg.gte_window;
        const int64_t nw = ceil_div(image_h, w) * ceil_div(image_w, w);
        r.attention += 2 * nw * window_attention_flops(cfg, /*gte=*/true);
        r.conv += 2 * 2 * flops_conv2d(image_h, image_w, C, C, 3);  // conv FFN per block
    }

    {
        const int64_t w = cfg.tde_window;
        const int64_t nw = ceil_div(image_h, w) * ceil_div(image_w, w);
        const int64_t d = cfg.tde_token_dim();
        const int64_t t = cfg.tde_grid() * cfg.tde_grid();
        r.attention += 8 * nw * window_attention_flops(cfg, /*gte=*/false);
        r.fcl += 8 * nw * (flops_matmul(t, 9 * d, d) + flops_matmul(t, d, d));
    }

    r.conv += flops_conv2d(image_h, image_w, C, cfg.in_channels, 3);
    r.total = r.conv + r.attention + r.fcl;
    return r;
}

std::vector<BenchRow> window_sweep(const ModelConfig& base, const std::vector<int64_t>& windows,
                                   int64_t image, int64_t patch) {
    if (image < 2) throw ConfigError("window_sweep: image size must be >= 2");
    std::vector<BenchRow> rows;
    rows.reserve(windows.size());
    for (int64_t w : windows) {
        if (patch < 1 || w % patch != 0)
            throw ConfigError("window_sweep: patch " + std::to_string(patch) +
                              " does not divide window " + std::to_string(w));
        ModelConfig cfg = base;
        cfg.gte_window = w;
        cfg.tde_window = w;
        cfg.patch = patch;
        cfg.tde_patch = patch;
        cfg.shift = w / 2;
        cfg.validate();
        const FlopsReport f = count_flops(cfg, image, image);
        rows.push_back({w, count_params(cfg), f.total, f.attention});
    }
    return rows;
}

}  // namespace hwf
