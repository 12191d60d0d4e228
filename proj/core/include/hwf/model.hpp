#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hwf/attention.hpp"
#include "hwf/model_config.hpp"
#include "hwf/rng.hpp"

// Full network assembly: head (5 convolutions, ReLU, residual), two
// GTEBlocks, one TDEBlock of eight directional transformers, tail
// convolution, and a global input->output skip so the zero-weight model is
// the identity map.

namespace hwf {

template <typename T>
struct ConvLayer {
    Tensor<T> weight;  // [Cout,Cin,3,3]
    Tensor<T> bias;    // [Cout]
};

template <typename T>
struct GteBlockWeights {
    AttentionWeights<T> attn;  // conv3x3 projections
    FfnWeights<T> ffn;         // conv_relu_conv
};

template <typename T>
struct TdeLayerWeights {
    Direction kind = Direction::Co;
    AttentionWeights<T> attn;  // fully_connected projections
    FfnWeights<T> ffn;         // sparse_fcl
};

template <typename T>
struct ModelWeights {
    std::array<ConvLayer<T>, 5> head;
    std::array<GteBlockWeights<T>, 2> gte;
    std::array<TdeLayerWeights<T>, 8> tde;
    ConvLayer<T> tail;

    // Stable name -> parameter mapping; order defines the checkpoint layout.
    std::vector<std::pair<std::string, Tensor<T>*>> registry();
    std::vector<std::pair<std::string, const Tensor<T>*>> registry() const;

    void set_requires_grad(bool on) {
        for (auto& [name, t] : registry()) t->set_requires_grad(on);
    }
    void zero_grads() {
        for (auto& [name, t] : registry()) t->zero_grad();
    }
    Tensor<T>* find(const std::string& name) {
        for (auto& [n, t] : registry())
            if (n == name) return t;
        return nullptr;
    }
};

namespace detail {

template <typename T>
ConvLayer<T> make_conv(int64_t cin, int64_t cout) {
    return {Tensor<T>(Shape{cout, cin, 3, 3}), Tensor<T>(Shape{cout})};
}

template <typename T>
void append_attention(std::vector<std::pair<std::string, Tensor<T>*>>& reg, const std::string& prefix,
                      AttentionWeights<T>& a) {
    reg.emplace_back(prefix + ".wq", &a.wq);
    reg.emplace_back(prefix + ".bq", &a.bq);
    reg.emplace_back(prefix + ".wk", &a.wk);
    reg.emplace_back(prefix + ".bk", &a.bk);
    reg.emplace_back(prefix + ".wv", &a.wv);
    reg.emplace_back(prefix + ".bv", &a.bv);
    reg.emplace_back(prefix + ".wo", &a.wo);
    reg.emplace_back(prefix + ".bo", &a.bo);
    if (a.rel_bias_enabled) reg.emplace_back(prefix + ".rel_bias", &a.rel_bias);
}

template <typename T>
void append_ffn(std::vector<std::pair<std::string, Tensor<T>*>>& reg, const std::string& prefix,
                FfnWeights<T>& f) {
    reg.emplace_back(prefix + ".w1", &f.w1);
    reg.emplace_back(prefix + ".b1", &f.b1);
    reg.emplace_back(prefix + ".w2", &f.w2);
    reg.emplace_back(prefix + ".b2", &f.b2);
}

}  // namespace detail

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelWeights<T>::registry() {
    std::vector<std::pair<std::string, Tensor<T>*>> reg;
    for (size_t i = 0; i < head.size(); ++i) {
        const std::string p = "head.conv" + std::to_string(i + 1);
        reg.emplace_back(p + ".weight", &head[i].weight);
        reg.emplace_back(p + ".bias", &head[i].bias);
    }
    for (size_t i = 0; i < gte.size(); ++i) {
        const std::string p = "gte" + std::to_string(i + 1);
        detail::append_attention(reg, p + ".attn", gte[i].attn);
        detail::append_ffn(reg, p + ".ffn", gte[i].ffn);
    }
    for (size_t i = 0; i < tde.size(); ++i) {
        const std::string p = "tde" + std::to_string(i + 1);
        detail::append_attention(reg, p + ".attn", tde[i].attn);
        detail::append_ffn(reg, p + ".ffn", tde[i].ffn);
    }
    reg.emplace_back("tail.weight", &tail.weight);
    reg.emplace_back("tail.bias", &tail.bias);
    return reg;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelWeights<T>::registry() const {
    auto mut = const_cast<ModelWeights<T>*>(this)->registry();
    std::vector<std::pair<std::string, const Tensor<T>*>> reg;
    reg.reserve(mut.size());
    for (auto& [n, t] : mut) reg.emplace_back(n, t);
    return reg;
}

// Exact parameter count by enumerating the registry; the closed-form twin
// lives in flops.hpp and must agree with this.
template <typename T>
int64_t count_params(const ModelWeights<T>& weights) {
    int64_t total = 0;
    for (const auto& [name, t] : weights.registry()) total += t->numel();
    return total;
}

// Zero-valued weights with the right shapes; the resulting model is the
// identity map.
template <typename T>
ModelWeights<T> make_zero_weights(const ModelConfig& cfg) {
    cfg.validate();
    const int64_t C = cfg.base_channels;
    ModelWeights<T> w;
    w.head[0] = detail::make_conv<T>(cfg.in_channels, C);
    for (int i = 1; i < 5; ++i) w.head[i] = detail::make_conv<T>(C, C);

    const int64_t dg = cfg.gte_token_dim();
    for (auto& blk : w.gte) {
        auto& a = blk.attn;
        a.kind = ProjectionKind::conv3x3;
        a.heads = cfg.heads;
        a.wq = Tensor<T>(Shape{C, C, 3, 3});
        a.bq = Tensor<T>(Shape{C});
        a.wk = Tensor<T>(Shape{C, C, 3, 3});
        a.bk = Tensor<T>(Shape{C});
        a.wv = Tensor<T>(Shape{C, C, 3, 3});
        a.bv = Tensor<T>(Shape{C});
        a.wo = Tensor<T>(Shape{dg, dg});
        a.bo = Tensor<T>(Shape{dg});
        a.rel_bias_enabled = cfg.rel_bias_gte;
        if (a.rel_bias_enabled) {
            a.rel_grid_h = a.rel_grid_w = cfg.gte_grid();
            const int64_t nrel = (2 * cfg.gte_grid() - 1) * (2 * cfg.gte_grid() - 1);
            a.rel_bias = Tensor<T>(Shape{cfg.heads, nrel});
        }
        blk.ffn.kind = FfnKind::conv_relu_conv;
        blk.ffn.w1 = Tensor<T>(Shape{C, C, 3, 3});
        blk.ffn.b1 = Tensor<T>(Shape{C});
        blk.ffn.w2 = Tensor<T>(Shape{C, C, 3, 3});
        blk.ffn.b2 = Tensor<T>(Shape{C});
    }

    const int64_t dt = cfg.tde_token_dim();
    const auto seq = tde_sequence(cfg.tde_order);
    for (size_t i = 0; i < w.tde.size(); ++i) {
        auto& layer = w.tde[i];
        layer.kind = seq[i];
        auto& a = layer.attn;
        a.kind = ProjectionKind::fully_connected;
        a.heads = cfg.heads;
        a.wq = Tensor<T>(Shape{dt, dt});
        a.bq = Tensor<T>(Shape{dt});
        a.wk = Tensor<T>(Shape{dt, dt});
        a.bk = Tensor<T>(Shape{dt});
        a.wv = Tensor<T>(Shape{dt, dt});
        a.bv = Tensor<T>(Shape{dt});
        a.wo = Tensor<T>(Shape{dt, dt});
        a.bo = Tensor<T>(Shape{dt});
        a.rel_bias_enabled = cfg.rel_bias_tde;
        if (a.rel_bias_enabled) {
            a.rel_grid_h = a.rel_grid_w = cfg.tde_grid();
            const int64_t nrel = (2 * cfg.tde_grid() - 1) * (2 * cfg.tde_grid() - 1);
            a.rel_bias = Tensor<T>(Shape{cfg.heads, nrel});
        }
        layer.ffn.kind = FfnKind::sparse_fcl;
        layer.ffn.w1 = Tensor<T>(Shape{9 * dt, dt});
        layer.ffn.b1 = Tensor<T>(Shape{dt});
        layer.ffn.w2 = Tensor<T>(Shape{dt, dt});
        layer.ffn.b2 = Tensor<T>(Shape{dt});
    }

    w.tail = detail::make_conv<T>(C, cfg.in_channels);
    return w;
}

// Kaiming-uniform convolutions, normal(0, 0.02) attention/FCL matrices,
// zero biases, zero relative-position tables.
template <typename T>
ModelWeights<T> make_initialized_weights(const ModelConfig& cfg, uint64_t seed) {
    ModelWeights<T> w = make_zero_weights<T>(cfg);
    RngStream root(seed);
    uint64_t counter = 0;
    for (auto& [name, t] : w.registry()) {
        RngStream rng = root.split({0x77656967687473ULL, counter++});
        const Shape& s = t->shape();
        auto& data = t->mutable_data();
        if (s.size() == 4) {
            const int64_t fan_in = s[1] * s[2] * s[3];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (T& v : data) v = static_cast<T>((2.0 * rng.next_double() - 1.0) * bound);
        } else if (s.size() == 2 && name.find("rel_bias") == std::string::npos) {
            for (T& v : data) v = static_cast<T>(rng.next_gaussian() * 0.02);
        }
        // biases and relative-position tables stay zero
    }
    return w;
}

// ---------------------------------------------------------------- forwards

// conv1 lifts Cin->C, convs 2-5 map C->C; ReLU follows convs 1-4; the conv1
// output is added back to the conv5 output.
template <typename T>
Tensor<T> head_forward(const Tensor<T>& x, const std::array<ConvLayer<T>, 5>& head) {
    Tensor<T> first = conv2d(x, head[0].weight, head[0].bias, 1);
    Tensor<T> h = relu(first);
    for (int i = 1; i < 4; ++i) h = relu(conv2d(h, head[i].weight, head[i].bias, 1));
    return add(conv2d(h, head[4].weight, head[4].bias, 1), first);
}

// Algorithm: split into gte_window windows, conv Q/K/V, tokenize with patch
// p, layer-normalize each, attend, rebuild the map, add the block input,
// then the convolutional feed-forward with its own residual.
template <typename T>
Tensor<T> gteblock_forward(const Tensor<T>& x, const GteBlockWeights<T>& w, const ModelConfig& cfg) {
    auto [windows, layout] = partition_windows(x, cfg.gte_window);
    auto qkv = conv_qkv(windows, w.attn);
    const int64_t C = cfg.base_channels, p = cfg.patch;
    Tensor<T> gamma = Tensor<T>::ones({cfg.gte_token_dim()});
    Tensor<T> beta = Tensor<T>::zeros({cfg.gte_token_dim()});
    auto tokens = [&](const Tensor<T>& t) {
        return layer_norm(patchify(t, p), gamma, beta, static_cast<T>(kLayerNormEps));
    };
    Tensor<T> y = mhsa(tokens(qkv[0]), tokens(qkv[1]), tokens(qkv[2]), w.attn);
    Tensor<T> merged = merge_windows(unpatchify(y, C, cfg.gte_window, p), layout);
    return conv_ffn(add(merged, x), w.ffn);
}

// One Ho/Ve/Co transformer: cyclic shift (none for Co), window cut, patch
// tokens, pre-norm attention with residual, sparse feed-forward with
// residual, then unwind and reverse the shift.
template <typename T>
Tensor<T> directional_transformer_forward(const Tensor<T>& x, Direction kind,
                                          const TdeLayerWeights<T>& w, const ModelConfig& cfg) {
    const Axis axis = kind == Direction::Ho ? Axis::horizontal : Axis::vertical;
    const bool shifted = kind != Direction::Co && cfg.shift != 0;
    Tensor<T> r = shifted ? roll(x, axis, cfg.shift) : x;
    auto [windows, layout] = partition_windows(r, cfg.tde_window);
    const int64_t C = cfg.base_channels, p = cfg.tde_patch, d = cfg.tde_token_dim();
    Tensor<T> t = patchify(windows, p);
    Tensor<T> normed = layer_norm(t, Tensor<T>::ones({d}), Tensor<T>::zeros({d}),
                                  static_cast<T>(kLayerNormEps));
    Tensor<T> t1 = add(t, mhsa(normed, normed, normed, w.attn));
    Tensor<T> t2 = sparse_ffn(t1, cfg.tde_grid(), cfg.tde_grid(), w.ffn, cfg.dilation_rate);
    Tensor<T> merged = merge_windows(unpatchify(t2, C, cfg.tde_window, p), layout);
    return shifted ? roll_reverse(merged, axis, cfg.shift) : merged;
}

template <typename T>
Tensor<T> tdeblock_forward(const Tensor<T>& x, const std::array<TdeLayerWeights<T>, 8>& layers,
                           const ModelConfig& cfg) {
    Tensor<T> h = x;
    for (const auto& layer : layers)
        h = directional_transformer_forward(h, layer.kind, layer, cfg);
    return h;
}

// tail(tde(gte2(gte1(head(noisy))))) + noisy.
template <typename T>
Tensor<T> model_forward(const Tensor<T>& noisy, const ModelWeights<T>& w, const ModelConfig& cfg) {
    if (noisy.rank() != 4 || noisy.dim(1) != cfg.in_channels)
        throw ConfigError("model_forward: expects [N," + std::to_string(cfg.in_channels) +
                          ",H,W], got " + shape_str(noisy.shape()));
    Tensor<T> h = head_forward(noisy, w.head);
    h = gteblock_forward(h, w.gte[0], cfg);
    h = gteblock_forward(h, w.gte[1], cfg);
    h = tdeblock_forward(h, w.tde, cfg);
    Tensor<T> res = conv2d(h, w.tail.weight, w.tail.bias, 1);
    return add(res, noisy);
}

}  // namespace hwf
