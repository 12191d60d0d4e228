#pragma once

#include <array>

#include "hwf/window_ops.hpp"

// Multi-head self-attention over token sequences, the convolutional Q/K/V
// projection variant, the sparse feed-forward (dilated gather + reduced first
// FCL) and the convolutional feed-forward.

namespace hwf {

inline constexpr double kLayerNormEps = 1e-5;

enum class ProjectionKind { conv3x3, fully_connected };
enum class FfnKind { sparse_fcl, conv_relu_conv };

template <typename T>
struct AttentionWeights {
    ProjectionKind kind = ProjectionKind::fully_connected;
    int64_t heads = 1;
    Tensor<T> wq, bq;  // conv3x3: [C,C,3,3]+[C]; fully_connected: [d,d]+[d]
    Tensor<T> wk, bk;
    Tensor<T> wv, bv;
    Tensor<T> wo, bo;  // output projection, always [d,d]+[d]
    bool rel_bias_enabled = false;
    Tensor<T> rel_bias;  // [heads, (2*gh-1)*(2*gw-1)]
    int64_t rel_grid_h = 0, rel_grid_w = 0;
};

template <typename T>
struct FfnWeights {
    FfnKind kind = FfnKind::sparse_fcl;
    Tensor<T> w1, b1;  // sparse_fcl: [9d,d]+[d]; conv: [C,C,3,3]+[C]
    Tensor<T> w2, b2;  // sparse_fcl: [d,d]+[d]; conv: [C,C,3,3]+[C]
};

// x[M,T,din] * w[din,dout] + b, applied token-wise.
template <typename T>
Tensor<T> token_fc(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int64_t M = x.dim(0), Tn = x.dim(1), din = x.dim(2);
    if (w.rank() != 2 || w.dim(0) != din)
        throw ConfigError("token_fc: weight " + shape_str(w.shape()) + " does not accept dim " +
                          std::to_string(din));
    Tensor<T> flat = reshape(x, Shape{M * Tn, din});
    Tensor<T> y = add_broadcast(matmul(flat, w), b);
    return reshape(y, Shape{M, Tn, w.dim(1)});
}

namespace detail {

// Relative-position bias [heads, T, T] looked up from the offset table.
template <typename T>
Tensor<T> rel_bias_matrix(const AttentionWeights<T>& weights, int64_t tokens) {
    const int64_t gh = weights.rel_grid_h, gw = weights.rel_grid_w;
    if (tokens != gh * gw)
        throw UsageError("relative-position bias grid does not match token count");
    const int64_t nrel = (2 * gh - 1) * (2 * gw - 1);
    const int64_t h = weights.heads;
    if (weights.rel_bias.rank() != 2 || weights.rel_bias.dim(0) != h ||
        weights.rel_bias.dim(1) != nrel)
        throw ConfigError("relative-position table shape mismatch");
    std::vector<int64_t> index(static_cast<size_t>(h * tokens * tokens));
    size_t o = 0;
    for (int64_t a = 0; a < h; ++a)
        for (int64_t i = 0; i < tokens; ++i)
            for (int64_t j = 0; j < tokens; ++j) {
                const int64_t di = i / gw - j / gw + gh - 1;
                const int64_t dj = i % gw - j % gw + gw - 1;
                index[o++] = a * nrel + di * (2 * gw - 1) + dj;
            }
    return gather(weights.rel_bias, std::move(index), Shape{h, tokens, tokens});
}

}  // namespace detail

// Multi-head self-attention on [M,T,d] token sequences. With the
// fully_connected kind the inputs are projected by Wq/Wk/Wv here; with the
// conv3x3 kind they arrive already projected by conv_qkv. Scores are scaled
// by 1/sqrt(d/heads), optionally offset by the relative-position table, and
// softmax-normalized over keys; concatenated heads go through Wo.
template <typename T>
Tensor<T> mhsa(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
               const AttentionWeights<T>& weights) {
    if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape())
        throw ConfigError("mhsa: q,k,v must share shape [M,T,d]");
    const int64_t M = q.dim(0), Tn = q.dim(1), d = q.dim(2);
    const int64_t h = weights.heads;
    if (h < 1 || d % h != 0)
        throw ConfigError("mhsa: token dim " + std::to_string(d) + " not divisible by heads " +
                          std::to_string(h));
    const int64_t dh = d / h;

    Tensor<T> qp = q, kp = k, vp = v;
    if (weights.kind == ProjectionKind::fully_connected) {
        qp = token_fc(q, weights.wq, weights.bq);
        kp = token_fc(k, weights.wk, weights.bk);
        vp = token_fc(v, weights.wv, weights.bv);
    }

    auto split_heads = [&](const Tensor<T>& t) {
        return permute(reshape(t, Shape{M, Tn, h, dh}), {0, 2, 1, 3});
    };
    Tensor<T> qh = split_heads(qp);
    Tensor<T> kh = split_heads(kp);
    Tensor<T> vh = split_heads(vp);

    Tensor<T> scores = matmul(qh, permute(kh, {0, 1, 3, 2}));
    scores = scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    if (weights.rel_bias_enabled)
        scores = add_broadcast(scores, detail::rel_bias_matrix(weights, Tn));
    Tensor<T> attn = softmax(scores, 3);

    Tensor<T> ctx = matmul(attn, vh);                       // [M,h,T,dh]
    ctx = reshape(permute(ctx, {0, 2, 1, 3}), Shape{M, Tn, d});
    return token_fc(ctx, weights.wo, weights.bo);
}

// Three independent same-size 3x3 convolutions producing Q, K, V. Parameter
// count per projection is C*C*9 (+C bias) regardless of window or patch size.
template <typename T>
std::array<Tensor<T>, 3> conv_qkv(const Tensor<T>& x, const AttentionWeights<T>& weights) {
    if (weights.kind != ProjectionKind::conv3x3)
        throw UsageError("conv_qkv: weights are not the conv3x3 kind");
    return {conv2d(x, weights.wq, weights.bq, 1), conv2d(x, weights.wk, weights.bk, 1),
            conv2d(x, weights.wv, weights.bv, 1)};
}

// Sparse feed-forward: pre-norm, dilated 3x3 token gather (9d features), a
// first FCL that reduces back to d, ReLU, a second d->d FCL, residual from
// the pre-norm input.
template <typename T>
Tensor<T> sparse_ffn(const Tensor<T>& y, int64_t grid_h, int64_t grid_w,
                     const FfnWeights<T>& weights, int64_t rate) {
    if (weights.kind != FfnKind::sparse_fcl)
        throw UsageError("sparse_ffn: weights are not the sparse_fcl kind");
    if (y.rank() != 3) throw ConfigError("sparse_ffn: expects [M,T,d]");
    const int64_t d = y.dim(2);
    Tensor<T> z = layer_norm(y, Tensor<T>::ones({d}), Tensor<T>::zeros({d}),
                             static_cast<T>(kLayerNormEps));
    Tensor<T> g = dilated_gather(z, grid_h, grid_w, rate);
    Tensor<T> hidden = relu(token_fc(g, weights.w1, weights.b1));
    return add(token_fc(hidden, weights.w2, weights.b2), y);
}

// conv(ReLU(conv(z))) + z on [*,C,H,W] feature maps.
template <typename T>
Tensor<T> conv_ffn(const Tensor<T>& z, const FfnWeights<T>& weights) {
    if (weights.kind != FfnKind::conv_relu_conv)
        throw UsageError("conv_ffn: weights are not the conv_relu_conv kind");
    return add(conv2d(relu(conv2d(z, weights.w1, weights.b1, 1)), weights.w2, weights.b2, 1), z);
}

// Closed-form parameter counts for one Q/K/V projection.
inline int64_t conv_projection_params(int64_t channels, bool with_bias) {
    return channels * channels * 9 + (with_bias ? channels : 0);
}

inline int64_t fcl_projection_params(int64_t channels, int64_t patch, bool with_bias) {
    const int64_t d = channels * patch * patch;
    return d * d + (with_bias ? d : 0);
}

}  // namespace hwf
