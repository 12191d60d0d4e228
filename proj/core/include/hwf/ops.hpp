#pragma once

#include <algorithm>
#include <cmath>
#include <memory>

#include "hwf/tensor.hpp"
#include "hwf/threading.hpp"

// Differentiable primitives. Every op computes eagerly and, when a TapeScope
// is active and an input is tracked, records a closure that applies its
// vector-Jacobian product during the reverse sweep.

namespace hwf {

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ConfigError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    auto& o = out.mutable_data();
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t na = tape->input_node(a), nb = tape->input_node(b);
        if (na >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* ga = tp.accum(na))
                    for (size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
                if (auto* gb = tp.accum(nb))
                    for (size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i];
            });
        }
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ConfigError("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    auto& o = out.mutable_data();
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t na = tape->input_node(a), nb = tape->input_node(b);
        if (na >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* ga = tp.accum(na))
                    for (size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
                if (auto* gb = tp.accum(nb))
                    for (size_t i = 0; i < go.size(); ++i) (*gb)[i] -= go[i];
            });
        }
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ConfigError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    auto& o = out.mutable_data();
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t na = tape->input_node(a), nb = tape->input_node(b);
        if (na >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            auto pa = a.data_ptr();
            auto pb = b.data_ptr();
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* ga = tp.accum(na))
                    for (size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * (*pb)[i];
                if (auto* gb = tp.accum(nb))
                    for (size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * (*pa)[i];
            });
        }
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    Tensor<T> out(x.shape());
    auto& o = out.mutable_data();
    const auto& xv = x.data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = factor * xv[i];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* gx = tp.accum(nx))
                    for (size_t i = 0; i < go.size(); ++i) (*gx)[i] += factor * go[i];
            });
        }
    }
    return out;
}

// x + y with y broadcast over leading axes; y's shape must be a suffix of
// x's shape. Covers bias terms and per-head tables.
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& x, const Tensor<T>& y) {
    const Shape& xs = x.shape();
    const Shape& ys = y.shape();
    if (ys.size() > xs.size() || !std::equal(ys.rbegin(), ys.rend(), xs.rbegin()))
        throw ConfigError("add_broadcast: " + shape_str(ys) + " is not a suffix of " + shape_str(xs));
    const int64_t ny = y.numel();
    Tensor<T> out(xs);
    auto& o = out.mutable_data();
    const auto& xv = x.data();
    const auto& yv = y.data();
    for (int64_t r = 0; r < x.numel() / ny; ++r)
        for (int64_t j = 0; j < ny; ++j) o[r * ny + j] = xv[r * ny + j] + yv[j];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x), nyn = tape->input_node(y);
        if (nx >= 0 || nyn >= 0) {
            const int64_t no = tape->output_node(out);
            const int64_t reps = x.numel() / ny;
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* gx = tp.accum(nx))
                    for (size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
                if (auto* gy = tp.accum(nyn))
                    for (int64_t r = 0; r < reps; ++r)
                        for (int64_t j = 0; j < ny; ++j) (*gy)[j] += go[r * ny + j];
            });
        }
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    auto& o = out.mutable_data();
    const auto& xv = x.data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = xv[i] > T(0) ? xv[i] : T(0);
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            auto px = x.data_ptr();
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* gx = tp.accum(nx))
                    for (size_t i = 0; i < go.size(); ++i)
                        if ((*px)[i] > T(0)) (*gx)[i] += go[i];
            });
        }
    }
    return out;
}

// ---------------------------------------------------------------- reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const T g = tp.grad_of(no)[0];
                if (auto* gx = tp.accum(nx))
                    for (auto& v : *gx) v += g;
            });
        }
    }
    return out;
}

// ---------------------------------------------------------------- reshaping

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw ConfigError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                          " changes element count");
    Tensor<T> out = x.reshaped_view(std::move(shape));
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                if (auto* gx = tp.accum(nx))
                    for (size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
            });
        }
    }
    return out;
}

// out[i] = x[index[i]]. The workhorse behind permute and the window algebra;
// its VJP is scatter-add through the same map.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::shared_ptr<const std::vector<int64_t>> index, Shape out_shape) {
    if (!index || static_cast<int64_t>(index->size()) != numel(out_shape))
        throw UsageError("gather: index size does not match output shape");
    const int64_t limit = x.numel();
    for (int64_t id : *index)
        if (id < 0 || id >= limit) throw UsageError("gather: index out of range");
    Tensor<T> out(std::move(out_shape));
    auto& o = out.mutable_data();
    const auto& xv = x.data();
    const auto& idx = *index;
    for (size_t i = 0; i < o.size(); ++i) o[i] = xv[static_cast<size_t>(idx[i])];
    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            tape->record(no, [=](Tape<T>& tp) {
                const auto& go = tp.grad_of(no);
                const auto& id = *index;
                if (auto* gx = tp.accum(nx))
                    for (size_t i = 0; i < go.size(); ++i) (*gx)[static_cast<size_t>(id[i])] += go[i];
            });
        }
    }
    return out;
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<int64_t> index, Shape out_shape) {
    return gather(x, std::make_shared<const std::vector<int64_t>>(std::move(index)), std::move(out_shape));
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes) {
    const Shape& xs = x.shape();
    const int r = x.rank();
    if (static_cast<int>(axes.size()) != r) throw ConfigError("permute: axes rank mismatch");
    std::vector<bool> seen(r, false);
    for (int a : axes) {
        if (a < 0 || a >= r || seen[a]) throw ConfigError("permute: invalid axis list");
        seen[a] = true;
    }
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) out_shape[i] = xs[axes[i]];
    std::vector<int64_t> in_strides(r, 1);
    for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * xs[i + 1];
    std::vector<int64_t> index(static_cast<size_t>(x.numel()));
    std::vector<int64_t> coord(r, 0);
    for (int64_t o = 0; o < x.numel(); ++o) {
        int64_t rem = o, lin = 0;
        for (int i = r - 1; i >= 0; --i) {
            coord[i] = rem % out_shape[i];
            rem /= out_shape[i];
        }
        for (int i = 0; i < r; ++i) lin += coord[i] * in_strides[axes[i]];
        index[static_cast<size_t>(o)] = lin;
    }
    return gather(x, std::move(index), std::move(out_shape));
}

// ---------------------------------------------------------------- matmul

// Batched contraction a[...,m,n] x b[...,n,p] -> [...,m,p]; leading extents
// must match exactly.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() < 2 || b.rank() < 2 || a.rank() != b.rank())
        throw ConfigError("matmul: needs equal ranks >= 2");
    const int r = a.rank();
    for (int i = 0; i + 2 < r; ++i)
        if (a.dim(i) != b.dim(i)) throw ConfigError("matmul: batch extents differ");
    const int64_t m = a.dim(r - 2), n = a.dim(r - 1), p = b.dim(r - 1);
    if (b.dim(r - 2) != n)
        throw ConfigError("matmul: inner extents " + std::to_string(n) + " vs " +
                          std::to_string(b.dim(r - 2)));
    Shape out_shape(a.shape());
    out_shape[r - 1] = p;
    const int64_t batch = numel(out_shape) / (m * p);

    Tensor<T> out(out_shape);
    {
        T* o = out.mutable_data().data();
        const T* av = a.data().data();
        const T* bv = b.data().data();
        parallel_for(batch * m, [=](int64_t lo, int64_t hi) {
            for (int64_t row = lo; row < hi; ++row) {
                const int64_t bt = row / m, i = row % m;
                const T* arow = av + bt * m * n + i * n;
                const T* bmat = bv + bt * n * p;
                T* orow = o + bt * m * p + i * p;
                for (int64_t k = 0; k < n; ++k) {
                    const T s = arow[k];
                    const T* brow = bmat + k * p;
                    for (int64_t j = 0; j < p; ++j) orow[j] += s * brow[j];
                }
            }
        });
    }

    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t na = tape->input_node(a), nb = tape->input_node(b);
        if (na >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            auto pa = a.data_ptr();
            auto pb = b.data_ptr();
            tape->record(no, [=](Tape<T>& tp) {
                const T* go = tp.grad_of(no).data();
                if (auto* ga = tp.accum(na)) {
                    T* g = ga->data();
                    const T* bv = pb->data();
                    parallel_for(batch * m, [=](int64_t lo, int64_t hi) {
                        for (int64_t row = lo; row < hi; ++row) {
                            const int64_t bt = row / m, i = row % m;
                            const T* gorow = go + bt * m * p + i * p;
                            const T* bmat = bv + bt * n * p;
                            T* grow = g + bt * m * n + i * n;
                            for (int64_t k = 0; k < n; ++k) {
                                const T* brow = bmat + k * p;
                                T acc = 0;
                                for (int64_t j = 0; j < p; ++j) acc += gorow[j] * brow[j];
                                grow[k] += acc;
                            }
                        }
                    });
                }
                if (auto* gb = tp.accum(nb)) {
                    T* g = gb->data();
                    const T* av = pa->data();
                    parallel_for(batch * n, [=](int64_t lo, int64_t hi) {
                        for (int64_t row = lo; row < hi; ++row) {
                            const int64_t bt = row / n, k = row % n;
                            const T* amat = av + bt * m * n;
                            const T* gomat = go + bt * m * p;
                            T* grow = g + bt * n * p + k * p;
                            for (int64_t i = 0; i < m; ++i) {
                                const T s = amat[i * n + k];
                                const T* gorow = gomat + i * p;
                                for (int64_t j = 0; j < p; ++j) grow[j] += s * gorow[j];
                            }
                        }
                    });
                }
            });
        }
    }
    return out;
}

// ---------------------------------------------------------------- conv2d

namespace detail {

template <typename T>
void conv2d_accum_plane(const T* in, T* out, T wv, int64_t H, int64_t W, int64_t dy, int64_t dx,
                        int64_t pad) {
    const int64_t y0 = std::max<int64_t>(0, pad - dy), y1 = std::min(H, H + pad - dy);
    const int64_t x0 = std::max<int64_t>(0, pad - dx), x1 = std::min(W, W + pad - dx);
    for (int64_t y = y0; y < y1; ++y) {
        const T* irow = in + (y + dy - pad) * W + (dx - pad);
        T* orow = out + y * W;
        for (int64_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
    }
}

}  // namespace detail

// Same-size 2D convolution with zero padding; stride 1, square odd kernel.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int padding) {
    if (input.rank() != 4 || weight.rank() != 4 || bias.rank() != 1)
        throw ConfigError("conv2d: expects input[N,C,H,W], weight[Co,Ci,k,k], bias[Co]");
    const int64_t N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t Co = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != Ci || weight.dim(3) != k)
        throw ConfigError("conv2d: weight shape " + shape_str(weight.shape()) +
                          " incompatible with input " + shape_str(input.shape()));
    if (bias.dim(0) != Co) throw ConfigError("conv2d: bias length mismatch");
    if (k % 2 == 0 || padding != (k - 1) / 2)
        throw ConfigError("conv2d: kernel must be odd with padding (k-1)/2");
    if (!all_finite(input.data())) throw NumericError("conv2d: non-finite input");

    const int64_t HW = H * W;
    Tensor<T> out(Shape{N, Co, H, W});
    {
        T* o = out.mutable_data().data();
        const T* in = input.data().data();
        const T* wv = weight.data().data();
        const T* bv = bias.data().data();
        parallel_for(N * Co, [=](int64_t lo, int64_t hi) {
            for (int64_t nc = lo; nc < hi; ++nc) {
                const int64_t n = nc / Co, co = nc % Co;
                T* oplane = o + nc * HW;
                std::fill(oplane, oplane + HW, bv[co]);
                for (int64_t ci = 0; ci < Ci; ++ci) {
                    const T* iplane = in + (n * Ci + ci) * HW;
                    const T* wk = wv + (co * Ci + ci) * k * k;
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx)
                            detail::conv2d_accum_plane(iplane, oplane, wk[dy * k + dx], H, W, dy, dx,
                                                       padding);
                }
            }
        });
    }

    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t ni = tape->input_node(input);
        const int64_t nw = tape->input_node(weight);
        const int64_t nb = tape->input_node(bias);
        if (ni >= 0 || nw >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            auto pin = input.data_ptr();
            auto pw = weight.data_ptr();
            const int64_t pad = padding;
            tape->record(no, [=](Tape<T>& tp) {
                const T* go = tp.grad_of(no).data();
                if (auto* gi = tp.accum(ni)) {
                    T* g = gi->data();
                    const T* wv = pw->data();
                    parallel_for(N * Ci, [=](int64_t lo, int64_t hi) {
                        for (int64_t nc = lo; nc < hi; ++nc) {
                            const int64_t n = nc / Ci, ci = nc % Ci;
                            T* gplane = g + nc * HW;
                            for (int64_t co = 0; co < Co; ++co) {
                                const T* goplane = go + (n * Co + co) * HW;
                                const T* wk = wv + (co * Ci + ci) * k * k;
                                // transposed conv: flip both kernel offsets
                                for (int64_t dy = 0; dy < k; ++dy)
                                    for (int64_t dx = 0; dx < k; ++dx)
                                        detail::conv2d_accum_plane(goplane, gplane, wk[dy * k + dx], H, W,
                                                                   k - 1 - dy, k - 1 - dx, pad);
                            }
                        }
                    });
                }
                if (auto* gw = tp.accum(nw)) {
                    T* g = gw->data();
                    const T* in = pin->data();
                    parallel_for(Co, [=](int64_t lo, int64_t hi) {
                        for (int64_t co = lo; co < hi; ++co) {
                            for (int64_t n = 0; n < N; ++n) {
                                const T* goplane = go + (n * Co + co) * HW;
                                for (int64_t ci = 0; ci < Ci; ++ci) {
                                    const T* iplane = in + (n * Ci + ci) * HW;
                                    T* gk = g + (co * Ci + ci) * k * k;
                                    for (int64_t dy = 0; dy < k; ++dy)
                                        for (int64_t dx = 0; dx < k; ++dx) {
                                            const int64_t y0 = std::max<int64_t>(0, pad - dy);
                                            const int64_t y1 = std::min(H, H + pad - dy);
                                            const int64_t x0 = std::max<int64_t>(0, pad - dx);
                                            const int64_t x1 = std::min(W, W + pad - dx);
                                            T acc = 0;
                                            for (int64_t y = y0; y < y1; ++y) {
                                                const T* irow = iplane + (y + dy - pad) * W + (dx - pad);
                                                const T* gorow = goplane + y * W;
                                                for (int64_t x = x0; x < x1; ++x) acc += gorow[x] * irow[x];
                                            }
                                            gk[dy * k + dx] += acc;
                                        }
                                }
                            }
                        }
                    });
                }
                if (auto* gb = tp.accum(nb)) {
                    T* g = gb->data();
                    for (int64_t n = 0; n < N; ++n)
                        for (int64_t co = 0; co < Co; ++co) {
                            const T* goplane = go + (n * Co + co) * HW;
                            T acc = 0;
                            for (int64_t i = 0; i < HW; ++i) acc += goplane[i];
                            g[co] += acc;
                        }
                }
            });
        }
    }
    return out;
}

// ---------------------------------------------------------------- layer_norm

// Normalizes each slice along the last axis to zero mean and unit variance
// (population variance, eps inside the square root), then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    if (x.rank() < 1) throw ConfigError("layer_norm: rank >= 1 required");
    const int64_t d = x.dim(x.rank() - 1);
    if (gamma.numel() != d || beta.numel() != d)
        throw ConfigError("layer_norm: gamma/beta must have length " + std::to_string(d));
    if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be positive");
    const int64_t rows = x.numel() / d;

    Tensor<T> out(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
    {
        T* o = out.mutable_data().data();
        const T* xv = x.data().data();
        const T* gv = gamma.data().data();
        const T* bv = beta.data().data();
        T* xh = xhat->data();
        T* is = inv_std->data();
        parallel_for(rows, [=](int64_t lo, int64_t hi) {
            for (int64_t r = lo; r < hi; ++r) {
                const T* row = xv + r * d;
                T mean = 0;
                for (int64_t j = 0; j < d; ++j) mean += row[j];
                mean /= static_cast<T>(d);
                T var = 0;
                for (int64_t j = 0; j < d; ++j) {
                    const T c = row[j] - mean;
                    var += c * c;
                }
                var /= static_cast<T>(d);
                const T s = T(1) / std::sqrt(var + eps);
                is[r] = s;
                T* hrow = xh + r * d;
                T* orow = o + r * d;
                for (int64_t j = 0; j < d; ++j) {
                    hrow[j] = (row[j] - mean) * s;
                    orow[j] = gv[j] * hrow[j] + bv[j];
                }
            }
        });
    }

    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        const int64_t ng = tape->input_node(gamma);
        const int64_t nb = tape->input_node(beta);
        if (nx >= 0 || ng >= 0 || nb >= 0) {
            const int64_t no = tape->output_node(out);
            auto pg = gamma.data_ptr();
            tape->record(no, [=](Tape<T>& tp) {
                const T* go = tp.grad_of(no).data();
                const T* xh = xhat->data();
                const T* is = inv_std->data();
                if (auto* gx = tp.accum(nx)) {
                    T* g = gx->data();
                    const T* gv = pg->data();
                    parallel_for(rows, [=](int64_t lo, int64_t hi) {
                        for (int64_t r = lo; r < hi; ++r) {
                            const T* gorow = go + r * d;
                            const T* hrow = xh + r * d;
                            T m1 = 0, m2 = 0;
                            for (int64_t j = 0; j < d; ++j) {
                                const T dh = gorow[j] * gv[j];
                                m1 += dh;
                                m2 += dh * hrow[j];
                            }
                            m1 /= static_cast<T>(d);
                            m2 /= static_cast<T>(d);
                            T* grow = g + r * d;
                            for (int64_t j = 0; j < d; ++j)
                                grow[j] += (gorow[j] * gv[j] - m1 - hrow[j] * m2) * is[r];
                        }
                    });
                }
                if (auto* gg = tp.accum(ng)) {
                    T* g = gg->data();
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < d; ++j) g[j] += go[r * d + j] * xh[r * d + j];
                }
                if (auto* gb = tp.accum(nb)) {
                    T* g = gb->data();
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < d; ++j) g[j] += go[r * d + j];
                }
            });
        }
    }
    return out;
}

// ---------------------------------------------------------------- softmax

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ConfigError("softmax: axis out of range");
    const int64_t len = x.dim(axis);
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);

    Tensor<T> out(x.shape());
    {
        T* o = out.mutable_data().data();
        const T* xv = x.data().data();
        parallel_for(outer * inner, [=](int64_t lo, int64_t hi) {
            for (int64_t s = lo; s < hi; ++s) {
                const int64_t ob = s / inner, ib = s % inner;
                const T* base = xv + ob * len * inner + ib;
                T* obase = o + ob * len * inner + ib;
                T mx = base[0];
                for (int64_t a = 1; a < len; ++a) mx = std::max(mx, base[a * inner]);
                T denom = 0;
                for (int64_t a = 0; a < len; ++a) {
                    const T e = std::exp(base[a * inner] - mx);
                    obase[a * inner] = e;
                    denom += e;
                }
                const T norm = T(1) / denom;
                for (int64_t a = 0; a < len; ++a) obase[a * inner] *= norm;
            }
        });
    }

    if (Tape<T>* tape = TapeScope<T>::current()) {
        const int64_t nx = tape->input_node(x);
        if (nx >= 0) {
            const int64_t no = tape->output_node(out);
            auto py = out.data_ptr();
            tape->record(no, [=](Tape<T>& tp) {
                const T* go = tp.grad_of(no).data();
                if (auto* gx = tp.accum(nx)) {
                    T* g = gx->data();
                    const T* yv = py->data();
                    parallel_for(outer * inner, [=](int64_t lo, int64_t hi) {
                        for (int64_t s = lo; s < hi; ++s) {
                            const int64_t ob = s / inner, ib = s % inner;
                            const int64_t base = ob * len * inner + ib;
                            T dot = 0;
                            for (int64_t a = 0; a < len; ++a)
                                dot += go[base + a * inner] * yv[base + a * inner];
                            for (int64_t a = 0; a < len; ++a)
                                g[base + a * inner] += yv[base + a * inner] * (go[base + a * inner] - dot);
                        }
                    });
                }
            });
        }
    }
    return out;
}

}  // namespace hwf
