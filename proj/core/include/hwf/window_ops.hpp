#pragma once

#include <utility>

#include "hwf/ops.hpp"

// The window algebra: square-window partition/merge with symmetric reflection
// padding, cyclic spatial shifts, patch tokenization and the dilated token
// gather. Everything is an index map fed through gather(), so each op is
// differentiable and each partition/merge, patchify/unpatchify,
// roll/roll_reverse pair inverts bitwise.

namespace hwf {

enum class Axis { horizontal, vertical };

struct WindowLayout {
    int64_t window = 0;
    int64_t grid_h = 0, grid_w = 0;
    int64_t pad_h = 0, pad_w = 0;
    int64_t original_h = 0, original_w = 0;
};

namespace detail {

// Bottom/right symmetric padding: coordinate c in [0, extent + pad) maps
// back into [0, extent) by mirroring about the edge (edge included).
inline int64_t reflect_index(int64_t c, int64_t extent) {
    return c < extent ? c : 2 * extent - 1 - c;
}

}  // namespace detail

// Cuts [N,C,H,W] into non-overlapping w x w windows in row-major window
// order, reflecting at the bottom/right edge when w does not divide H or W.
template <typename T>
std::pair<Tensor<T>, WindowLayout> partition_windows(const Tensor<T>& x, int64_t w) {
    if (x.rank() != 4) throw ConfigError("partition_windows: expects [N,C,H,W]");
    if (w < 2) throw ConfigError("partition_windows: window must be >= 2");
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (w > 2 * std::min(H, W))
        throw ConfigError("partition_windows: window " + std::to_string(w) +
                          " exceeds twice the spatial extent of " + shape_str(x.shape()));
    WindowLayout layout;
    layout.window = w;
    layout.original_h = H;
    layout.original_w = W;
    layout.pad_h = (w - H % w) % w;
    layout.pad_w = (w - W % w) % w;
    layout.grid_h = (H + layout.pad_h) / w;
    layout.grid_w = (W + layout.pad_w) / w;

    const int64_t nw = layout.grid_h * layout.grid_w;
    std::vector<int64_t> index(static_cast<size_t>(N * nw * C * w * w));
    size_t o = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t gy = 0; gy < layout.grid_h; ++gy)
            for (int64_t gx = 0; gx < layout.grid_w; ++gx)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t wy = 0; wy < w; ++wy) {
                        const int64_t y = detail::reflect_index(gy * w + wy, H);
                        const int64_t base = ((n * C + c) * H + y) * W;
                        for (int64_t wx = 0; wx < w; ++wx)
                            index[o++] = base + detail::reflect_index(gx * w + wx, W);
                    }
    Tensor<T> windows = gather(x, std::move(index), Shape{N * nw, C, w, w});
    return {std::move(windows), layout};
}

// Exact inverse of partition_windows, including the crop of the padding.
template <typename T>
Tensor<T> merge_windows(const Tensor<T>& windows, const WindowLayout& layout) {
    const int64_t w = layout.window;
    const int64_t nw = layout.grid_h * layout.grid_w;
    if (windows.rank() != 4 || windows.dim(2) != w || windows.dim(3) != w)
        throw UsageError("merge_windows: window tensor " + shape_str(windows.shape()) +
                         " inconsistent with layout window " + std::to_string(w));
    if (nw <= 0 || windows.dim(0) % nw != 0)
        throw UsageError("merge_windows: window count not a multiple of the layout grid");
    const int64_t N = windows.dim(0) / nw;
    const int64_t C = windows.dim(1);
    const int64_t H = layout.original_h, W = layout.original_w;
    if ((H + layout.pad_h) % w != 0 || (W + layout.pad_w) % w != 0)
        throw UsageError("merge_windows: layout padding inconsistent");

    std::vector<int64_t> index(static_cast<size_t>(N * C * H * W));
    size_t o = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y) {
                const int64_t gy = y / w, wy = y % w;
                for (int64_t x = 0; x < W; ++x) {
                    const int64_t gx = x / w, wx = x % w;
                    const int64_t win = (n * nw + gy * layout.grid_w + gx);
                    index[o++] = ((win * C + c) * w + wy) * w + wx;
                }
            }
    return gather(windows, std::move(index), Shape{N, C, H, W});
}

// Cyclic rotation of one spatial axis: out[..., j] = in[..., (j + shift) % extent].
template <typename T>
Tensor<T> roll(const Tensor<T>& x, Axis axis, int64_t shift) {
    if (x.rank() != 4) throw ConfigError("roll: expects [N,C,H,W]");
    const int64_t H = x.dim(2), W = x.dim(3);
    const int64_t extent = axis == Axis::horizontal ? W : H;
    if (shift < 0 || shift >= extent)
        throw ConfigError("roll: shift " + std::to_string(shift) + " outside [0, " +
                          std::to_string(extent) + ")");
    if (shift == 0) return reshape(x, x.shape());

    std::vector<int64_t> index(static_cast<size_t>(x.numel()));
    const int64_t planes = x.dim(0) * x.dim(1);
    size_t o = 0;
    for (int64_t pl = 0; pl < planes; ++pl) {
        const int64_t base = pl * H * W;
        for (int64_t y = 0; y < H; ++y) {
            const int64_t sy = axis == Axis::vertical ? (y + shift) % H : y;
            for (int64_t x2 = 0; x2 < W; ++x2) {
                const int64_t sx = axis == Axis::horizontal ? (x2 + shift) % W : x2;
                index[o++] = base + sy * W + sx;
            }
        }
    }
    return gather(x, std::move(index), x.shape());
}

template <typename T>
Tensor<T> roll_reverse(const Tensor<T>& y, Axis axis, int64_t shift) {
    if (y.rank() != 4) throw ConfigError("roll_reverse: expects [N,C,H,W]");
    const int64_t extent = axis == Axis::horizontal ? y.dim(3) : y.dim(2);
    if (shift < 0 || shift >= extent)
        throw ConfigError("roll_reverse: shift outside [0, extent)");
    return shift == 0 ? reshape(y, y.shape()) : roll(y, axis, extent - shift);
}

// [M,C,w,w] -> [M, (w/p)^2, C*p^2]: row-major patch grid, each token the
// flattened C x p x p sub-block.
template <typename T>
Tensor<T> patchify(const Tensor<T>& window, int64_t p) {
    if (window.rank() != 4 || window.dim(2) != window.dim(3))
        throw ConfigError("patchify: expects square windows [M,C,w,w]");
    const int64_t M = window.dim(0), C = window.dim(1), w = window.dim(2);
    if (p < 1 || w % p != 0)
        throw ConfigError("patchify: patch " + std::to_string(p) + " does not divide window " +
                          std::to_string(w));
    const int64_t g = w / p, tokens = g * g, d = C * p * p;
    std::vector<int64_t> index(static_cast<size_t>(M * tokens * d));
    size_t o = 0;
    for (int64_t m = 0; m < M; ++m)
        for (int64_t ty = 0; ty < g; ++ty)
            for (int64_t tx = 0; tx < g; ++tx)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t py = 0; py < p; ++py)
                        for (int64_t px = 0; px < p; ++px)
                            index[o++] = ((m * C + c) * w + ty * p + py) * w + tx * p + px;
    return gather(window, std::move(index), Shape{M, tokens, d});
}

// Exact inverse of patchify.
template <typename T>
Tensor<T> unpatchify(const Tensor<T>& tokens, int64_t channels, int64_t w, int64_t p) {
    if (tokens.rank() != 3) throw ConfigError("unpatchify: expects [M,T,d]");
    const int64_t M = tokens.dim(0), Tn = tokens.dim(1), d = tokens.dim(2);
    if (p < 1 || w % p != 0 || Tn != (w / p) * (w / p) || d != channels * p * p)
        throw ConfigError("unpatchify: token shape " + shape_str(tokens.shape()) +
                          " inconsistent with C=" + std::to_string(channels) + " w=" +
                          std::to_string(w) + " p=" + std::to_string(p));
    const int64_t g = w / p;
    std::vector<int64_t> index(static_cast<size_t>(M * channels * w * w));
    size_t o = 0;
    for (int64_t m = 0; m < M; ++m)
        for (int64_t c = 0; c < channels; ++c)
            for (int64_t y = 0; y < w; ++y) {
                const int64_t ty = y / p, py = y % p;
                for (int64_t x = 0; x < w; ++x) {
                    const int64_t tx = x / p, px = x % p;
                    const int64_t t = ty * g + tx;
                    index[o++] = (m * Tn + t) * d + c * p * p + py * p + px;
                }
            }
    return gather(tokens, std::move(index), Shape{M, channels, w, w});
}

// For each token on a (gh,gw) grid, concatenates the 3x3 neighborhood at
// offsets {-rate,0,+rate}^2 in row-major offset order; out-of-grid neighbors
// clamp to the edge. Offset index 4 is the token itself. With rate 3 the
// footprint spans 7x7 grid cells.
template <typename T>
Tensor<T> dilated_gather(const Tensor<T>& tokens, int64_t grid_h, int64_t grid_w, int64_t rate) {
    if (tokens.rank() != 3) throw UsageError("dilated_gather: expects [M,T,d]");
    const int64_t M = tokens.dim(0), Tn = tokens.dim(1), d = tokens.dim(2);
    if (Tn != grid_h * grid_w)
        throw UsageError("dilated_gather: token count " + std::to_string(Tn) +
                         " does not match grid " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w));
    if (rate < 1) throw ConfigError("dilated_gather: rate must be >= 1");

    std::vector<int64_t> index(static_cast<size_t>(M * Tn * 9 * d));
    size_t o = 0;
    for (int64_t m = 0; m < M; ++m)
        for (int64_t i = 0; i < grid_h; ++i)
            for (int64_t j = 0; j < grid_w; ++j)
                for (int64_t oy = -1; oy <= 1; ++oy)
                    for (int64_t ox = -1; ox <= 1; ++ox) {
                        const int64_t ii = std::clamp<int64_t>(i + oy * rate, 0, grid_h - 1);
                        const int64_t jj = std::clamp<int64_t>(j + ox * rate, 0, grid_w - 1);
                        const int64_t src = (m * Tn + ii * grid_w + jj) * d;
                        for (int64_t f = 0; f < d; ++f) index[o++] = src + f;
                    }
    return gather(tokens, std::move(index), Shape{M, Tn, 9 * d});
}

}  // namespace hwf
