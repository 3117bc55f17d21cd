#pragma once

// Differentiable operators. Tensors up to rank 4 (N, C, H, W) are supported;
// elementwise binaries broadcast with numpy right-aligned rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lusk/tensor/gemm.hpp"
#include "lusk/tensor/tensor.hpp"

namespace lusk {

namespace detail {

using Dims4 = std::array<std::size_t, 4>;

inline Dims4 pad4(const Shape& s, const char* op)
{
    if (s.size() > 4) {
        throw ShapeError(std::string(op) + ": rank " + std::to_string(s.size()) +
                         " exceeds the supported rank 4, shape " + to_string(s));
    }
    Dims4 d{1, 1, 1, 1};
    std::copy(s.begin(), s.end(), d.begin() + (4 - s.size()));
    return d;
}

// Strides of `in` when iterated over `out`; 0 on broadcast axes.
inline Dims4 broadcast_strides(const Dims4& in, const Dims4& out)
{
    Dims4 s{};
    std::size_t acc = 1;
    for (int i = 3; i >= 0; --i) {
        s[i] = (in[i] == 1 && out[i] != 1) ? 0 : acc;
        acc *= in[i];
    }
    return s;
}

template <typename F>
void for_each4(const Dims4& d, const Dims4& sa, const Dims4& sb, F&& f)
{
    std::size_t o = 0;
    for (std::size_t i0 = 0; i0 < d[0]; ++i0)
        for (std::size_t i1 = 0; i1 < d[1]; ++i1)
            for (std::size_t i2 = 0; i2 < d[2]; ++i2) {
                std::size_t a = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                std::size_t b = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                for (std::size_t i3 = 0; i3 < d[3]; ++i3) {
                    f(o++, a + i3 * sa[3], b + i3 * sb[3]);
                }
            }
}

inline Shape broadcast_shape(const char* op, const Shape& a, const Shape& b)
{
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " +
                             to_string(b) + " do not broadcast");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

inline void require_rank(const char* op, const Shape& s, std::size_t rank)
{
    if (s.size() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(s));
    }
}

// f(a, b) with partials ga(a, b), gb(a, b).
template <typename T, typename F, typename GA, typename GB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, GA ga, GB gb)
{
    Shape out_shape = broadcast_shape(op, a.shape(), b.shape());
    const Dims4 o4 = pad4(out_shape, op);
    const Dims4 sa = broadcast_strides(pad4(a.shape(), op), o4);
    const Dims4 sb = broadcast_strides(pad4(b.shape(), op), o4);
    std::vector<T> out(numel(out_shape));
    const T* pa = a.values().data();
    const T* pb = b.values().data();
    const bool same = a.shape() == b.shape();
    if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
    } else {
        for_each4(o4, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            out[o] = f(pa[ia], pb[ib]);
        });
    }
    return Tensor<T>::from_op(
        std::move(out_shape), std::move(out), {a, b},
        [o4, sa, sb, same, ga, gb](Node<T>& self) {
            auto& A = *self.parents[0];
            auto& B = *self.parents[1];
            const T* g = self.grad.data();
            if (same) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    if (A.requires_grad) A.grad[i] += g[i] * ga(A.value[i], B.value[i]);
                    if (B.requires_grad) B.grad[i] += g[i] * gb(A.value[i], B.value[i]);
                }
                return;
            }
            for_each4(o4, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                if (A.requires_grad) A.grad[ia] += g[o] * ga(A.value[ia], B.value[ib]);
                if (B.requires_grad) B.grad[ib] += g[o] * gb(A.value[ia], B.value[ib]);
            });
        });
}

// f(x) with derivative df(x, y) where y = f(x).
template <typename T, typename F, typename DF>
Tensor<T> unary(const Tensor<T>& x, F f, DF df)
{
    std::vector<T> out(x.numel());
    const T* px = x.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(px[i]);
    return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [df](Node<T>& self) {
        auto& X = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            X.grad[i] += self.grad[i] * df(X.value[i], self.value[i]);
        }
    });
}

// Reduced shape: axes in `dims` collapse to 1 (keepdim).
inline Shape reduced_shape(const char* op, const Shape& s, const std::vector<std::size_t>& dims)
{
    Shape out = s;
    for (auto d : dims) {
        if (d >= s.size()) {
            throw ShapeError(std::string(op) + ": axis " + std::to_string(d) +
                             " out of range for shape " + to_string(s));
        }
        out[d] = 1;
    }
    return out;
}

template <typename T>
void im2col(const T* x, std::size_t C, std::size_t H, std::size_t W,
            std::size_t KH, std::size_t KW, std::size_t stride, std::size_t pad,
            std::size_t Ho, std::size_t Wo, T* col)
{
    const std::size_t P = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < KH; ++kh)
            for (std::size_t kw = 0; kw < KW; ++kw) {
                T* row = col + ((c * KH + kh) * KW + kw) * P;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const long ih = long(oh * stride + kh) - long(pad);
                    T* dst = row + oh * Wo;
                    if (ih < 0 || ih >= long(H)) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const T* src = x + (c * H + std::size_t(ih)) * W;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const long iw = long(ow * stride + kw) - long(pad);
                        dst[ow] = (iw < 0 || iw >= long(W)) ? T(0) : src[iw];
                    }
                }
            }
}

template <typename T>
void col2im(const T* col, std::size_t C, std::size_t H, std::size_t W,
            std::size_t KH, std::size_t KW, std::size_t stride, std::size_t pad,
            std::size_t Ho, std::size_t Wo, T* x)
{
    const std::size_t P = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < KH; ++kh)
            for (std::size_t kw = 0; kw < KW; ++kw) {
                const T* row = col + ((c * KH + kh) * KW + kw) * P;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const long ih = long(oh * stride + kh) - long(pad);
                    if (ih < 0 || ih >= long(H)) continue;
                    T* dst = x + (c * H + std::size_t(ih)) * W;
                    const T* src = row + oh * Wo;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const long iw = long(ow * stride + kw) - long(pad);
                        if (iw >= 0 && iw < long(W)) dst[iw] += src[ow];
                    }
                }
            }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary("add", a, b,
                          [](T x, T y) { return x + y; },
                          [](T, T) { return T(1); },
                          [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary("sub", a, b,
                          [](T x, T y) { return x - y; },
                          [](T, T) { return T(1); },
                          [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    return detail::binary("mul", a, b,
                          [](T x, T y) { return x * y; },
                          [](T, T y) { return y; },
                          [](T x, T) { return x; });
}

// scale * x + shift
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift)
{
    return detail::unary(x,
                         [=](T v) { return scale * v + shift; },
                         [=](T, T) { return scale; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    return detail::unary(x,
                         [](T v) { return v > T(0) ? v : T(0); },
                         [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x)
{
    return detail::unary(x,
                         [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                         [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x)
{
    return detail::unary(x,
                         [](T v) { return std::exp(v); },
                         [](T, T y) { return y; });
}

// Gradient passes where lo <= x <= hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi)
{
    return detail::unary(x,
                         [=](T v) { return std::clamp(v, lo, hi); },
                         [=](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

// Same values, no backward edge.
template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x)
{
    return Tensor<T>(x.shape(), std::vector<T>(x.values().begin(), x.values().end()), false);
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x)
{
    T s = T(0);
    for (T v : x.values()) s += v;
    return Tensor<T>::from_op(Shape{}, {s}, {x}, [](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        for (auto& g : X.grad) g += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x)
{
    return affine(sum(x), T(1) / T(x.numel()), T(0));
}

// Sum over the listed axes, keeping them as size-1 dimensions.
template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& dims)
{
    Shape out_shape = detail::reduced_shape("sum", x.shape(), dims);
    const auto i4 = detail::pad4(x.shape(), "sum");
    const auto so = detail::broadcast_strides(detail::pad4(out_shape, "sum"), i4);
    const detail::Dims4 si = detail::broadcast_strides(i4, i4);
    std::vector<T> out(numel(out_shape), T(0));
    const T* px = x.values().data();
    detail::for_each4(i4, si, so, [&](std::size_t, std::size_t ii, std::size_t io) {
        out[io] += px[ii];
    });
    return Tensor<T>::from_op(std::move(out_shape), std::move(out), {x},
                              [i4, si, so](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        detail::for_each4(i4, si, so, [&](std::size_t, std::size_t ii, std::size_t io) {
            X.grad[ii] += self.grad[io];
        });
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& dims)
{
    std::size_t count = 1;
    for (auto d : dims) count *= x.shape().at(d);
    return affine(sum(x, dims), T(1) / T(count), T(0));
}

// Max over the listed axes (keepdim); the gradient routes to the first maximum.
template <typename T>
Tensor<T> max(const Tensor<T>& x, const std::vector<std::size_t>& dims)
{
    Shape out_shape = detail::reduced_shape("max", x.shape(), dims);
    const auto i4 = detail::pad4(x.shape(), "max");
    const auto so = detail::broadcast_strides(detail::pad4(out_shape, "max"), i4);
    const detail::Dims4 si = detail::broadcast_strides(i4, i4);
    const std::size_t n_out = numel(out_shape);
    std::vector<T> out(n_out, -std::numeric_limits<T>::infinity());
    std::vector<std::size_t> arg(n_out, 0);
    std::vector<bool> set(n_out, false);
    const T* px = x.values().data();
    detail::for_each4(i4, si, so, [&](std::size_t, std::size_t ii, std::size_t io) {
        if (!set[io] || px[ii] > out[io]) {
            out[io] = px[ii];
            arg[io] = ii;
            set[io] = true;
        }
    });
    return Tensor<T>::from_op(std::move(out_shape), std::move(out), {x},
                              [arg = std::move(arg)](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        for (std::size_t o = 0; o < arg.size(); ++o) X.grad[arg[o]] += self.grad[o];
    });
}

// ---------------------------------------------------------------------------
// Linear algebra and convolution

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
    }
    const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    std::vector<T> out(M * N, T(0));
    detail::gemm_nn(M, N, K, a.values().data(), b.values().data(), out.data());
    return Tensor<T>::from_op(Shape{M, N}, std::move(out), {a, b},
                              [M, N, K](detail::Node<T>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        if (A.requires_grad) detail::gemm_nt(M, K, N, self.grad.data(), B.value.data(), A.grad.data());
        if (B.requires_grad) detail::gemm_tn(K, N, M, A.value.data(), self.grad.data(), B.grad.data());
    });
}

// x: [N, Ci, H, W], weight: [Co, Ci, KH, KW], bias: [Co] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t pad = 0)
{
    if (x.rank() != 4 || weight.rank() != 4 || x.dim(1) != weight.dim(1)) {
        throw ShapeError("conv2d: input " + to_string(x.shape()) +
                         " does not match kernel " + to_string(weight.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
        throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match kernel " +
                         to_string(weight.shape()));
    }
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    const std::size_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Co = weight.dim(0), KH = weight.dim(2), KW = weight.dim(3);
    if (H + 2 * pad < KH || W + 2 * pad < KW) {
        throw ShapeError("conv2d: kernel " + to_string(weight.shape()) +
                         " larger than padded input " + to_string(x.shape()));
    }
    const std::size_t Ho = (H + 2 * pad - KH) / stride + 1;
    const std::size_t Wo = (W + 2 * pad - KW) / stride + 1;
    const std::size_t P = Ho * Wo, Kc = Ci * KH * KW;

    std::vector<T> out(N * Co * P, T(0));
    std::vector<T> col(Kc * P);
    const T* w = weight.values().data();
    for (std::size_t n = 0; n < N; ++n) {
        detail::im2col(x.values().data() + n * Ci * H * W, Ci, H, W, KH, KW, stride, pad, Ho, Wo, col.data());
        T* o = out.data() + n * Co * P;
        detail::gemm_nn(Co, P, Kc, w, col.data(), o);
        if (bias.defined()) {
            for (std::size_t c = 0; c < Co; ++c) {
                const T bv = bias[c];
                for (std::size_t p = 0; p < P; ++p) o[c * P + p] += bv;
            }
        }
    }

    std::vector<Tensor<T>> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor<T>::from_op(
        Shape{N, Co, Ho, Wo}, std::move(out), std::move(inputs),
        [=](detail::Node<T>& self) {
            auto& X = *self.parents[0];
            auto& Wt = *self.parents[1];
            std::vector<T> col(Kc * P), dcol;
            if (X.requires_grad) dcol.resize(Kc * P);
            for (std::size_t n = 0; n < N; ++n) {
                const T* g = self.grad.data() + n * Co * P;
                if (Wt.requires_grad) {
                    detail::im2col(X.value.data() + n * Ci * H * W, Ci, H, W, KH, KW, stride, pad, Ho, Wo, col.data());
                    detail::gemm_nt(Co, Kc, P, g, col.data(), Wt.grad.data());
                }
                if (X.requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), T(0));
                    detail::gemm_tn(Kc, P, Co, Wt.value.data(), g, dcol.data());
                    detail::col2im(dcol.data(), Ci, H, W, KH, KW, stride, pad, Ho, Wo,
                                   X.grad.data() + n * Ci * H * W);
                }
                if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                    auto& B = *self.parents[2];
                    for (std::size_t c = 0; c < Co; ++c) {
                        T s = T(0);
                        for (std::size_t p = 0; p < P; ++p) s += g[c * P + p];
                        B.grad[c] += s;
                    }
                }
            }
        });
}

// Nearest-neighbour 2x upsampling of [N, C, H, W].
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x)
{
    detail::require_rank("upsample2x", x.shape(), 4);
    const std::size_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    std::vector<T> out(NC * 4 * H * W);
    const T* px = x.values().data();
    for (std::size_t p = 0; p < NC; ++p)
        for (std::size_t h = 0; h < 2 * H; ++h)
            for (std::size_t w = 0; w < 2 * W; ++w)
                out[(p * 2 * H + h) * 2 * W + w] = px[(p * H + h / 2) * W + w / 2];
    return Tensor<T>::from_op(Shape{x.dim(0), x.dim(1), 2 * H, 2 * W}, std::move(out), {x},
                              [NC, H, W](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        for (std::size_t p = 0; p < NC; ++p)
            for (std::size_t h = 0; h < 2 * H; ++h)
                for (std::size_t w = 0; w < 2 * W; ++w)
                    X.grad[(p * H + h / 2) * W + w / 2] += self.grad[(p * 2 * H + h) * 2 * W + w];
    });
}

// Per-sample, per-channel normalization over H x W, no affine terms.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5))
{
    detail::require_rank("instance_norm", x.shape(), 4);
    const std::size_t planes = x.dim(0) * x.dim(1), S = x.dim(2) * x.dim(3);
    std::vector<T> out(x.numel());
    std::vector<T> inv_std(planes);
    const T* px = x.values().data();
    for (std::size_t p = 0; p < planes; ++p) {
        const T* v = px + p * S;
        T m = T(0);
        for (std::size_t i = 0; i < S; ++i) m += v[i];
        m /= T(S);
        T var = T(0);
        for (std::size_t i = 0; i < S; ++i) var += (v[i] - m) * (v[i] - m);
        var /= T(S);
        inv_std[p] = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < S; ++i) out[p * S + i] = (v[i] - m) * inv_std[p];
    }
    return Tensor<T>::from_op(x.shape(), std::move(out), {x},
                              [planes, S, inv_std = std::move(inv_std)](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        for (std::size_t p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + p * S;
            const T* y = self.value.data() + p * S;
            T mg = T(0), mgy = T(0);
            for (std::size_t i = 0; i < S; ++i) {
                mg += g[i];
                mgy += g[i] * y[i];
            }
            mg /= T(S);
            mgy /= T(S);
            for (std::size_t i = 0; i < S; ++i) {
                X.grad[p * S + i] += inv_std[p] * (g[i] - mg - y[i] * mgy);
            }
        }
    });
}

// Softmax over H x W of every (n, c) plane.
template <typename T>
Tensor<T> spatial_softmax(const Tensor<T>& x)
{
    detail::require_rank("spatial_softmax", x.shape(), 4);
    const std::size_t planes = x.dim(0) * x.dim(1), S = x.dim(2) * x.dim(3);
    std::vector<T> out(x.numel());
    const T* px = x.values().data();
    for (std::size_t p = 0; p < planes; ++p) {
        const T* v = px + p * S;
        const T m = *std::max_element(v, v + S);
        T z = T(0);
        for (std::size_t i = 0; i < S; ++i) {
            out[p * S + i] = std::exp(v[i] - m);
            z += out[p * S + i];
        }
        for (std::size_t i = 0; i < S; ++i) out[p * S + i] /= z;
    }
    return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [planes, S](detail::Node<T>& self) {
        auto& X = *self.parents[0];
        for (std::size_t p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + p * S;
            const T* y = self.value.data() + p * S;
            T dotgy = T(0);
            for (std::size_t i = 0; i < S; ++i) dotgy += g[i] * y[i];
            for (std::size_t i = 0; i < S; ++i) X.grad[p * S + i] += y[i] * (g[i] - dotgy);
        }
    });
}

// Mean squared error over all elements; shapes must match exactly.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("mse: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ");
    }
    const std::size_t n = a.numel();
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = a[i] - b[i];
        s += d * d;
    }
    return Tensor<T>::from_op(Shape{}, {s / T(n)}, {a, b}, [n](detail::Node<T>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        const T k = T(2) * self.grad[0] / T(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = k * (A.value[i] - B.value[i]);
            if (A.requires_grad) A.grad[i] += d;
            if (B.requires_grad) B.grad[i] -= d;
        }
    });
}

// Concatenate rank-4 tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs)
{
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    std::size_t C = 0;
    for (const auto& t : xs) {
        detail::require_rank("concat_channels", t.shape(), 4);
        if (t.dim(0) != xs[0].dim(0) || t.dim(2) != xs[0].dim(2) || t.dim(3) != xs[0].dim(3)) {
            throw ShapeError("concat_channels: shapes " + to_string(xs[0].shape()) + " and " +
                             to_string(t.shape()) + " differ outside the channel axis");
        }
        C += t.dim(1);
    }
    const std::size_t N = xs[0].dim(0), S = xs[0].dim(2) * xs[0].dim(3);
    std::vector<T> out(N * C * S);
    std::vector<std::size_t> offsets;
    std::size_t c0 = 0;
    for (const auto& t : xs) {
        offsets.push_back(c0);
        const std::size_t Ct = t.dim(1);
        for (std::size_t n = 0; n < N; ++n) {
            std::copy_n(t.values().data() + n * Ct * S, Ct * S, out.data() + (n * C + c0) * S);
        }
        c0 += Ct;
    }
    return Tensor<T>::from_op(Shape{N, C, xs[0].dim(2), xs[0].dim(3)}, std::move(out), xs,
                              [N, C, S, offsets](detail::Node<T>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& X = *self.parents[k];
            if (!X.requires_grad) continue;
            const std::size_t Ct = X.shape[1];
            for (std::size_t n = 0; n < N; ++n) {
                const T* g = self.grad.data() + (n * C + offsets[k]) * S;
                T* d = X.grad.data() + n * Ct * S;
                for (std::size_t i = 0; i < Ct * S; ++i) d[i] += g[i];
            }
        }
    });
}

} // namespace lusk
