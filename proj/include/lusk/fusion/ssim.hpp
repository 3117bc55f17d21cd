#pragma once

// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
// evaluated over every fully contained window position.

#include <cmath>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/image.hpp"

namespace lusk {

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

inline std::vector<double> ssim_window_1d()
{
    std::vector<double> w(kSsimWindow);
    const double c = double(kSsimWindow / 2);
    double s = 0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        w[i] = std::exp(-(i - c) * (i - c) / (2 * kSsimSigma * kSsimSigma));
        s += w[i];
    }
    for (auto& v : w) v /= s;
    return w;
}

namespace detail {

// Separable 'valid' filtering of a row-major buffer.
inline std::vector<double> filter_valid(const std::vector<double>& in, std::size_t rows,
                                        std::size_t cols, const std::vector<double>& w)
{
    const std::size_t K = w.size(), oc = cols - K + 1, orows = rows - K + 1;
    std::vector<double> tmp(rows * oc), out(orows * oc);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < oc; ++c) {
            double s = 0;
            for (std::size_t k = 0; k < K; ++k) s += w[k] * in[r * cols + c + k];
            tmp[r * oc + c] = s;
        }
    for (std::size_t r = 0; r < orows; ++r)
        for (std::size_t c = 0; c < oc; ++c) {
            double s = 0;
            for (std::size_t k = 0; k < K; ++k) s += w[k] * tmp[(r + k) * oc + c];
            out[r * oc + c] = s;
        }
    return out;
}

} // namespace detail

// dynamic_range is L in C1 = (0.01 L)^2, C2 = (0.03 L)^2.
inline double ssim(const Frame& a, const Frame& b, double dynamic_range = 1.0)
{
    if (!a.same_shape(b)) {
        throw ShapeError("ssim: frame shapes " + shape_string(a) + " and " + shape_string(b) + " differ");
    }
    if (a.rows < kSsimWindow || a.cols < kSsimWindow) {
        throw ShapeError("ssim: frame " + shape_string(a) + " is smaller than the 11x11 window");
    }
    const double C1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double C2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    const auto w = ssim_window_1d();
    const std::size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.px[i] * a.px[i];
        bb[i] = b.px[i] * b.px[i];
        ab[i] = a.px[i] * b.px[i];
    }
    const auto mu_a = detail::filter_valid(a.px, a.rows, a.cols, w);
    const auto mu_b = detail::filter_valid(b.px, a.rows, a.cols, w);
    const auto e_aa = detail::filter_valid(aa, a.rows, a.cols, w);
    const auto e_bb = detail::filter_valid(bb, a.rows, a.cols, w);
    const auto e_ab = detail::filter_valid(ab, a.rows, a.cols, w);
    double total = 0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
        total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    return total / double(mu_a.size());
}

} // namespace lusk
