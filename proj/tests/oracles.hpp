#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance checks: direct DFT monogenic signal, brute-force SSIM and small
// frame helpers.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "lusk/fusion/fusion.hpp"

namespace lusk::oracle {

inline constexpr double kPi = std::numbers::pi;

inline Frame random_frame(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Frame f(rows, cols);
    for (auto& v : f.px) v = d(rng);
    return f;
}

inline Frame transpose(const Frame& f)
{
    Frame t(f.cols, f.rows);
    for (std::size_t r = 0; r < f.rows; ++r)
        for (std::size_t c = 0; c < f.cols; ++c) t(c, r) = f(r, c);
    return t;
}

// O(N^4) DFT written from the definition.
inline std::vector<std::complex<double>> direct_dft(const std::vector<std::complex<double>>& in,
                                             std::size_t R, std::size_t C, double sign)
{
    std::vector<std::complex<double>> out(R * C);
    for (std::size_t u = 0; u < R; ++u)
        for (std::size_t v = 0; v < C; ++v) {
            std::complex<double> s = 0;
            for (std::size_t x = 0; x < R; ++x)
                for (std::size_t y = 0; y < C; ++y) {
                    const double ang = sign * 2 * kPi * (double(u * x) / R + double(v * y) / C);
                    s += in[x * C + y] * std::polar(1.0, ang);
                }
            out[u * C + v] = sign > 0 ? s / double(R * C) : s;
        }
    return out;
}

inline double freq(std::size_t k, std::size_t n)
{
    long kk = long(k);
    if (2 * k >= n) kk -= long(n);
    if (n % 2 == 1 && 2 * k == n) kk = long(k);
    return double(kk) / double(n);
}

// Monogenic triple through the direct DFT with independently written filters.
inline MonogenicTriple oracle_monogenic(const Frame& f, double lambda0, double sigma0)
{
    const std::size_t R = f.rows, C = f.cols;
    std::vector<std::complex<double>> in(R * C);
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = f.px[i];
    auto F = direct_dft(in, R, C, -1.0);
    std::vector<std::complex<double>> b(R * C), x(R * C), y(R * C);
    for (std::size_t u = 0; u < R; ++u)
        for (std::size_t v = 0; v < C; ++v) {
            const double wx = 2 * kPi * freq(u, R), wy = 2 * kPi * freq(v, C);
            const double w = std::sqrt(wx * wx + wy * wy);
            double g = 0;
            if (w > 0) {
                const double r = std::log(w / (2 * kPi / lambda0));
                g = std::exp(-r * r / (2 * std::log(sigma0) * std::log(sigma0)));
            }
            const auto i = u * C + v;
            b[i] = F[i] * g;
            x[i] = w > 0 ? b[i] * std::complex<double>(0, wx / w) : 0.0;
            y[i] = w > 0 ? b[i] * std::complex<double>(0, wy / w) : 0.0;
        }
    auto re = [&](const std::vector<std::complex<double>>& s) {
        auto t = direct_dft(s, R, C, +1.0);
        Frame out(R, C);
        for (std::size_t i = 0; i < t.size(); ++i) out.px[i] = t[i].real();
        return out;
    };
    return {re(b), re(x), re(y)};
}

inline double max_abs_diff(const Frame& a, const Frame& b)
{
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.px[i] - b.px[i]));
    return m;
}

inline std::size_t argmax_row_of_column_mean(const Frame& f)
{
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t r = 0; r < f.rows; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < f.cols; ++c) s += f(r, c);
        if (s > best_v) {
            best_v = s;
            best = r;
        }
    }
    return best;
}

inline Frame line_frame(std::size_t n, std::size_t line_row, double background = 0.05)
{
    Frame f(n, n, background);
    for (std::size_t c = 0; c < n; ++c) f(line_row, c) = 1.0;
    return f;
}

// Brute-force per-window SSIM with explicit 2-D weights.
inline double oracle_ssim(const Frame& a, const Frame& b)
{
    const std::size_t K = 11;
    std::vector<double> w1(K);
    double s = 0;
    for (std::size_t i = 0; i < K; ++i) {
        w1[i] = std::exp(-std::pow(double(i) - 5.0, 2) / (2 * 1.5 * 1.5));
        s += w1[i];
    }
    for (auto& v : w1) v /= s;
    const double C1 = 1e-4, C2 = 9e-4;
    double total = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + K <= a.rows; ++r)
        for (std::size_t c = 0; c + K <= a.cols; ++c) {
            double ma = 0, mb = 0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    ma += w1[i] * w1[j] * a(r + i, c + j);
                    mb += w1[i] * w1[j] * b(r + i, c + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    const double da = a(r + i, c + j) - ma, db = b(r + i, c + j) - mb;
                    va += w1[i] * w1[j] * da * da;
                    vb += w1[i] * w1[j] * db * db;
                    cov += w1[i] * w1[j] * da * db;
                }
            total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    return total / double(count);
}

} // namespace lusk::oracle
