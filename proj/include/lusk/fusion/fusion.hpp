#pragma once

// Acoustic feature fusion: log-Gabor bandpass, monogenic signal, local phase,
// phase symmetry and integrated backscatter, fused into one map per
// wavelength. Also depth attenuation (TGA) and the normalized-grayscale
// alternative input stack.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/fft.hpp"
#include "lusk/fusion/image.hpp"
#include "lusk/tensor/checkpoint.hpp"

namespace lusk {

enum class EnergyDenominator { squared_energy, sqrt_energy };

inline std::string to_string(EnergyDenominator m)
{
    return m == EnergyDenominator::squared_energy ? "squared_energy" : "sqrt_energy";
}

// Orientation of the local-phase map. `line` puts its maximum on bright
// symmetric features (1 + atan(m1 / odd)); `edge` is the complement
// (1 - atan(m1 / odd)), lowest on bright lines and highest on dark ones.
enum class LocalPhaseMode { line, edge };

inline std::string to_string(LocalPhaseMode m) { return m == LocalPhaseMode::line ? "line" : "edge"; }

struct FusionConfig {
    double sigma0 = 0.55;
    std::vector<double> lambdas{3, 6, 9, 12, 15, 18, 21, 24, 27, 30};
    double thresh = 0.01;
    double epsilon = 1e-6;
    double attenuation_a = 1.5;
    EnergyDenominator denominator = EnergyDenominator::sqrt_energy;
    LocalPhaseMode local_phase_mode = LocalPhaseMode::line;

    void validate() const
    {
        if (!(sigma0 > 0.0 && sigma0 < 1.0)) {
            throw ConfigError("fusion: sigma0 must lie in (0,1), got " + std::to_string(sigma0));
        }
        if (lambdas.empty()) throw ConfigError("fusion: lambdas is empty");
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] > 2.0)) {
                throw ConfigError("fusion: wavelength " + std::to_string(lambdas[i]) +
                                  " is not above the 2-pixel Nyquist limit");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (lambdas[j] == lambdas[i]) {
                    throw ConfigError("fusion: wavelength " + std::to_string(lambdas[i]) + " is repeated");
                }
            }
        }
        if (!(thresh >= 0.0)) throw ConfigError("fusion: thresh must be >= 0");
        if (!(epsilon > 0.0)) throw ConfigError("fusion: epsilon must be > 0");
        if (!(attenuation_a >= 0.0)) throw ConfigError("fusion: attenuation_a must be >= 0");
    }

    bool operator==(const FusionConfig&) const = default;
};

struct MonogenicTriple {
    Frame m1, m2, m3;
};

// One map per wavelength (or per normalization level for norm_stack).
struct FeatureStack {
    std::vector<Frame> channels;

    std::size_t size() const { return channels.size(); }
    std::size_t rows() const { return channels.empty() ? 0 : channels[0].rows; }
    std::size_t cols() const { return channels.empty() ? 0 : channels[0].cols; }
};

// ---------------------------------------------------------------------------

// out(x, y) = frame(x, y) * exp(-a * d(x)), d = row / (rows - 1).
inline Frame tga(const Frame& frame, double a)
{
    if (!(a >= 0.0)) throw std::invalid_argument("tga: attenuation factor must be >= 0");
    Frame out = frame;
    if (a == 0.0) return out;
    for (std::size_t r = 0; r < frame.rows; ++r) {
        const double d = frame.rows > 1 ? double(r) / double(frame.rows - 1) : 0.0;
        const double g = std::exp(-a * d);
        for (std::size_t c = 0; c < frame.cols; ++c) out(r, c) = frame(r, c) * g;
    }
    return out;
}

// Cumulative down-column energy, divided by the column total. Zero columns
// stay zero.
inline Frame ibs(const Frame& frame)
{
    Frame out(frame.rows, frame.cols);
    for (std::size_t c = 0; c < frame.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < frame.rows; ++r) {
            acc += frame(r, c) * frame(r, c);
            out(r, c) = acc;
        }
        if (acc > 0.0) {
            for (std::size_t r = 0; r < frame.rows; ++r) out(r, c) /= acc;
        }
    }
    return out;
}

// Signed DFT frequency in cycles per sample (numpy fftfreq convention).
inline double dft_frequency(std::size_t k, std::size_t n)
{
    return (k < (n + 1) / 2) ? double(k) / double(n) : double(long(k) - long(n)) / double(n);
}

// Log-Gabor gain at radial frequency |omega| (radians per sample).
inline double log_gabor_gain(double omega, double lambda0, double sigma0)
{
    if (omega <= 0.0) return 0.0;
    const double omega0 = 2.0 * std::numbers::pi / lambda0;
    const double l = std::log(omega / omega0);
    const double s = std::log(sigma0);
    return std::exp(-(l * l) / (2.0 * s * s));
}

namespace detail {

inline void check_filter_args(double lambda0, double sigma0)
{
    if (!(lambda0 > 2.0)) {
        throw std::invalid_argument("log-Gabor: wavelength " + std::to_string(lambda0) +
                                    " is not above the 2-pixel Nyquist limit");
    }
    if (!(sigma0 > 0.0 && sigma0 < 1.0)) {
        throw std::invalid_argument("log-Gabor: sigma0 must lie in (0,1), got " + std::to_string(sigma0));
    }
}

inline Spectrum forward_spectrum(const Frame& frame)
{
    if (frame.size() == 0) throw ShapeError("fusion: empty frame");
    Spectrum s(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) s[i] = frame.px[i];
    return dft2d(s, frame.rows, frame.cols, false);
}

inline Frame real_part(const Spectrum& s, std::size_t rows, std::size_t cols)
{
    Frame f(rows, cols);
    for (std::size_t i = 0; i < s.size(); ++i) f.px[i] = s[i].real();
    return f;
}

} // namespace detail

// Monogenic triple from a precomputed forward spectrum of the frame.
inline MonogenicTriple monogenic_from_spectrum(const Spectrum& spectrum, std::size_t rows,
                                               std::size_t cols, double lambda0, double sigma0)
{
    detail::check_filter_args(lambda0, sigma0);
    Spectrum band(spectrum.size()), rx(spectrum.size()), ry(spectrum.size());
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t u = 0; u < rows; ++u) {
        const double wx = 2.0 * std::numbers::pi * dft_frequency(u, rows);
        for (std::size_t v = 0; v < cols; ++v) {
            const double wy = 2.0 * std::numbers::pi * dft_frequency(v, cols);
            const double w = std::hypot(wx, wy);
            const std::size_t i = u * cols + v;
            band[i] = spectrum[i] * log_gabor_gain(w, lambda0, sigma0);
            if (w > 0.0) {
                rx[i] = band[i] * (I * (wx / w));
                ry[i] = band[i] * (I * (wy / w));
            }
        }
    }
    return MonogenicTriple{detail::real_part(dft2d(band, rows, cols, true), rows, cols),
                           detail::real_part(dft2d(rx, rows, cols, true), rows, cols),
                           detail::real_part(dft2d(ry, rows, cols, true), rows, cols)};
}

// Bandpassed frame (m1 of the monogenic triple).
inline Frame log_gabor_response(const Frame& frame, double lambda0, double sigma0)
{
    detail::check_filter_args(lambda0, sigma0);
    Spectrum s = detail::forward_spectrum(frame);
    for (std::size_t u = 0; u < frame.rows; ++u) {
        const double wx = 2.0 * std::numbers::pi * dft_frequency(u, frame.rows);
        for (std::size_t v = 0; v < frame.cols; ++v) {
            const double wy = 2.0 * std::numbers::pi * dft_frequency(v, frame.cols);
            s[u * frame.cols + v] *= log_gabor_gain(std::hypot(wx, wy), lambda0, sigma0);
        }
    }
    return detail::real_part(dft2d(s, frame.rows, frame.cols, true), frame.rows, frame.cols);
}

inline MonogenicTriple monogenic(const Frame& frame, double lambda0, double sigma0)
{
    detail::check_filter_args(lambda0, sigma0);
    return monogenic_from_spectrum(detail::forward_spectrum(frame), frame.rows, frame.cols, lambda0, sigma0);
}

// 1 -/+ atan(m1 / (odd + eps)) before normalization.
inline Frame local_phase_raw(const MonogenicTriple& m, LocalPhaseMode mode = LocalPhaseMode::line,
                             double eps = 1e-6)
{
    const double sign = mode == LocalPhaseMode::line ? 1.0 : -1.0;
    Frame out(m.m1.rows, m.m1.cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double odd = std::hypot(m.m2.px[i], m.m3.px[i]);
        out.px[i] = 1.0 + sign * std::atan(m.m1.px[i] / (odd + eps));
    }
    return out;
}

inline Frame local_phase(const MonogenicTriple& m, LocalPhaseMode mode = LocalPhaseMode::line,
                         double eps = 1e-6)
{
    Frame out = local_phase_raw(m, mode, eps);
    minmax_normalize(out.px);
    return out;
}

inline Frame phase_symmetry_raw(const MonogenicTriple& m, double thresh,
                                EnergyDenominator mode = EnergyDenominator::sqrt_energy,
                                double eps = 1e-6)
{
    if (!(thresh >= 0.0)) throw std::invalid_argument("phase_symmetry: thresh must be >= 0");
    Frame out(m.m1.rows, m.m1.cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = m.m1.px[i], b = m.m2.px[i], c = m.m3.px[i];
        const double even = std::abs(a);
        const double odd = std::hypot(b, c);
        const double num = std::max(even - odd - thresh, 0.0);
        const double energy_sq = a * a + b * b + c * c;
        const double den = (mode == EnergyDenominator::squared_energy ? energy_sq : std::sqrt(energy_sq)) + eps;
        out.px[i] = num / den;
    }
    return out;
}

inline Frame phase_symmetry(const MonogenicTriple& m, double thresh,
                            EnergyDenominator mode = EnergyDenominator::sqrt_energy,
                            double eps = 1e-6)
{
    Frame out = phase_symmetry_raw(m, thresh, mode, eps);
    minmax_normalize(out.px);
    return out;
}

// One fused channel per wavelength: LP * FS * (1 - IBS), each min-max
// normalized, in the order of cfg.lambdas.
inline FeatureStack fuse(const Frame& frame, const FusionConfig& cfg)
{
    for (double l : cfg.lambdas) detail::check_filter_args(l, cfg.sigma0);
    const Spectrum spectrum = detail::forward_spectrum(frame);
    const Frame backscatter = ibs(frame);
    FeatureStack stack;
    stack.channels.reserve(cfg.lambdas.size());
    for (double lambda0 : cfg.lambdas) {
        const auto m = monogenic_from_spectrum(spectrum, frame.rows, frame.cols, lambda0, cfg.sigma0);
        const Frame lp = local_phase(m, cfg.local_phase_mode, cfg.epsilon);
        const Frame fs = phase_symmetry(m, cfg.thresh, cfg.denominator, cfg.epsilon);
        Frame t(frame.rows, frame.cols);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.px[i] = lp.px[i] * fs.px[i] * (1.0 - backscatter.px[i]);
        }
        minmax_normalize(t.px);
        stack.channels.push_back(std::move(t));
    }
    return stack;
}

inline constexpr std::size_t kNormStackChannels = 10;
inline constexpr double kNormStackSigma = 0.5;

inline double norm_stack_mean(std::size_t i)
{
    return 0.3 + 0.4 * double(i) / double(kNormStackChannels - 1);
}

// Ten shifted/scaled copies of the frame: (frame - mu_i) / 0.5.
inline FeatureStack norm_stack(const Frame& frame)
{
    FeatureStack stack;
    for (std::size_t i = 0; i < kNormStackChannels; ++i) {
        Frame ch(frame.rows, frame.cols);
        const double mu = norm_stack_mean(i);
        for (std::size_t k = 0; k < frame.size(); ++k) ch.px[k] = (frame.px[k] - mu) / kNormStackSigma;
        stack.channels.push_back(std::move(ch));
    }
    return stack;
}

// ---------------------------------------------------------------------------
// FeatureStack files use the tensor record format, one record per channel.

inline std::vector<TensorRecord> to_records(const FeatureStack& stack)
{
    std::vector<TensorRecord> recs;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        const auto& ch = stack.channels[i];
        char name[32];
        std::snprintf(name, sizeof(name), "channel_%02zu", i);
        recs.push_back(TensorRecord{name, {ch.rows, ch.cols},
                                    std::vector<float>(ch.px.begin(), ch.px.end())});
    }
    return recs;
}

inline FeatureStack stack_from_records(const std::vector<TensorRecord>& recs)
{
    FeatureStack stack;
    for (const auto& r : recs) {
        if (r.dims.size() != 2) throw DataError("feature stack record '" + r.name + "' is not 2-D");
        Frame f(r.dims[0], r.dims[1]);
        std::copy(r.values.begin(), r.values.end(), f.px.begin());
        if (!stack.channels.empty() && !f.same_shape(stack.channels[0])) {
            throw DataError("feature stack record '" + r.name + "' has a different shape");
        }
        stack.channels.push_back(std::move(f));
    }
    return stack;
}

} // namespace lusk
