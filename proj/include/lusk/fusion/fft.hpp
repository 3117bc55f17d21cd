#pragma once

// 2-D complex DFT through FFTW. Planning is serialized (the FFTW planner is
// not thread-safe); execution uses the new-array interface and may run
// concurrently.

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "lusk/error.hpp"

namespace lusk {

using Spectrum = std::vector<std::complex<double>>;

namespace detail {

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

} // namespace detail

// Unnormalized forward transform (sign -1) or normalized inverse (sign +1,
// divided by rows * cols).
inline Spectrum dft2d(const Spectrum& in, std::size_t rows, std::size_t cols, bool inverse)
{
    if (in.size() != rows * cols || rows == 0 || cols == 0) {
        throw ShapeError("dft2d: buffer of " + std::to_string(in.size()) + " values for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
    Spectrum src = in;
    Spectrum out(in.size());
    auto* s = reinterpret_cast<fftw_complex*>(src.data());
    auto* d = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_2d(int(rows), int(cols), s, d, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    if (inverse) {
        const double scale = 1.0 / double(rows * cols);
        for (auto& v : out) v *= scale;
    }
    return out;
}

} // namespace lusk
