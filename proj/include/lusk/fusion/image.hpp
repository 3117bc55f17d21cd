#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lusk/error.hpp"

namespace lusk {

// Single-channel row-major image. Row index is depth.
template <typename T>
struct Image {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> px;

    Image() = default;
    Image(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), px(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return px[r * cols + c]; }
    T operator()(std::size_t r, std::size_t c) const { return px[r * cols + c]; }
    std::size_t size() const { return px.size(); }
    bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
};

using Frame = Image<double>;

inline std::string shape_string(const Frame& f)
{
    return std::to_string(f.rows) + "x" + std::to_string(f.cols);
}

// Bilinear resampling with half-pixel centres.
inline Frame resize_bilinear(const Frame& in, std::size_t rows, std::size_t cols)
{
    if (in.rows == 0 || in.cols == 0 || rows == 0 || cols == 0) {
        throw ShapeError("resize_bilinear: empty image");
    }
    if (in.rows == rows && in.cols == cols) return in;
    Frame out(rows, cols);
    const double sy = double(in.rows) / double(rows), sx = double(in.cols) / double(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(in.rows - 1));
        const std::size_t y0 = std::size_t(y), y1 = std::min(y0 + 1, in.rows - 1);
        const double fy = y - double(y0);
        for (std::size_t c = 0; c < cols; ++c) {
            const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(in.cols - 1));
            const std::size_t x0 = std::size_t(x), x1 = std::min(x0 + 1, in.cols - 1);
            const double fx = x - double(x0);
            out(r, c) = (1 - fy) * ((1 - fx) * in(y0, x0) + fx * in(y0, x1)) +
                        fy * ((1 - fx) * in(y1, x0) + fx * in(y1, x1));
        }
    }
    return out;
}

// Rescales to [0, 1]; a constant image maps to all zeros.
inline void minmax_normalize(std::vector<double>& v)
{
    if (v.empty()) return;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = *lo, b = *hi;
    if (!(b > a)) {
        std::fill(v.begin(), v.end(), 0.0);
        return;
    }
    for (auto& x : v) x = (x - a) / (b - a);
}

// ---------------------------------------------------------------------------
// Binary PGM (P5). 8-bit samples map to [0, 1] by division by maxval.

namespace detail {

inline void skip_pgm_space(std::istream& is)
{
    while (true) {
        int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            return;
        }
    }
}

} // namespace detail

inline Frame read_pgm(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(path + ": cannot open");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw DataError(path + ": not a binary PGM (P5)");
    std::size_t w = 0, h = 0;
    unsigned maxval = 0;
    detail::skip_pgm_space(is);
    is >> w;
    detail::skip_pgm_space(is);
    is >> h;
    detail::skip_pgm_space(is);
    is >> maxval;
    if (!is || w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
        throw DataError(path + ": corrupt PGM header");
    }
    is.get();
    Frame f(h, w);
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> buf(w * h * bytes);
    if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()))) {
        throw DataError(path + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < w * h; ++i) {
        const unsigned v = bytes == 1 ? buf[i] : (unsigned(buf[2 * i]) << 8) | buf[2 * i + 1];
        f.px[i] = std::min(1.0, double(v) / double(maxval));
    }
    return f;
}

inline std::uint8_t to_u8(double v)
{
    if (!(v > 0.0)) return 0;
    return static_cast<std::uint8_t>(std::lround(std::min(v, 1.0) * 255.0));
}

inline void write_pgm(const std::string& path, const Frame& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    os << "P5\n" << f.cols << ' ' << f.rows << "\n255\n";
    std::vector<unsigned char> buf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) buf[i] = to_u8(f.px[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!os.flush()) throw DataError(path + ": write failed");
}

} // namespace lusk
