#pragma once

// Synthetic lung-ultrasound videos with known landmark positions: a moving
// pleura band, A-line reverberations at multiples of the pleura depth and
// drifting B-line comet tails, under a fixed multiplicative speckle field.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/image.hpp"
#include "lusk/kv.hpp"

namespace lusk {

struct BLineSpec {
    double position = 0.6;    // lateral, normalized [0, 1]
    double drift = 0.002;     // normalized width per frame
    double width = 2.0;       // Gaussian std, pixels
    double brightness = 0.55;

    bool operator==(const BLineSpec&) const = default;
};

struct SceneSpec {
    std::size_t frames = 40;
    std::size_t size = 64;
    double pleura_depth = 0.25;  // normalized depth of the pleura at rest
    double amplitude = 0.03;     // normalized depth
    double frequency = 0.05;     // cycles per frame
    double pleura_brightness = 0.9;
    double pleura_thickness = 1.0;  // Gaussian std, pixels
    double tissue_level = 0.2;      // soft tissue above the pleura
    double background_level = 0.05;
    std::size_t a_line_count = 2;
    double a_line_decay = 0.5;
    std::vector<BLineSpec> b_lines{BLineSpec{}};
    double speckle_strength = 0.3;
    bool wrap_b_lines = false;  // default clamps drifting B-lines at the edges
    std::uint64_t seed = 1;

    void validate() const
    {
        auto unit = [](double v, const char* what) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ConfigError(std::string("scene: ") + what + " must lie in [0,1], got " + format_double(v));
            }
        };
        if (frames < 1) throw ConfigError("scene: frames must be >= 1");
        if (size < 16) throw ConfigError("scene: size must be >= 16, got " + std::to_string(size));
        if (!(pleura_depth > 0.15 && pleura_depth < 0.4)) {
            throw ConfigError("scene: pleura_depth must lie in (0.15, 0.4), got " + format_double(pleura_depth));
        }
        if (!(amplitude >= 0.0)) throw ConfigError("scene: amplitude must be >= 0");
        if (!(pleura_depth + amplitude < 0.5)) {
            throw ConfigError("scene: pleura_depth + amplitude must stay below 0.5, got " +
                              format_double(pleura_depth + amplitude));
        }
        if (!std::isfinite(frequency)) throw ConfigError("scene: frequency must be finite");
        unit(pleura_brightness, "pleura_brightness");
        unit(tissue_level, "tissue_level");
        unit(background_level, "background_level");
        unit(a_line_decay, "a_line_decay");
        unit(speckle_strength, "speckle_strength");
        if (!(pleura_thickness > 0.0)) throw ConfigError("scene: pleura_thickness must be > 0");
        for (const auto& b : b_lines) {
            unit(b.position, "b_line position");
            unit(b.brightness, "b_line brightness");
            if (!(b.width > 0.0)) throw ConfigError("scene: b_line width must be > 0");
            if (!std::isfinite(b.drift)) throw ConfigError("scene: b_line drift must be finite");
        }
    }

    bool operator==(const SceneSpec&) const = default;
};

struct FrameTruth {
    long pleura_row = 0;
    std::vector<long> a_line_rows;
    std::vector<long> b_line_cols;

    bool operator==(const FrameTruth&) const = default;
};

using GroundTruth = std::vector<FrameTruth>;

struct Video {
    std::vector<Frame> frames;
    GroundTruth truth;
};

// Pleura centre in pixels at frame t (continuous).
inline double pleura_center(const SceneSpec& s, std::size_t t)
{
    const double p = s.pleura_depth + s.amplitude * std::sin(2 * std::numbers::pi * s.frequency * double(t));
    return p * double(s.size - 1);
}

inline double b_line_center(const SceneSpec& s, const BLineSpec& b, std::size_t t)
{
    const double span = double(s.size - 1);
    double x = (b.position + b.drift * double(t)) * span;
    if (s.wrap_b_lines) {
        x = std::fmod(x, span + 1);
        if (x < 0) x += span + 1;
    } else {
        x = std::clamp(x, 0.0, span);
    }
    return x;
}

// Multiplicative speckle with mean 1: Rayleigh magnitude of two unit
// normals, normalized by its mean sqrt(pi / 2).
inline std::vector<double> speckle_field(std::size_t n, double strength, std::uint64_t seed)
{
    std::vector<double> out(n, 1.0);
    if (strength == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double mean = std::sqrt(std::numbers::pi / 2);
    for (auto& v : out) {
        const double a = normal(rng), b = normal(rng);
        v = 1.0 + strength * (std::hypot(a, b) / mean - 1.0);
    }
    return out;
}

inline Video generate(const SceneSpec& s)
{
    s.validate();
    const std::size_t n = s.size;
    const auto speckle = speckle_field(n * n, s.speckle_strength, s.seed);
    Video v;
    for (std::size_t t = 0; t < s.frames; ++t) {
        const double y = pleura_center(s, t);
        FrameTruth truth;
        truth.pleura_row = std::lround(y);
        std::vector<double> profile(n);
        const double two_var = 2 * s.pleura_thickness * s.pleura_thickness;
        for (std::size_t r = 0; r < n; ++r) {
            const double dr = double(r) - y;
            double level = double(r) < y ? s.tissue_level : s.background_level;
            level = std::max(level, s.pleura_brightness * std::exp(-dr * dr / two_var));
            double a_brightness = s.pleura_brightness;
            for (std::size_t m = 2; m < s.a_line_count + 2; ++m) {
                a_brightness *= s.a_line_decay;
                const double da = double(r) - double(m) * y;
                level = std::max(level, a_brightness * std::exp(-da * da / two_var));
            }
            profile[r] = level;
        }
        for (std::size_t m = 2; m < s.a_line_count + 2; ++m) {
            const long row = std::lround(double(m) * y);
            if (row < long(n)) truth.a_line_rows.push_back(row);
        }
        Frame f(n, n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) f(r, c) = profile[r];
        for (const auto& b : s.b_lines) {
            const double x = b_line_center(s, b, t);
            truth.b_line_cols.push_back(std::lround(x));
            const double bw = 2 * b.width * b.width;
            for (std::size_t r = 0; r < n; ++r) {
                if (double(r) < y) continue;
                for (std::size_t c = 0; c < n; ++c) {
                    const double dc = double(c) - x;
                    f(r, c) = std::max(f(r, c), b.brightness * std::exp(-dc * dc / bw));
                }
            }
        }
        for (std::size_t i = 0; i < f.size(); ++i) f.px[i] = std::clamp(f.px[i] * speckle[i], 0.0, 1.0);
        v.frames.push_back(std::move(f));
        v.truth.push_back(std::move(truth));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Dataset directories: frame_%05d.pgm plus truth.txt with one line per frame
//   <pleura_row> <n_a> <a_rows...> <n_b> <b_cols...>

inline constexpr const char* kTruthFile = "truth.txt";
inline constexpr const char* kTruthHeader = "# pleura_row n_a_lines a_line_rows... n_b_lines b_line_cols...";

inline std::string frame_filename(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05zu.pgm", i);
    return buf;
}

inline void save_truth(const std::string& path, const GroundTruth& truth)
{
    std::ofstream os(path);
    if (!os) throw DataError(path + ": cannot open for writing");
    os << kTruthHeader << '\n';
    for (const auto& t : truth) {
        os << t.pleura_row << ' ' << t.a_line_rows.size();
        for (auto r : t.a_line_rows) os << ' ' << r;
        os << ' ' << t.b_line_cols.size();
        for (auto c : t.b_line_cols) os << ' ' << c;
        os << '\n';
    }
    if (!os.flush()) throw DataError(path + ": write failed");
}

inline GroundTruth load_truth(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw DataError(path + ": cannot open");
    GroundTruth out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream in(line);
        FrameTruth t;
        std::size_t na = 0, nb = 0;
        auto fail = [&]() { return DataError(path + ":" + std::to_string(lineno) + ": malformed truth line"); };
        if (!(in >> t.pleura_row >> na)) throw fail();
        t.a_line_rows.resize(na);
        for (auto& r : t.a_line_rows)
            if (!(in >> r)) throw fail();
        if (!(in >> nb)) throw fail();
        t.b_line_cols.resize(nb);
        for (auto& c : t.b_line_cols)
            if (!(in >> c)) throw fail();
        std::string extra;
        if (in >> extra) throw fail();
        out.push_back(std::move(t));
    }
    return out;
}

inline void save_dataset(const Video& v, const std::string& dir)
{
    if (v.frames.size() != v.truth.size()) {
        throw ShapeError("save_dataset: " + std::to_string(v.frames.size()) + " frames but " +
                         std::to_string(v.truth.size()) + " truth records");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(dir + ": cannot create directory (" + ec.message() + ")");
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
        write_pgm((std::filesystem::path(dir) / frame_filename(i)).string(), v.frames[i]);
    }
    save_truth((std::filesystem::path(dir) / kTruthFile).string(), v.truth);
}

// Frames of a directory without truth: frame_00000.pgm, frame_00001.pgm, ...
// up to the first missing index.
inline std::vector<Frame> load_frames(const std::string& dir)
{
    std::vector<Frame> out;
    for (std::size_t i = 0;; ++i) {
        const auto path = std::filesystem::path(dir) / frame_filename(i);
        if (!std::filesystem::exists(path)) break;
        out.push_back(read_pgm(path.string()));
    }
    if (out.empty()) throw DataError(dir + ": no frame_00000.pgm found");
    return out;
}

inline Video load_dataset(const std::string& dir)
{
    Video v;
    v.truth = load_truth((std::filesystem::path(dir) / kTruthFile).string());
    for (std::size_t i = 0; i < v.truth.size(); ++i) {
        const auto path = std::filesystem::path(dir) / frame_filename(i);
        if (!std::filesystem::exists(path)) {
            throw DataError(dir + ": frame " + std::to_string(i) + " (" + frame_filename(i) + ") is missing");
        }
        v.frames.push_back(read_pgm(path.string()));
    }
    return v;
}

// ---------------------------------------------------------------------------
// key=value form. B-lines are written as
//   b_lines=position:drift:width:brightness;position:drift:width:brightness

inline std::string format_b_lines(const std::vector<BLineSpec>& bs)
{
    std::string s;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        s += (i ? ";" : "") + format_double(bs[i].position) + ":" + format_double(bs[i].drift) + ":" +
             format_double(bs[i].width) + ":" + format_double(bs[i].brightness);
    }
    return s.empty() ? "none" : s;
}

inline std::vector<BLineSpec> parse_b_lines(const KvEntry& e, const std::string& source)
{
    std::vector<BLineSpec> out;
    if (e.value == "none" || e.value.empty()) return out;
    std::istringstream in(e.value);
    std::string item;
    while (std::getline(in, item, ';')) {
        std::vector<double> f;
        std::istringstream parts(item);
        std::string part;
        while (std::getline(parts, part, ':')) f.push_back(parse_double({e.key, trim(part), e.line}, source));
        if (f.size() != 4) {
            throw ConfigError(where(e, source) + ": b_lines entry '" + item +
                              "' must be position:drift:width:brightness");
        }
        out.push_back({f[0], f[1], f[2], f[3]});
    }
    return out;
}

inline void write_kv(const SceneSpec& s, KvTable& t)
{
    t.set("frames", std::to_string(s.frames));
    t.set("size", std::to_string(s.size));
    t.set("pleura_depth", format_double(s.pleura_depth));
    t.set("amplitude", format_double(s.amplitude));
    t.set("frequency", format_double(s.frequency));
    t.set("pleura_brightness", format_double(s.pleura_brightness));
    t.set("pleura_thickness", format_double(s.pleura_thickness));
    t.set("tissue_level", format_double(s.tissue_level));
    t.set("background_level", format_double(s.background_level));
    t.set("a_line_count", std::to_string(s.a_line_count));
    t.set("a_line_decay", format_double(s.a_line_decay));
    t.set("b_lines", format_b_lines(s.b_lines));
    t.set("speckle_strength", format_double(s.speckle_strength));
    t.set("wrap_b_lines", format_bool(s.wrap_b_lines));
    t.set("scene_seed", std::to_string(s.seed));
}

inline bool apply_entry(SceneSpec& s, const KvEntry& e, const std::string& source)
{
    if (e.key == "frames") s.frames = parse_count(e, source);
    else if (e.key == "size") s.size = parse_count(e, source);
    else if (e.key == "pleura_depth") s.pleura_depth = parse_double(e, source);
    else if (e.key == "amplitude") s.amplitude = parse_double(e, source);
    else if (e.key == "frequency") s.frequency = parse_double(e, source);
    else if (e.key == "pleura_brightness") s.pleura_brightness = parse_double(e, source);
    else if (e.key == "pleura_thickness") s.pleura_thickness = parse_double(e, source);
    else if (e.key == "tissue_level") s.tissue_level = parse_double(e, source);
    else if (e.key == "background_level") s.background_level = parse_double(e, source);
    else if (e.key == "a_line_count") s.a_line_count = parse_count(e, source);
    else if (e.key == "a_line_decay") s.a_line_decay = parse_double(e, source);
    else if (e.key == "b_lines") s.b_lines = parse_b_lines(e, source);
    else if (e.key == "speckle_strength") s.speckle_strength = parse_double(e, source);
    else if (e.key == "wrap_b_lines") s.wrap_b_lines = parse_bool(e, source);
    else if (e.key == "scene_seed") s.seed = std::uint64_t(parse_count(e, source));
    else return false;
    return true;
}

} // namespace lusk
