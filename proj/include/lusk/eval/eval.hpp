#pragma once

// Keypoint evaluation against synthetic ground truth: pleura detection
// accuracy, nearest-keypoint landmark distances and temporal jitter.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/kv.hpp"
#include "lusk/model/model.hpp"
#include "lusk/synth/synth.hpp"

namespace lusk {

using FrameKeypoints = std::vector<std::vector<Keypoint>>;

inline constexpr double kDefaultDelta = 5.0;
inline constexpr std::size_t kDefaultDeltaSize = 64;

// 5 px at 64x64, scaled with the frame size.
inline double default_delta(std::size_t frame_size)
{
    return kDefaultDelta * double(frame_size) / double(kDefaultDeltaSize);
}

struct DistanceStats {
    std::size_t count = 0;
    double mean = 0;
    double median = 0;

    bool operator==(const DistanceStats&) const = default;
};

struct EvalReport {
    double delta = kDefaultDelta;
    std::size_t frames_total = 0;
    std::size_t frames_pleura_correct = 0;
    double pleura_accuracy = 0;
    DistanceStats pleura;
    DistanceStats a_lines;
    DistanceStats b_lines;
    std::vector<double> jitter;

    bool operator==(const EvalReport&) const = default;
};

inline void require_aligned(const char* op, const FrameKeypoints& kps, const GroundTruth& truth)
{
    if (kps.size() != truth.size()) {
        throw DataError(std::string(op) + ": " + std::to_string(kps.size()) + " keypoint frames but " +
                        std::to_string(truth.size()) + " truth frames");
    }
    for (std::size_t t = 0; t < kps.size(); ++t) {
        if (kps[t].empty()) throw DataError(std::string(op) + ": frame " + std::to_string(t) + " has no keypoints");
    }
}

inline double nearest_row(const std::vector<Keypoint>& kps, double row)
{
    double best = INFINITY;
    for (const auto& k : kps) best = std::min(best, std::abs(k.row - row));
    return best;
}

inline double nearest_col(const std::vector<Keypoint>& kps, double col)
{
    double best = INFINITY;
    for (const auto& k : kps) best = std::min(best, std::abs(k.col - col));
    return best;
}

struct PleuraCount {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0;
};

// A frame is correct when some keypoint row lies within delta of the truth
// pleura row.
inline PleuraCount pleura_accuracy(const FrameKeypoints& kps, const GroundTruth& truth, double delta)
{
    if (!(delta > 0)) throw ConfigError("pleura_accuracy: delta must be > 0, got " + format_double(delta));
    require_aligned("pleura_accuracy", kps, truth);
    PleuraCount out;
    out.total = truth.size();
    for (std::size_t t = 0; t < truth.size(); ++t) {
        out.correct += nearest_row(kps[t], double(truth[t].pleura_row)) <= delta;
    }
    out.accuracy = out.total ? double(out.correct) / double(out.total) : 0.0;
    return out;
}

inline DistanceStats distance_stats(std::vector<double> d)
{
    DistanceStats s;
    s.count = d.size();
    if (d.empty()) return s;
    double sum = 0;
    for (double v : d) sum += v;
    s.mean = sum / double(d.size());
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size() / 2;
    s.median = d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]);
    return s;
}

struct LandmarkDistances {
    DistanceStats pleura;
    DistanceStats a_lines;
    DistanceStats b_lines;
};

// Rows for the pleura and A-lines, columns for B-lines; each truth landmark
// is matched to its nearest keypoint.
inline LandmarkDistances landmark_distance(const FrameKeypoints& kps, const GroundTruth& truth)
{
    require_aligned("landmark_distance", kps, truth);
    std::vector<double> pleura, a, b;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        pleura.push_back(nearest_row(kps[t], double(truth[t].pleura_row)));
        for (long r : truth[t].a_line_rows) a.push_back(nearest_row(kps[t], double(r)));
        for (long c : truth[t].b_line_cols) b.push_back(nearest_col(kps[t], double(c)));
    }
    return {distance_stats(pleura), distance_stats(a), distance_stats(b)};
}

// Mean displacement of each keypoint slot between consecutive frames.
inline std::vector<double> temporal_jitter(const FrameKeypoints& kps)
{
    if (kps.size() < 2) throw DataError("temporal_jitter: need at least 2 frames, got " + std::to_string(kps.size()));
    const std::size_t k = kps[0].size();
    std::vector<double> out(k, 0.0);
    for (std::size_t t = 1; t < kps.size(); ++t) {
        if (kps[t].size() != k) {
            throw DataError("temporal_jitter: frame " + std::to_string(t) + " has " + std::to_string(kps[t].size()) +
                            " keypoints, frame 0 has " + std::to_string(k));
        }
        for (std::size_t j = 0; j < k; ++j) {
            out[j] += std::hypot(kps[t][j].row - kps[t - 1][j].row, kps[t][j].col - kps[t - 1][j].col);
        }
    }
    for (double& v : out) v /= double(kps.size() - 1);
    return out;
}

inline EvalReport evaluate(const FrameKeypoints& kps, const GroundTruth& truth, double delta)
{
    EvalReport r;
    r.delta = delta;
    const auto p = pleura_accuracy(kps, truth, delta);
    r.frames_total = p.total;
    r.frames_pleura_correct = p.correct;
    r.pleura_accuracy = p.accuracy;
    const auto d = landmark_distance(kps, truth);
    r.pleura = d.pleura;
    r.a_lines = d.a_lines;
    r.b_lines = d.b_lines;
    if (kps.size() >= 2) r.jitter = temporal_jitter(kps);
    return r;
}

// ---------------------------------------------------------------------------
// Report files

inline const char* kReportHeader =
    "# pleura counts as detected when some keypoint row is within delta pixels of the truth row\n";

inline std::string report_text(const EvalReport& r)
{
    KvTable t;
    t.set("delta", format_double(r.delta));
    t.set("frames_total", std::to_string(r.frames_total));
    t.set("frames_pleura_correct", std::to_string(r.frames_pleura_correct));
    t.set("pleura_accuracy", format_double(r.pleura_accuracy));
    auto stats = [&](const std::string& name, const DistanceStats& s) {
        t.set(name + "_count", std::to_string(s.count));
        t.set(name + "_mean", format_double(s.mean));
        t.set(name + "_median", format_double(s.median));
    };
    stats("pleura", r.pleura);
    stats("a_lines", r.a_lines);
    stats("b_lines", r.b_lines);
    t.set("jitter", r.jitter.empty() ? "none" : format_double_list(r.jitter));
    return kReportHeader + format_kv(t);
}

inline EvalReport report_from_text(const std::string& text, const std::string& source)
{
    const KvTable t = parse_kv(text, source);
    EvalReport r;
    auto num = [&](const std::string& k) { return parse_double(t.entry(k), source); };
    auto count = [&](const std::string& k) { return parse_count(t.entry(k), source); };
    auto stats = [&](const std::string& name) {
        return DistanceStats{count(name + "_count"), num(name + "_mean"), num(name + "_median")};
    };
    try {
        r.delta = num("delta");
        r.frames_total = count("frames_total");
        r.frames_pleura_correct = count("frames_pleura_correct");
        r.pleura_accuracy = num("pleura_accuracy");
        r.pleura = stats("pleura");
        r.a_lines = stats("a_lines");
        r.b_lines = stats("b_lines");
        if (t.get("jitter") != "none") r.jitter = parse_double_list(t.entry("jitter"), source);
    } catch (const ConfigError& e) {
        throw DataError(source + ": " + e.what());
    }
    return r;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << text;
    if (!os) throw DataError("failed writing " + path);
}

// One row per frame: truth pleura row, nearest keypoint row distance and
// whether the frame counts as correct.
inline std::string per_frame_csv(const FrameKeypoints& kps, const GroundTruth& truth, double delta)
{
    require_aligned("per_frame_csv", kps, truth);
    std::string s = "frame,pleura_row,pleura_distance,pleura_correct\n";
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const double d = nearest_row(kps[t], double(truth[t].pleura_row));
        s += std::to_string(t) + "," + std::to_string(truth[t].pleura_row) + "," + format_double(d) + "," +
             (d <= delta ? "1" : "0") + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Keypoint CSV: frame,slot,row,col

inline std::string keypoints_csv(const FrameKeypoints& kps)
{
    std::string s = "frame,slot,row,col\n";
    for (std::size_t t = 0; t < kps.size(); ++t)
        for (std::size_t j = 0; j < kps[t].size(); ++j) {
            s += std::to_string(t) + "," + std::to_string(j) + "," + format_double(kps[t][j].row) + "," +
                 format_double(kps[t][j].col) + "\n";
        }
    return s;
}

inline FrameKeypoints keypoints_from_csv(const std::string& text, const std::string& source)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "frame,slot,row,col") {
        throw DataError(source + ":1: expected header 'frame,slot,row,col'");
    }
    FrameKeypoints out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::string item;
        std::istringstream ls(line);
        while (std::getline(ls, item, ',')) f.push_back(trim(item));
        if (f.size() != 4) throw DataError(source + ":" + std::to_string(n) + ": expected 4 fields");
        std::size_t frame = 0, slot = 0;
        Keypoint k;
        try {
            frame = parse_count({"frame", f[0], n}, source);
            slot = parse_count({"slot", f[1], n}, source);
            k.row = parse_double({"row", f[2], n}, source);
            k.col = parse_double({"col", f[3], n}, source);
        } catch (const ConfigError& e) {
            throw DataError(e.what());
        }
        if (frame != out.size() && frame + 1 != out.size()) {
            throw DataError(source + ":" + std::to_string(n) + ": frame " + std::to_string(frame) + " out of order");
        }
        if (frame == out.size()) out.emplace_back();
        if (slot != out[frame].size()) {
            throw DataError(source + ":" + std::to_string(n) + ": slot " + std::to_string(slot) + " out of order");
        }
        out[frame].push_back(k);
    }
    return out;
}

} // namespace lusk
