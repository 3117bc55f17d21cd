#pragma once

// Flat key=value text: one pair per line, '#' starts a comment, surrounding
// whitespace is ignored. Order of first appearance is kept; a repeated key
// overwrites the earlier value.

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lusk/error.hpp"

namespace lusk {

struct KvEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

class KvTable {
public:
    void set(const std::string& key, std::string value, std::size_t line = 0)
    {
        auto it = index_.find(key);
        if (it == index_.end()) {
            index_[key] = entries_.size();
            entries_.push_back({key, std::move(value), line});
        } else {
            entries_[it->second].value = std::move(value);
            entries_[it->second].line = line;
        }
    }

    bool has(const std::string& key) const { return index_.count(key) != 0; }
    const std::vector<KvEntry>& entries() const& { return entries_; }
    std::vector<KvEntry> entries() && { return std::move(entries_); }

    const KvEntry& entry(const std::string& key) const
    {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError("missing key '" + key + "'");
        return entries_[it->second];
    }

    const std::string& get(const std::string& key) const { return entry(key).value; }

private:
    std::vector<KvEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// `source` names the input in diagnostics (a file path or "<checkpoint>").
inline KvTable parse_kv(const std::string& text, const std::string& source)
{
    KvTable t;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(line) + ": expected key=value, got '" + s + "'");
        }
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty key");
        t.set(key, trim(s.substr(eq + 1)), line);
    }
    return t;
}

inline std::string format_kv(const KvTable& t)
{
    std::string out;
    for (const auto& e : t.entries()) out += e.key + "=" + e.value + "\n";
    return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string where(const KvEntry& e, const std::string& source)
{
    return e.line ? source + ":" + std::to_string(e.line) : source;
}

inline double parse_double(const KvEntry& e, const std::string& source)
{
    double v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto res = std::from_chars(b, end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ConfigError(where(e, source) + ": " + e.key + ": '" + e.value + "' is not a number");
    }
    return v;
}

inline long long parse_int(const KvEntry& e, const std::string& source)
{
    long long v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto res = std::from_chars(b, end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ConfigError(where(e, source) + ": " + e.key + ": '" + e.value + "' is not an integer");
    }
    return v;
}

inline std::size_t parse_count(const KvEntry& e, const std::string& source)
{
    const long long v = parse_int(e, source);
    if (v < 0) throw ConfigError(where(e, source) + ": " + e.key + " must be >= 0, got " + e.value);
    return std::size_t(v);
}

inline bool parse_bool(const KvEntry& e, const std::string& source)
{
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError(where(e, source) + ": " + e.key + ": '" + e.value + "' is not a boolean");
}

inline std::vector<double> parse_double_list(const KvEntry& e, const std::string& source)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(e.value);
    while (std::getline(in, item, ',')) {
        out.push_back(parse_double({e.key, trim(item), e.line}, source));
    }
    return out;
}

inline std::string format_double_list(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

} // namespace lusk
