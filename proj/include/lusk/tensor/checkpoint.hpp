#pragma once

// Binary tensor record files.
//
//   "LUSK"                magic, 4 bytes
//   u32                   format version
//   repeated until EOF:
//     u32                 name length
//     bytes               name (UTF-8, no terminator)
//     u32                 rank
//     u64 x rank          dims
//     f32 x prod(dims)    values
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/tensor/tensor.hpp"

namespace lusk {

inline constexpr char kCheckpointMagic[4] = {'L', 'U', 'S', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
    std::string name;
    Shape dims;
    std::vector<float> values;

    bool operator==(const TensorRecord&) const = default;
};

namespace detail {

template <typename U>
void put_le(std::ostream& os, U v)
{
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
bool get_le(std::istream& is, U& v)
{
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) return false;
    v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(buf[i]) << (8 * i);
    return true;
}

} // namespace detail

inline void write_records(std::ostream& os, const std::vector<TensorRecord>& records)
{
    os.write(kCheckpointMagic, 4);
    detail::put_le<std::uint32_t>(os, kCheckpointVersion);
    for (const auto& r : records) {
        if (numel(r.dims) != r.values.size()) {
            throw ShapeError("write_records: record '" + r.name + "' has dims " + to_string(r.dims) +
                             " but " + std::to_string(r.values.size()) + " values");
        }
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.dims.size()));
        for (auto d : r.dims) detail::put_le<std::uint64_t>(os, d);
        for (float f : r.values) detail::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f));
    }
}

inline std::vector<TensorRecord> read_records(std::istream& is, const std::string& source = "<stream>")
{
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw DataError(source + ": missing LUSK magic");
    }
    std::uint32_t version = 0;
    if (!detail::get_le(is, version) || version != kCheckpointVersion) {
        throw DataError(source + ": unsupported format version " + std::to_string(version));
    }
    std::vector<TensorRecord> out;
    std::uint32_t name_len = 0;
    while (is.peek() != std::char_traits<char>::eof()) {
        if (!detail::get_le(is, name_len)) throw DataError(source + ": truncated record header");
        TensorRecord r;
        r.name.resize(name_len);
        std::uint32_t rank = 0;
        if (!is.read(r.name.data(), name_len) || !detail::get_le(is, rank) || rank > 8) {
            throw DataError(source + ": truncated record header after " + std::to_string(out.size()) +
                            " records");
        }
        r.dims.resize(rank);
        for (auto& d : r.dims) {
            std::uint64_t v = 0;
            if (!detail::get_le(is, v)) throw DataError(source + ": truncated dims in record '" + r.name + "'");
            d = static_cast<std::size_t>(v);
        }
        const std::size_t n = numel(r.dims);
        if (n > (std::size_t{1} << 31)) throw DataError(source + ": record '" + r.name + "' is implausibly large");
        r.values.resize(n);
        for (auto& f : r.values) {
            std::uint32_t bits = 0;
            if (!detail::get_le(is, bits)) throw DataError(source + ": truncated values in record '" + r.name + "'");
            f = std::bit_cast<float>(bits);
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void save_records(const std::string& path, const std::vector<TensorRecord>& records)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_records(os, records);
    if (!os.flush()) throw DataError("write failed for '" + path + "'");
}

inline std::vector<TensorRecord> load_records(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_records(is, path);
}

template <typename T>
TensorRecord to_record(const Tensor<T>& t, std::string name = {})
{
    TensorRecord r;
    r.name = name.empty() ? t.name() : std::move(name);
    r.dims = t.shape();
    r.values.assign(t.values().begin(), t.values().end());
    return r;
}

} // namespace lusk
