#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tbtwin/montecarlo.hpp"
#include "tbtwin/types.hpp"

namespace tbtwin::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kMagic[4] = {'T', 'B', 'T', 'S'};
inline constexpr std::uint16_t kVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ofstream& out, T value) {
    unsigned char buf[sizeof(T)];
    for (std::size_t k = 0; k < sizeof(T); ++k)
        buf[k] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * k)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw IoError("timestamp file truncated");
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k)
        v |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
    return static_cast<T>(v);
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace detail

inline void write_tbts(const std::string& path, const mc::TimestampStream& stream) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    detail::put_le<std::uint16_t>(out, kVersion);
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(stream.detector_id));
    detail::put_le<std::uint64_t>(out, stream.times_ps.size());
    for (const auto t : stream.times_ps)
        detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t));
    if (!out) throw IoError("write failed: " + path);
}

inline void write_txt(const std::string& path, const mc::TimestampStream& stream) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto t : stream.times_ps) out << t << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline void write_timestamps(const std::string& path, const mc::TimestampStream& stream) {
    if (detail::ends_with(path, ".txt")) write_txt(path, stream);
    else write_tbts(path, stream);
}

inline mc::TimestampStream read_tbts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a timestamp stream file: " + path);
    const auto version = detail::get_le<std::uint16_t>(in);
    if (version != kVersion) throw IoError("unsupported timestamp file version");
    const auto id = detail::get_le<std::uint8_t>(in);
    const auto count = detail::get_le<std::uint64_t>(in);
    mc::TimestampStream stream;
    stream.detector_id = id == 1 ? mc::DetectorId::idler : mc::DetectorId::signal;
    stream.times_ps.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k)
        stream.times_ps.push_back(static_cast<std::int64_t>(detail::get_le<std::uint64_t>(in)));
    stream.span_ps = stream.times_ps.empty() ? 0 : stream.times_ps.back();
    return stream;
}

inline mc::TimestampStream read_txt(const std::string& path,
                                    mc::DetectorId id = mc::DetectorId::signal) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    mc::TimestampStream stream;
    stream.detector_id = id;
    long long value = 0;
    while (in >> value) stream.times_ps.push_back(value);
    stream.span_ps = stream.times_ps.empty() ? 0 : stream.times_ps.back();
    return stream;
}

inline mc::TimestampStream read_timestamps(const std::string& path,
                                           mc::DetectorId id = mc::DetectorId::signal) {
    if (detail::ends_with(path, ".txt")) return read_txt(path, id);
    return read_tbts(path);
}

} // namespace tbtwin::io
