#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/error.hpp"

namespace bdlab {

// Byte-oriented little-endian encoding, independent of host endianness so the
// BDLM/BDLD formats are bit-exact everywhere.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f32(float v);
    void f64(double v);
    void raw(const void* data, std::size_t n);

    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    float f32();
    double f64();
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n);

    const std::string& bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

// Whole-file helpers. Writes go to <path>.tmp and are renamed into place so a
// crash never leaves a half-written artifact behind.
std::string read_file(const std::string& path);
void atomic_write_file(const std::string& path, const std::string& bytes);
bool file_exists(const std::string& path);
void require_artifact(const std::string& path);
void ensure_directory(const std::string& path);

// Shortest-round-trip decimal formatting: 9 significant digits for float,
// 17 for double. Deterministic, so equal values always produce equal bytes.
std::string fmt_real(float v);
std::string fmt_real(double v);

// One row of comma-separated cells; no quoting needed for our schemas.
std::string csv_row(const std::vector<std::string>& cells);

}  // namespace bdlab
