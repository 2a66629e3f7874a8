#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace helix {

// Little-endian buffer codec for the binary file formats.
// Host is assumed little-endian for the direct memcpy of f32/f64 payloads;
// a static_assert in binio.cpp guards the assumption.

struct byte_writer {
    std::vector<uint8_t> buf;

    void u8(uint8_t v)  { buf.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const void * p, size_t n) {
        const uint8_t * b = static_cast<const uint8_t *>(p);
        buf.insert(buf.end(), b, b + n);
    }
};

struct byte_reader {
    const uint8_t * data;
    size_t size;
    size_t pos = 0;

    byte_reader(const uint8_t * d, size_t n) : data(d), size(n) {}

    bool remaining(size_t n) const { return pos + n <= size; }

    bool u8(uint8_t & v) {
        if (!remaining(1)) return false;
        v = data[pos++];
        return true;
    }
    bool u32(uint32_t & v) {
        if (!remaining(4)) return false;
        v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(data[pos + i]) << (8 * i);
        pos += 4;
        return true;
    }
    bool u64(uint64_t & v) {
        if (!remaining(8)) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(data[pos + i]) << (8 * i);
        pos += 8;
        return true;
    }
    bool f32(float & v) {
        uint32_t bits;
        if (!u32(bits)) return false;
        std::memcpy(&v, &bits, 4);
        return true;
    }
    bool f64(double & v) {
        uint64_t bits;
        if (!u64(bits)) return false;
        std::memcpy(&v, &bits, 8);
        return true;
    }
};

// CRC32 (IEEE 802.3 polynomial, same as zlib's crc32).
uint32_t crc32(const uint8_t * data, size_t n, uint32_t seed = 0);

// Whole-file helpers. Throw helix::error(io) on failure.
std::vector<uint8_t> read_file_bytes(const std::string & path);
void write_file_bytes(const std::string & path, const std::vector<uint8_t> & bytes);

} // namespace helix
