#include "helix/binio.hpp"
#include "helix/error.hpp"

#include <bit>
#include <cstdio>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace helix {

namespace {

struct crc_table {
    uint32_t t[256];
    crc_table() {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            }
            t[i] = c;
        }
    }
};

const crc_table g_crc;

} // namespace

uint32_t crc32(const uint8_t * data, size_t n, uint32_t seed) {
    uint32_t c = seed ^ 0xffffffffu;
    for (size_t i = 0; i < n; ++i) {
        c = g_crc.t[(c ^ data[i]) & 0xff] ^ (c >> 8);
    }
    return c ^ 0xffffffffu;
}

std::vector<uint8_t> read_file_bytes(const std::string & path) {
    FILE * f = std::fopen(path.c_str(), "rb");
    if (!f) {
        throw io_error("cannot open for reading: " + path);
    }
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> bytes(size > 0 ? size_t(size) : 0);
    if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
        std::fclose(f);
        throw io_error("short read: " + path);
    }
    std::fclose(f);
    return bytes;
}

void write_file_bytes(const std::string & path, const std::vector<uint8_t> & bytes) {
    // Write to a temp sibling then rename, so a failed run never leaves a
    // half-written artifact behind.
    const std::string tmp = path + ".tmp";
    FILE * f = std::fopen(tmp.c_str(), "wb");
    if (!f) {
        throw io_error("cannot open for writing: " + tmp);
    }
    if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
        std::fclose(f);
        std::remove(tmp.c_str());
        throw io_error("short write: " + tmp);
    }
    if (std::fclose(f) != 0) {
        std::remove(tmp.c_str());
        throw io_error("close failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw io_error("rename failed: " + path);
    }
}

} // namespace helix
