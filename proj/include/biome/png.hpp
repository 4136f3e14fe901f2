#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "biome/common.hpp"

namespace biome::io {

// Minimal 8-bit RGB PNG writer: one IDAT chunk, filter 0 scanlines, fixed
// zlib level so identical pixels give identical files.
inline void write_png_rgb(const std::string& path, int width, int height,
                          const std::vector<unsigned char>& rgb) {
    require(width > 0 && height > 0, "png: empty image");
    require(rgb.size() == static_cast<size_t>(width) * height * 3, "png: pixel buffer size");

    std::vector<unsigned char> raw(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        unsigned char* row = raw.data() + static_cast<size_t>(y) * (1 + static_cast<size_t>(width) * 3);
        row[0] = 0;  // filter: none
        std::memcpy(row + 1, rgb.data() + static_cast<size_t>(y) * width * 3,
                    static_cast<size_t>(width) * 3);
    }
    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw NumericalError("png: deflate failed");
    comp.resize(comp_cap);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("png: cannot open '" + path + "' for writing");

    auto wr_be32 = [&out](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto chunk = [&](const char type[4], const unsigned char* data, size_t n) {
        wr_be32(static_cast<uint32_t>(n));
        out.write(type, 4);
        if (n) out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (n) crc = crc32(crc, data, static_cast<uInt>(n));
        wr_be32(static_cast<uint32_t>(crc));
    };

    const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);
    unsigned char ihdr[13];
    ihdr[0] = static_cast<unsigned char>(width >> 24);
    ihdr[1] = static_cast<unsigned char>(width >> 16);
    ihdr[2] = static_cast<unsigned char>(width >> 8);
    ihdr[3] = static_cast<unsigned char>(width);
    ihdr[4] = static_cast<unsigned char>(height >> 24);
    ihdr[5] = static_cast<unsigned char>(height >> 16);
    ihdr[6] = static_cast<unsigned char>(height >> 8);
    ihdr[7] = static_cast<unsigned char>(height);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // color type: RGB
    ihdr[10] = 0;
    ihdr[11] = 0;
    ihdr[12] = 0;
    chunk("IHDR", ihdr, 13);
    chunk("IDAT", comp.data(), comp.size());
    chunk("IEND", nullptr, 0);
    if (!out) throw InputError("png: write failed for '" + path + "'");
}

}  // namespace biome::io
