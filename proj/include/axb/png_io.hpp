#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "axb/errors.hpp"
#include "axb/imaging.hpp"

namespace axb {

namespace png_detail {

inline constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline uint32_t get_u32(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
           uint32_t(p[3]);
}

inline void append_chunk(std::vector<unsigned char>& out, const char type[4],
                         const std::vector<unsigned char>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32(out, static_cast<uint32_t>(crc));
}

inline unsigned char paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
    if (pb <= pc) return static_cast<unsigned char>(b);
    return static_cast<unsigned char>(c);
}

}  // namespace png_detail

/// Writes an 8-bit RGB PNG (color type 2, filter 0 rows, zlib-compressed).
inline void write_png(const std::string& path, const ColorImage& img) {
    if (img.height == 0 || img.width == 0) throw ConfigError("write_png: empty image");
    const size_t stride = 1 + img.width * 3;
    std::vector<unsigned char> raw(img.height * stride);
    for (size_t i = 0; i < img.height; ++i) {
        raw[i * stride] = 0;  // filter: None
        for (size_t j = 0; j < img.width; ++j)
            for (size_t c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(c, i, j), 0.0, 1.0);
                raw[i * stride + 1 + j * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK)
        throw IoError("write_png: deflate failed");
    compressed.resize(bound);

    std::vector<unsigned char> file(png_detail::kSignature, png_detail::kSignature + 8);
    std::vector<unsigned char> ihdr;
    png_detail::put_u32(ihdr, static_cast<uint32_t>(img.width));
    png_detail::put_u32(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    png_detail::append_chunk(file, "IHDR", ihdr);
    png_detail::append_chunk(file, "IDAT", compressed);
    png_detail::append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_png: cannot open '" + path + "'");
    out.write(reinterpret_cast<const char*>(file.data()),
              static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("write_png: write failed for '" + path + "'");
}

/// Reads an 8-bit PNG: grayscale, gray+alpha, RGB, or RGBA (alpha dropped,
/// gray replicated). Palette, 16-bit, and interlaced files are rejected.
inline ColorImage read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_png: cannot open '" + path + "'");
    std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (file.size() < 8 || std::memcmp(file.data(), png_detail::kSignature, 8) != 0)
        throw ParseError("read_png: not a PNG file");

    size_t pos = 8;
    uint32_t width = 0, height = 0;
    int color_type = -1;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<unsigned char> idat;
    while (pos + 12 <= file.size()) {
        const uint32_t len = png_detail::get_u32(&file[pos]);
        if (pos + 12 + len > file.size()) throw ParseError("read_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        const unsigned char* payload = &file[pos + 8];
        const uint32_t stored_crc = png_detail::get_u32(&file[pos + 8 + len]);
        uLong crc = crc32(0L, &file[pos + 4], 4 + len);
        if (static_cast<uint32_t>(crc) != stored_crc)
            throw ParseError("read_png: chunk CRC mismatch");

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ParseError("read_png: bad IHDR length");
            width = png_detail::get_u32(payload);
            height = png_detail::get_u32(payload + 4);
            const int bit_depth = payload[8];
            color_type = payload[9];
            const int interlace = payload[12];
            if (bit_depth != 8) throw ParseError("read_png: only 8-bit images supported");
            if (color_type == 3) throw ParseError("read_png: palette images unsupported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                throw ParseError("read_png: unsupported color type");
            if (interlace != 0) throw ParseError("read_png: interlaced images unsupported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || idat.empty())
        throw ParseError("read_png: missing required chunks");
    if (width == 0 || height == 0) throw ParseError("read_png: empty image");

    const size_t channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const size_t stride = 1 + size_t(width) * channels;
    std::vector<unsigned char> raw(size_t(height) * stride);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    const int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_len != raw.size())
        throw ParseError("read_png: inflate failed or size mismatch");

    // undo per-row filters in place
    const size_t bpp = channels;
    for (size_t i = 0; i < height; ++i) {
        unsigned char* row = raw.data() + i * stride;
        const unsigned char* prev = i > 0 ? raw.data() + (i - 1) * stride : nullptr;
        const unsigned char filter = row[0];
        unsigned char* px = row + 1;
        const size_t nbytes = stride - 1;
        switch (filter) {
            case 0: break;
            case 1:
                for (size_t t = bpp; t < nbytes; ++t) px[t] += px[t - bpp];
                break;
            case 2:
                if (prev)
                    for (size_t t = 0; t < nbytes; ++t) px[t] += prev[t + 1];
                break;
            case 3:
                for (size_t t = 0; t < nbytes; ++t) {
                    const int left = t >= bpp ? px[t - bpp] : 0;
                    const int up = prev ? prev[t + 1] : 0;
                    px[t] += static_cast<unsigned char>((left + up) / 2);
                }
                break;
            case 4:
                for (size_t t = 0; t < nbytes; ++t) {
                    const int left = t >= bpp ? px[t - bpp] : 0;
                    const int up = prev ? prev[t + 1] : 0;
                    const int ul = (prev && t >= bpp) ? prev[t + 1 - bpp] : 0;
                    px[t] += png_detail::paeth(left, up, ul);
                }
                break;
            default:
                throw ParseError("read_png: unknown filter type " + std::to_string(filter));
        }
    }

    ColorImage img(height, width);
    for (size_t i = 0; i < height; ++i) {
        const unsigned char* px = raw.data() + i * stride + 1;
        for (size_t j = 0; j < width; ++j) {
            const unsigned char* s = px + j * channels;
            double r, g, b;
            if (channels <= 2) {
                r = g = b = s[0] / 255.0;
            } else {
                r = s[0] / 255.0;
                g = s[1] / 255.0;
                b = s[2] / 255.0;
            }
            img.at(0, i, j) = r;
            img.at(1, i, j) = g;
            img.at(2, i, j) = b;
        }
    }
    img.clamp01();
    return img;
}

}  // namespace axb
