#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ghostforge/errors.hpp"

namespace ghostforge {

/// 2-D scalar field with samples in [0, 1], row-major, double precision.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    std::size_t size() const { return data.size(); }

    static Image zeros(int h, int w) {
        require_dims(h, w);
        Image img;
        img.height = h;
        img.width = w;
        img.data.assign(static_cast<std::size_t>(h) * w, 0.0);
        return img;
    }

    static Image create(int h, int w, std::vector<double> samples) {
        require_dims(h, w);
        if (samples.size() != static_cast<std::size_t>(h) * w)
            throw ConfigError("Image: data length " + std::to_string(samples.size()) +
                              " does not match " + std::to_string(h) + "x" + std::to_string(w));
        Image img;
        img.height = h;
        img.width = w;
        img.data = std::move(samples);
        img.validate();
        return img;
    }

    void validate() const {
        for (double s : data) {
            if (!(s >= 0.0 && s <= 1.0))
                throw ConfigError("Image: sample " + std::to_string(s) + " outside [0,1]");
        }
    }

private:
    static void require_dims(int h, int w) {
        if (h < 1 || w < 1)
            throw ConfigError("Image: dimensions must be >= 1, got " + std::to_string(h) + "x" +
                              std::to_string(w));
    }
};

namespace detail {

inline int pgm_get(const std::string& bytes, std::size_t& pos) {
    if (pos >= bytes.size()) return -1;
    return static_cast<unsigned char>(bytes[pos++]);
}

// Skips whitespace and '#' comments, then parses a non-negative decimal.
inline long pgm_token(const std::string& bytes, std::size_t& pos) {
    for (;;) {
        if (pos >= bytes.size()) throw FormatError("P5: unexpected end of header", pos);
        const unsigned char ch = static_cast<unsigned char>(bytes[pos]);
        if (ch == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(ch)) {
            ++pos;
        } else {
            break;
        }
    }
    if (!std::isdigit(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("P5: expected decimal digit in header", pos);
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > 1 << 30) throw FormatError("P5: header value out of range", pos);
        ++pos;
    }
    return value;
}

}  // namespace detail

/// Load a binary portable graymap (P5, maxval 255 or 16-bit up to 65535).
/// Samples are scaled to [0,1] by the header's maxval.
inline Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    if (bytes.size() < 2) throw FormatError("P5: file too short for magic", 0);
    if (bytes[0] != 'P' || bytes[1] != '5') {
        if (bytes[0] == 'P')
            throw FormatError(std::string("unsupported format magic \"P") + bytes[1] + "\"", 0);
        throw FormatError("not a portable graymap", 0);
    }
    pos = 2;
    const long width = detail::pgm_token(bytes, pos);
    const long height = detail::pgm_token(bytes, pos);
    const long maxval = detail::pgm_token(bytes, pos);
    if (width < 1 || height < 1) throw FormatError("P5: non-positive dimensions", pos);
    if (maxval < 1 || maxval > 65535) throw FormatError("P5: maxval out of range", pos);
    const int raster = detail::pgm_get(bytes, pos);
    if (raster < 0 || !std::isspace(raster))
        throw FormatError("P5: expected single whitespace before raster", pos - (raster < 0 ? 0 : 1));

    const bool wide = maxval > 255;
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    const std::size_t need = n * (wide ? 2 : 1);
    if (bytes.size() - pos < need)
        throw FormatError("P5: truncated payload, need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - pos),
                          bytes.size());

    std::vector<double> samples(n);
    const double denom = static_cast<double>(maxval);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned value;
        if (wide) {
            // 16-bit samples are big-endian per the format.
            value = (static_cast<unsigned char>(bytes[pos]) << 8) |
                    static_cast<unsigned char>(bytes[pos + 1]);
            pos += 2;
        } else {
            value = static_cast<unsigned char>(bytes[pos++]);
        }
        if (value > static_cast<unsigned>(maxval))
            throw FormatError("P5: sample exceeds maxval", pos - (wide ? 2 : 1));
        samples[i] = static_cast<double>(value) / denom;
    }
    return Image::create(static_cast<int>(height), static_cast<int>(width), std::move(samples));
}

/// Write as binary P5 with maxval 255, rounding half away from zero.
/// load_image(save_image(x)) differs from x by at most 1/510 per sample.
inline void save_image(const Image& img, const std::string& path) {
    img.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open image file for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::string raster(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i) {
        raster[i] = static_cast<char>(
            static_cast<unsigned char>(std::floor(img.data[i] * 255.0 + 0.5)));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("short write to image file: " + path);
}

}  // namespace ghostforge
