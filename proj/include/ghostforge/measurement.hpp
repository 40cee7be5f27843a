#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ghostforge/errors.hpp"

namespace ghostforge {

/// Ordered set of illumination patterns, one plane per measurement.
/// Binary mode restricts samples to {0,1}; grayscale mode allows [0,1].
struct PatternStack {
    int count = 0;
    int height = 0;
    int width = 0;
    bool binary = true;
    std::vector<double> planes;  // count * height * width, row-major per plane

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    const double* plane(int i) const { return planes.data() + static_cast<std::size_t>(i) * plane_size(); }
    double* plane(int i) { return planes.data() + static_cast<std::size_t>(i) * plane_size(); }

    void validate() const {
        if (count < 1 || height < 1 || width < 1)
            throw ConfigError("PatternStack: count/height/width must be >= 1");
        if (planes.size() != static_cast<std::size_t>(count) * plane_size())
            throw ConfigError("PatternStack: plane data length mismatch");
        for (double v : planes) {
            if (!(v >= 0.0 && v <= 1.0))
                throw ConfigError("PatternStack: sample outside [0,1]");
            if (binary && v != 0.0 && v != 1.0)
                throw ConfigError("PatternStack: non-binary sample in binary mode");
        }
    }
};

/// Per-measurement scalar detector readings, all finite and non-negative.
struct BucketSeries {
    std::vector<double> values;

    std::size_t count() const { return values.size(); }

    void validate() const {
        for (double v : values) {
            if (!std::isfinite(v) || v < 0.0)
                throw ConfigError("BucketSeries: values must be finite and non-negative");
        }
    }
};

/// Bucket series file: 8-byte little-endian count, then count little-endian
/// 64-bit floats.
inline void save_bucket_series(const BucketSeries& series, const std::string& path) {
    series.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open bucket file for writing: " + path);
    const std::uint64_t n = series.values.size();
    char header[8];
    for (int i = 0; i < 8; ++i) header[i] = static_cast<char>((n >> (8 * i)) & 0xff);
    out.write(header, 8);
    for (double v : series.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        out.write(buf, 8);
    }
    if (!out) throw IoError("short write to bucket file: " + path);
}

inline BucketSeries load_bucket_series(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open bucket file: " + path);
    char header[8];
    in.read(header, 8);
    if (in.gcount() != 8) throw FormatError("bucket file: truncated count header", 0);
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i)
        n |= static_cast<std::uint64_t>(static_cast<unsigned char>(header[i])) << (8 * i);
    if (n > (1ULL << 32)) throw FormatError("bucket file: implausible count", 0);
    BucketSeries series;
    series.values.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        char buf[8];
        in.read(buf, 8);
        if (in.gcount() != 8)
            throw FormatError("bucket file: truncated payload", 8 + static_cast<std::size_t>(k) * 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
        std::memcpy(&series.values[k], &bits, 8);
    }
    series.validate();
    return series;
}

}  // namespace ghostforge
