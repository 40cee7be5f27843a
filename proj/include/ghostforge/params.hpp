#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ghostforge/errors.hpp"
#include "ghostforge/rng.hpp"
#include "ghostforge/tensor.hpp"

namespace ghostforge {

enum class Init { kaiming_uniform, zeros, ones };

/// Named trainable (or frozen) tensor. Initialization is a pure function of
/// (store seed, parameter name), so adding or reordering parameters never
/// perturbs the values of existing ones.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

    Tensor create(const std::string& name, const Shape& shape, Init init, int fan_in = 0,
                  bool trainable = true) {
        if (params_.count(name))
            throw ConfigError("ParamStore: duplicate parameter name \"" + name + "\"");
        std::vector<double> values(shape.numel(), 0.0);
        switch (init) {
            case Init::zeros:
                break;
            case Init::ones:
                std::fill(values.begin(), values.end(), 1.0);
                break;
            case Init::kaiming_uniform: {
                if (fan_in < 1)
                    throw ConfigError("ParamStore: kaiming init needs fan_in >= 1 for \"" + name +
                                      "\"");
                const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                CounterRng rng(derive_key(seed_, hash_name(name)));
                for (std::size_t i = 0; i < values.size(); ++i)
                    values[i] = rng.uniform(i, -bound, bound);
                break;
            }
        }
        Parameter param;
        param.name = name;
        param.tensor = Tensor::from_vector(shape, std::move(values), trainable);
        param.trainable = trainable;
        params_.emplace(name, param);
        return params_.at(name).tensor;
    }

    const Parameter& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end())
            throw ConfigError("ParamStore: unknown parameter \"" + name + "\"");
        return it->second;
    }

    std::size_t size() const { return params_.size(); }
    std::uint64_t seed() const { return seed_; }

    /// Name-sorted iteration; the fixed order keeps optimizer trajectories
    /// independent of construction order.
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }

    void zero_grad() {
        for (auto& [name, param] : params_) param.tensor.zero_grad();
    }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [name, param] : params_) n += param.tensor.numel();
        return n;
    }

private:
    std::uint64_t seed_;
    std::map<std::string, Parameter> params_;
};

// ---------------------------------------------------------------------------
// Checkpoints: one line of UTF-8 JSON (name -> shape and byte offset into the
// payload), a newline, then all values as little-endian 64-bit floats in
// name-sorted order. Round-trips bit-exactly.

inline void save_checkpoint(const ParamStore& store, const std::string& path) {
    nlohmann::json header;
    header["format"] = "ghostforge-checkpoint-v1";
    nlohmann::json entries;
    std::size_t offset = 0;
    for (const auto& [name, param] : store) {
        const Shape& s = param.tensor.shape();
        entries[name] = {{"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}};
        offset += param.tensor.numel() * 8;
    }
    header["params"] = entries;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    const std::string head = header.dump();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.put('\n');
    for (const auto& [name, param] : store) {
        for (double v : param.tensor.data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            char buf[8];
            for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
            out.write(buf, 8);
        }
    }
    if (!out) throw IoError("short write to checkpoint: " + path);
}

/// Load values into an existing store. The parameter sets must match exactly;
/// every missing and extra name is reported.
inline void load_checkpoint(ParamStore& store, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string head;
    if (!std::getline(in, head)) throw FormatError("checkpoint: missing header line", 0);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint: bad header JSON: ") + e.what(),
                          static_cast<std::size_t>(e.byte));
    }
    if (!header.contains("params") || !header["params"].is_object())
        throw FormatError("checkpoint: header has no params object", 0);
    const auto& entries = header["params"];

    std::string mismatch;
    for (const auto& [name, param] : store)
        if (!entries.contains(name)) mismatch += " missing:" + name;
    for (const auto& item : entries.items()) {
        try {
            store.at(item.key());
        } catch (const ConfigError&) {
            mismatch += " extra:" + item.key();
        }
    }
    if (!mismatch.empty())
        throw ConfigError("checkpoint/architecture mismatch:" + mismatch);

    const std::size_t payload_start = head.size() + 1;
    for (auto& [name, param] : store) {
        const auto& entry = entries.at(name);
        const auto shape_list = entry.at("shape").get<std::vector<int>>();
        const Shape& s = param.tensor.shape();
        if (shape_list.size() != 4 || shape_list[0] != s.n || shape_list[1] != s.c ||
            shape_list[2] != s.h || shape_list[3] != s.w)
            throw ConfigError("checkpoint: shape mismatch for \"" + name + "\"");
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        in.seekg(static_cast<std::streamoff>(payload_start + offset));
        std::vector<double>& values = param.tensor.mutable_data();
        for (std::size_t k = 0; k < values.size(); ++k) {
            char buf[8];
            in.read(buf, 8);
            if (in.gcount() != 8)
                throw FormatError("checkpoint: truncated payload for \"" + name + "\"",
                                  payload_start + offset + k * 8);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
            std::memcpy(&values[k], &bits, 8);
        }
    }
}

}  // namespace ghostforge
