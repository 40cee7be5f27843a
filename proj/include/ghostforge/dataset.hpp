#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ghostforge/image.hpp"
#include "ghostforge/jsonio.hpp"
#include "ghostforge/measurement.hpp"
#include "ghostforge/optics.hpp"
#include "ghostforge/rng.hpp"

namespace ghostforge {

/// Train/test split fraction mirroring a 173/35 image split.
inline constexpr double kDefaultSplitRatio = 173.0 / 208.0;

struct DatasetEntry {
    std::string clean_path;
    std::string degraded_path;
    std::string bucket_path;
    std::uint64_t pattern_seed = 0;
    bool train = true;
};

struct DatasetManifest {
    std::vector<DatasetEntry> entries;
    SimConfig config;
    double split_ratio = kDefaultSplitRatio;

    int train_count() const {
        int n = 0;
        for (const auto& e : entries) n += e.train ? 1 : 0;
        return n;
    }
    int test_count() const { return static_cast<int>(entries.size()) - train_count(); }
};

// ---------------------------------------------------------------------------
// JSON forms

inline json turbulence_to_json(const TurbulenceParams& p) {
    json j;
    j["mode"] = p.mode == TurbulenceMode::none
                    ? "none"
                    : (p.mode == TurbulenceMode::gaussian_blur ? "gaussian-blur" : "phase-screen");
    j["r0"] = p.r0;
    j["outer_scale"] = p.outer_scale;
    j["blur_sigma"] = p.blur_sigma;
    j["tilt_sigma"] = p.tilt_sigma;
    j["refresh"] = p.refresh == RefreshPolicy::per_measurement ? "per-measurement" : "static";
    return j;
}

inline TurbulenceParams turbulence_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"mode", "r0", "outer_scale", "blur_sigma", "tilt_sigma", "refresh"});
    TurbulenceParams p;
    std::string mode = "none", refresh = "static";
    jsonio::get(j, scope, "mode", mode);
    jsonio::get(j, scope, "r0", p.r0);
    jsonio::get(j, scope, "outer_scale", p.outer_scale);
    jsonio::get(j, scope, "blur_sigma", p.blur_sigma);
    jsonio::get(j, scope, "tilt_sigma", p.tilt_sigma);
    jsonio::get(j, scope, "refresh", refresh);
    if (mode == "none")
        p.mode = TurbulenceMode::none;
    else if (mode == "gaussian-blur")
        p.mode = TurbulenceMode::gaussian_blur;
    else if (mode == "phase-screen")
        p.mode = TurbulenceMode::phase_screen;
    else
        throw ConfigError(scope + ".mode: unknown value \"" + mode + "\"");
    if (refresh == "static")
        p.refresh = RefreshPolicy::static_screen;
    else if (refresh == "per-measurement")
        p.refresh = RefreshPolicy::per_measurement;
    else
        throw ConfigError(scope + ".refresh: unknown value \"" + refresh + "\"");
    p.validate();
    return p;
}

inline json sim_to_json(const SimConfig& cfg) {
    json j;
    j["image_size"] = cfg.image_size;
    j["n_measurements"] = cfg.n_measurements;
    j["pattern_kind"] = cfg.pattern_kind == PatternKind::binary_random ? "binary-random" : "hadamard";
    j["turbulence"] = turbulence_to_json(cfg.turbulence);
    j["detector_noise_sigma"] = cfg.detector_noise_sigma;
    j["seed"] = cfg.seed;
    return j;
}

inline SimConfig sim_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"image_size", "n_measurements", "pattern_kind", "turbulence",
                                  "detector_noise_sigma", "seed"});
    SimConfig cfg;
    std::string kind = "binary-random";
    jsonio::get(j, scope, "image_size", cfg.image_size);
    jsonio::get(j, scope, "n_measurements", cfg.n_measurements);
    jsonio::get(j, scope, "pattern_kind", kind);
    if (j.contains("turbulence")) cfg.turbulence = turbulence_from_json(j.at("turbulence"), scope + ".turbulence");
    jsonio::get(j, scope, "detector_noise_sigma", cfg.detector_noise_sigma);
    jsonio::get(j, scope, "seed", cfg.seed);
    if (kind == "binary-random")
        cfg.pattern_kind = PatternKind::binary_random;
    else if (kind == "hadamard")
        cfg.pattern_kind = PatternKind::hadamard;
    else
        throw ConfigError(scope + ".pattern_kind: unknown value \"" + kind + "\"");
    cfg.validate();
    return cfg;
}

inline json manifest_to_json(const DatasetManifest& manifest) {
    json j;
    j["config"] = sim_to_json(manifest.config);
    j["split_ratio"] = manifest.split_ratio;
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        json entry;
        entry["clean"] = e.clean_path;
        entry["degraded"] = e.degraded_path;
        entry["buckets"] = e.bucket_path;
        entry["pattern_seed"] = e.pattern_seed;
        entry["split"] = e.train ? "train" : "test";
        entries.push_back(entry);
    }
    j["entries"] = entries;
    return j;
}

inline DatasetManifest manifest_from_json(const json& j) {
    jsonio::check_keys(j, "manifest", {"config", "split_ratio", "entries"});
    DatasetManifest manifest;
    if (!j.contains("config") || !j.contains("entries"))
        throw ConfigError("manifest: missing config or entries");
    manifest.config = sim_from_json(j.at("config"), "manifest.config");
    jsonio::get(j, "manifest", "split_ratio", manifest.split_ratio);
    for (const auto& entry : j.at("entries")) {
        jsonio::check_keys(entry, "manifest.entries[]",
                           {"clean", "degraded", "buckets", "pattern_seed", "split"});
        DatasetEntry e;
        e.clean_path = entry.at("clean").get<std::string>();
        e.degraded_path = entry.at("degraded").get<std::string>();
        e.bucket_path = entry.at("buckets").get<std::string>();
        e.pattern_seed = entry.at("pattern_seed").get<std::uint64_t>();
        const std::string split = entry.at("split").get<std::string>();
        if (split != "train" && split != "test")
            throw ConfigError("manifest entry: unknown split \"" + split + "\"");
        e.train = split == "train";
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

inline DatasetManifest load_manifest(const std::string& path) {
    return manifest_from_json(jsonio::load_file(path));
}

// ---------------------------------------------------------------------------
// Builtin objects: seeded binary shapes (rectangles, discs, bars)

/// Deterministic binary object images for dataset synthesis.
inline std::vector<Image> make_builtin_shapes(int count, int size, std::uint64_t seed) {
    if (count < 1) throw ConfigError("make_builtin_shapes: count must be >= 1");
    if (size < 8) throw ConfigError("make_builtin_shapes: size must be >= 8");
    std::vector<Image> shapes;
    shapes.reserve(static_cast<std::size_t>(count));
    for (int idx = 0; idx < count; ++idx) {
        CounterRng rng(seed, 0xb17e5ULL + static_cast<std::uint64_t>(idx));
        Image img = Image::zeros(size, size);
        const int kind = static_cast<int>(rng.below(0, 3));
        const double s = static_cast<double>(size);
        if (kind == 0) {  // axis-aligned rectangle
            const int r0 = static_cast<int>(rng.uniform(1, 0.1 * s, 0.5 * s));
            const int c0 = static_cast<int>(rng.uniform(2, 0.1 * s, 0.5 * s));
            const int rh = static_cast<int>(rng.uniform(3, 0.2 * s, 0.45 * s));
            const int cw = static_cast<int>(rng.uniform(4, 0.2 * s, 0.45 * s));
            for (int r = r0; r < std::min(size, r0 + rh); ++r)
                for (int c = c0; c < std::min(size, c0 + cw); ++c) img.at(r, c) = 1.0;
        } else if (kind == 1) {  // disc
            const double cy = rng.uniform(1, 0.3 * s, 0.7 * s);
            const double cx = rng.uniform(2, 0.3 * s, 0.7 * s);
            const double rad = rng.uniform(3, 0.12 * s, 0.3 * s);
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) {
                    const double dy = r - cy, dx = c - cx;
                    if (dy * dy + dx * dx <= rad * rad) img.at(r, c) = 1.0;
                }
        } else {  // parallel bars
            const bool horizontal = rng.coin(1) != 0;
            const int bar = 1 + static_cast<int>(rng.below(2, std::max(1, size / 8)));
            const int gap = bar + 1 + static_cast<int>(rng.below(3, std::max(1, size / 8)));
            const int phase = static_cast<int>(rng.below(4, static_cast<std::uint64_t>(bar + gap)));
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) {
                    const int t = (horizontal ? r : c) + phase;
                    if (t % (bar + gap) < bar) img.at(r, c) = 1.0;
                }
        }
        shapes.push_back(std::move(img));
    }
    return shapes;
}

// ---------------------------------------------------------------------------
// Dataset generation

/// Simulate one dataset entry per object: clean image, turbulence-degraded
/// image, and the bucket series measured through the configured turbulence.
/// A deterministic shuffle of cfg.seed assigns the train/test split.
inline DatasetManifest generate_dataset(const SimConfig& cfg, const std::vector<Image>& objects,
                                        const std::string& out_dir, double split_ratio) {
    cfg.validate();
    if (objects.empty()) throw ConfigError("generate_dataset: no objects supplied");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw ConfigError("generate_dataset: split_ratio must be in (0,1)");
    for (const auto& obj : objects) {
        if (obj.height != cfg.image_size || obj.width != cfg.image_size)
            throw ConfigError("generate_dataset: object size does not match SimConfig.image_size");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    const int count = static_cast<int>(objects.size());
    const int n_train =
        count == 1 ? 1
                   : std::clamp(static_cast<int>(std::llround(split_ratio * static_cast<double>(count))),
                                1, count - 1);

    // Fisher-Yates on the entry order; the first n_train shuffled slots train.
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    CounterRng shuffle(derive_key(cfg.seed, 0x5048554646ULL));
    for (int i = count - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle.below(static_cast<std::uint64_t>(i),
                                                     static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<bool> is_train(static_cast<std::size_t>(count), false);
    for (int k = 0; k < n_train; ++k) is_train[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

    DatasetManifest manifest;
    manifest.config = cfg;
    manifest.split_ratio = split_ratio;

    for (int idx = 0; idx < count; ++idx) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "obj_%04d", idx);
        DatasetEntry entry;
        entry.clean_path = std::string(stem) + "_clean.pgm";
        entry.degraded_path = std::string(stem) + "_degraded.pgm";
        entry.bucket_path = std::string(stem) + "_buckets.bin";
        entry.pattern_seed = derive_key(cfg.seed, 0xda7aULL + static_cast<std::uint64_t>(idx));
        entry.train = is_train[static_cast<std::size_t>(idx)];

        const Image& obj = objects[static_cast<std::size_t>(idx)];
        const Image degraded = degrade(obj, cfg.turbulence, derive_key(entry.pattern_seed, 0xde6ULL));

        SimConfig entry_cfg = cfg;
        entry_cfg.seed = entry.pattern_seed;
        const PatternStack patterns = make_patterns(entry_cfg);
        const BucketSeries buckets = measure(obj, patterns, cfg.turbulence,
                                             cfg.detector_noise_sigma,
                                             derive_key(entry.pattern_seed, 0x6d6eaULL));

        const std::filesystem::path base(out_dir);
        save_image(obj, (base / entry.clean_path).string());
        save_image(degraded, (base / entry.degraded_path).string());
        save_bucket_series(buckets, (base / entry.bucket_path).string());
        manifest.entries.push_back(std::move(entry));
    }

    jsonio::save_file(manifest_to_json(manifest),
                      (std::filesystem::path(out_dir) / "manifest.json").string());
    return manifest;
}

}  // namespace ghostforge
