#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "ghostforge/dataset.hpp"
#include "oracles.hpp"

using namespace ghostforge;
namespace fs = std::filesystem;

namespace {

SimConfig small_cfg() {
    SimConfig cfg;
    cfg.image_size = 16;
    cfg.n_measurements = 8;
    cfg.seed = 71;
    cfg.turbulence.mode = TurbulenceMode::gaussian_blur;
    cfg.turbulence.blur_sigma = 1.0;
    cfg.turbulence.tilt_sigma = 0.3;
    return cfg;
}

}  // namespace

TEST_CASE("builtin shapes are binary, deterministic, and non-empty") {
    const auto shapes = make_builtin_shapes(12, 32, 5);
    const auto again = make_builtin_shapes(12, 32, 5);
    REQUIRE(shapes.size() == 12);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        CHECK(shapes[i].data == again[i].data);
        double fill = 0.0;
        for (double v : shapes[i].data) {
            CHECK((v == 0.0 || v == 1.0));
            fill += v;
        }
        CHECK(fill > 0.0);  // never a blank object
    }
}

TEST_CASE("generate_dataset splits 10 objects at 0.8 into 8 train / 2 test") {
    const SimConfig cfg = small_cfg();
    const auto objects = make_builtin_shapes(10, cfg.image_size, 3);
    const std::string dir = (fs::temp_directory_path() / "gf_dataset_split").string();
    const DatasetManifest manifest = generate_dataset(cfg, objects, dir, 0.8);
    CHECK(manifest.train_count() == 8);
    CHECK(manifest.test_count() == 2);
    for (const auto& entry : manifest.entries) {
        CHECK(fs::exists(fs::path(dir) / entry.clean_path));
        CHECK(fs::exists(fs::path(dir) / entry.degraded_path));
        CHECK(fs::exists(fs::path(dir) / entry.bucket_path));
    }
    // seeds unique per entry
    std::set<std::uint64_t> seeds;
    for (const auto& entry : manifest.entries) seeds.insert(entry.pattern_seed);
    CHECK(seeds.size() == manifest.entries.size());
}

TEST_CASE("regeneration is byte-identical") {
    const SimConfig cfg = small_cfg();
    const auto objects = make_builtin_shapes(6, cfg.image_size, 8);
    const std::string dir_a = (fs::temp_directory_path() / "gf_dataset_a").string();
    const std::string dir_b = (fs::temp_directory_path() / "gf_dataset_b").string();
    const DatasetManifest ma = generate_dataset(cfg, objects, dir_a, 0.5);
    const DatasetManifest mb = generate_dataset(cfg, objects, dir_b, 0.5);
    CHECK(oracles::read_file_bytes(dir_a + "/manifest.json") ==
          oracles::read_file_bytes(dir_b + "/manifest.json"));
    for (std::size_t i = 0; i < ma.entries.size(); ++i) {
        CHECK(oracles::read_file_bytes(dir_a + "/" + ma.entries[i].degraded_path) ==
              oracles::read_file_bytes(dir_b + "/" + mb.entries[i].degraded_path));
        CHECK(oracles::read_file_bytes(dir_a + "/" + ma.entries[i].bucket_path) ==
              oracles::read_file_bytes(dir_b + "/" + mb.entries[i].bucket_path));
    }
}

TEST_CASE("manifest JSON round-trips") {
    const SimConfig cfg = small_cfg();
    const auto objects = make_builtin_shapes(4, cfg.image_size, 2);
    const std::string dir = (fs::temp_directory_path() / "gf_dataset_rt").string();
    const DatasetManifest manifest = generate_dataset(cfg, objects, dir, 0.5);
    const DatasetManifest loaded = load_manifest(dir + "/manifest.json");
    REQUIRE(loaded.entries.size() == manifest.entries.size());
    CHECK(loaded.split_ratio == manifest.split_ratio);
    CHECK(loaded.config.image_size == cfg.image_size);
    CHECK(loaded.config.seed == cfg.seed);
    for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
        CHECK(loaded.entries[i].pattern_seed == manifest.entries[i].pattern_seed);
        CHECK(loaded.entries[i].train == manifest.entries[i].train);
    }
}

TEST_CASE("the default split ratio mirrors 173:35") {
    CHECK(kDefaultSplitRatio == Catch::Approx(173.0 / 208.0).margin(0.0));
    CHECK(std::llround(kDefaultSplitRatio * 208.0) == 173);
}

TEST_CASE("generate_dataset validates its contract") {
    const SimConfig cfg = small_cfg();
    const std::string dir = (fs::temp_directory_path() / "gf_dataset_bad").string();
    CHECK_THROWS_AS(generate_dataset(cfg, {}, dir, 0.5), ConfigError);
    const auto objects = make_builtin_shapes(4, cfg.image_size, 2);
    CHECK_THROWS_AS(generate_dataset(cfg, objects, dir, 0.0), ConfigError);
    CHECK_THROWS_AS(generate_dataset(cfg, objects, dir, 1.0), ConfigError);
    const auto wrong_size = make_builtin_shapes(2, 32, 2);
    CHECK_THROWS_AS(generate_dataset(cfg, wrong_size, dir, 0.5), ConfigError);
}
