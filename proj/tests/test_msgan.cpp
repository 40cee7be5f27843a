#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "ghostforge/config.hpp"
#include "ghostforge/gradcheck.hpp"
#include "oracles.hpp"

using namespace ghostforge;
namespace fs = std::filesystem;

namespace {

Tensor seeded_tensor(const Shape& s, std::uint64_t seed, bool rg = false, double lo = -1.0,
                     double hi = 1.0) {
    CounterRng rng(seed);
    std::vector<double> v(s.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(i, lo, hi);
    return Tensor::from_vector(s, std::move(v), rg);
}

void fill_param(ParamStore& store, const std::string& name, double value) {
    std::vector<double>& data = store.at(name).tensor.node()->value;
    std::fill(data.begin(), data.end(), value);
}

}  // namespace

TEST_CASE("MAFE preserves spatial size") {
    ParamStore store(1);
    MafeUnit unit(store, "m", 4, {1, 2, 3}, 4);
    for (int s : {7, 8, 12, 2}) {
        const Tensor x = seeded_tensor({1, 4, s, s}, 10 + static_cast<std::uint64_t>(s));
        const Tensor y = unit.forward(x);
        CHECK(y.shape() == Shape{1, 4, s, s});
    }
}

TEST_CASE("MAFE with saturated gate reduces to conv-merge plus skip") {
    ParamStore store(2);
    MafeUnit unit(store, "m", 4, {1, 2, 3}, 4);
    // force the excitation to exactly 1: zero the up-conv weights, huge bias
    fill_param(store, "m/attn_up/w", 0.0);
    fill_param(store, "m/attn_up/b", 1000.0);

    const Tensor x = seeded_tensor({1, 4, 9, 9}, 77);
    const Tensor out = unit.forward(x);

    std::vector<Tensor> branches;
    const std::array<int, 3> dilations{1, 2, 3};
    for (int i = 0; i < 3; ++i)
        branches.push_back(conv2d(x, store.at("m/branch" + std::to_string(i) + "/w").tensor,
                                  store.at("m/branch" + std::to_string(i) + "/b").tensor, 1,
                                  dilations[static_cast<std::size_t>(i)],
                                  dilations[static_cast<std::size_t>(i)]));
    const Tensor merged =
        conv2d(concat_channels(branches), store.at("m/merge/w").tensor, store.at("m/merge/b").tensor);
    const Tensor expected = add(merged, x);
    CHECK(out.data() == expected.data());
}

TEST_CASE("MAFE composite passes the gradient check") {
    ParamStore store(3);
    MafeUnit unit(store, "m", 4, {1, 2, 3}, 4);
    const Tensor x = seeded_tensor({1, 4, 12, 12}, 5, true);
    const Tensor t = seeded_tensor({1, 4, 12, 12}, 6);
    auto f = [&] { return mse(unit.forward(x), t); };
    CHECK(grad_check(f, x, 1e-5, 48) < 1e-4);
}

TEST_CASE("fusion with identical logits averages the lifted levels") {
    ParamStore store(4);
    FusionUnit unit(store, "f", {8, 6, 4, 3}, 3);
    for (int i = 0; i < 4; ++i) {
        fill_param(store, "f/level" + std::to_string(i) + "/logit/w", 0.0);
        fill_param(store, "f/level" + std::to_string(i) + "/logit/b", 0.0);
    }
    const std::vector<Tensor> levels = {
        seeded_tensor({1, 8, 2, 2}, 11), seeded_tensor({1, 6, 4, 4}, 12),
        seeded_tensor({1, 4, 8, 8}, 13), seeded_tensor({1, 3, 16, 16}, 14)};
    const auto weights = unit.blend_weights(levels);
    for (const Tensor& w : weights)
        for (double v : w.data()) CHECK(v == 0.25);

    const Tensor fused = unit.forward(levels);
    Tensor mean;
    for (int i = 0; i < 4; ++i) {
        const Tensor up = upsample_nearest(levels[static_cast<std::size_t>(i)],
                                           16 / levels[static_cast<std::size_t>(i)].shape().h);
        const Tensor lifted = conv2d(up, store.at("f/level" + std::to_string(i) + "/match/w").tensor,
                                     store.at("f/level" + std::to_string(i) + "/match/b").tensor);
        const Tensor quarter = scale(lifted, 0.25);
        mean = mean.defined() ? add(mean, quarter) : quarter;
    }
    for (std::size_t i = 0; i < fused.numel(); ++i)
        CHECK(fused.data()[i] == Catch::Approx(mean.data()[i]).margin(1e-12));
}

TEST_CASE("a dominant logit selects its level") {
    ParamStore store(5);
    FusionUnit unit(store, "f", {8, 6, 4, 3}, 3);
    for (int i = 0; i < 4; ++i) {
        fill_param(store, "f/level" + std::to_string(i) + "/logit/w", 0.0);
        fill_param(store, "f/level" + std::to_string(i) + "/logit/b", i == 2 ? 1e6 : 0.0);
    }
    const std::vector<Tensor> levels = {
        seeded_tensor({1, 8, 2, 2}, 21), seeded_tensor({1, 6, 4, 4}, 22),
        seeded_tensor({1, 4, 8, 8}, 23), seeded_tensor({1, 3, 16, 16}, 24)};
    const Tensor fused = unit.forward(levels);
    const Tensor up = upsample_nearest(levels[2], 2);
    const Tensor lifted = conv2d(up, store.at("f/level2/match/w").tensor,
                                 store.at("f/level2/match/b").tensor);
    for (std::size_t i = 0; i < fused.numel(); ++i)
        CHECK(fused.data()[i] == Catch::Approx(lifted.data()[i]).margin(1e-9));
}

TEST_CASE("fusion weights sum to one at every site on a seeded pass") {
    ParamStore store(6);
    FusionUnit unit(store, "f", {8, 6, 4, 3}, 3);
    const std::vector<Tensor> levels = {
        seeded_tensor({1, 8, 2, 2}, 31), seeded_tensor({1, 6, 4, 4}, 32),
        seeded_tensor({1, 4, 8, 8}, 33), seeded_tensor({1, 3, 16, 16}, 34)};
    const auto weights = unit.blend_weights(levels);
    for (std::size_t i = 0; i < weights[0].numel(); ++i) {
        double total = 0.0;
        for (const Tensor& w : weights) total += w.data()[i];
        CHECK(total == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("fusion rejects anything but 4 strictly finer levels") {
    ParamStore store(7);
    FusionUnit unit(store, "f", {8, 6, 4, 3}, 3);
    std::vector<Tensor> three = {seeded_tensor({1, 8, 2, 2}, 1), seeded_tensor({1, 6, 4, 4}, 2),
                                 seeded_tensor({1, 4, 8, 8}, 3)};
    CHECK_THROWS_AS(unit.forward(three), ConfigError);
    std::vector<Tensor> flat = {seeded_tensor({1, 8, 4, 4}, 1), seeded_tensor({1, 6, 4, 4}, 2),
                                seeded_tensor({1, 4, 8, 8}, 3), seeded_tensor({1, 3, 16, 16}, 4)};
    CHECK_THROWS_AS(unit.forward(flat), ConfigError);
}

TEST_CASE("generator preserves the input shape") {
    GeneratorConfig cfg;
    cfg.base_channels = 4;
    Generator g(cfg, 99);
    for (int s : {32, 64}) {
        NoGrad guard;
        const Tensor x = seeded_tensor({1, 1, s, s}, 40 + static_cast<std::uint64_t>(s), false,
                                       0.0, 1.0);
        const Tensor y = g.forward(x);
        CHECK(y.shape() == Shape{1, 1, s, s});
        for (double v : y.data()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 1, 24, 24})), ConfigError);
}

TEST_CASE("zeroed head makes the generator a frozen sigmoid of the input") {
    GeneratorConfig cfg;
    cfg.base_channels = 4;
    Generator g(cfg, 7);
    fill_param(g.params(), "g/head/w", 0.0);
    fill_param(g.params(), "g/head/b", 0.0);
    NoGrad guard;
    const Tensor x = seeded_tensor({1, 1, 16, 16}, 3, false, 0.0, 1.0);
    const Tensor y = g.forward(x);
    const Tensor expected = sigmoid(x);
    CHECK(y.data() == expected.data());
}

TEST_CASE("generator loss passes the gradient check at tiny width") {
    GeneratorConfig cfg;
    cfg.base_channels = 4;
    Generator g(cfg, 13);
    const Tensor x = seeded_tensor({1, 1, 16, 16}, 4, true, 0.05, 0.95);
    const Tensor t = seeded_tensor({1, 1, 16, 16}, 5, false, 0.05, 0.95);
    auto f = [&] { return mse(g.forward(x), t); };
    CHECK(grad_check(f, x, 1e-5, 32) < 1e-4);
}

TEST_CASE("generator config is validated") {
    GeneratorConfig bad;
    bad.depth = 3;
    CHECK_THROWS_AS(Generator(bad, 1), ConfigError);
    GeneratorConfig small;
    small.base_channels = 2;
    CHECK_THROWS_AS(Generator(small, 1), ConfigError);
    GeneratorConfig indivisible;
    indivisible.base_channels = 6;
    indivisible.attention_reduction = 4;
    CHECK_THROWS_AS(Generator(indivisible, 1), ConfigError);
}

TEST_CASE("discriminator maps 64x64 to a 7x7 patch grid") {
    DiscriminatorConfig cfg;
    Discriminator d(cfg, 17);
    NoGrad guard;
    const Tensor x = seeded_tensor({1, 1, 64, 64}, 8, false, 0.0, 1.0);
    const Tensor y = d.forward(x);
    CHECK(y.shape() == Shape{1, 1, 7, 7});
    CHECK(cfg.channels() == std::array<int, 4>{16, 32, 64, 1});
}

TEST_CASE("doubling first-layer weights doubles its pre-activations exactly") {
    DiscriminatorConfig cfg;
    Discriminator d(cfg, 23);
    NoGrad guard;
    const Tensor x = seeded_tensor({1, 1, 32, 32}, 9, false, 0.0, 1.0);
    const Tensor w = d.params().at("d/conv0/w").tensor;
    const Tensor b = d.params().at("d/conv0/b").tensor;
    const Tensor base = conv2d(x, w, b, 2, 1, 1);

    Tensor w2 = Tensor::from_vector(w.shape(), w.data());
    Tensor b2 = Tensor::from_vector(b.shape(), b.data());
    for (double& v : w2.mutable_data()) v *= 2.0;
    for (double& v : b2.mutable_data()) v *= 2.0;
    const Tensor doubled = conv2d(x, w2, b2, 2, 1, 1);
    for (std::size_t i = 0; i < base.numel(); ++i)
        CHECK(doubled.data()[i] == 2.0 * base.data()[i]);
}

TEST_CASE("patch scores only move where the receptive field covers a perturbation") {
    DiscriminatorConfig cfg;
    cfg.width_factor = 0.125;
    Discriminator d(cfg, 29);
    NoGrad guard;
    Tensor x = seeded_tensor({1, 1, 64, 64}, 10, false, 0.0, 1.0);
    const std::vector<double> base = d.forward(x).data();

    const int py = 40, px = 24;
    x.mutable_data()[static_cast<std::size_t>(py) * 64 + px] += 0.25;
    const std::vector<double> moved = d.forward(x).data();

    // with strides (2,2,2,1), 4x4 kernels and pad 1 per layer, patch (r,c)
    // covers input rows [8r-15, 8r+30] and the same in columns
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 7; ++c) {
            const bool covers = (py >= 8 * r - 15 && py <= 8 * r + 30) &&
                                (px >= 8 * c - 15 && px <= 8 * c + 30);
            const std::size_t idx = static_cast<std::size_t>(r) * 7 + c;
            if (!covers) CHECK(moved[idx] == base[idx]);
        }
    }
    double total_change = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) total_change += std::abs(moved[i] - base[i]);
    CHECK(total_change > 0.0);
}

TEST_CASE("loss components: identical pair zeroes mse and perceptual terms") {
    DiscriminatorConfig dcfg;
    dcfg.width_factor = 0.125;
    Discriminator d(dcfg, 31);
    PerceptualExtractor extractor(37);
    const Tensor gt = seeded_tensor({1, 1, 32, 32}, 12, false, 0.0, 1.0);
    const LossBundle bundle = losses(gt, gt, d, extractor, LossWeights{});
    CHECK(bundle.mse_term.item() == 0.0);
    CHECK(bundle.perc.item() == 0.0);
}

TEST_CASE("a silenced discriminator yields the 0.5 / 0.25 least-squares values") {
    DiscriminatorConfig dcfg;
    dcfg.width_factor = 0.125;
    Discriminator d(dcfg, 41);
    for (const auto& [name, param] : d.params())
        std::fill(param.tensor.node()->value.begin(), param.tensor.node()->value.end(), 0.0);
    PerceptualExtractor extractor(43);
    const Tensor gt = seeded_tensor({1, 1, 32, 32}, 13, false, 0.0, 1.0);
    const Tensor gen = seeded_tensor({1, 1, 32, 32}, 14, false, 0.0, 1.0);
    const LossBundle bundle = losses(gt, gen, d, extractor, LossWeights{});
    CHECK(bundle.adv_d.item() == Catch::Approx(0.5).margin(1e-15));
    CHECK(bundle.adv_g.item() == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("the total is the published weighted sum of its parts") {
    DiscriminatorConfig dcfg;
    dcfg.width_factor = 0.125;
    Discriminator d(dcfg, 47);
    PerceptualExtractor extractor(53);
    const Tensor gt = seeded_tensor({1, 1, 32, 32}, 15, false, 0.0, 1.0);
    const Tensor gen = seeded_tensor({1, 1, 32, 32}, 16, false, 0.0, 1.0);
    const LossWeights w{};  // (0.5, 0.01, 0.01)
    const LossBundle bundle = losses(gt, gen, d, extractor, w);
    const double by_hand = 0.5 * bundle.mse_term.item() +
                           (0.01 * bundle.perc.item() + 0.01 * bundle.adv_g.item());
    CHECK(bundle.total.item() == Catch::Approx(by_hand).margin(1e-12));
}

// ---------------------------------------------------------------------------
// trainer

namespace {

struct ToyData {
    std::string dir;
    DatasetManifest manifest;
};

ToyData make_toy_dataset(const std::string& tag) {
    SimConfig sim;
    sim.image_size = 16;
    sim.n_measurements = 4;
    sim.seed = 61;
    sim.turbulence.mode = TurbulenceMode::gaussian_blur;
    sim.turbulence.blur_sigma = 1.0;
    ToyData data;
    data.dir = (fs::temp_directory_path() / ("gf_toytrain_" + tag)).string();
    data.manifest = generate_dataset(sim, make_builtin_shapes(4, 16, 71), data.dir, 0.75);
    return data;
}

TrainResult run_toy_train(const ToyData& data, int iterations, const std::string& out_tag) {
    GeneratorConfig gcfg;
    gcfg.base_channels = 4;
    DiscriminatorConfig dcfg;
    dcfg.width_factor = 0.125;
    TrainConfig tcfg;
    tcfg.iterations = iterations;
    tcfg.seed = 17;
    Generator g(gcfg, derive_key(tcfg.seed, hash_name("generator")));
    Discriminator d(dcfg, derive_key(tcfg.seed, hash_name("discriminator")));
    PerceptualExtractor extractor(derive_key(tcfg.seed, hash_name("extractor")));
    return train(data.manifest, data.dir, g, d, extractor, tcfg, LossWeights{},
                 data.dir + "/run_" + out_tag);
}

}  // namespace

TEST_CASE("zero-iteration training writes the initialization checkpoint") {
    const ToyData data = make_toy_dataset("init");
    const TrainResult result = run_toy_train(data, 0, "a");
    CHECK(result.history.empty());

    GeneratorConfig gcfg;
    gcfg.base_channels = 4;
    Generator fresh(gcfg, derive_key(17, hash_name("generator")));
    const std::string fresh_path = data.dir + "/fresh.bin";
    save_checkpoint(fresh.params(), fresh_path);
    CHECK(oracles::read_file_bytes(result.checkpoint_path) ==
          oracles::read_file_bytes(fresh_path));
}

TEST_CASE("training twice with one seed is bit-identical") {
    const ToyData data = make_toy_dataset("det");
    const TrainResult a = run_toy_train(data, 6, "a");
    const TrainResult b = run_toy_train(data, 6, "b");
    CHECK(oracles::read_file_bytes(a.history_path) == oracles::read_file_bytes(b.history_path));
    CHECK(oracles::read_file_bytes(a.checkpoint_path) ==
          oracles::read_file_bytes(b.checkpoint_path));
    REQUIRE(a.history.size() == 6);
    for (const LossRecord& rec : a.history)
        CHECK(rec.total ==
              Catch::Approx(0.5 * rec.mse + (0.01 * rec.perc + 0.01 * rec.adv_g)).margin(1e-12));
}

TEST_CASE("restore round-trips through a saved checkpoint bit-exactly") {
    const ToyData data = make_toy_dataset("restore");
    const TrainResult result = run_toy_train(data, 4, "c");

    GeneratorConfig gcfg;
    gcfg.base_channels = 4;
    Generator g(gcfg, 555);  // different init; the checkpoint overwrites it
    load_checkpoint(g.params(), result.checkpoint_path);

    const Image degraded = load_image(data.dir + "/" + data.manifest.entries[0].degraded_path);
    const Image once = restore(degraded, g);
    const Image twice = restore(degraded, g);
    CHECK(once.data == twice.data);
    CHECK(once.height == degraded.height);
    CHECK(once.width == degraded.width);

    Generator reloaded(gcfg, 777);
    load_checkpoint(reloaded.params(), result.checkpoint_path);
    CHECK(restore(degraded, reloaded).data == once.data);
}

TEST_CASE("restore rejects a checkpoint from a different architecture") {
    const ToyData data = make_toy_dataset("mismatch");
    const TrainResult result = run_toy_train(data, 1, "d");
    GeneratorConfig other;
    other.base_channels = 8;
    Generator g(other, 1);
    CHECK_THROWS_AS(load_checkpoint(g.params(), result.checkpoint_path), ConfigError);
}
