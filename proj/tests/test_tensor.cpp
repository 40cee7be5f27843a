#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "ghostforge/adam.hpp"
#include "ghostforge/gradcheck.hpp"
#include "ghostforge/ops.hpp"
#include "ghostforge/params.hpp"
#include "oracles.hpp"

using namespace ghostforge;

namespace {

Tensor seeded_tensor(const Shape& s, std::uint64_t seed, bool rg = false, double lo = -1.0,
                     double hi = 1.0) {
    CounterRng rng(seed);
    std::vector<double> v(s.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(i, lo, hi);
    return Tensor::from_vector(s, std::move(v), rg);
}

}  // namespace

TEST_CASE("conv2d hand example: ones 3x3, ones kernel, pad 1") {
    const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor b = Tensor::zeros({1, 1, 1, 1});
    const Tensor y = conv2d(x, w, b, 1, 1, 1);
    CHECK(y.data()[4] == 9.0);
    CHECK(y.data()[0] == 4.0);
    CHECK(y.data()[2] == 4.0);
    CHECK(y.data()[1] == 6.0);
}

TEST_CASE("conv2d 1x1 identity kernel passes the input through") {
    const Tensor x = seeded_tensor({1, 1, 5, 5}, 10);
    const Tensor w = Tensor::full({1, 1, 1, 1}, 1.0);
    const Tensor b = Tensor::zeros({1, 1, 1, 1});
    const Tensor y = conv2d(x, w, b);
    CHECK(y.data() == x.data());
}

TEST_CASE("dilated conv matches the nested-loop oracle") {
    const Tensor x = seeded_tensor({2, 3, 9, 9}, 21);
    const Tensor w = seeded_tensor({4, 3, 3, 3}, 22);
    const Tensor b = seeded_tensor({1, 4, 1, 1}, 23);
    for (const auto& [stride, dilation, padding] :
         std::vector<std::array<int, 3>>{{1, 2, 2}, {2, 1, 1}, {1, 3, 3}, {2, 2, 0}}) {
        Shape ref_shape;
        const auto ref = oracles::conv_reference(x, w, b, stride, dilation, padding, ref_shape);
        const Tensor y = conv2d(x, w, b, stride, dilation, padding);
        REQUIRE(y.shape() == ref_shape);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(y.data()[i] == Catch::Approx(ref[i]).margin(1e-12));
    }
}

TEST_CASE("conv2d reports shape problems with dimensions") {
    const Tensor x = seeded_tensor({1, 2, 4, 4}, 1);
    const Tensor w = seeded_tensor({1, 3, 3, 3}, 2);
    const Tensor b = Tensor::zeros({1, 1, 1, 1});
    CHECK_THROWS_WITH(conv2d(x, w, b), Catch::Matchers::ContainsSubstring("channels"));
    const Tensor w2 = seeded_tensor({1, 2, 7, 7}, 3);
    CHECK_THROWS_WITH(conv2d(x, w2, b), Catch::Matchers::ContainsSubstring("exceeds"));
}

TEST_CASE("global_avg_pool averages and backpropagates evenly") {
    const Tensor x = Tensor::from_vector({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
    const Tensor y = global_avg_pool(x);
    CHECK(y.item() == 2.5);

    const Tensor c = Tensor::full({1, 3, 4, 4}, 0.7);
    const Tensor pooled = global_avg_pool(c);
    for (double v : pooled.data()) CHECK(v == Catch::Approx(0.7).margin(1e-15));

    auto f = [&] { return sum(global_avg_pool(x)); };
    CHECK(grad_check(f, x) < 1e-8);
}

TEST_CASE("activation values at reference points") {
    const Tensor x = Tensor::from_vector({1, 1, 1, 3}, {-1.0, 0.0, 2.0});
    const Tensor r = relu(x);
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 0.0);
    CHECK(r.data()[2] == 2.0);
    CHECK(sigmoid(Tensor::zeros({1, 1, 1, 1})).item() == 0.5);
    CHECK(ghostforge::tanh(Tensor::zeros({1, 1, 1, 1})).item() == 0.0);
    const Tensor l = leaky_relu(x, 0.2);
    CHECK(l.data()[0] == Catch::Approx(-0.2));
    CHECK(l.data()[2] == 2.0);
}

TEST_CASE("activation gradients pass finite differences") {
    const Tensor x = seeded_tensor({1, 2, 5, 5}, 33, true);
    const Tensor t = seeded_tensor({1, 2, 5, 5}, 34);
    CHECK(grad_check([&] { return mse(relu(x), t); }, x) < 1e-6);
    CHECK(grad_check([&] { return mse(sigmoid(x), t); }, x) < 1e-6);
    CHECK(grad_check([&] { return mse(ghostforge::tanh(x), t); }, x) < 1e-6);
}

TEST_CASE("scale_channels gates per channel") {
    const Tensor x = seeded_tensor({1, 3, 4, 4}, 40, true);
    const Tensor ones = Tensor::full({1, 3, 1, 1}, 1.0);
    CHECK(scale_channels(x, ones).data() == x.data());
    const Tensor zeros = Tensor::full({1, 3, 1, 1}, 0.0);
    const Tensor gated = scale_channels(x, zeros);
    for (double v : gated.data()) CHECK(v == 0.0);

    const Tensor r = seeded_tensor({1, 3, 1, 1}, 41, true);
    auto f = [&] { return mean_square(scale_channels(x, r)); };
    CHECK(grad_check(f, x) < 1e-6);
    CHECK(grad_check(f, r) < 1e-6);
    CHECK_THROWS_AS(scale_channels(x, Tensor::full({1, 2, 1, 1}, 1.0)), ConfigError);
}

TEST_CASE("upsample_nearest block-replicates") {
    const Tensor x = Tensor::from_vector({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor y = upsample_nearest(x, 2);
    const std::vector<double> expected = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.data() == expected);
}

TEST_CASE("maxpool2 takes block maxima and routes gradients to them") {
    const Tensor x = Tensor::from_vector({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 1, 7}, true);
    const Tensor y = maxpool2(x);
    CHECK(y.data() == std::vector<double>{5, 7});
    {
        Tape tape;
        const Tensor loss = sum(maxpool2(x));
        tape.backward(loss);
    }
    CHECK(x.grad() == std::vector<double>{0, 1, 0, 0, 0, 0, 0, 1});
    CHECK_THROWS_AS(maxpool2(Tensor::zeros({1, 1, 3, 4})), ConfigError);
}

TEST_CASE("softmax_over of equal tensors yields 1/k and sums to one") {
    const Tensor a = Tensor::full({1, 1, 3, 3}, 0.4);
    const Tensor b = Tensor::full({1, 1, 3, 3}, 0.4);
    const Tensor c = Tensor::full({1, 1, 3, 3}, 0.4);
    const auto ws = softmax_over({a, b, c});
    for (const Tensor& w : ws)
        for (double v : w.data()) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-15));

    const Tensor d = seeded_tensor({1, 1, 3, 3}, 50);
    const Tensor e = seeded_tensor({1, 1, 3, 3}, 51);
    const auto ws2 = softmax_over({d, e});
    for (std::size_t i = 0; i < ws2[0].numel(); ++i)
        CHECK(ws2[0].data()[i] + ws2[1].data()[i] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("mse and mean_square reference values") {
    const Tensor a = Tensor::from_vector({1, 1, 1, 4}, {0.0, 1.0, 2.0, 3.0});
    const Tensor b = Tensor::from_vector({1, 1, 1, 4}, {1.0, 1.0, 1.0, 1.0});
    CHECK(mse(a, b).item() == Catch::Approx((1.0 + 0.0 + 1.0 + 4.0) / 4.0).margin(1e-15));
    CHECK(mean_square(a).item() == Catch::Approx((0.0 + 1.0 + 4.0 + 9.0) / 4.0).margin(1e-15));
}

TEST_CASE("gradients accumulate additively across two loss heads") {
    Tensor x = seeded_tensor({1, 1, 4, 4}, 60, true);
    const Tensor t = seeded_tensor({1, 1, 4, 4}, 61);

    std::vector<double> combined;
    {
        Tape tape;
        x.zero_grad();
        const Tensor h1 = mse(x, t);
        const Tensor h2 = mean_square(x);
        tape.backward(add(h1, h2));
        combined = x.grad();
    }
    std::vector<double> separate(x.numel(), 0.0);
    {
        Tape tape;
        x.zero_grad();
        tape.backward(mse(x, t));
        for (std::size_t i = 0; i < separate.size(); ++i) separate[i] += x.grad()[i];
    }
    {
        Tape tape;
        x.zero_grad();
        tape.backward(mean_square(x));
        for (std::size_t i = 0; i < separate.size(); ++i) separate[i] += x.grad()[i];
    }
    for (std::size_t i = 0; i < combined.size(); ++i)
        CHECK(combined[i] == Catch::Approx(separate[i]).margin(1e-12));
}

TEST_CASE("non-finite forward values abort naming the producer") {
    const Tensor big = Tensor::full({1, 1, 1, 1}, 1e308);
    try {
        add(big, big);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("add") != std::string::npos);
    }
}

TEST_CASE("backward requires a scalar recorded loss") {
    const Tensor x = seeded_tensor({1, 1, 2, 2}, 70, true);
    Tape tape;
    const Tensor y = relu(x);
    CHECK_THROWS_AS(tape.backward(y), ConfigError);
}

TEST_CASE("no recording happens without a tape or grads") {
    const Tensor x = seeded_tensor({1, 1, 4, 4}, 80, true);
    {
        Tape tape;
        {
            NoGrad guard;
            const Tensor y = relu(x);
            CHECK_FALSE(y.requires_grad());
        }
        CHECK(tape.size() == 0);
        const Tensor z = relu(x);
        CHECK(z.requires_grad());
        CHECK(tape.size() == 1);
    }
    const Tensor outside = relu(x);
    CHECK_FALSE(outside.requires_grad());
}

TEST_CASE("grad_check flags a linear function exactly") {
    const Tensor x = seeded_tensor({1, 1, 4, 4}, 90, true);
    auto f = [&] { return sum(x); };
    CHECK(grad_check(f, x) < 1e-10);
}

TEST_CASE("adam first-step hand value and zero-gradient behaviour") {
    ParamStore store(0);
    Tensor p = store.create("p", {1, 1, 1, 1}, Init::zeros);
    {
        Tape tape;
        tape.backward(sum(p));
    }
    Adam opt({1e-3, 0.9, 0.999, 1e-8});
    opt.step(store);
    CHECK(p.data()[0] == Catch::Approx(-1e-3 / (1.0 + 1e-8)).margin(1e-15));

    // zero gradient from zeroed moments: parameter must not move
    ParamStore store2(0);
    Tensor q = store2.create("q", {1, 1, 1, 1}, Init::ones);
    {
        Tape tape;
        tape.backward(scale(sum(q), 0.0));
    }
    Adam opt2;
    opt2.step(store2);
    CHECK(q.data()[0] == 1.0);
}

TEST_CASE("adam demands populated gradients") {
    ParamStore store(0);
    store.create("p", {1, 1, 2, 2}, Init::ones);
    Adam opt;
    CHECK_THROWS_WITH(opt.step(store), Catch::Matchers::ContainsSubstring("missing gradient"));
}

TEST_CASE("adam trajectories are bit-identical across runs") {
    auto run = [](std::vector<double>& out) {
        ParamStore store(123);
        Tensor p = store.create("w", {1, 1, 2, 2}, Init::kaiming_uniform, 4);
        const Tensor t = seeded_tensor({1, 1, 2, 2}, 5);
        Adam opt({1e-2, 0.9, 0.999, 1e-8});
        for (int i = 0; i < 100; ++i) {
            Tape tape;
            tape.backward(mse(p, t));
            opt.step(store);
        }
        out = p.data();
    };
    std::vector<double> a, b;
    run(a);
    run(b);
    CHECK(a == b);
}

TEST_CASE("parameter init depends on (seed, name) only") {
    ParamStore s1(7), s2(7), s3(8);
    const Tensor a = s1.create("layer/w", {2, 2, 3, 3}, Init::kaiming_uniform, 18);
    s2.create("other/w", {1, 1, 1, 1}, Init::zeros);  // different creation order
    const Tensor b = s2.create("layer/w", {2, 2, 3, 3}, Init::kaiming_uniform, 18);
    const Tensor c = s3.create("layer/w", {2, 2, 3, 3}, Init::kaiming_uniform, 18);
    CHECK(a.data() == b.data());
    CHECK(a.data() != c.data());
    const double bound = std::sqrt(6.0 / 18.0);
    for (double v : a.data()) {
        CHECK(v >= -bound);
        CHECK(v <= bound);
    }
    CHECK_THROWS_AS(s1.create("layer/w", {1, 1, 1, 1}, Init::zeros), ConfigError);
}

TEST_CASE("checkpoints round-trip bit-exactly and validate the name set") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "gf_ckpt.bin").string();
    ParamStore store(11);
    store.create("a/w", {2, 1, 3, 3}, Init::kaiming_uniform, 9);
    store.create("a/b", {1, 2, 1, 1}, Init::ones);
    save_checkpoint(store, path);

    ParamStore loaded(0);
    loaded.create("a/w", {2, 1, 3, 3}, Init::zeros);
    loaded.create("a/b", {1, 2, 1, 1}, Init::zeros);
    load_checkpoint(loaded, path);
    CHECK(loaded.at("a/w").tensor.data() == store.at("a/w").tensor.data());
    CHECK(loaded.at("a/b").tensor.data() == store.at("a/b").tensor.data());

    ParamStore wrong(0);
    wrong.create("a/w", {2, 1, 3, 3}, Init::zeros);
    wrong.create("extra/w", {1, 1, 1, 1}, Init::zeros);
    try {
        load_checkpoint(wrong, path);
        FAIL("expected mismatch");
    } catch (const ConfigError& e) {
        // missing: the architecture expects it, the checkpoint lacks it;
        // extra: the checkpoint carries it, the architecture does not
        const std::string msg = e.what();
        CHECK(msg.find("missing:extra/w") != std::string::npos);
        CHECK(msg.find("extra:a/b") != std::string::npos);
    }
}
