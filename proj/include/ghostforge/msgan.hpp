#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ghostforge/image.hpp"
#include "ghostforge/ops.hpp"
#include "ghostforge/params.hpp"

namespace ghostforge {

struct GeneratorConfig {
    int base_channels = 16;
    int depth = 4;
    std::array<int, 3> mafe_dilations{1, 2, 3};  // receptive fields 3x3, 5x5, 7x7
    int attention_reduction = 4;

    void validate() const {
        if (depth < 2) throw ConfigError("GeneratorConfig: depth must be >= 2");
        if (depth != 4)
            throw ConfigError("GeneratorConfig: the fusion unit combines exactly 4 decoder "
                              "levels; depth must be 4, got " +
                              std::to_string(depth));
        if (base_channels < 4) throw ConfigError("GeneratorConfig: base_channels must be >= 4");
        if (attention_reduction < 1)
            throw ConfigError("GeneratorConfig: attention_reduction must be >= 1");
        for (int level = 0; level < depth; ++level) {
            const int ch = base_channels << level;
            if (ch % attention_reduction != 0)
                throw ConfigError("GeneratorConfig: attention_reduction " +
                                  std::to_string(attention_reduction) +
                                  " does not divide channel count " + std::to_string(ch));
        }
        for (int d : mafe_dilations)
            if (d < 1) throw ConfigError("GeneratorConfig: dilations must be >= 1");
    }
};

struct DiscriminatorConfig {
    double width_factor = 0.25;  // scales the (64,128,256) widths; final layer stays 1

    std::array<int, 4> channels() const {
        auto scaled = [this](int base) {
            const int ch = static_cast<int>(std::lround(base * width_factor));
            return ch < 1 ? 1 : ch;
        };
        return {scaled(64), scaled(128), scaled(256), 1};
    }

    void validate() const {
        if (!(width_factor > 0.0))
            throw ConfigError("DiscriminatorConfig: width_factor must be > 0");
    }
};

struct LossWeights {
    double alpha = 0.5;
    double beta = 0.01;
    double gamma = 0.01;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
            throw ConfigError("LossWeights: weights must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Multi-scale attention feature extraction unit: three juxtaposed dilated
// 3x3 convolutions (receptive fields 3/5/7), channel merge back to the input
// width, squeeze-excitation channel gating, and an identity skip.

class MafeUnit {
public:
    MafeUnit(ParamStore& store, const std::string& prefix, int channels,
             std::array<int, 3> dilations, int reduction)
        : dilations_(dilations) {
        const int reduced = channels / reduction;
        for (int i = 0; i < 3; ++i) {
            const std::string branch = prefix + "/branch" + std::to_string(i);
            branch_w_[static_cast<std::size_t>(i)] =
                store.create(branch + "/w", {channels, channels, 3, 3}, Init::kaiming_uniform,
                             channels * 9);
            branch_b_[static_cast<std::size_t>(i)] =
                store.create(branch + "/b", {1, channels, 1, 1}, Init::zeros);
        }
        merge_w_ = store.create(prefix + "/merge/w", {channels, 3 * channels, 1, 1},
                                Init::kaiming_uniform, 3 * channels);
        merge_b_ = store.create(prefix + "/merge/b", {1, channels, 1, 1}, Init::zeros);
        down_w_ = store.create(prefix + "/attn_down/w", {reduced, channels, 1, 1},
                               Init::kaiming_uniform, channels);
        down_b_ = store.create(prefix + "/attn_down/b", {1, reduced, 1, 1}, Init::zeros);
        up_w_ = store.create(prefix + "/attn_up/w", {channels, reduced, 1, 1},
                             Init::kaiming_uniform, reduced);
        up_b_ = store.create(prefix + "/attn_up/b", {1, channels, 1, 1}, Init::zeros);
    }

    Tensor forward(const Tensor& x) const {
        std::vector<Tensor> branches;
        branches.reserve(3);
        for (int i = 0; i < 3; ++i) {
            const int d = dilations_[static_cast<std::size_t>(i)];
            branches.push_back(conv2d(x, branch_w_[static_cast<std::size_t>(i)],
                                      branch_b_[static_cast<std::size_t>(i)], 1, d, d));
        }
        const Tensor merged = conv2d(concat_channels(branches), merge_w_, merge_b_);
        // squeeze-excitation: pooled channel stats gate the merged features
        const Tensor squeezed = global_avg_pool(merged);
        const Tensor gate = sigmoid(conv2d(relu(conv2d(squeezed, down_w_, down_b_)), up_w_, up_b_));
        return add(scale_channels(merged, gate), x);
    }

private:
    std::array<int, 3> dilations_;
    Tensor branch_w_[3], branch_b_[3];
    Tensor merge_w_, merge_b_;
    Tensor down_w_, down_b_, up_w_, up_b_;
};

// ---------------------------------------------------------------------------
// Dynamic fusion of the four decoder levels: each level is upsampled to the
// finest resolution, channel-matched by 1x1 convolution, and blended with
// per-site softmax weights.

class FusionUnit {
public:
    FusionUnit(ParamStore& store, const std::string& prefix,
               const std::array<int, 4>& level_channels, int out_channels) {
        for (int i = 0; i < 4; ++i) {
            const std::string level = prefix + "/level" + std::to_string(i);
            match_w_[static_cast<std::size_t>(i)] =
                store.create(level + "/match/w", {out_channels, level_channels[static_cast<std::size_t>(i)], 1, 1},
                             Init::kaiming_uniform, level_channels[static_cast<std::size_t>(i)]);
            match_b_[static_cast<std::size_t>(i)] =
                store.create(level + "/match/b", {1, out_channels, 1, 1}, Init::zeros);
            logit_w_[static_cast<std::size_t>(i)] = store.create(
                level + "/logit/w", {1, out_channels, 1, 1}, Init::kaiming_uniform, out_channels);
            logit_b_[static_cast<std::size_t>(i)] =
                store.create(level + "/logit/b", {1, 1, 1, 1}, Init::zeros);
        }
    }

    /// `levels` must hold exactly 4 maps of strictly increasing resolution.
    Tensor forward(const std::vector<Tensor>& levels) const {
        if (levels.size() != 4)
            throw ConfigError("fusion: expected 4 levels, got " + std::to_string(levels.size()));
        const Shape& finest = levels.back().shape();
        for (std::size_t i = 1; i < levels.size(); ++i) {
            if (levels[i].shape().h <= levels[i - 1].shape().h ||
                levels[i].shape().w <= levels[i - 1].shape().w)
                throw ConfigError("fusion: levels must have strictly increasing resolution");
        }

        std::vector<Tensor> lifted, logits;
        lifted.reserve(4);
        logits.reserve(4);
        for (std::size_t i = 0; i < 4; ++i) {
            const Shape& s = levels[i].shape();
            if (finest.h % s.h != 0)
                throw ConfigError("fusion: level resolution " + std::to_string(s.h) +
                                  " does not divide finest " + std::to_string(finest.h));
            const Tensor up = upsample_nearest(levels[i], finest.h / s.h);
            const Tensor matched = conv2d(up, match_w_[i], match_b_[i]);
            lifted.push_back(matched);
            logits.push_back(conv2d(matched, logit_w_[i], logit_b_[i]));
        }
        const std::vector<Tensor> weights = softmax_over(logits);
        Tensor fused = scale_spatial(lifted[0], weights[0]);
        for (std::size_t i = 1; i < 4; ++i)
            fused = add(fused, scale_spatial(lifted[i], weights[i]));
        return fused;
    }

    /// The per-site blending weights, for diagnostics and invariant tests.
    std::vector<Tensor> blend_weights(const std::vector<Tensor>& levels) const {
        if (levels.size() != 4)
            throw ConfigError("fusion: expected 4 levels, got " + std::to_string(levels.size()));
        const Shape& finest = levels.back().shape();
        std::vector<Tensor> logits;
        logits.reserve(4);
        for (std::size_t i = 0; i < 4; ++i) {
            const Tensor up = upsample_nearest(levels[i], finest.h / levels[i].shape().h);
            const Tensor matched = conv2d(up, match_w_[i], match_b_[i]);
            logits.push_back(conv2d(matched, logit_w_[i], logit_b_[i]));
        }
        return softmax_over(logits);
    }

private:
    Tensor match_w_[4], match_b_[4];
    Tensor logit_w_[4], logit_b_[4];
};

// ---------------------------------------------------------------------------
// Generator: symmetric U-Net with MAFE units along the encoder, dynamic
// multi-level fusion across the decoder, and a global input-to-output
// residual through the sigmoid head.

class Generator {
public:
    Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg), store_(seed) {
        cfg_.validate();
        int in_ch = 1;
        for (int level = 0; level < cfg_.depth; ++level) {
            const int ch = cfg_.base_channels << level;
            const std::string prefix = "g/enc" + std::to_string(level);
            EncoderStage stage{
                store_.create(prefix + "/conv/w", {ch, in_ch, 3, 3}, Init::kaiming_uniform,
                              in_ch * 9),
                store_.create(prefix + "/conv/b", {1, ch, 1, 1}, Init::zeros),
                MafeUnit(store_, prefix + "/mafe", ch, cfg_.mafe_dilations,
                         cfg_.attention_reduction)};
            encoder_.push_back(std::move(stage));
            in_ch = ch;
        }
        const int deep_ch = cfg_.base_channels << (cfg_.depth - 1);
        bottleneck_.emplace(store_, "g/bottleneck/mafe", deep_ch, cfg_.mafe_dilations,
                            cfg_.attention_reduction);

        // decoder from coarse to fine; stage j reconstructs encoder level depth-1-j
        int carry_ch = deep_ch;
        std::array<int, 4> fusion_channels{};
        for (int j = 0; j < cfg_.depth; ++j) {
            const int skip_ch = cfg_.base_channels << (cfg_.depth - 1 - j);
            const std::string prefix = "g/dec" + std::to_string(j);
            DecoderStage stage{
                store_.create(prefix + "/conv/w", {skip_ch, carry_ch + skip_ch, 3, 3},
                              Init::kaiming_uniform, (carry_ch + skip_ch) * 9),
                store_.create(prefix + "/conv/b", {1, skip_ch, 1, 1}, Init::zeros)};
            decoder_.push_back(std::move(stage));
            fusion_channels[static_cast<std::size_t>(j)] = skip_ch;
            carry_ch = skip_ch;
        }
        fusion_.emplace(store_, "g/fusion", fusion_channels, cfg_.base_channels);
        head_w_ = store_.create("g/head/w", {1, cfg_.base_channels, 1, 1}, Init::kaiming_uniform,
                                cfg_.base_channels);
        head_b_ = store_.create("g/head/b", {1, 1, 1, 1}, Init::zeros);
    }

    Tensor forward(const Tensor& x) const {
        const Shape& s = x.shape();
        if (s.c != 1) throw ConfigError("generator: expected 1 input channel, got " + s.str());
        const int div = 1 << cfg_.depth;
        if (s.h % div != 0 || s.w % div != 0)
            throw ConfigError("generator: spatial size " + std::to_string(s.h) + "x" +
                              std::to_string(s.w) + " must be divisible by " +
                              std::to_string(div));

        std::vector<Tensor> skips;
        skips.reserve(static_cast<std::size_t>(cfg_.depth));
        Tensor cur = x;
        for (const EncoderStage& stage : encoder_) {
            const Tensor features = relu(conv2d(cur, stage.conv_w, stage.conv_b, 1, 1, 1));
            const Tensor attended = stage.mafe.forward(features);
            skips.push_back(attended);
            cur = maxpool2(attended);
        }
        cur = bottleneck_->forward(cur);

        std::vector<Tensor> levels;
        levels.reserve(4);
        for (std::size_t j = 0; j < decoder_.size(); ++j) {
            const Tensor up = upsample_nearest(cur, 2);
            const Tensor merged = concat_channels({up, skips[skips.size() - 1 - j]});
            cur = relu(conv2d(merged, decoder_[j].conv_w, decoder_[j].conv_b, 1, 1, 1));
            levels.push_back(cur);
        }
        const Tensor fused = fusion_->forward(levels);
        const Tensor head = conv2d(fused, head_w_, head_b_);
        return sigmoid(add(head, x));
    }

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const GeneratorConfig& config() const { return cfg_; }
    const FusionUnit& fusion() const { return *fusion_; }

    /// Decoder feature maps in fusion order, for unit-level diagnostics.
    std::vector<Tensor> decoder_levels(const Tensor& x) const {
        std::vector<Tensor> skips;
        Tensor cur = x;
        for (const EncoderStage& stage : encoder_) {
            const Tensor features = relu(conv2d(cur, stage.conv_w, stage.conv_b, 1, 1, 1));
            const Tensor attended = stage.mafe.forward(features);
            skips.push_back(attended);
            cur = maxpool2(attended);
        }
        cur = bottleneck_->forward(cur);
        std::vector<Tensor> levels;
        for (std::size_t j = 0; j < decoder_.size(); ++j) {
            const Tensor up = upsample_nearest(cur, 2);
            const Tensor merged = concat_channels({up, skips[skips.size() - 1 - j]});
            cur = relu(conv2d(merged, decoder_[j].conv_w, decoder_[j].conv_b, 1, 1, 1));
            levels.push_back(cur);
        }
        return levels;
    }

private:
    struct EncoderStage {
        Tensor conv_w, conv_b;
        MafeUnit mafe;
    };
    struct DecoderStage {
        Tensor conv_w, conv_b;
    };

    GeneratorConfig cfg_;
    ParamStore store_;
    std::vector<EncoderStage> encoder_;
    std::optional<MafeUnit> bottleneck_;
    std::vector<DecoderStage> decoder_;
    std::optional<FusionUnit> fusion_;
    Tensor head_w_, head_b_;
};

// ---------------------------------------------------------------------------
// Discriminator: PatchGAN with four 4x4 convolutions, strides (2,2,2,1),
// leaky-relu(0.2) between layers, raw patch scores out.

class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg), store_(seed) {
        cfg_.validate();
        const std::array<int, 4> chans = cfg_.channels();
        int in_ch = 1;
        for (int layer = 0; layer < 4; ++layer) {
            const int out_ch = chans[static_cast<std::size_t>(layer)];
            const std::string prefix = "d/conv" + std::to_string(layer);
            weights_[static_cast<std::size_t>(layer)] = store_.create(
                prefix + "/w", {out_ch, in_ch, 4, 4}, Init::kaiming_uniform, in_ch * 16);
            biases_[static_cast<std::size_t>(layer)] =
                store_.create(prefix + "/b", {1, out_ch, 1, 1}, Init::zeros);
            in_ch = out_ch;
        }
    }

    /// Patch map of real/fake scores; no output squashing.
    Tensor forward(const Tensor& img) const {
        static constexpr int kStrides[4] = {2, 2, 2, 1};
        Tensor cur = img;
        for (int layer = 0; layer < 4; ++layer) {
            const Shape& s = cur.shape();
            if (s.h + 2 < 4 || s.w + 2 < 4)
                throw ConfigError("discriminator: input smaller than the receptive field at layer " +
                                  std::to_string(layer));
            cur = conv2d(cur, weights_[static_cast<std::size_t>(layer)],
                         biases_[static_cast<std::size_t>(layer)], kStrides[layer], 1, 1);
            if (layer < 3) cur = leaky_relu(cur, 0.2);
        }
        return cur;
    }

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    ParamStore store_;
    Tensor weights_[4], biases_[4];
};

// ---------------------------------------------------------------------------
// Frozen perceptual feature extractor: three seeded convolution blocks
// (channels 8/16/32, 3x3 kernels, stride 2 between blocks); never trained.

class PerceptualExtractor {
public:
    explicit PerceptualExtractor(std::uint64_t seed) : store_(seed) {
        static constexpr int kChannels[3] = {8, 16, 32};
        int in_ch = 1;
        for (int block = 0; block < 3; ++block) {
            const std::string prefix = "phi/block" + std::to_string(block);
            weights_[static_cast<std::size_t>(block)] =
                store_.create(prefix + "/w", {kChannels[block], in_ch, 3, 3},
                              Init::kaiming_uniform, in_ch * 9, /*trainable=*/false);
            biases_[static_cast<std::size_t>(block)] = store_.create(
                prefix + "/b", {1, kChannels[block], 1, 1}, Init::zeros, 0, /*trainable=*/false);
            in_ch = kChannels[block];
        }
    }

    /// Tap outputs phi_1..phi_3.
    std::vector<Tensor> taps(const Tensor& img) const {
        std::vector<Tensor> out;
        out.reserve(3);
        Tensor cur = img;
        for (int block = 0; block < 3; ++block) {
            const int stride = block == 0 ? 1 : 2;
            cur = relu(conv2d(cur, weights_[static_cast<std::size_t>(block)],
                              biases_[static_cast<std::size_t>(block)], stride, 1, 1));
            out.push_back(cur);
        }
        return out;
    }

private:
    ParamStore store_;
    Tensor weights_[3], biases_[3];
};

// ---------------------------------------------------------------------------
// Losses: pixel MSE, perceptual feature distance, and least-squares
// adversarial terms with sigmoid-squashed patch scores.

struct LossBundle {
    Tensor total;    // alpha * mse + beta * perc + gamma * adv_g
    Tensor mse_term;
    Tensor perc;
    Tensor adv_g;    // mean((sig(D(gen)) - 1)^2)
    Tensor adv_d;    // mean((sig(D(gt)) - 1)^2) + mean(sig(D(gen))^2)
};

/// Evaluates all loss components on the given pair. The caller decides which
/// head to backpropagate (adv_d for the discriminator step, total for the
/// generator step) and whether `gen` is attached to the generator graph.
inline LossBundle losses(const Tensor& gt, const Tensor& gen, const Discriminator& d,
                         const PerceptualExtractor& extractor, const LossWeights& w,
                         const std::vector<int>& perceptual_taps = {1, 2, 3}) {
    w.validate();
    if (!(gt.shape() == gen.shape()))
        throw ConfigError("losses: shape mismatch " + gt.shape().str() + " vs " +
                          gen.shape().str());

    LossBundle bundle;
    bundle.mse_term = mse(gt, gen);

    const std::vector<Tensor> taps_gt = extractor.taps(gt);
    const std::vector<Tensor> taps_gen = extractor.taps(gen);
    Tensor perc;
    for (int tap : perceptual_taps) {
        if (tap < 1 || tap > static_cast<int>(taps_gt.size()))
            throw ConfigError("losses: perceptual tap " + std::to_string(tap) + " out of range");
        const Tensor term = mse(taps_gt[static_cast<std::size_t>(tap - 1)],
                                taps_gen[static_cast<std::size_t>(tap - 1)]);
        perc = perc.defined() ? add(perc, term) : term;
    }
    if (!perc.defined()) perc = Tensor::zeros({1, 1, 1, 1});
    bundle.perc = perc;

    const Tensor score_real = sigmoid(d.forward(gt));
    const Tensor score_fake = sigmoid(d.forward(gen));
    const Tensor ones_real = Tensor::full(score_real.shape(), 1.0);
    const Tensor ones_fake = Tensor::full(score_fake.shape(), 1.0);
    bundle.adv_g = mse(score_fake, ones_fake);
    bundle.adv_d = add(mse(score_real, ones_real), mean_square(score_fake));

    bundle.total = add(scale(bundle.mse_term, w.alpha),
                       add(scale(bundle.perc, w.beta), scale(bundle.adv_g, w.gamma)));
    return bundle;
}

// ---------------------------------------------------------------------------
// Image <-> tensor bridging and single-image restoration.

inline Tensor image_to_tensor(const Image& img, bool requires_grad = false) {
    return Tensor::from_vector({1, 1, img.height, img.width}, img.data, requires_grad);
}

inline Image tensor_to_image(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 1)
        throw ConfigError("tensor_to_image: expected shape (1,1,H,W), got " + s.str());
    Image img;
    img.height = s.h;
    img.width = s.w;
    img.data.resize(t.numel());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = std::clamp(t.data()[i], 0.0, 1.0);
    return img;
}

/// Evaluation-mode generator pass: no recording, output clamped to [0,1].
inline Image restore(const Image& img, const Generator& generator) {
    NoGrad guard;
    return tensor_to_image(generator.forward(image_to_tensor(img)));
}

}  // namespace ghostforge
