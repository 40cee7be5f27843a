#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ghostforge/adam.hpp"
#include "ghostforge/dataset.hpp"
#include "ghostforge/msgan.hpp"

namespace ghostforge {

struct TrainConfig {
    int batch_size = 1;  // the trainer streams one pair per step
    int iterations = 200;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // 0: final checkpoint only
    std::vector<int> perceptual_taps = {1, 2, 3};

    void validate() const {
        if (batch_size != 1)
            throw ConfigError("TrainConfig: batch_size must be 1, got " +
                              std::to_string(batch_size));
        if (iterations < 0) throw ConfigError("TrainConfig: iterations must be >= 0");
        if (checkpoint_every < 0) throw ConfigError("TrainConfig: checkpoint_every must be >= 0");
        if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("TrainConfig: learning rates must be > 0");
    }
};

struct LossRecord {
    int iter = 0;
    double total = 0.0, mse = 0.0, perc = 0.0, adv_g = 0.0, adv_d = 0.0;

    std::string to_json_line() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "{\"iter\": %d, \"l_total\": %.17g, \"l_mse\": %.17g, \"l_perc\": %.17g, "
                      "\"l_adv_g\": %.17g, \"l_adv_d\": %.17g}",
                      iter, total, mse, perc, adv_g, adv_d);
        return buf;
    }
};

struct TrainResult {
    std::string checkpoint_path;
    std::string history_path;
    std::vector<LossRecord> history;
};

namespace detail {

struct TrainPair {
    Tensor degraded;
    Tensor clean;
};

inline std::vector<TrainPair> load_train_pairs(const DatasetManifest& manifest,
                                               const std::string& data_dir) {
    std::vector<TrainPair> pairs;
    for (const DatasetEntry& entry : manifest.entries) {
        if (!entry.train) continue;
        const std::filesystem::path base(data_dir);
        TrainPair pair;
        pair.degraded = image_to_tensor(load_image((base / entry.degraded_path).string()));
        pair.clean = image_to_tensor(load_image((base / entry.clean_path).string()));
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) throw ConfigError("train: manifest has no training entries");
    return pairs;
}

}  // namespace detail

/// Alternating adversarial training: per iteration one discriminator step on
/// a detached generator output, then one generator step on the composite
/// loss. Pair order is a seeded shuffle per epoch; everything is a pure
/// function of (manifest contents, configs, seed).
inline TrainResult train(const DatasetManifest& manifest, const std::string& data_dir,
                         Generator& generator, Discriminator& discriminator,
                         const PerceptualExtractor& extractor, const TrainConfig& tcfg,
                         const LossWeights& weights, const std::string& out_dir) {
    tcfg.validate();
    weights.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    const std::vector<detail::TrainPair> pairs = detail::load_train_pairs(manifest, data_dir);
    const std::size_t n_pairs = pairs.size();

    TrainResult result;
    result.checkpoint_path = (std::filesystem::path(out_dir) / "checkpoint.bin").string();
    result.history_path = (std::filesystem::path(out_dir) / "history.jsonl").string();

    std::ofstream history(result.history_path, std::ios::trunc);
    if (!history) throw IoError("cannot open history file: " + result.history_path);

    Adam adam_g({tcfg.lr_g, tcfg.adam_beta1, tcfg.adam_beta2, 1e-8});
    Adam adam_d({tcfg.lr_d, tcfg.adam_beta1, tcfg.adam_beta2, 1e-8});

    // epoch-wise seeded shuffle of pair order
    std::vector<std::size_t> order(n_pairs);
    std::size_t epoch = SIZE_MAX;
    const auto pair_for_iter = [&](int iter) -> const detail::TrainPair& {
        const std::size_t e = static_cast<std::size_t>(iter) / n_pairs;
        if (e != epoch) {
            epoch = e;
            for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;
            CounterRng rng(derive_key(tcfg.seed, 0xe0c5ULL + e));
            for (std::size_t i = n_pairs; i > 1; --i) {
                const std::size_t j = rng.below(i, i);
                std::swap(order[i - 1], order[j]);
            }
        }
        return pairs[order[static_cast<std::size_t>(iter) % n_pairs]];
    };

    for (int iter = 0; iter < tcfg.iterations; ++iter) {
        const detail::TrainPair& pair = pair_for_iter(iter);
        try {
            // discriminator step: generator output detached from the tape
            Tensor fake_detached;
            {
                NoGrad guard;
                fake_detached = generator.forward(pair.degraded);
            }
            {
                Tape tape;
                discriminator.params().zero_grad();
                LossBundle d_losses = losses(pair.clean, fake_detached, discriminator, extractor,
                                             weights, tcfg.perceptual_taps);
                tape.backward(d_losses.adv_d);
                adam_d.step(discriminator.params());
            }

            // generator step on the composite objective
            LossRecord record;
            record.iter = iter;
            {
                Tape tape;
                generator.params().zero_grad();
                discriminator.params().zero_grad();
                const Tensor fake = generator.forward(pair.degraded);
                LossBundle g_losses =
                    losses(pair.clean, fake, discriminator, extractor, weights, tcfg.perceptual_taps);
                tape.backward(g_losses.total);
                adam_g.step(generator.params());
                record.total = g_losses.total.item();
                record.mse = g_losses.mse_term.item();
                record.perc = g_losses.perc.item();
                record.adv_g = g_losses.adv_g.item();
                record.adv_d = g_losses.adv_d.item();
            }
            history << record.to_json_line() << "\n";
            history.flush();
            result.history.push_back(record);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at training iteration " +
                               std::to_string(iter));
        }

        if (tcfg.checkpoint_every > 0 && (iter + 1) % tcfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_iter%06d.bin", iter + 1);
            save_checkpoint(generator.params(),
                            (std::filesystem::path(out_dir) / name).string());
        }
    }

    save_checkpoint(generator.params(), result.checkpoint_path);
    return result;
}

}  // namespace ghostforge
