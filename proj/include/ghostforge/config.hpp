#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ghostforge/dataset.hpp"
#include "ghostforge/jsonio.hpp"
#include "ghostforge/msgan.hpp"
#include "ghostforge/recon.hpp"
#include "ghostforge/train.hpp"

namespace ghostforge {

struct DataConfig {
    std::string objects = "builtin:shapes";  // or a directory of P5 images
    int n_objects = 16;
    double split_ratio = kDefaultSplitRatio;

    void validate() const {
        if (n_objects < 1) throw ConfigError("DataConfig: n_objects must be >= 1");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw ConfigError("DataConfig: split_ratio must be in (0,1)");
    }
};

/// Union of every module's configuration; one JSON file drives a whole run.
/// Unknown keys are rejected at every level.
struct RunConfig {
    SimConfig sim;
    ReconConfig recon;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    TrainConfig train;
    LossWeights loss;
    DataConfig data;
};

inline json recon_to_json(const ReconConfig& cfg) {
    json j;
    j["estimator"] = cfg.estimator == Estimator::covariance ? "covariance" : "differential";
    j["normalize"] = cfg.normalize == Normalize::minmax ? "minmax" : "none";
    return j;
}

inline ReconConfig recon_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"estimator", "normalize"});
    ReconConfig cfg;
    std::string estimator = "covariance", normalize = "minmax";
    jsonio::get(j, scope, "estimator", estimator);
    jsonio::get(j, scope, "normalize", normalize);
    if (estimator == "covariance")
        cfg.estimator = Estimator::covariance;
    else if (estimator == "differential")
        cfg.estimator = Estimator::differential;
    else
        throw ConfigError(scope + ".estimator: unknown value \"" + estimator + "\"");
    if (normalize == "minmax")
        cfg.normalize = Normalize::minmax;
    else if (normalize == "none")
        cfg.normalize = Normalize::none;
    else
        throw ConfigError(scope + ".normalize: unknown value \"" + normalize + "\"");
    return cfg;
}

inline json generator_to_json(const GeneratorConfig& cfg) {
    json j;
    j["base_channels"] = cfg.base_channels;
    j["depth"] = cfg.depth;
    j["mafe_dilations"] = cfg.mafe_dilations;
    j["attention_reduction"] = cfg.attention_reduction;
    return j;
}

inline GeneratorConfig generator_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"base_channels", "depth", "mafe_dilations", "attention_reduction"});
    GeneratorConfig cfg;
    jsonio::get(j, scope, "base_channels", cfg.base_channels);
    jsonio::get(j, scope, "depth", cfg.depth);
    if (j.contains("mafe_dilations")) {
        const auto dil = j.at("mafe_dilations").get<std::vector<int>>();
        if (dil.size() != 3)
            throw ConfigError(scope + ".mafe_dilations: expected exactly 3 dilations");
        for (std::size_t i = 0; i < 3; ++i) cfg.mafe_dilations[i] = dil[i];
    }
    jsonio::get(j, scope, "attention_reduction", cfg.attention_reduction);
    cfg.validate();
    return cfg;
}

inline json discriminator_to_json(const DiscriminatorConfig& cfg) {
    json j;
    j["width_factor"] = cfg.width_factor;
    return j;
}

inline DiscriminatorConfig discriminator_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"width_factor"});
    DiscriminatorConfig cfg;
    jsonio::get(j, scope, "width_factor", cfg.width_factor);
    cfg.validate();
    return cfg;
}

inline json train_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["iterations"] = cfg.iterations;
    j["lr_g"] = cfg.lr_g;
    j["lr_d"] = cfg.lr_d;
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["seed"] = cfg.seed;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["perceptual_taps"] = cfg.perceptual_taps;
    return j;
}

inline TrainConfig train_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope,
                       {"batch_size", "iterations", "lr_g", "lr_d", "adam_beta1", "adam_beta2",
                        "seed", "checkpoint_every", "perceptual_taps"});
    TrainConfig cfg;
    jsonio::get(j, scope, "batch_size", cfg.batch_size);
    jsonio::get(j, scope, "iterations", cfg.iterations);
    jsonio::get(j, scope, "lr_g", cfg.lr_g);
    jsonio::get(j, scope, "lr_d", cfg.lr_d);
    jsonio::get(j, scope, "adam_beta1", cfg.adam_beta1);
    jsonio::get(j, scope, "adam_beta2", cfg.adam_beta2);
    jsonio::get(j, scope, "seed", cfg.seed);
    jsonio::get(j, scope, "checkpoint_every", cfg.checkpoint_every);
    jsonio::get(j, scope, "perceptual_taps", cfg.perceptual_taps);
    cfg.validate();
    return cfg;
}

inline json loss_to_json(const LossWeights& w) {
    json j;
    j["alpha"] = w.alpha;
    j["beta"] = w.beta;
    j["gamma"] = w.gamma;
    return j;
}

inline LossWeights loss_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"alpha", "beta", "gamma"});
    LossWeights w;
    jsonio::get(j, scope, "alpha", w.alpha);
    jsonio::get(j, scope, "beta", w.beta);
    jsonio::get(j, scope, "gamma", w.gamma);
    w.validate();
    return w;
}

inline json data_to_json(const DataConfig& cfg) {
    json j;
    j["objects"] = cfg.objects;
    j["n_objects"] = cfg.n_objects;
    j["split_ratio"] = cfg.split_ratio;
    return j;
}

inline DataConfig data_from_json(const json& j, const std::string& scope) {
    jsonio::check_keys(j, scope, {"objects", "n_objects", "split_ratio"});
    DataConfig cfg;
    jsonio::get(j, scope, "objects", cfg.objects);
    jsonio::get(j, scope, "n_objects", cfg.n_objects);
    jsonio::get(j, scope, "split_ratio", cfg.split_ratio);
    cfg.validate();
    return cfg;
}

inline json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["sim"] = sim_to_json(cfg.sim);
    j["recon"] = recon_to_json(cfg.recon);
    j["generator"] = generator_to_json(cfg.generator);
    j["discriminator"] = discriminator_to_json(cfg.discriminator);
    j["train"] = train_to_json(cfg.train);
    j["loss"] = loss_to_json(cfg.loss);
    j["data"] = data_to_json(cfg.data);
    return j;
}

inline RunConfig run_config_from_json(const json& j) {
    jsonio::check_keys(j, "config",
                       {"sim", "recon", "generator", "discriminator", "train", "loss", "data"});
    RunConfig cfg;
    if (j.contains("sim")) cfg.sim = sim_from_json(j.at("sim"), "sim");
    if (j.contains("recon")) cfg.recon = recon_from_json(j.at("recon"), "recon");
    if (j.contains("generator")) cfg.generator = generator_from_json(j.at("generator"), "generator");
    if (j.contains("discriminator"))
        cfg.discriminator = discriminator_from_json(j.at("discriminator"), "discriminator");
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"), "train");
    if (j.contains("loss")) cfg.loss = loss_from_json(j.at("loss"), "loss");
    if (j.contains("data")) cfg.data = data_from_json(j.at("data"), "data");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(jsonio::load_file(path));
}

}  // namespace ghostforge
