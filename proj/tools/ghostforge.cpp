// ghostforge command-line tool: dataset synthesis, correlation reconstruction,
// adversarial restoration training, evaluation, and gradient auditing.
//
// Exit codes: 0 success, 2 config/contract error, 3 I/O error,
// 4 numeric abort, 5 gradient-check failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ghostforge/audit.hpp"
#include "ghostforge/config.hpp"
#include "ghostforge/metrics.hpp"
#include "ghostforge/recon.hpp"

namespace fs = std::filesystem;
using namespace ghostforge;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitGradcheck = 5;

/// Seed precedence: --seed flag > GHOSTFORGE_SEED env > config file value.
void resolve_seed(RunConfig& cfg, const std::optional<std::uint64_t>& flag_seed) {
    std::optional<std::uint64_t> seed = flag_seed;
    if (!seed) {
        if (const char* env = std::getenv("GHOSTFORGE_SEED")) {
            char* end = nullptr;
            const unsigned long long value = std::strtoull(env, &end, 10);
            if (end == env || *end != '\0')
                throw ConfigError(std::string("GHOSTFORGE_SEED is not an integer: ") + env);
            seed = static_cast<std::uint64_t>(value);
        }
    }
    if (seed) {
        cfg.sim.seed = *seed;
        cfg.train.seed = *seed;
    }
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    jsonio::save_file(run_config_to_json(cfg), (fs::path(out_dir) / "config.resolved.json").string());
}

void write_file_manifest(const std::string& out_dir, const std::vector<std::string>& files) {
    json j;
    j["files"] = files;
    jsonio::save_file(j, (fs::path(out_dir) / "files.json").string());
}

std::vector<Image> load_objects(const std::string& source, const RunConfig& cfg) {
    if (source == "builtin:shapes")
        return make_builtin_shapes(cfg.data.n_objects, cfg.sim.image_size, cfg.sim.seed);
    if (!fs::is_directory(source))
        throw ConfigError("object source must be builtin:shapes or a directory, got \"" + source +
                          "\"");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(source)) {
        if (entry.path().extension() == ".pgm") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("object directory has no .pgm files: " + source);
    std::vector<Image> objects;
    objects.reserve(paths.size());
    for (const auto& p : paths) objects.push_back(load_image(p));
    return objects;
}

Image concat_triptych(const Image& a, const Image& b, const Image& c) {
    Image out = Image::zeros(a.height, a.width * 3);
    for (int r = 0; r < a.height; ++r) {
        for (int q = 0; q < a.width; ++q) {
            out.at(r, q) = a.at(r, q);
            out.at(r, q + a.width) = b.at(r, q);
            out.at(r, q + 2 * a.width) = c.at(r, q);
        }
    }
    return out;
}

struct Stats {
    double mean = 0.0, stddev = 0.0;
};

Stats mean_std(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    for (double v : xs) s.mean += v;
    s.mean /= static_cast<double>(xs.size());
    for (double v : xs) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(xs.size()));
    return s;
}

json psnr_json(double v) {
    if (std::isinf(v)) return json("inf");
    return json(v);
}

// -----------------------------------------------------------------------
// subcommands

int cmd_gen_data(const std::string& config_path, const std::string& objects_flag,
                 const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
    RunConfig cfg = load_run_config(config_path);
    resolve_seed(cfg, seed);
    const std::string source = objects_flag.empty() ? cfg.data.objects : objects_flag;
    const std::vector<Image> objects = load_objects(source, cfg);

    const DatasetManifest manifest =
        generate_dataset(cfg.sim, objects, out_dir, cfg.data.split_ratio);
    echo_config(cfg, out_dir);

    std::vector<std::string> files = {"manifest.json", "config.resolved.json"};
    for (const auto& e : manifest.entries) {
        files.push_back(e.clean_path);
        files.push_back(e.degraded_path);
        files.push_back(e.bucket_path);
    }
    write_file_manifest(out_dir, files);

    std::printf("train=%d test=%d\n", manifest.train_count(), manifest.test_count());
    std::printf("split_ratio=%.6f%s\n", manifest.split_ratio,
                manifest.split_ratio == kDefaultSplitRatio ? " (default, 173:35 split)" : "");
    std::printf("manifest=%s\n", (fs::path(out_dir) / "manifest.json").string().c_str());
    return 0;
}

int cmd_reconstruct(const std::string& config_path, const std::string& bucket_path,
                    std::uint64_t patterns_seed, const std::string& out_path,
                    const std::string& truth_path, const std::optional<std::uint64_t>& seed) {
    RunConfig cfg = load_run_config(config_path);
    resolve_seed(cfg, seed);
    cfg.sim.seed = patterns_seed;

    const BucketSeries buckets = load_bucket_series(bucket_path);
    if (static_cast<int>(buckets.count()) != cfg.sim.n_measurements) {
        std::fprintf(stderr, "bucket count %zu does not match configured n_measurements %d\n",
                     buckets.count(), cfg.sim.n_measurements);
        return kExitConfig;
    }
    const PatternStack patterns = make_patterns(cfg.sim);
    const Image recon = reconstruct(buckets, patterns, cfg.recon);
    save_image(recon, out_path);
    std::printf("reconstruction=%s\n", out_path.c_str());

    if (!truth_path.empty()) {
        const Image truth = load_image(truth_path);
        // metrics describe the artifact as written (quantized), so that
        // --truth pointing at the output reports an exact identity
        const MetricReport report = evaluate_pair(truth, load_image(out_path));
        const std::string metrics_path = out_path + ".metrics.json";
        std::ofstream out(metrics_path, std::ios::trunc);
        if (!out) throw IoError("cannot write metric report: " + metrics_path);
        out << report.to_json() << "\n";
        std::printf("%s\n", report.to_json().c_str());
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
    RunConfig cfg = load_run_config(config_path);
    resolve_seed(cfg, seed);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string data_dir = fs::path(manifest_path).parent_path().string();

    Generator generator(cfg.generator, derive_key(cfg.train.seed, hash_name("generator")));
    Discriminator discriminator(cfg.discriminator,
                                derive_key(cfg.train.seed, hash_name("discriminator")));
    PerceptualExtractor extractor(derive_key(cfg.train.seed, hash_name("extractor")));

    const TrainResult result = train(manifest, data_dir, generator, discriminator, extractor,
                                     cfg.train, cfg.loss, out_dir);
    echo_config(cfg, out_dir);
    write_file_manifest(out_dir, {"checkpoint.bin", "history.jsonl", "config.resolved.json"});

    if (!result.history.empty()) {
        const LossRecord& last = result.history.back();
        std::printf("final l_total=%.6g l_mse=%.6g l_perc=%.6g l_adv_g=%.6g l_adv_d=%.6g\n",
                    last.total, last.mse, last.perc, last.adv_g, last.adv_d);
    } else {
        std::printf("iterations=0 (checkpoint equals initialization)\n");
    }
    std::printf("checkpoint=%s\n", result.checkpoint_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& split, const std::string& out_dir,
             const std::string& config_path, const std::optional<std::uint64_t>& seed) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    resolve_seed(cfg, seed);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string data_dir = fs::path(manifest_path).parent_path().string();
    const bool want_train = split == "train";
    if (split != "train" && split != "test")
        throw ConfigError("eval: --split must be train or test, got \"" + split + "\"");

    Generator generator(cfg.generator, derive_key(cfg.train.seed, hash_name("generator")));
    load_checkpoint(generator.params(), checkpoint_path);

    std::vector<const DatasetEntry*> entries;
    for (const auto& e : manifest.entries)
        if (e.train == want_train) entries.push_back(&e);
    if (entries.empty()) {
        std::fprintf(stderr, "eval: the %s split of %s is empty\n", split.c_str(),
                     manifest_path.c_str());
        return kExitConfig;
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    const std::string jsonl_path = (fs::path(out_dir) / ("eval_" + split + ".jsonl")).string();
    std::ofstream jsonl(jsonl_path, std::ios::trunc);
    if (!jsonl) throw IoError("cannot write " + jsonl_path);

    std::vector<double> ssim_deg, ssim_res, psnr_deg, psnr_res;
    std::vector<std::string> files = {"eval_" + split + ".jsonl", "eval_summary.json"};
    int failures = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const DatasetEntry& entry = *entries[i];
        try {
            const Image clean = load_image((fs::path(data_dir) / entry.clean_path).string());
            const Image degraded = load_image((fs::path(data_dir) / entry.degraded_path).string());
            const Image restored = restore(degraded, generator);

            const double sd = ssim(clean, degraded);
            const double sr = ssim(clean, restored);
            const double pd = psnr(clean, degraded);
            const double pr = psnr(clean, restored);
            ssim_deg.push_back(sd);
            ssim_res.push_back(sr);
            psnr_deg.push_back(pd);
            psnr_res.push_back(pr);

            json line;
            line["entry"] = entry.clean_path;
            line["ssim_degraded"] = sd;
            line["ssim_restored"] = sr;
            line["psnr_degraded"] = psnr_json(pd);
            line["psnr_restored"] = psnr_json(pr);
            jsonl << line.dump() << "\n";

            char name[64];
            std::snprintf(name, sizeof(name), "triptych_%s_%04zu.pgm", split.c_str(), i);
            save_image(concat_triptych(clean, degraded, restored),
                       (fs::path(out_dir) / name).string());
            files.emplace_back(name);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "eval: entry %s failed: %s\n", entry.clean_path.c_str(), e.what());
            ++failures;
        }
    }

    const Stats sd = mean_std(ssim_deg), sr = mean_std(ssim_res);
    const Stats pd = mean_std(psnr_deg), pr = mean_std(psnr_res);
    json summary;
    summary["split"] = split;
    summary["count"] = ssim_deg.size();
    summary["failures"] = failures;
    summary["ssim_degraded"] = {{"mean", sd.mean}, {"std", sd.stddev}};
    summary["ssim_restored"] = {{"mean", sr.mean}, {"std", sr.stddev}};
    summary["psnr_degraded_db"] = {{"mean", pd.mean}, {"std", pd.stddev}};
    summary["psnr_restored_db"] = {{"mean", pr.mean}, {"std", pr.stddev}};
    jsonio::save_file(summary, (fs::path(out_dir) / "eval_summary.json").string());
    write_file_manifest(out_dir, files);

    std::printf("split=%s count=%zu ssim_degraded=%.4f ssim_restored=%.4f\n", split.c_str(),
                ssim_deg.size(), sd.mean, sr.mean);
    return failures > 0 ? kExitIo : 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& scope) {
    std::vector<AuditScope> scopes;
    if (scope == "all") {
        scopes = {AuditScope::ops, AuditScope::mafe, AuditScope::fusion, AuditScope::generator,
                  AuditScope::discriminator, AuditScope::loss};
    } else if (scope == "ops") {
        scopes = {AuditScope::ops};
    } else if (scope == "mafe") {
        scopes = {AuditScope::mafe};
    } else if (scope == "fusion") {
        scopes = {AuditScope::fusion};
    } else if (scope == "generator") {
        scopes = {AuditScope::generator};
    } else if (scope == "discriminator") {
        scopes = {AuditScope::discriminator};
    } else if (scope == "loss") {
        scopes = {AuditScope::loss};
    } else {
        throw ConfigError("gradcheck: unknown scope \"" + scope + "\"");
    }

    bool all_pass = true;
    std::string first_failure;
    std::printf("%-34s %-12s %-10s %s\n", "operation", "max-rel-err", "threshold", "status");
    for (AuditScope s : scopes) {
        for (const AuditRow& row : run_audit(s, seed)) {
            std::printf("%-34s %-12.3e %-10.0e %s\n", row.name.c_str(), row.max_rel_err,
                        row.threshold, row.pass() ? "PASS" : "FAIL");
            if (!row.pass() && first_failure.empty()) first_failure = row.name;
            all_pass = all_pass && row.pass();
        }
    }
    if (!all_pass) {
        std::fprintf(stderr, "gradcheck failed, first failing operation: %s\n",
                     first_failure.c_str());
        return kExitGradcheck;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ghostforge: turbulence-degraded ghost imaging simulation, correlation "
                 "reconstruction, and adversarial restoration"};
    app.require_subcommand(1);

    std::string config_path, objects_flag, out_path, bucket_path, truth_path, manifest_path;
    std::string checkpoint_path, split = "test", scope = "all";
    std::uint64_t patterns_seed = 0, gradcheck_seed = 20240607;
    std::optional<std::uint64_t> seed_flag;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_flag,
                        "Override every config seed (precedence: flag > GHOSTFORGE_SEED > file)");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "Synthesize a paired clean/degraded dataset");
    gen->add_option("--config", config_path, "Run configuration JSON")->required();
    gen->add_option("--objects", objects_flag, "builtin:shapes or a directory of P5 images");
    gen->add_option("--out", out_path, "Output directory")->required();
    add_seed(gen);

    CLI::App* rec = app.add_subcommand("reconstruct", "Correlation reconstruction from buckets");
    rec->add_option("--config", config_path, "Run configuration JSON")->required();
    rec->add_option("--buckets", bucket_path, "Bucket series file")->required();
    rec->add_option("--patterns-seed", patterns_seed, "Seed of the pattern stack")->required();
    rec->add_option("--out", out_path, "Output P5 path")->required();
    rec->add_option("--truth", truth_path, "Ground-truth image for a metric report");
    add_seed(rec);

    CLI::App* trn = app.add_subcommand("train", "Train the restoration network on a manifest");
    trn->add_option("--config", config_path, "Run configuration JSON")->required();
    trn->add_option("--manifest", manifest_path, "Dataset manifest JSON")->required();
    trn->add_option("--out", out_path, "Output directory")->required();
    add_seed(trn);

    CLI::App* evl = app.add_subcommand("eval", "Restore a split and report quality metrics");
    evl->add_option("--checkpoint", checkpoint_path, "Generator checkpoint")->required();
    evl->add_option("--manifest", manifest_path, "Dataset manifest JSON")->required();
    evl->add_option("--split", split, "train or test")->capture_default_str();
    evl->add_option("--out", out_path, "Output directory")->required();
    evl->add_option("--config", config_path, "Run configuration JSON (architecture)");
    add_seed(evl);

    CLI::App* grd = app.add_subcommand("gradcheck", "Finite-difference audit of the tape gradients");
    grd->add_option("--seed", gradcheck_seed, "Audit seed")->capture_default_str();
    grd->add_option("--scope", scope, "ops|mafe|fusion|generator|discriminator|loss|all")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, objects_flag, out_path, seed_flag);
        if (rec->parsed())
            return cmd_reconstruct(config_path, bucket_path, patterns_seed, out_path, truth_path,
                                   seed_flag);
        if (trn->parsed()) return cmd_train(config_path, manifest_path, out_path, seed_flag);
        if (evl->parsed())
            return cmd_eval(checkpoint_path, manifest_path, split, out_path, config_path,
                            seed_flag);
        if (grd->parsed()) {
            if (grd->count("--seed") == 0) {
                if (const char* env = std::getenv("GHOSTFORGE_SEED"))
                    gradcheck_seed = std::strtoull(env, nullptr, 10);
            }
            return cmd_gradcheck(gradcheck_seed, scope);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric abort: %s\n", e.what());
        return kExitNumeric;
    }
    return 0;
}
