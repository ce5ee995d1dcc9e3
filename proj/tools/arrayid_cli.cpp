// Command-line surface for the voice-liveness pipeline: corpus synthesis,
// geometry sweeps, feature extraction, training, evaluation, and a
// scriptable per-file detector.
//
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
// `detect` repurposes them as a gate: 0 authentic, 1 spoof, 2 any error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arrayid/arrayid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw UsageError("cannot open config file " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const std::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
}

// Reproducibility stamp: the fully resolved configuration and seed that
// produced the artifact, written next to it (never timestamps, so reruns are
// byte-identical).
void write_stamp(const std::string& stamp_path, const std::string& command,
                 std::uint64_t seed, const json& resolved) {
    const json stamp{{"command", command}, {"seed", seed}, {"config", resolved}};
    arrayid::write_file_atomic(stamp_path, stamp.dump(2) + "\n");
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// shared feature-config plumbing (extract / train / evaluate / detect)
// ---------------------------------------------------------------------------

struct FeatureFlags {
    std::string config_path;
    double cutoff_sap = 0.0;
    double cutoff_sdp = 0.0;
    int lpcc_order = 0;

    CLI::Option* opt_sap = nullptr;
    CLI::Option* opt_sdp = nullptr;
    CLI::Option* opt_lpcc = nullptr;

    void add_to(CLI::App& cmd, bool config_is_feature_file) {
        if (config_is_feature_file)
            cmd.add_option("--config", config_path,
                           "JSON feature-extraction configuration (flags win)");
        opt_sap = cmd.add_option("--cutoff-sap", cutoff_sap,
                                 "array-fingerprint cutoff frequency in Hz");
        opt_sdp = cmd.add_option("--cutoff-sdp", cutoff_sdp,
                                 "distribution-fingerprint cutoff frequency in Hz");
        opt_lpcc = cmd.add_option("--lpcc-order", lpcc_order, "cepstral prediction order");
    }

    // Resolution order: defaults, then the config file, then explicit flags.
    arrayid::features::FeatureConfig resolve(const json* embedded = nullptr) const {
        arrayid::features::FeatureConfig cfg;
        try {
            if (!config_path.empty())
                cfg = load_json_file(config_path).get<arrayid::features::FeatureConfig>();
            else if (embedded)
                cfg = embedded->get<arrayid::features::FeatureConfig>();
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad feature configuration: ") + e.what());
        }
        if (opt_sap && opt_sap->count()) cfg.f_sap_cutoff_hz = cutoff_sap;
        if (opt_sdp && opt_sdp->count()) cfg.f_sdp_cutoff_hz = cutoff_sdp;
        if (opt_lpcc && opt_lpcc->count()) cfg.lpcc_order = lpcc_order;
        try {
            cfg.validate();
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad feature configuration: ") + e.what());
        }
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int run_synth(const std::string& out_dir, const std::string& config_path,
              CLI::Option* seed_opt, std::uint64_t seed_flag, CLI::Option* auth_opt,
              int n_authentic, CLI::Option* replay_opt, int n_replay, CLI::Option* mod_opt,
              int n_modulated, CLI::Option* dur_opt, double duration_s, CLI::Option* snr_opt,
              double snr_db) {
    arrayid::synth::CorpusConfig cfg;
    if (!config_path.empty()) {
        try {
            cfg = load_json_file(config_path).get<arrayid::synth::CorpusConfig>();
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad corpus configuration: ") + e.what());
        }
    }
    if (seed_opt->count()) cfg.seed = seed_flag;
    if (auth_opt->count()) cfg.n_authentic = n_authentic;
    if (replay_opt->count()) cfg.n_replay = n_replay;
    if (mod_opt->count()) cfg.n_modulated = n_modulated;
    if (dur_opt->count()) cfg.duration_s = duration_s;
    if (snr_opt->count()) cfg.snr_db = snr_db;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad corpus configuration: ") + e.what());
    }

    const auto manifest = arrayid::synth::generate_corpus(cfg, out_dir, cfg.seed);
    write_stamp((fs::path(out_dir) / "run_config.json").string(), "synth", cfg.seed, json(cfg));

    const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    const std::string csv = arrayid::read_file_bytes(manifest_path);
    std::cout << "manifest=" << manifest_path << " renders=" << manifest.entries.size()
              << " digest=" << hex64(arrayid::fnv1a64(csv.data(), csv.size())) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

arrayid::geometry::SweepSpec sweep_spec_from_json(const json& j) {
    static const std::vector<std::string> known{
        "n_mics_list", "radius_m",      "l_min_m", "l_max_m",
        "theta_min_deg", "theta_max_deg", "l_steps", "theta_steps"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw UsageError("sweep config: unknown key '" + it.key() + "'");
    arrayid::geometry::SweepSpec s;
    if (j.contains("n_mics_list")) s.n_mics_list = j.at("n_mics_list").get<std::vector<int>>();
    if (j.contains("radius_m")) s.radius_m = j.at("radius_m").get<double>();
    if (j.contains("l_min_m")) s.l_min_m = j.at("l_min_m").get<double>();
    if (j.contains("l_max_m")) s.l_max_m = j.at("l_max_m").get<double>();
    if (j.contains("theta_min_deg")) s.theta_min_deg = j.at("theta_min_deg").get<double>();
    if (j.contains("theta_max_deg")) s.theta_max_deg = j.at("theta_max_deg").get<double>();
    if (j.contains("l_steps")) s.l_steps = j.at("l_steps").get<int>();
    if (j.contains("theta_steps")) s.theta_steps = j.at("theta_steps").get<int>();
    return s;
}

json sweep_spec_to_json(const arrayid::geometry::SweepSpec& s) {
    return json{{"n_mics_list", s.n_mics_list},     {"radius_m", s.radius_m},
                {"l_min_m", s.l_min_m},             {"l_max_m", s.l_max_m},
                {"theta_min_deg", s.theta_min_deg}, {"theta_max_deg", s.theta_max_deg},
                {"l_steps", s.l_steps},             {"theta_steps", s.theta_steps}};
}

int run_sweep(const std::string& out_csv, const std::string& config_path, std::uint64_t seed,
              CLI::Option* mics_opt, const std::vector<int>& mics, CLI::Option* radius_opt,
              double radius) {
    arrayid::geometry::SweepSpec spec;
    if (!config_path.empty()) {
        try {
            spec = sweep_spec_from_json(load_json_file(config_path));
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad sweep configuration: ") + e.what());
        }
    }
    if (mics_opt->count()) spec.n_mics_list = mics;
    if (radius_opt->count()) spec.radius_m = radius;
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad sweep configuration: ") + e.what());
    }

    const auto result = arrayid::geometry::sigma_sweep(spec);
    arrayid::write_file_atomic(out_csv, arrayid::geometry::sweep_to_csv(result));
    write_stamp(out_csv + ".stamp.json", "sweep", seed, sweep_spec_to_json(spec));

    for (const auto& s : result.summary)
        std::cout << "N=" << s.n_mics << " min=" << arrayid::format_double(s.min)
                  << " mean=" << arrayid::format_double(s.mean)
                  << " max=" << arrayid::format_double(s.max)
                  << " range=" << arrayid::format_double(s.range) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

int run_extract(const std::string& manifest_path, const std::string& out_csv,
                const FeatureFlags& ff, std::uint64_t seed) {
    const auto cfg = ff.resolve();
    arrayid::audio::DatasetManifest manifest;
    try {
        manifest = arrayid::audio::load_manifest(manifest_path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<arrayid::features::FeatureRow> rows;
    rows.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        const fs::path wav_path = fs::path(entry.path).is_absolute()
                                      ? fs::path(entry.path)
                                      : base / entry.path;
        try {
            const auto audio = arrayid::audio::load_wav(wav_path.string());
            rows.push_back(
                {entry.path, entry.label, arrayid::features::extract(audio, cfg).flatten()});
        } catch (const std::exception& e) {
            throw std::runtime_error("while processing " + wav_path.string() + ": " + e.what());
        }
    }

    arrayid::features::save_features(rows, cfg, out_csv);
    json stamp = json(cfg);
    stamp["feature_config_hash"] = arrayid::features::config_hash(cfg);
    write_stamp(out_csv + ".stamp.json", "extract", seed, stamp);
    std::cout << "features=" << out_csv << " rows=" << rows.size() << " config_hash="
              << hex64(arrayid::features::config_hash(cfg)) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::vector<arrayid::classifier::Sample> to_samples(
    const std::vector<arrayid::features::FeatureRow>& rows) {
    std::vector<arrayid::classifier::Sample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows) samples.push_back({r.values, r.label});
    return samples;
}

int run_train(const std::string& features_csv, const std::string& out_model,
              const std::string& config_path, const FeatureFlags& ff, CLI::Option* seed_opt,
              std::uint64_t seed_flag, CLI::Option* valfrac_opt, double val_fraction) {
    arrayid::classifier::TrainOptions opt;
    std::optional<json> embedded_features;
    if (!config_path.empty()) {
        const json j = load_json_file(config_path);
        static const std::vector<std::string> known{
            "seed",     "val_fraction", "learning_rate",    "batch_size", "max_epochs",
            "patience", "min_val_accuracy", "hidden_sizes", "features"};
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find(known.begin(), known.end(), it.key()) == known.end())
                throw UsageError("train config: unknown key '" + it.key() + "'");
        try {
            if (j.contains("seed")) opt.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("val_fraction")) opt.val_fraction = j.at("val_fraction").get<double>();
            if (j.contains("learning_rate"))
                opt.learning_rate = j.at("learning_rate").get<double>();
            if (j.contains("batch_size")) opt.batch_size = j.at("batch_size").get<int>();
            if (j.contains("max_epochs")) opt.max_epochs = j.at("max_epochs").get<int>();
            if (j.contains("patience")) opt.patience = j.at("patience").get<int>();
            if (j.contains("min_val_accuracy"))
                opt.min_val_accuracy = j.at("min_val_accuracy").get<double>();
            if (j.contains("hidden_sizes"))
                opt.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
            if (j.contains("features")) embedded_features = j.at("features");
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad train configuration: ") + e.what());
        }
    }
    if (seed_opt->count()) opt.seed = seed_flag;
    if (valfrac_opt->count()) opt.val_fraction = val_fraction;
    try {
        opt.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad train configuration: ") + e.what());
    }

    const auto cfg = ff.resolve(embedded_features ? &*embedded_features : nullptr);
    const auto rows = arrayid::features::load_features(features_csv, cfg);
    arrayid::classifier::TrainReport report;
    const auto model = arrayid::classifier::train(to_samples(rows),
                                                  arrayid::features::config_hash(cfg), opt,
                                                  &report);
    arrayid::classifier::save_model(model, out_model);
    arrayid::write_file_atomic(out_model + ".report.json",
                               arrayid::classifier::report_to_json(report).dump(2) + "\n");

    json stamp{{"train", {{"seed", opt.seed},
                          {"val_fraction", opt.val_fraction},
                          {"learning_rate", opt.learning_rate},
                          {"batch_size", opt.batch_size},
                          {"max_epochs", opt.max_epochs},
                          {"patience", opt.patience},
                          {"min_val_accuracy", opt.min_val_accuracy},
                          {"hidden_sizes", opt.hidden_sizes}}},
               {"features", json(cfg)}};
    write_stamp(out_model + ".stamp.json", "train", opt.seed, stamp);

    std::cout << "model=" << out_model
              << " val_accuracy=" << arrayid::format_double(report.val_accuracy)
              << " val_eer=" << arrayid::format_double(report.val_eer)
              << " threshold=" << arrayid::format_double(report.threshold) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int run_evaluate(const std::string& model_path, const std::string& features_csv,
                 const std::string& out_report, const FeatureFlags& ff, std::uint64_t seed) {
    const auto cfg = ff.resolve();
    const auto model = arrayid::classifier::load_model(model_path);
    const auto rows = arrayid::features::load_features(features_csv, cfg);
    const auto report = arrayid::classifier::evaluate(model, to_samples(rows),
                                                      arrayid::features::config_hash(cfg));

    arrayid::write_file_atomic(out_report,
                               arrayid::classifier::report_to_json(report).dump(2) + "\n");
    if (!report.roc.empty())
        arrayid::write_file_atomic(out_report + ".roc.csv",
                                   arrayid::classifier::roc_to_csv(report));
    write_stamp(out_report + ".stamp.json", "evaluate", seed, json(cfg));

    auto fmt = [](double v) {
        return std::isfinite(v) ? arrayid::format_double(v) : std::string("n/a");
    };
    std::cout << "accuracy=" << fmt(report.accuracy) << " far=" << fmt(report.far)
              << " frr=" << fmt(report.frr) << " trr=" << fmt(report.trr)
              << " eer=" << fmt(report.eer) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

int run_detect(const std::string& model_path, const std::string& wav_path,
               const FeatureFlags& ff) {
    const auto cfg = ff.resolve();
    const auto model = arrayid::classifier::load_model(model_path);
    const auto audio = arrayid::audio::load_wav(wav_path);
    const auto vec = arrayid::features::extract(audio, cfg);
    const auto pred = arrayid::classifier::predict(model, vec.flatten(),
                                                   arrayid::features::config_hash(cfg));
    std::cout << "label=" << arrayid::audio::to_string(pred.label)
              << " score=" << arrayid::format_double(pred.score) << "\n";
    return pred.label == arrayid::audio::Label::authentic ? kOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passive voice-liveness toolkit for circular microphone arrays"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "render a labeled synthetic corpus");
    std::string synth_out, synth_config;
    std::uint64_t synth_seed = 1;
    int n_auth = 400, n_replay = 200, n_mod = 200;
    double duration = 1.0, snr_db = 40.0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--config", synth_config, "JSON corpus configuration (flags win)");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "master seed");
    auto* synth_auth_opt = synth->add_option("--authentic", n_auth, "authentic render count");
    auto* synth_replay_opt = synth->add_option("--replay", n_replay, "plain replay count");
    auto* synth_mod_opt =
        synth->add_option("--modulated", n_mod, "inverse-filtered replay count");
    auto* synth_dur_opt = synth->add_option("--duration", duration, "seconds per render");
    auto* synth_snr_opt = synth->add_option("--snr", snr_db, "per-channel SNR in dB");

    // sweep ------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "grid-evaluate distance spread vs pose");
    std::string sweep_out, sweep_config;
    std::uint64_t sweep_seed = 1;
    std::vector<int> sweep_mics;
    double sweep_radius = 0.05;
    sweep->add_option("--out", sweep_out, "output CSV path")->required();
    sweep->add_option("--config", sweep_config, "JSON sweep configuration (flags win)");
    sweep->add_option("--seed", sweep_seed, "recorded in the stamp; sweep is deterministic");
    auto* sweep_mics_opt =
        sweep->add_option("--mics", sweep_mics, "microphone counts")->delimiter(',');
    auto* sweep_radius_opt = sweep->add_option("--radius", sweep_radius, "array radius in m");

    // extract ----------------------------------------------------------
    auto* extract = app.add_subcommand("extract", "compute feature rows for a manifest");
    std::string extract_manifest, extract_out;
    std::uint64_t extract_seed = 1;
    FeatureFlags extract_ff;
    extract->add_option("--manifest", extract_manifest, "manifest CSV path")->required();
    extract->add_option("--out", extract_out, "output feature CSV path")->required();
    extract->add_option("--seed", extract_seed, "recorded in the stamp");
    extract_ff.add_to(*extract, /*config_is_feature_file=*/true);

    // train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "fit the detector on labeled features");
    std::string train_features, train_out, train_config;
    std::uint64_t train_seed = 1;
    double train_valfrac = 0.3;
    FeatureFlags train_ff;
    train->add_option("--features", train_features, "labeled feature CSV")->required();
    train->add_option("--out", train_out, "output model JSON path")->required();
    train->add_option("--config", train_config,
                      "JSON training configuration; key \"features\" nests the extraction recipe");
    auto* train_seed_opt = train->add_option("--seed", train_seed, "training seed");
    auto* train_valfrac_opt =
        train->add_option("--val-fraction", train_valfrac, "validation split fraction");
    train_ff.add_to(*train, /*config_is_feature_file=*/false);

    // evaluate ----------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "score labeled features against a model");
    std::string eval_model, eval_features, eval_out;
    std::uint64_t eval_seed = 1;
    FeatureFlags eval_ff;
    evaluate->add_option("--model", eval_model, "model JSON path")->required();
    evaluate->add_option("--features", eval_features, "labeled feature CSV")->required();
    evaluate->add_option("--out", eval_out, "output report JSON path")->required();
    evaluate->add_option("--seed", eval_seed, "recorded in the stamp");
    eval_ff.add_to(*evaluate, /*config_is_feature_file=*/true);

    // detect -------------------------------------------------------------
    auto* detect = app.add_subcommand("detect", "classify one multichannel WAV");
    std::string detect_model, detect_wav;
    std::uint64_t detect_seed = 1;
    FeatureFlags detect_ff;
    detect->add_option("--model", detect_model, "model JSON path")->required();
    detect->add_option("--wav", detect_wav, "multichannel WAV to classify")->required();
    detect->add_option("--seed", detect_seed, "accepted for interface uniformity");
    detect_ff.add_to(*detect, /*config_is_feature_file=*/true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    const bool is_detect = detect->parsed();
    try {
        if (synth->parsed())
            return run_synth(synth_out, synth_config, synth_seed_opt, synth_seed, synth_auth_opt,
                             n_auth, synth_replay_opt, n_replay, synth_mod_opt, n_mod,
                             synth_dur_opt, duration, synth_snr_opt, snr_db);
        if (sweep->parsed())
            return run_sweep(sweep_out, sweep_config, sweep_seed, sweep_mics_opt, sweep_mics,
                             sweep_radius_opt, sweep_radius);
        if (extract->parsed())
            return run_extract(extract_manifest, extract_out, extract_ff, extract_seed);
        if (train->parsed())
            return run_train(train_features, train_out, train_config, train_ff, train_seed_opt,
                             train_seed, train_valfrac_opt, train_valfrac);
        if (evaluate->parsed())
            return run_evaluate(eval_model, eval_features, eval_out, eval_ff, eval_seed);
        if (detect->parsed()) return run_detect(detect_model, detect_wav, detect_ff);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_detect ? kUsageError : kRuntimeError;
    }
    return kUsageError;
}
