#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arrayid/audio.hpp"
#include "arrayid/dsp.hpp"
#include "arrayid/rng.hpp"
#include "arrayid/util.hpp"

namespace arrayid::features {

struct FeatureConfig {
    double f_sap_cutoff_hz = 5000.0;  // array-fingerprint band
    double f_sdp_cutoff_hz = 1000.0;  // distribution-fingerprint band
    int grid_rows = 100;              // frequency cells of the pooled grid
    int grid_cols = 20;               // time cells of the pooled grid
    int n_sap = 40;                   // fingerprint length after resampling
    int n_ch = 20;                    // channel-strength profile length
    std::vector<double> sdp_thresholds{0.1, 0.3, 0.5, 0.7, 0.9};
    int lpcc_order = 15;
    dsp::StftConfig stft{};
    double direction_hp_hz = 100.0;

    void validate() const {
        if (!(f_sap_cutoff_hz > 0.0) || !(f_sdp_cutoff_hz > 0.0))
            throw std::invalid_argument("feature config: cutoffs must be positive");
        if (grid_rows < 2 || grid_cols < 2 || n_sap < 2 || n_ch < 2)
            throw std::invalid_argument("feature config: grid and output sizes must be >= 2");
        if (sdp_thresholds.empty())
            throw std::invalid_argument("feature config: need at least one threshold");
        double prev = 0.0;
        for (double t : sdp_thresholds) {
            if (!(t > prev && t < 1.0))
                throw std::invalid_argument(
                    "feature config: thresholds must be strictly increasing within (0,1)");
            prev = t;
        }
        if (lpcc_order < 1) throw std::invalid_argument("feature config: lpcc order must be >= 1");
        stft.validate();
        if (!(direction_hp_hz > 0.0))
            throw std::invalid_argument("feature config: direction high-pass must be positive");
    }

    std::size_t sap_size() const { return static_cast<std::size_t>(n_sap); }
    std::size_t sdp_size() const {
        return static_cast<std::size_t>(n_ch) + 2 * sdp_thresholds.size();
    }
    std::size_t lpc_size() const { return 2 * (static_cast<std::size_t>(lpcc_order) + 1); }
    std::size_t feature_size() const { return sap_size() + sdp_size() + lpc_size(); }
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
    j = nlohmann::json{{"f_sap_cutoff_hz", c.f_sap_cutoff_hz},
                       {"f_sdp_cutoff_hz", c.f_sdp_cutoff_hz},
                       {"grid_rows", c.grid_rows},
                       {"grid_cols", c.grid_cols},
                       {"n_sap", c.n_sap},
                       {"n_ch", c.n_ch},
                       {"sdp_thresholds", c.sdp_thresholds},
                       {"lpcc_order", c.lpcc_order},
                       {"stft_window_len", c.stft.window_len},
                       {"stft_overlap", c.stft.overlap},
                       {"stft_n_fft", c.stft.n_fft},
                       {"direction_hp_hz", c.direction_hp_hz}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
    static const std::vector<std::string> known{
        "f_sap_cutoff_hz", "f_sdp_cutoff_hz", "grid_rows",       "grid_cols",
        "n_sap",           "n_ch",            "sdp_thresholds",  "lpcc_order",
        "stft_window_len", "stft_overlap",    "stft_n_fft",      "direction_hp_hz"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("feature config: unknown key '" + it.key() + "'");
    }
    FeatureConfig defaults;
    c = defaults;
    if (j.contains("f_sap_cutoff_hz")) c.f_sap_cutoff_hz = j.at("f_sap_cutoff_hz").get<double>();
    if (j.contains("f_sdp_cutoff_hz")) c.f_sdp_cutoff_hz = j.at("f_sdp_cutoff_hz").get<double>();
    if (j.contains("grid_rows")) c.grid_rows = j.at("grid_rows").get<int>();
    if (j.contains("grid_cols")) c.grid_cols = j.at("grid_cols").get<int>();
    if (j.contains("n_sap")) c.n_sap = j.at("n_sap").get<int>();
    if (j.contains("n_ch")) c.n_ch = j.at("n_ch").get<int>();
    if (j.contains("sdp_thresholds"))
        c.sdp_thresholds = j.at("sdp_thresholds").get<std::vector<double>>();
    if (j.contains("lpcc_order")) c.lpcc_order = j.at("lpcc_order").get<int>();
    if (j.contains("stft_window_len")) c.stft.window_len = j.at("stft_window_len").get<int>();
    if (j.contains("stft_overlap")) c.stft.overlap = j.at("stft_overlap").get<int>();
    if (j.contains("stft_n_fft")) c.stft.n_fft = j.at("stft_n_fft").get<int>();
    if (j.contains("direction_hp_hz")) c.direction_hp_hz = j.at("direction_hp_hz").get<double>();
}

// Stable identifier of the extraction recipe; a trained model refuses feature
// vectors produced under a different configuration.
inline std::uint64_t config_hash(const FeatureConfig& c) {
    const nlohmann::json j = c;
    const std::string s = j.dump();  // keys are sorted, so the dump is canonical
    return fnv1a64(s.data(), s.size());
}

namespace detail {

// Reductions across channels sort their inputs first so that any permutation
// of the channels produces bit-identical results.
inline std::pair<double, double> sorted_mean_std(std::vector<double>& vals) {
    std::sort(vals.begin(), vals.end());
    double sum = 0.0;
    for (double v : vals) sum += v;
    const double mean = sum / static_cast<double>(vals.size());
    double acc = 0.0;
    for (double v : vals) acc += (v - mean) * (v - mean);
    const double sd = vals.size() < 2
                          ? 0.0
                          : std::sqrt(acc / static_cast<double>(vals.size() - 1));
    return {mean, sd};
}

template <typename F>
auto with_context(const char* stage, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(stage) + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(stage) + ": " + e.what());
    }
}

}  // namespace detail

// Closest-microphone estimate: after a high-pass that removes room rumble,
// adjacent channels are compared and the index with the smallest circular
// predecessor difference wins; ties go to the lowest index.
inline int detect_direction(const audio::MultiChannelAudio& audio, const FeatureConfig& cfg) {
    cfg.validate();
    audio.validate();
    const std::size_t n = audio.n_channels();
    if (n < 2) throw std::invalid_argument("detect_direction: need at least 2 channels");

    std::vector<std::vector<double>> filtered(n);
    for (std::size_t k = 0; k < n; ++k)
        filtered[k] = dsp::highpass(audio.channels[k], cfg.direction_hp_hz,
                                    audio.sample_rate_hz);

    int best = 1;
    double best_err = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const auto& prev = filtered[(i + n - 2) % n];  // channel i-1, wrapping to channel N
        const auto& cur = filtered[i - 1];
        double err = 0.0;
        for (std::size_t t = 0; t < cur.size(); ++t) {
            const double d = prev[t] - cur[t];
            err += d * d;
        }
        err /= static_cast<double>(cur.size());
        if (i == 1 || err < best_err) {
            best = static_cast<int>(i);
            best_err = err;
        }
    }
    return best;
}

// Pools a magnitude spectrogram into a rows x cols grid of block sums over
// the band [0, cutoff_hz). Trailing bins/frames that do not fill a whole
// block are discarded.
inline dsp::Mat spectrogram_grid(const dsp::Spectrogram& spec, int rows, int cols,
                                 double cutoff_hz) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("spectrogram_grid: grid sizes must be positive");
    if (!(cutoff_hz > 0.0)) throw std::invalid_argument("spectrogram_grid: cutoff must be positive");
    const std::size_t m_spec =
        std::min(spec.rows(), static_cast<std::size_t>(cutoff_hz / spec.bin_hz));
    const std::size_t s_m = m_spec / static_cast<std::size_t>(rows);
    const std::size_t s_n = spec.cols() / static_cast<std::size_t>(cols);
    if (s_m == 0)
        throw std::invalid_argument("spectrogram_grid: fewer retained frequency bins than rows");
    if (s_n == 0)
        throw std::invalid_argument(
            "spectrogram_grid: too few frames; provide at least cols * (window + hop) samples");

    dsp::Mat g(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), 0.0);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) {
            double acc = 0.0;
            for (std::size_t r = i * s_m; r < (i + 1) * s_m; ++r)
                for (std::size_t c = j * s_n; c < (j + 1) * s_n; ++c)
                    acc += spec.magnitudes(r, c);
            g(i, j) = acc;
        }
    return g;
}

namespace detail {

inline std::vector<dsp::Mat> channel_grids(const audio::MultiChannelAudio& audio,
                                           const FeatureConfig& cfg, int rows, int cols,
                                           double cutoff_hz) {
    std::vector<dsp::Mat> grids;
    grids.reserve(audio.n_channels());
    for (const auto& ch : audio.channels) {
        const auto spec = dsp::stft(ch, cfg.stft, audio.sample_rate_hz);
        grids.push_back(spectrogram_grid(spec, rows, cols, cutoff_hz));
    }
    return grids;
}

}  // namespace detail

// Array fingerprint before length reduction: per-cell channel spread,
// averaged over time, smoothed, and min-max normalized to [0,1]. Exposed so
// the exact-extrema property can be checked ahead of the lossy resample.
inline std::vector<double> sap_profile(const audio::MultiChannelAudio& audio,
                                       const FeatureConfig& cfg) {
    return detail::with_context("f_sap", [&] {
        cfg.validate();
        audio.validate();
        const std::size_t n = audio.n_channels();
        if (n < 2) throw std::invalid_argument("need at least 2 channels");
        const auto grids =
            detail::channel_grids(audio, cfg, cfg.grid_rows, cfg.grid_cols, cfg.f_sap_cutoff_hz);

        std::vector<double> profile(static_cast<std::size_t>(cfg.grid_rows), 0.0);
        std::vector<double> cell(n);
        for (std::size_t i = 0; i < profile.size(); ++i) {
            double row_acc = 0.0;
            for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.grid_cols); ++j) {
                for (std::size_t k = 0; k < n; ++k) cell[k] = grids[k](i, j);
                row_acc += detail::sorted_mean_std(cell).second;
            }
            profile[i] = row_acc / static_cast<double>(cfg.grid_cols);
        }
        return dsp::minmax_normalize(dsp::moving_average(profile, 5));
    });
}

inline std::vector<double> f_sap(const audio::MultiChannelAudio& audio,
                                 const FeatureConfig& cfg) {
    return detail::with_context("f_sap",
                                [&] { return dsp::resample_linear(sap_profile(audio, cfg), cfg.n_sap); });
}

// Crossing-index semantics for a normalized cumulative profile (1-based
// chunks): an exact hit returns the first chunk that lands on the threshold,
// otherwise the last chunk strictly below it (0 when the first chunk already
// overshoots).
inline double cumulative_crossing_index(const std::vector<double>& cum, double thr) {
    for (std::size_t i = 0; i < cum.size(); ++i)
        if (cum[i] == thr) return static_cast<double>(i + 1);
    double idx = 0.0;
    for (std::size_t i = 0; i < cum.size() && cum[i] < thr; ++i)
        idx = static_cast<double>(i + 1);
    return idx;
}

// Distribution fingerprint: mean channel-strength profile over time chunks,
// plus the spread of per-channel cumulative-energy crossing indices at fixed
// thresholds.
inline std::vector<double> f_sdp(const audio::MultiChannelAudio& audio,
                                 const FeatureConfig& cfg) {
    return detail::with_context("f_sdp", [&] {
        cfg.validate();
        audio.validate();
        const std::size_t n = audio.n_channels();
        if (n < 2) throw std::invalid_argument("need at least 2 channels");
        // one frequency row: each grid cell sums the whole band per time chunk
        const auto grids = detail::channel_grids(audio, cfg, 1, cfg.grid_cols, cfg.f_sdp_cutoff_hz);
        const std::size_t chunks = static_cast<std::size_t>(cfg.grid_cols);

        std::vector<double> mean_strength(chunks, 0.0);
        std::vector<double> cell(n);
        for (std::size_t i = 0; i < chunks; ++i) {
            for (std::size_t k = 0; k < n; ++k) cell[k] = grids[k](0, i);
            mean_strength[i] = detail::sorted_mean_std(cell).first;
        }

        // per-channel normalized cumulative energy and its threshold crossings
        std::vector<std::vector<double>> mu(cfg.sdp_thresholds.size(),
                                            std::vector<double>(n, 0.0));
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> cum(chunks);
            double total = 0.0;
            for (std::size_t i = 0; i < chunks; ++i) {
                total += grids[k](0, i);
                cum[i] = total;
            }
            if (!(total > 0.0)) throw std::runtime_error("zero channel strength");
            for (double& v : cum) v /= total;

            for (std::size_t t = 0; t < cfg.sdp_thresholds.size(); ++t)
                mu[t][k] = cumulative_crossing_index(cum, cfg.sdp_thresholds[t]);
        }

        std::vector<double> out = dsp::resample_linear(mean_strength, cfg.n_ch);
        std::vector<double> d_mean(cfg.sdp_thresholds.size());
        std::vector<double> d_std(cfg.sdp_thresholds.size());
        for (std::size_t t = 0; t < cfg.sdp_thresholds.size(); ++t) {
            const auto [m, s] = detail::sorted_mean_std(mu[t]);
            d_mean[t] = m;
            d_std[t] = s;
        }
        out.insert(out.end(), d_mean.begin(), d_mean.end());
        out.insert(out.end(), d_std.begin(), d_std.end());
        return out;
    });
}

// Cepstral envelopes of the estimated closest channel and its antipodal
// partner 1 + ((i - 1 + floor(N/2)) mod N).
inline std::vector<double> f_lpc(const audio::MultiChannelAudio& audio, const FeatureConfig& cfg,
                                 int closest_mic) {
    return detail::with_context("f_lpc", [&] {
        cfg.validate();
        audio.validate();
        const int n = static_cast<int>(audio.n_channels());
        if (n < 2) throw std::invalid_argument("need at least 2 channels");
        if (closest_mic < 1 || closest_mic > n)
            throw std::invalid_argument("closest mic index out of range");
        const int opposite = 1 + ((closest_mic - 1 + n / 2) % n);

        std::vector<double> out =
            dsp::lpcc(audio.channels[static_cast<std::size_t>(closest_mic - 1)], cfg.lpcc_order);
        const auto second =
            dsp::lpcc(audio.channels[static_cast<std::size_t>(opposite - 1)], cfg.lpcc_order);
        out.insert(out.end(), second.begin(), second.end());
        return out;
    });
}

struct FeatureVector {
    std::vector<double> sap;
    std::vector<double> sdp;
    std::vector<double> lpc;
    int direction = 0;  // 1-based estimated closest mic

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(sap.size() + sdp.size() + lpc.size());
        out.insert(out.end(), sap.begin(), sap.end());
        out.insert(out.end(), sdp.begin(), sdp.end());
        out.insert(out.end(), lpc.begin(), lpc.end());
        return out;
    }
};

inline FeatureVector extract(const audio::MultiChannelAudio& audio, const FeatureConfig& cfg) {
    FeatureVector v;
    v.direction = detect_direction(audio, cfg);
    v.sap = f_sap(audio, cfg);
    v.sdp = f_sdp(audio, cfg);
    v.lpc = f_lpc(audio, cfg, v.direction);
    return v;
}

// ---------------------------------------------------------------------------
// Feature CSV
// ---------------------------------------------------------------------------

struct FeatureRow {
    std::string path;
    audio::Label label = audio::Label::authentic;
    std::vector<double> values;
};

inline std::string features_header(const FeatureConfig& cfg) {
    std::string h = "path,label";
    char buf[32];
    auto block = [&](const char* stem, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            std::snprintf(buf, sizeof(buf), ",%s_%02zu", stem, i);
            h += buf;
        }
    };
    block("sap", cfg.sap_size());
    block("sdp", cfg.sdp_size());
    block("lpc", cfg.lpc_size());
    return h;
}

inline std::string features_to_csv(const std::vector<FeatureRow>& rows,
                                   const FeatureConfig& cfg) {
    std::string out = features_header(cfg) + "\n";
    for (const auto& r : rows) {
        if (r.values.size() != cfg.feature_size())
            throw std::invalid_argument("feature row for '" + r.path +
                                        "' has the wrong number of values");
        out += r.path;
        out += ',';
        out += audio::to_string(r.label);
        for (double v : r.values) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

inline void save_features(const std::vector<FeatureRow>& rows, const FeatureConfig& cfg,
                          const std::string& path) {
    write_file_atomic(path, features_to_csv(rows, cfg));
}

inline std::vector<FeatureRow> load_features(const std::string& path, const FeatureConfig& cfg) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open feature file " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty feature file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != features_header(cfg))
        throw std::runtime_error("feature file " + path +
                                 " does not match the extraction configuration");

    std::vector<FeatureRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = audio::detail::split_csv_row(line);
        if (cols.size() != 2 + cfg.feature_size())
            throw std::runtime_error("feature file " + path + " line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(2 + cfg.feature_size()) +
                                     " columns, got " + std::to_string(cols.size()));
        FeatureRow r;
        r.path = cols[0];
        try {
            r.label = audio::label_from_string(cols[1]);
        } catch (const std::exception&) {
            throw std::runtime_error("feature file " + path + " line " + std::to_string(line_no) +
                                     ": unknown label '" + cols[1] + "'");
        }
        r.values.reserve(cfg.feature_size());
        for (std::size_t i = 2; i < cols.size(); ++i) {
            try {
                r.values.push_back(std::stod(cols[i]));
            } catch (const std::exception&) {
                throw std::runtime_error("feature file " + path + " line " +
                                         std::to_string(line_no) + ": bad number '" + cols[i] +
                                         "'");
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace arrayid::features
