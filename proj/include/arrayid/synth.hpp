#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arrayid/audio.hpp"
#include "arrayid/dsp.hpp"
#include "arrayid/geometry.hpp"
#include "arrayid/rng.hpp"

namespace arrayid::synth {

inline constexpr int kSampleRateHz = 48000;
inline constexpr double kInverseGainClamp = 10.0;  // +20 dB

// Loudspeaker coloration model: a high-pass magnitude response
// |H(f)| = x / sqrt(1 + x^2) with x = (f / corner_hz)^order.
struct DeviceFilter {
    double corner_hz = 800.0;
    int order = 4;

    void validate() const {
        if (!(corner_hz > 0.0)) throw std::invalid_argument("device filter: corner must be positive");
        if (order < 1) throw std::invalid_argument("device filter: order must be >= 1");
    }
};

inline double device_magnitude(double f_hz, const DeviceFilter& filter) {
    const double x = std::pow(std::max(f_hz, 0.0) / filter.corner_hz,
                              static_cast<double>(filter.order));
    return x / std::sqrt(1.0 + x * x);
}

// Magnitude inverse of the device response, gain clamped to +20 dB — what a
// replay attacker can realistically pre-apply without clipping the speaker.
inline double inverse_magnitude(double f_hz, const DeviceFilter& filter) {
    const double h = device_magnitude(f_hz, filter);
    if (h <= 1.0 / (kInverseGainClamp * 1e6)) return kInverseGainClamp;
    return std::min(1.0 / h, kInverseGainClamp);
}

enum class SourceKind { human, device, modulated };

inline std::string to_string(SourceKind k) {
    switch (k) {
        case SourceKind::human: return "human";
        case SourceKind::device: return "device";
        case SourceKind::modulated: return "modulated";
    }
    return "?";
}

// Harmonic source description. The spectral envelope is piecewise-linear in
// (hz, gain) breakpoints; gains at harmonic frequencies are interpolated.
struct SourceProfile {
    double fundamental_hz = 120.0;
    int n_harmonics = 50;
    std::vector<std::pair<double, double>> envelope;  // (hz, gain), hz increasing
    std::optional<DeviceFilter> device_filter;

    void validate(SourceKind kind) const {
        if (!(fundamental_hz > 0.0))
            throw std::invalid_argument("source profile: fundamental must be positive");
        if (n_harmonics < 1)
            throw std::invalid_argument("source profile: need at least one harmonic");
        if (envelope.empty())
            throw std::invalid_argument("source profile: empty envelope");
        double prev = -1.0;
        for (const auto& [hz, gain] : envelope) {
            if (hz <= prev)
                throw std::invalid_argument("source profile: envelope frequencies must increase");
            if (!(gain > 0.0))
                throw std::invalid_argument("source profile: envelope gains must be positive");
            prev = hz;
        }
        const bool needs_filter = (kind != SourceKind::human);
        if (needs_filter != device_filter.has_value())
            throw std::invalid_argument(
                "source profile: device_filter must be present exactly for device/modulated sources");
    }
};

inline double envelope_gain(const std::vector<std::pair<double, double>>& env, double f_hz) {
    if (f_hz <= env.front().first) return env.front().second;
    if (f_hz >= env.back().first) return env.back().second;
    for (std::size_t i = 1; i < env.size(); ++i) {
        if (f_hz <= env[i].first) {
            const double t = (f_hz - env[i - 1].first) / (env[i].first - env[i - 1].first);
            return env[i - 1].second + t * (env[i].second - env[i - 1].second);
        }
    }
    return env.back().second;
}

// Placement plus physical propagation parameters. The source sits at angle 0
// in the array plane; geometry.rotation_rad orients the array relative to it.
struct Scene {
    geometry::ArrayGeometry geometry;
    double source_distance_m = 1.2;
    SourceKind source_kind = SourceKind::human;
    std::string device_id;              // empty for human sources
    double attenuation_c = 1.0;         // overall gain C
    double absorption_per_hz = 1.5e-4;  // alpha(f) = absorption_per_hz * f (nepers/m/Hz)
    double speed_of_sound = 343.0;      // m/s
    std::optional<double> snr_db;       // per-channel white noise; absent = noiseless

    void validate() const {
        geometry.validate();
        if (!(source_distance_m > geometry.radius_m))
            throw std::invalid_argument("scene: source must lie outside the array");
        if (!(attenuation_c > 0.0))
            throw std::invalid_argument("scene: attenuation C must be positive");
        if (absorption_per_hz < 0.0)
            throw std::invalid_argument("scene: absorption must be non-negative");
        if (!(speed_of_sound > 0.0))
            throw std::invalid_argument("scene: speed of sound must be positive");
    }
};

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace detail

// Physics stage without the final peak normalization; exposed so that decay
// properties can be asserted on raw channel levels.
inline audio::MultiChannelAudio render_raw(const Scene& scene, const SourceProfile& profile,
                                           double duration_s, std::uint64_t seed) {
    scene.validate();
    profile.validate(scene.source_kind);
    if (!(duration_s >= 0.5))
        throw std::invalid_argument("render: duration must be at least 0.5 s");

    const std::size_t n_samples =
        static_cast<std::size_t>(std::llround(duration_s * kSampleRateHz));
    Rng rng(seed);

    // Seeded per-harmonic phases, then the slow syllable-like AM envelope.
    const double nyquist = kSampleRateHz / 2.0;
    std::vector<double> phases;
    std::vector<double> freqs;
    std::vector<double> gains;
    for (int m = 1; m <= profile.n_harmonics; ++m) {
        const double f = profile.fundamental_hz * static_cast<double>(m);
        const double phase = rng.uniform(0.0, 2.0 * dsp::kPi);
        if (f >= nyquist) continue;
        freqs.push_back(f);
        gains.push_back(envelope_gain(profile.envelope, f));
        phases.push_back(phase);
    }
    const double am_rate = rng.uniform(2.0, 8.0);
    const double am_phase = rng.uniform(0.0, 2.0 * dsp::kPi);

    std::vector<double> x(n_samples, 0.0);
    for (std::size_t m = 0; m < freqs.size(); ++m) {
        const double w = 2.0 * dsp::kPi * freqs[m] / kSampleRateHz;
        for (std::size_t t = 0; t < n_samples; ++t)
            x[t] += gains[m] * std::sin(w * static_cast<double>(t) + phases[m]);
    }
    const double am_w = 2.0 * dsp::kPi * am_rate / kSampleRateHz;
    for (std::size_t t = 0; t < n_samples; ++t)
        x[t] *= 0.55 + 0.45 * std::sin(am_w * static_cast<double>(t) + am_phase);

    // Frequency-domain propagation on a padded power-of-two grid: exact
    // fractional delays (linear phase ramps) and per-mic frequency-selective
    // attenuation.
    const auto dists = geometry::mic_distances(scene.geometry, scene.source_distance_m);
    const double max_dist = *std::max_element(dists.begin(), dists.end());
    const std::size_t pad = detail::next_pow2(
        n_samples + static_cast<std::size_t>(max_dist / scene.speed_of_sound * kSampleRateHz) +
        4096);
    auto spectrum = dsp::rfft(x, pad);
    const double bin_hz = static_cast<double>(kSampleRateHz) / static_cast<double>(pad);

    if (scene.source_kind != SourceKind::human) {
        const DeviceFilter& filt = *profile.device_filter;
        for (std::size_t b = 0; b < spectrum.size(); ++b) {
            const double f = bin_hz * static_cast<double>(b);
            double g = device_magnitude(f, filt);
            if (scene.source_kind == SourceKind::modulated) g *= inverse_magnitude(f, filt);
            spectrum[b] *= g;
        }
    }

    audio::MultiChannelAudio out;
    out.sample_rate_hz = kSampleRateHz;
    out.channels.resize(dists.size());
    std::vector<std::complex<double>> chan_spec(spectrum.size());
    for (std::size_t k = 0; k < dists.size(); ++k) {
        const double d = dists[k];
        for (std::size_t b = 0; b < spectrum.size(); ++b) {
            const double f = bin_hz * static_cast<double>(b);
            const double gain = scene.attenuation_c * std::exp(-scene.absorption_per_hz * f * d);
            const double ang = -2.0 * dsp::kPi * f * d / scene.speed_of_sound;
            chan_spec[b] = spectrum[b] * std::polar(gain, ang);
        }
        auto y = dsp::irfft(chan_spec, pad);
        y.resize(n_samples);
        out.channels[k] = std::move(y);
    }

    if (scene.snr_db) {
        // Separate noise stream so the scene draw order is kind-independent.
        Rng noise_rng(seed ^ 0x9E3779B97F4A7C15ull);
        for (auto& ch : out.channels) {
            double power = 0.0;
            for (double v : ch) power += v * v;
            power /= static_cast<double>(ch.size());
            const double sigma = std::sqrt(power / std::pow(10.0, *scene.snr_db / 10.0));
            for (double& v : ch) v += sigma * noise_rng.normal();
        }
    }
    return out;
}

// Full render: physics stage plus global peak normalization to 0.5. The
// normalization is global (one gain for all channels) so inter-channel level
// ratios — the array fingerprint's raw material — survive.
inline audio::MultiChannelAudio synthesize_scene(const Scene& scene, const SourceProfile& profile,
                                                 double duration_s, std::uint64_t seed) {
    audio::MultiChannelAudio out = render_raw(scene, profile, duration_s, seed);
    double peak = 0.0;
    for (const auto& ch : out.channels)
        for (double v : ch) peak = std::max(peak, std::fabs(v));
    if (peak <= 0.0) throw std::runtime_error("synthesize_scene: silent render");
    const double g = 0.5 / peak;
    for (auto& ch : out.channels)
        for (double& v : ch) v *= g;
    return out;
}

// Replay attack with the inverse-filter trick: the recorded source is
// pre-filtered by the clamped magnitude inverse of the loudspeaker response,
// then played through that loudspeaker.
inline audio::MultiChannelAudio synthesize_modulated(const Scene& scene,
                                                     const SourceProfile& profile,
                                                     double duration_s, std::uint64_t seed) {
    if (scene.source_kind != SourceKind::modulated)
        throw std::invalid_argument("synthesize_modulated: scene kind must be modulated");
    return synthesize_scene(scene, profile, duration_s, seed);
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

struct DevicePreset {
    std::string id;
    DeviceFilter filter;
};

struct CorpusConfig {
    int n_authentic = 400;
    int n_replay = 200;
    int n_modulated = 200;
    std::vector<double> distances_m{0.6, 1.2, 1.8, 2.4};
    std::vector<DevicePreset> devices{
        {"portable_speaker", {650.0, 4}},
        {"tablet", {800.0, 4}},
        {"phone", {950.0, 4}},
    };
    double snr_db = 40.0;
    std::uint64_t seed = 1;
    double duration_s = 1.0;
    int n_mics = 6;
    double radius_m = 0.05;

    void validate() const {
        if (n_authentic < 0 || n_replay < 0 || n_modulated < 0)
            throw std::invalid_argument("corpus: negative class count");
        if (n_authentic + n_replay + n_modulated == 0)
            throw std::invalid_argument("corpus: no renders requested");
        if (distances_m.empty()) throw std::invalid_argument("corpus: no distances");
        for (double d : distances_m)
            if (!(d > radius_m))
                throw std::invalid_argument("corpus: distances must exceed the array radius");
        if ((n_replay > 0 || n_modulated > 0) && devices.empty())
            throw std::invalid_argument("corpus: spoof renders need device presets");
        for (const auto& dev : devices) {
            if (dev.id.empty()) throw std::invalid_argument("corpus: empty device id");
            dev.filter.validate();
        }
        if (!(duration_s >= 0.5)) throw std::invalid_argument("corpus: duration must be >= 0.5 s");
        if (n_mics < 2) throw std::invalid_argument("corpus: need at least 2 mics");
        if (!(radius_m > 0.0)) throw std::invalid_argument("corpus: radius must be positive");
    }
};

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
    nlohmann::json devices = nlohmann::json::array();
    for (const auto& d : c.devices)
        devices.push_back({{"id", d.id}, {"corner_hz", d.filter.corner_hz}, {"order", d.filter.order}});
    j = nlohmann::json{{"n_authentic", c.n_authentic},
                       {"n_replay", c.n_replay},
                       {"n_modulated", c.n_modulated},
                       {"distances_m", c.distances_m},
                       {"devices", devices},
                       {"snr_db", c.snr_db},
                       {"seed", c.seed},
                       {"duration_s", c.duration_s},
                       {"n_mics", c.n_mics},
                       {"radius_m", c.radius_m}};
}

inline void from_json(const nlohmann::json& j, CorpusConfig& c) {
    static const std::vector<std::string> known{
        "n_authentic", "n_replay", "n_modulated", "distances_m", "devices",
        "snr_db",      "seed",     "duration_s",  "n_mics",      "radius_m"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("corpus config: unknown key '" + it.key() + "'");
    }
    CorpusConfig defaults;
    c = defaults;
    if (j.contains("n_authentic")) c.n_authentic = j.at("n_authentic").get<int>();
    if (j.contains("n_replay")) c.n_replay = j.at("n_replay").get<int>();
    if (j.contains("n_modulated")) c.n_modulated = j.at("n_modulated").get<int>();
    if (j.contains("distances_m")) c.distances_m = j.at("distances_m").get<std::vector<double>>();
    if (j.contains("devices")) {
        c.devices.clear();
        for (const auto& d : j.at("devices")) {
            DevicePreset p;
            p.id = d.at("id").get<std::string>();
            p.filter.corner_hz = d.at("corner_hz").get<double>();
            p.filter.order = d.at("order").get<int>();
            c.devices.push_back(std::move(p));
        }
    }
    if (j.contains("snr_db")) c.snr_db = j.at("snr_db").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("duration_s")) c.duration_s = j.at("duration_s").get<double>();
    if (j.contains("n_mics")) c.n_mics = j.at("n_mics").get<int>();
    if (j.contains("radius_m")) c.radius_m = j.at("radius_m").get<double>();
}

// Default synthetic voice: fundamental 90-170 Hz, harmonics to 6 kHz, a
// 1/(1+(f/300)^2) spectral envelope with per-harmonic log-uniform wiggle.
inline SourceProfile random_source_profile(Rng& rng, std::optional<DeviceFilter> filter) {
    SourceProfile p;
    p.fundamental_hz = rng.uniform(90.0, 170.0);
    p.n_harmonics = static_cast<int>(6000.0 / p.fundamental_hz);
    p.envelope.reserve(static_cast<std::size_t>(p.n_harmonics));
    for (int m = 1; m <= p.n_harmonics; ++m) {
        const double f = p.fundamental_hz * static_cast<double>(m);
        const double base = 1.0 / (1.0 + (f / 300.0) * (f / 300.0));
        p.envelope.emplace_back(f, base * std::exp(rng.uniform(-0.7, 0.7)));
    }
    p.device_filter = std::move(filter);
    return p;
}

// Renders one corpus entry deterministically from its master-RNG draws.
inline audio::MultiChannelAudio render_corpus_entry(const CorpusConfig& cfg, SourceKind kind,
                                                    const DevicePreset* device, double distance_m,
                                                    std::uint64_t entry_seed) {
    Rng rng(entry_seed);
    std::optional<DeviceFilter> filt;
    if (kind != SourceKind::human) filt = device->filter;
    SourceProfile profile = random_source_profile(rng, filt);
    Scene scene;
    scene.geometry = {cfg.n_mics, cfg.radius_m, rng.uniform(0.0, 2.0 * dsp::kPi)};
    scene.source_distance_m = distance_m;
    scene.source_kind = kind;
    scene.device_id = device ? device->id : "";
    scene.snr_db = cfg.snr_db;
    const std::uint64_t render_seed = rng.next_u64();
    return synthesize_scene(scene, profile, cfg.duration_s, render_seed);
}

// Writes WAV files plus manifest.csv; deterministic given the seed. Renders
// are stratified over distances and device presets in file order.
inline audio::DatasetManifest generate_corpus(const CorpusConfig& cfg,
                                              const std::string& out_dir,
                                              std::uint64_t seed) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    Rng master(seed);
    audio::DatasetManifest manifest;
    int user_counter = 0;

    auto emit = [&](SourceKind kind, int count, const char* stem) {
        for (int i = 0; i < count; ++i) {
            const double distance =
                cfg.distances_m[static_cast<std::size_t>(i) % cfg.distances_m.size()];
            const DevicePreset* device =
                kind == SourceKind::human
                    ? nullptr
                    : &cfg.devices[static_cast<std::size_t>(i) % cfg.devices.size()];
            const std::uint64_t entry_seed = master.next_u64();
            const auto render = render_corpus_entry(cfg, kind, device, distance, entry_seed);

            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04d.wav", stem, i);
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            audio::save_wav(render, path, audio::BitDepth::pcm16);

            audio::ManifestEntry e;
            e.path = name;  // relative to the manifest's directory
            e.label = kind == SourceKind::human ? audio::Label::authentic : audio::Label::spoof;
            e.distance_m = distance;
            if (device) {
                e.device_id = device->id;
                if (kind == SourceKind::modulated) e.device_id += "~mod";
            }
            e.user_id = "u" + std::to_string(user_counter++);
            manifest.entries.push_back(std::move(e));
        }
    };

    emit(SourceKind::human, cfg.n_authentic, "authentic");
    emit(SourceKind::device, cfg.n_replay, "replay");
    emit(SourceKind::modulated, cfg.n_modulated, "modulated");

    audio::save_manifest(manifest,
                         (std::filesystem::path(out_dir) / "manifest.csv").string());
    return manifest;
}

}  // namespace arrayid::synth
