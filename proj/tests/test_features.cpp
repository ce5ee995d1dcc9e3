#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include <unistd.h>

#include "arrayid/features.hpp"
#include "arrayid/rng.hpp"
#include "arrayid/synth.hpp"

namespace fs = std::filesystem;
using namespace arrayid;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = 3.14159265358979323846;

audio::MultiChannelAudio noise_audio(std::size_t n_channels, std::size_t n_samples,
                                     std::uint64_t seed, bool identical) {
    audio::MultiChannelAudio a;
    Rng rng(seed);
    a.channels.resize(n_channels);
    for (auto& ch : a.channels) {
        ch.resize(n_samples);
        for (double& v : ch) v = 0.3 * rng.normal();
        if (identical && &ch != &a.channels[0]) ch = a.channels[0];
    }
    return a;
}

audio::MultiChannelAudio render_voice(synth::SourceKind kind, double distance,
                                      std::uint64_t seed, double rotation = 0.3,
                                      double snr_db = 40.0) {
    Rng rng(seed);
    std::optional<synth::DeviceFilter> filt;
    if (kind != synth::SourceKind::human) filt = synth::DeviceFilter{800.0, 4};
    auto profile = synth::random_source_profile(rng, filt);
    synth::Scene scene;
    scene.geometry = {6, 0.05, rotation};
    scene.source_distance_m = distance;
    scene.source_kind = kind;
    scene.snr_db = snr_db;
    return synth::synthesize_scene(scene, profile, 1.0, rng.next_u64());
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("pooled grid sums blocks and discards the remainder") {
    // synthetic all-ones spectrogram at the nominal 48 kHz / 4096-bin layout
    dsp::Spectrogram spec;
    spec.magnitudes = dsp::Mat(2049, 159, 1.0);
    spec.bin_hz = 48000.0 / 4096.0;
    spec.frame_hop = 296;

    // 5 kHz cutoff retains 426 rows -> 4x7 blocks on a 100x20 grid
    const auto g = features::spectrogram_grid(spec, 100, 20, 5000.0);
    REQUIRE(g.rows == 100);
    REQUIRE(g.cols == 20);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) REQUIRE(g(i, j) == 28.0);

    // 1 kHz cutoff retains 85 rows; a single-row grid sums the whole band
    const auto band = features::spectrogram_grid(spec, 1, 20, 1000.0);
    REQUIRE(band.rows == 1);
    for (std::size_t j = 0; j < band.cols; ++j) REQUIRE(band(0, j) == 85.0 * 7.0);

    // too few frames for the requested columns
    dsp::Spectrogram tiny = spec;
    tiny.magnitudes = dsp::Mat(2049, 12, 1.0);
    CHECK_THROWS_WITH(features::spectrogram_grid(tiny, 100, 20, 5000.0),
                      Catch::Matchers::ContainsSubstring("too few frames"));
    // cutoff so low that no full row block fits
    CHECK_THROWS_AS(features::spectrogram_grid(spec, 100, 20, 100.0), std::invalid_argument);
}

TEST_CASE("cumulative crossing index semantics") {
    // uniform profile: exact hits at every odd decile
    std::vector<double> uniform(20);
    for (int i = 0; i < 20; ++i) uniform[static_cast<std::size_t>(i)] = (i + 1) / 20.0;
    CHECK(features::cumulative_crossing_index(uniform, 0.5) == 10.0);
    CHECK(features::cumulative_crossing_index(uniform, 0.1) == 2.0);
    CHECK(features::cumulative_crossing_index(uniform, 0.3) == 6.0);

    // between chunks: last strictly-below index
    CHECK(features::cumulative_crossing_index({0.2, 0.4, 0.9, 1.0}, 0.5) == 2.0);
    // flat stretch hitting the threshold exactly: first hit wins
    CHECK(features::cumulative_crossing_index({0.2, 0.5, 0.5, 1.0}, 0.5) == 2.0);
    // first chunk overshoots
    CHECK(features::cumulative_crossing_index({0.6, 0.8, 1.0}, 0.5) == 0.0);
}

TEST_CASE("identical channels give degenerate fingerprints") {
    features::FeatureConfig cfg;
    const auto a = noise_audio(4, 48000, 91, true);

    const auto sap = features::f_sap(a, cfg);
    REQUIRE(sap.size() == 40);
    for (double v : sap) CHECK(v == 0.0);

    const auto sdp = features::f_sdp(a, cfg);
    REQUIRE(sdp.size() == 30);
    for (std::size_t i = 25; i < 30; ++i) CHECK(sdp[i] == 0.0);  // zero channel spread

    CHECK(features::detect_direction(a, cfg) == 1);  // all ties -> lowest index
}

TEST_CASE("direction picks the quietest adjacent pair") {
    // channels [s, s, s, 2s]: pairs (1,2) and (2,3) are silent, ties -> 2
    features::FeatureConfig cfg;
    audio::MultiChannelAudio a = noise_audio(1, 24000, 7, false);
    a.channels.resize(4);
    a.channels[1] = a.channels[0];
    a.channels[2] = a.channels[0];
    a.channels[3] = a.channels[0];
    for (double& v : a.channels[3]) v *= 2.0;
    CHECK(features::detect_direction(a, cfg) == 2);
}

TEST_CASE("direction on rendered scenes lands on the far-side straddle pair") {
    // With the source on the axis of mic 3 (rotation -2*pi/3 puts mic 3 at
    // angle 0), propagation attenuates the far side most, so the two adjacent
    // pairs flanking the antipodal mic 6 — indices 6 and 1 — have the
    // smallest mean-squared difference. The estimate is therefore stable but
    // antipodal, and the cepstral pair downstream still spans the same axis.
    features::FeatureConfig cfg;
    std::map<int, int> votes;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto a = render_voice(synth::SourceKind::human, 1.0, seed, -2.0 * kPi / 3.0);
        ++votes[features::detect_direction(a, cfg)];
    }
    int in_pair = votes[1] + votes[6];
    CHECK(in_pair >= 18);
}

TEST_CASE("array fingerprint profile hits its extremes before resampling") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.2, 5);
    const auto profile = features::sap_profile(a, cfg);
    REQUIRE(profile.size() == 100);
    CHECK(*std::min_element(profile.begin(), profile.end()) == 0.0);
    CHECK(*std::max_element(profile.begin(), profile.end()) == 1.0);

    const auto sap = features::f_sap(a, cfg);
    REQUIRE(sap.size() == 40);
    for (double v : sap) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("channel permutations do not move the symmetric features") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.2, 17);
    const auto sap = features::f_sap(a, cfg);
    const auto sdp = features::f_sdp(a, cfg);

    audio::MultiChannelAudio shuffled = a;
    std::swap(shuffled.channels[0], shuffled.channels[4]);
    std::swap(shuffled.channels[1], shuffled.channels[3]);
    std::swap(shuffled.channels[2], shuffled.channels[5]);

    CHECK(features::f_sap(shuffled, cfg) == sap);  // exact, not approximate
    CHECK(features::f_sdp(shuffled, cfg) == sdp);
}

TEST_CASE("uniform gain leaves the fingerprint shape untouched") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.2, 23);
    const auto sap = features::f_sap(a, cfg);

    audio::MultiChannelAudio scaled = a;
    for (auto& ch : scaled.channels)
        for (double& v : ch) v *= 0.37;
    const auto sap2 = features::f_sap(scaled, cfg);
    for (std::size_t i = 0; i < sap.size(); ++i)
        REQUIRE_THAT(sap2[i], WithinAbs(sap[i], 1e-9));
}

TEST_CASE("rotating the channel order shifts only the direction-dependent block") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.0, 29);
    const auto base = features::extract(a, cfg);

    audio::MultiChannelAudio rotated = a;
    std::rotate(rotated.channels.begin(), rotated.channels.begin() + 1, rotated.channels.end());
    const auto rot = features::extract(rotated, cfg);

    CHECK(rot.sap == base.sap);
    CHECK(rot.sdp == base.sdp);
    // pair (i-1, i) in the rotated order is pair (i, i+1) in the original
    const int n = 6;
    CHECK(rot.direction == ((base.direction - 2 + n) % n) + 1);
}

TEST_CASE("cepstral pair selection uses the antipodal channel") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.0, 31);

    const auto pair1 = features::f_lpc(a, cfg, 1);
    REQUIRE(pair1.size() == 32);
    const auto c1 = dsp::lpcc(a.channels[0], cfg.lpcc_order);
    const auto c4 = dsp::lpcc(a.channels[3], cfg.lpcc_order);
    CHECK(std::equal(pair1.begin(), pair1.begin() + 16, c1.begin()));
    CHECK(std::equal(pair1.begin() + 16, pair1.end(), c4.begin()));

    const auto pair4 = features::f_lpc(a, cfg, 4);
    CHECK(std::equal(pair4.begin(), pair4.begin() + 16, c4.begin()));
    CHECK(std::equal(pair4.begin() + 16, pair4.end(), c1.begin()));

    // odd channel counts round the half-turn down
    audio::MultiChannelAudio five = a;
    five.channels.resize(5);
    const auto pair_odd = features::f_lpc(five, cfg, 1);
    const auto c3 = dsp::lpcc(five.channels[2], cfg.lpcc_order);
    CHECK(std::equal(pair_odd.begin() + 16, pair_odd.end(), c3.begin()));

    CHECK_THROWS_AS(features::f_lpc(a, cfg, 0), std::invalid_argument);
    CHECK_THROWS_AS(features::f_lpc(a, cfg, 7), std::invalid_argument);
}

TEST_CASE("extract assembles the fixed layout deterministically") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.8, 37);
    const auto v = features::extract(a, cfg);
    CHECK(v.sap.size() == 40);
    CHECK(v.sdp.size() == 30);
    CHECK(v.lpc.size() == 32);
    const auto flat = v.flatten();
    REQUIRE(flat.size() == 102);
    CHECK(std::equal(flat.begin(), flat.begin() + 40, v.sap.begin()));
    CHECK(std::equal(flat.begin() + 70, flat.end(), v.lpc.begin()));

    const auto again = features::extract(a, cfg);
    CHECK(again.flatten() == flat);
    CHECK(again.direction == v.direction);
}

TEST_CASE("component failures name the failing feature") {
    features::FeatureConfig cfg;
    // long enough for nothing: 0.1 s cannot fill 20 time chunks
    const auto small = noise_audio(4, 4800, 3, false);
    CHECK_THROWS_WITH(features::f_sap(small, cfg),
                      Catch::Matchers::StartsWith("f_sap:"));
    CHECK_THROWS_WITH(features::f_sdp(small, cfg),
                      Catch::Matchers::StartsWith("f_sdp:"));

    auto silent = noise_audio(4, 48000, 3, false);
    for (double& v : silent.channels[2]) v = 0.0;
    CHECK_THROWS_WITH(features::f_sdp(silent, cfg),
                      Catch::Matchers::ContainsSubstring("zero channel strength"));
    CHECK_THROWS_WITH(features::f_lpc(silent, cfg, 3),
                      Catch::Matchers::StartsWith("f_lpc:"));

    audio::MultiChannelAudio mono = noise_audio(1, 48000, 3, false);
    CHECK_THROWS_AS(features::detect_direction(mono, cfg), std::invalid_argument);
}

TEST_CASE("fingerprints are stable across source distance") {
    features::FeatureConfig cfg;
    const std::vector<double> dists{0.6, 1.2, 1.8, 2.4};
    std::vector<std::vector<double>> saps;
    for (double d : dists)
        saps.push_back(features::f_sap(render_voice(synth::SourceKind::human, d, 101), cfg));
    for (std::size_t i = 0; i < saps.size(); ++i)
        for (std::size_t j = i + 1; j < saps.size(); ++j) {
            INFO("pair " << dists[i] << " / " << dists[j]);
            CHECK(cosine(saps[i], saps[j]) >= 0.95);
        }
}

TEST_CASE("live and replayed fingerprints separate in cosine similarity") {
    features::FeatureConfig cfg;
    const int per_class = 50;
    std::vector<std::vector<double>> human, device;
    for (int i = 0; i < per_class; ++i) {
        Rng rot(static_cast<std::uint64_t>(1000 + i));
        const double theta = rot.uniform(0.0, 2.0 * kPi);
        human.push_back(features::f_sap(
            render_voice(synth::SourceKind::human, 1.2, static_cast<std::uint64_t>(200 + i), theta),
            cfg));
        device.push_back(features::f_sap(
            render_voice(synth::SourceKind::device, 1.2, static_cast<std::uint64_t>(500 + i), theta),
            cfg));
    }
    double within = 0.0, cross = 0.0;
    int n_within = 0, n_cross = 0;
    for (int i = 0; i < per_class; ++i) {
        for (int j = i + 1; j < per_class; ++j) {
            within += cosine(human[static_cast<std::size_t>(i)], human[static_cast<std::size_t>(j)]);
            ++n_within;
        }
        for (int j = 0; j < per_class; ++j) {
            cross += cosine(human[static_cast<std::size_t>(i)], device[static_cast<std::size_t>(j)]);
            ++n_cross;
        }
    }
    within /= n_within;
    cross /= n_cross;
    INFO("within " << within << " cross " << cross);
    CHECK(within - cross >= 0.1);
}

TEST_CASE("feature CSV round-trips exactly") {
    features::FeatureConfig cfg;
    const auto a = render_voice(synth::SourceKind::human, 1.2, 41);
    const auto b = render_voice(synth::SourceKind::device, 1.2, 43);

    std::vector<features::FeatureRow> rows;
    rows.push_back({"a.wav", audio::Label::authentic, features::extract(a, cfg).flatten()});
    rows.push_back({"b.wav", audio::Label::spoof, features::extract(b, cfg).flatten()});

    const auto dir = fs::temp_directory_path() / ("arrayid_feat_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string path = (dir / "features.csv").string();
    features::save_features(rows, cfg, path);

    const auto loaded = features::load_features(path, cfg);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].path == "a.wav");
    CHECK(loaded[0].label == audio::Label::authentic);
    CHECK(loaded[1].label == audio::Label::spoof);
    CHECK(loaded[0].values == rows[0].values);  // shortest-round-trip formatting
    CHECK(loaded[1].values == rows[1].values);

    // a file written under a different recipe is refused up front
    features::FeatureConfig other = cfg;
    other.n_sap = 20;
    CHECK_THROWS_WITH(features::load_features(path, other),
                      Catch::Matchers::ContainsSubstring("configuration"));
    fs::remove_all(dir);
}

TEST_CASE("feature config hashes pin the recipe") {
    features::FeatureConfig cfg;
    CHECK(features::config_hash(cfg) == features::config_hash(features::FeatureConfig{}));
    features::FeatureConfig other = cfg;
    other.f_sdp_cutoff_hz = 1200.0;
    CHECK(features::config_hash(other) != features::config_hash(cfg));

    nlohmann::json j = cfg;
    const auto back = j.get<features::FeatureConfig>();
    CHECK(features::config_hash(back) == features::config_hash(cfg));

    nlohmann::json bad = {{"gird_rows", 10}};
    CHECK_THROWS_AS(bad.get<features::FeatureConfig>(), std::invalid_argument);

    features::FeatureConfig invalid;
    invalid.sdp_thresholds = {0.5, 0.3};
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}
