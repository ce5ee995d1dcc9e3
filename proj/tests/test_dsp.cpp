#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "arrayid/dsp.hpp"
#include "arrayid/rng.hpp"
#include "oracles.hpp"

using arrayid::Rng;
namespace dsp = arrayid::dsp;

namespace {

std::vector<double> random_signal(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("fft matches direct DFT on random signals") {
    for (std::size_t n : {16u, 64u, 256u, 1024u}) {
        const auto x = random_signal(100 + n, n);
        const auto fast = dsp::rfft(x, n);
        const auto slow = oracle::dft_direct(x, n);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) {
            CHECK(std::abs(fast[k] - slow[k]) < 1e-9 * static_cast<double>(n));
        }
    }
}

TEST_CASE("fft rejects non-power-of-two lengths") {
    std::vector<std::complex<double>> x(12, {1.0, 0.0});
    CHECK_THROWS_AS(dsp::fft_inplace(x), std::invalid_argument);
}

TEST_CASE("irfft inverts rfft") {
    const auto x = random_signal(7, 512);
    const auto spec = dsp::rfft(x, 512);
    const auto back = dsp::irfft(spec, 512);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("zero-padded rfft matches direct DFT") {
    const auto x = random_signal(9, 300);
    const auto fast = dsp::rfft(x, 1024);
    const auto slow = oracle::dft_direct(x, 1024);
    for (std::size_t k = 0; k < fast.size(); ++k)
        CHECK(std::abs(fast[k] - slow[k]) < 1e-8);
}

TEST_CASE("stft shape for a 48000-sample zero signal") {
    std::vector<double> zeros(48000, 0.0);
    const auto spec = dsp::stft(zeros, dsp::StftConfig{}, 48000.0);
    CHECK(spec.rows() == 2049);       // 4096/2 + 1 bins
    CHECK(spec.cols() == 159);        // floor((48000-1024)/296) + 1 frames
    CHECK(spec.frame_hop == 296);
    CHECK(spec.bin_hz == Catch::Approx(48000.0 / 4096.0));
    for (double m : spec.magnitudes.a) REQUIRE(m == 0.0);
}

TEST_CASE("stft of a pure 1 kHz tone peaks at bin 85") {
    std::vector<double> x(48000);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * dsp::kPi * 1000.0 * static_cast<double>(i) / 48000.0);
    const auto spec = dsp::stft(x, dsp::StftConfig{}, 48000.0);
    for (std::size_t f = 0; f < spec.cols(); ++f) {
        std::size_t argmax = 0;
        for (std::size_t b = 1; b < spec.rows(); ++b)
            if (spec.magnitudes(b, f) > spec.magnitudes(argmax, f)) argmax = b;
        REQUIRE(argmax == 85);  // round(1000 * 4096 / 48000)
    }
}

TEST_CASE("single stft frame equals windowed direct DFT") {
    const auto x = random_signal(11, 1024);
    const auto spec = dsp::stft(x, dsp::StftConfig{}, 48000.0);
    REQUIRE(spec.cols() == 1);
    const auto w = dsp::hann_symmetric(1024);
    std::vector<double> wx(1024);
    for (std::size_t i = 0; i < 1024; ++i) wx[i] = x[i] * w[i];
    const auto ref = oracle::dft_direct(wx, 4096);
    for (std::size_t b = 0; b < spec.rows(); ++b)
        CHECK(spec.magnitudes(b, 0) == Catch::Approx(std::abs(ref[b])).margin(1e-8));
}

TEST_CASE("stft scales linearly with input gain") {
    const auto x = random_signal(13, 4000);
    std::vector<double> sx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sx[i] = 2.7 * x[i];
    const auto a = dsp::stft(x, dsp::StftConfig{}, 48000.0);
    const auto b = dsp::stft(sx, dsp::StftConfig{}, 48000.0);
    for (std::size_t i = 0; i < a.magnitudes.a.size(); ++i)
        CHECK(b.magnitudes.a[i] == Catch::Approx(2.7 * a.magnitudes.a[i]).margin(1e-9));
}

TEST_CASE("stft rejects too-short signals") {
    std::vector<double> x(1023, 0.0);
    CHECK_THROWS_AS(dsp::stft(x, dsp::StftConfig{}, 48000.0), std::invalid_argument);
}

TEST_CASE("highpass kills DC") {
    std::vector<double> x(48000, 1.0);
    const auto y = dsp::highpass(x, 100.0, 48000.0);
    REQUIRE(y.size() == x.size());
    double worst = 0.0;
    for (std::size_t i = 4800; i < y.size(); ++i) worst = std::max(worst, std::fabs(y[i]));
    CHECK(worst < 1e-3);
}

TEST_CASE("highpass passes 10 kHz nearly unchanged") {
    std::vector<double> x(48000);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * dsp::kPi * 10000.0 * static_cast<double>(i) / 48000.0);
    const auto y = dsp::highpass(x, 100.0, 48000.0);
    double peak = 0.0;
    for (std::size_t i = 24000; i < y.size(); ++i) peak = std::max(peak, std::fabs(y[i]));
    CHECK(std::fabs(peak - 1.0) < 0.01);
}

TEST_CASE("highpass of zero is zero and the filter is linear") {
    std::vector<double> zeros(1000, 0.0);
    for (double v : dsp::highpass(zeros, 100.0, 48000.0)) REQUIRE(v == 0.0);

    const auto a = random_signal(17, 1000);
    const auto b = random_signal(19, 1000);
    std::vector<double> ab(1000);
    for (std::size_t i = 0; i < 1000; ++i) ab[i] = a[i] + b[i];
    const auto ya = dsp::highpass(a, 100.0, 48000.0);
    const auto yb = dsp::highpass(b, 100.0, 48000.0);
    const auto yab = dsp::highpass(ab, 100.0, 48000.0);
    for (std::size_t i = 0; i < 1000; ++i)
        CHECK(yab[i] == Catch::Approx(ya[i] + yb[i]).margin(1e-9));
}

TEST_CASE("highpass validates the cutoff") {
    std::vector<double> x(10, 0.0);
    CHECK_THROWS_AS(dsp::highpass(x, 0.0, 48000.0), std::invalid_argument);
    CHECK_THROWS_AS(dsp::highpass(x, 24000.0, 48000.0), std::invalid_argument);
}

namespace {

std::vector<double> ar1_signal(std::uint64_t seed, std::size_t n, double coef) {
    Rng rng(seed);
    std::vector<double> x(n, 0.0);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        prev = coef * prev + rng.normal();
        x[i] = prev;
    }
    return x;
}

}  // namespace

TEST_CASE("lpc recovers an AR(1) process") {
    const auto x = ar1_signal(23, 100000, 0.9);
    const auto a1 = dsp::lpc(x, 1);
    REQUIRE(a1.size() == 2);
    CHECK(a1[0] == 1.0);
    CHECK(a1[1] == Catch::Approx(-0.9).margin(0.02));

    const auto a2 = dsp::lpc(x, 2);
    CHECK(a2[2] == Catch::Approx(0.0).margin(0.02));
}

TEST_CASE("lpc on white noise has near-zero coefficients") {
    Rng rng(29);
    std::vector<double> x(100000);
    for (auto& v : x) v = rng.normal();
    const auto a = dsp::lpc(x, 8);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(std::fabs(a[i]) < 0.05);
}

TEST_CASE("lpc matches the normal-equations oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = ar1_signal(300 + seed, 4000, 0.7);
        const auto fast = dsp::lpc(x, 12);
        const auto slow = oracle::lpc_normal_equations(x, 12);
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == Catch::Approx(slow[i]).margin(1e-8));
    }
}

TEST_CASE("lpc error cases") {
    std::vector<double> zeros(100, 0.0);
    CHECK_THROWS_AS(dsp::lpc(zeros, 4), std::runtime_error);
    std::vector<double> shorty(5, 1.0);
    CHECK_THROWS_AS(dsp::lpc(shorty, 5), std::invalid_argument);
    CHECK_THROWS_AS(dsp::lpc(shorty, 0), std::invalid_argument);
}

TEST_CASE("lpcc leading coefficient and base case") {
    const auto x = ar1_signal(31, 5000, 0.8);
    const auto c = dsp::lpcc(x, 15);
    REQUIRE(c.size() == 16);
    CHECK(c[0] == std::log(15.0));
    CHECK(c[0] == Catch::Approx(2.70805).margin(1e-5));
    const auto a = dsp::lpc(x, 15);
    CHECK(c[1] == Catch::Approx(-a[1]).margin(1e-12));
}

TEST_CASE("lpcc matches the direct-recursion oracle on 100 seeded signals") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto x = ar1_signal(1000 + seed, 2000, 0.6);
        const auto mine = dsp::lpcc(x, 15);
        const auto a = oracle::lpc_normal_equations(x, 15);
        const auto ref = oracle::lpcc_direct(a, 15);
        for (std::size_t i = 0; i < mine.size(); ++i) {
            const double scale = std::max(1.0, std::fabs(ref[i]));
            REQUIRE(std::fabs(mine[i] - ref[i]) / scale < 1e-9);
        }
    }
}

TEST_CASE("lpcc is invariant to input scaling") {
    const auto x = ar1_signal(37, 3000, 0.85);
    std::vector<double> sx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sx[i] = 2.7 * x[i];
    const auto c1 = dsp::lpcc(x, 15);
    const auto c2 = dsp::lpcc(sx, 15);
    for (std::size_t i = 0; i < c1.size(); ++i)
        CHECK(c1[i] == Catch::Approx(c2[i]).margin(1e-9));
}

TEST_CASE("moving_average handles edges by truncation") {
    const std::vector<double> impulse{0.0, 0.0, 1.0, 0.0, 0.0};
    const auto out = dsp::moving_average(impulse, 5);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == Catch::Approx(1.0 / 3.0));
    CHECK(out[1] == Catch::Approx(1.0 / 4.0));
    CHECK(out[2] == Catch::Approx(1.0 / 5.0));
    CHECK(out[3] == Catch::Approx(1.0 / 4.0));
    CHECK(out[4] == Catch::Approx(1.0 / 3.0));

    const std::vector<double> c(7, 3.25);
    for (double v : dsp::moving_average(c, 5)) CHECK(v == Catch::Approx(3.25));

    const auto x = random_signal(41, 9);
    const auto id = dsp::moving_average(x, 1);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(id[i] == x[i]);

    CHECK_THROWS_AS(dsp::moving_average(x, 4), std::invalid_argument);
    CHECK_THROWS_AS(dsp::moving_average(x, 11), std::invalid_argument);
}

TEST_CASE("resample_linear basics") {
    const std::vector<double> ramp{0.0, 1.0};
    const auto up = dsp::resample_linear(ramp, 5);
    const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
    REQUIRE(up.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(up[i] == Catch::Approx(expect[i]));

    const std::vector<double> c(11, -2.5);
    for (double v : dsp::resample_linear(c, 4)) CHECK(v == Catch::Approx(-2.5));

    const auto x = random_signal(43, 17);
    const auto same = dsp::resample_linear(x, 17);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same[i] == Catch::Approx(x[i]).margin(1e-12));

    // Output stays within the input's range.
    const auto y = dsp::resample_linear(x, 50);
    const double mn = *std::min_element(x.begin(), x.end());
    const double mx = *std::max_element(x.begin(), x.end());
    for (double v : y) {
        CHECK(v >= mn - 1e-12);
        CHECK(v <= mx + 1e-12);
    }

    CHECK_THROWS_AS(dsp::resample_linear(ramp, 1), std::invalid_argument);
    CHECK_THROWS_AS(dsp::resample_linear(std::vector<double>{1.0}, 5), std::invalid_argument);
}

TEST_CASE("minmax_normalize maps to [0,1] and handles constants") {
    const std::vector<double> v{2.0, 4.0, 3.0};
    const auto out = dsp::minmax_normalize(v);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 1.0);
    CHECK(out[2] == Catch::Approx(0.5));

    const std::vector<double> c(5, 7.0);
    for (double x : dsp::minmax_normalize(c)) CHECK(x == 0.0);
}

TEST_CASE("sample_std matches the naive oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = random_signal(50 + seed, 37);
        CHECK(dsp::sample_std(x) == Catch::Approx(oracle::sample_std_naive(x)).margin(1e-12));
    }
    CHECK_THROWS_AS(dsp::sample_std(std::vector<double>{1.0}), std::invalid_argument);
}
