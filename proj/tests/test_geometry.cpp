#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "arrayid/geometry.hpp"
#include "oracles.hpp"

using arrayid::geometry::ArrayGeometry;
using arrayid::geometry::mic_distances;
using arrayid::geometry::sigma_d;
using arrayid::geometry::sigma_sweep;
using arrayid::geometry::SweepSpec;
using arrayid::geometry::sweep_to_csv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("two-mic distances at zero rotation are L -/+ r") {
    ArrayGeometry g{2, 0.05, 0.0};
    const auto d = mic_distances(g, 1.0);
    REQUIRE(d.size() == 2);
    // mic 1 sits on the source axis (angle 0), mic 2 on the far side
    CHECK_THAT(d[0], WithinAbs(0.95, 1e-12));
    CHECK_THAT(d[1], WithinAbs(1.05, 1e-12));
}

TEST_CASE("two-mic distances at rotation pi/2 are equal") {
    ArrayGeometry g{2, 0.05, kPi / 2.0};
    const auto d = mic_distances(g, 1.7);
    CHECK_THAT(d[0], WithinAbs(d[1], 1e-12));
    // both mics lie off-axis at the same offset
    CHECK_THAT(d[0], WithinAbs(std::sqrt(1.7 * 1.7 + 0.05 * 0.05), 1e-12));
}

TEST_CASE("closed-form distances agree with coordinate geometry") {
    for (int n : {2, 3, 4, 6, 8, 12}) {
        for (double r : {0.02, 0.05, 0.11}) {
            for (double l : {0.3, 1.0, 2.5}) {
                for (double theta : {0.0, 0.3, 1.1, 2.9}) {
                    ArrayGeometry g{n, r, theta};
                    const auto d = mic_distances(g, l);
                    const auto ref = oracle::mic_distances_coords(n, r, l, theta);
                    REQUIRE(d.size() == ref.size());
                    for (std::size_t k = 0; k < d.size(); ++k)
                        CHECK_THAT(d[k], WithinAbs(ref[k], 1e-12));
                }
            }
        }
    }
}

TEST_CASE("sigma_d for the two-mic axial case") {
    // sample std of {0.95, 1.05} = sqrt(0.005)
    ArrayGeometry g{2, 0.05, 0.0};
    CHECK_THAT(sigma_d(g, 1.0), WithinAbs(0.07071067811865475, 1e-12));
}

TEST_CASE("sigma_d for six mics at one metre") {
    ArrayGeometry g{6, 0.05, 0.0};
    const double s = sigma_d(g, 1.0);
    CHECK_THAT(s, WithinAbs(0.03872077116122546, 1e-12));
    const auto ref = oracle::mic_distances_coords(6, 0.05, 1.0, 0.0);
    CHECK_THAT(s, WithinAbs(oracle::sample_std_naive(ref), 1e-14));
}

TEST_CASE("sigma_d is periodic in rotation with period 2*pi/N") {
    for (int n : {3, 4, 6, 8}) {
        for (double theta : {0.0, 0.4, 1.3}) {
            ArrayGeometry a{n, 0.05, theta};
            ArrayGeometry b{n, 0.05, theta + 2.0 * kPi / n};
            CHECK_THAT(sigma_d(a, 1.4), WithinAbs(sigma_d(b, 1.4), 1e-12));
        }
    }
}

TEST_CASE("sigma_d converges in the far field") {
    // d_k -> L - r*cos(angle_k); for N >= 3 the sample std of the cosines is
    // sqrt(N / (2*(N-1))) regardless of rotation.
    for (int n : {3, 4, 6, 8}) {
        ArrayGeometry g{n, 0.05, 0.7};
        const double expected = 0.05 * std::sqrt(n / (2.0 * (n - 1.0)));
        CHECK_THAT(sigma_d(g, 1.0e6), WithinRel(expected, 1e-6));
    }
    // N = 2 depends on rotation: sample std of {cos t, -cos t} is sqrt(2)*|cos t|
    ArrayGeometry g2{2, 0.05, 0.0};
    CHECK_THAT(sigma_d(g2, 1.0e6), WithinRel(0.05 * std::sqrt(2.0), 1e-6));
}

TEST_CASE("sweep summaries: near-constant sigma_d for N >= 4") {
    SweepSpec spec;  // N in {2,4,6,8}, L in [1,3], theta in [0,90deg], 50x50
    const auto result = sigma_sweep(spec);

    REQUIRE(result.rows.size() == 4u * 50u * 50u);
    REQUIRE(result.summary.size() == 4);

    CHECK(result.summary[0].n_mics == 2);
    CHECK_THAT(result.summary[0].max, WithinAbs(0.070711, 1e-4));
    CHECK(result.summary[0].range > 0.01);  // two mics are strongly pose-dependent

    for (std::size_t i = 1; i < 4; ++i) {
        INFO("N = " << result.summary[i].n_mics);
        CHECK(result.summary[i].range <= 1e-4);
        CHECK(result.summary[i].min > 0.0);
    }
    // measured ranges for the default sweep, pinned loosely
    CHECK_THAT(result.summary[1].range, WithinAbs(3.19e-5, 5e-6));   // N=4
    CHECK(result.summary[2].range < 1e-5);                          // N=6
    CHECK(result.summary[3].range < 1e-5);                          // N=8
}

TEST_CASE("sweep rows cover the inclusive grid") {
    SweepSpec spec;
    spec.n_mics_list = {4};
    spec.l_steps = 3;
    spec.theta_steps = 2;
    const auto result = sigma_sweep(spec);
    REQUIRE(result.rows.size() == 6);
    CHECK_THAT(result.rows.front().l_m, WithinAbs(spec.l_min_m, 1e-15));
    CHECK_THAT(result.rows.back().l_m, WithinAbs(spec.l_max_m, 1e-15));
    CHECK_THAT(result.rows.front().theta_deg, WithinAbs(spec.theta_min_deg, 1e-15));
    CHECK_THAT(result.rows.back().theta_deg, WithinAbs(spec.theta_max_deg, 1e-15));
}

TEST_CASE("sweep CSV has the documented header and shape") {
    SweepSpec spec;
    spec.n_mics_list = {2, 6};
    spec.l_steps = 4;
    spec.theta_steps = 5;
    const auto result = sigma_sweep(spec);
    const std::string csv = sweep_to_csv(result);

    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "N,L_m,theta_deg,sigma_d_m");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2u * 4u * 5u);
}

TEST_CASE("geometry rejects invalid parameters") {
    CHECK_THROWS_AS(mic_distances({1, 0.05, 0.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mic_distances({6, 0.0, 0.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mic_distances({6, -0.05, 0.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mic_distances({6, 0.05, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(mic_distances({6, 0.05, 0.0}, -1.0), std::invalid_argument);

    SweepSpec bad;
    bad.l_min_m = 0.01;  // inside the array radius
    CHECK_THROWS_AS(sigma_sweep(bad), std::invalid_argument);
    SweepSpec bad2;
    bad2.l_steps = 0;
    CHECK_THROWS_AS(sigma_sweep(bad2), std::invalid_argument);
    SweepSpec bad3;
    bad3.n_mics_list = {};
    CHECK_THROWS_AS(sigma_sweep(bad3), std::invalid_argument);
}
