#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "arrayid/dsp.hpp"
#include "arrayid/util.hpp"

namespace arrayid::geometry {

// Uniform circular microphone array: mic k (1-based) sits at angle
// rotation_rad + 2*pi*(k-1)/n_mics on a circle of radius radius_m; the
// source lies in the array plane at distance L from the center, at angle 0.
struct ArrayGeometry {
    int n_mics = 6;
    double radius_m = 0.05;
    double rotation_rad = 0.0;

    void validate() const {
        if (n_mics < 2) throw std::invalid_argument("geometry: need at least 2 mics");
        if (!(radius_m > 0.0)) throw std::invalid_argument("geometry: radius must be positive");
    }
};

// Law-of-cosines distance from the source to every mic:
// d_k = r * sqrt(1 + (L/r)^2 - 2*(L/r)*cos(rotation + 2*pi*(k-1)/N)).
inline std::vector<double> mic_distances(const ArrayGeometry& geom, double source_distance_m) {
    geom.validate();
    if (!(source_distance_m > 0.0))
        throw std::invalid_argument("mic_distances: source distance must be positive");
    const double q = source_distance_m / geom.radius_m;
    std::vector<double> d(static_cast<std::size_t>(geom.n_mics));
    for (int k = 1; k <= geom.n_mics; ++k) {
        const double ang = geom.rotation_rad +
                           2.0 * dsp::kPi * static_cast<double>(k - 1) /
                               static_cast<double>(geom.n_mics);
        d[static_cast<std::size_t>(k - 1)] =
            geom.radius_m * std::sqrt(1.0 + q * q - 2.0 * q * std::cos(ang));
    }
    return d;
}

// Sample standard deviation (divisor N-1) of the source-to-mic distances.
// Near-constant across placements for N >= 4 — the geometric fact the array
// fingerprint relies on.
inline double sigma_d(const ArrayGeometry& geom, double source_distance_m) {
    return dsp::sample_std(mic_distances(geom, source_distance_m));
}

struct SweepSpec {
    std::vector<int> n_mics_list{2, 4, 6, 8};
    double radius_m = 0.05;
    double l_min_m = 1.0;
    double l_max_m = 3.0;
    double theta_min_deg = 0.0;
    double theta_max_deg = 90.0;
    int l_steps = 50;
    int theta_steps = 50;

    void validate() const {
        if (n_mics_list.empty()) throw std::invalid_argument("sweep: empty mic list");
        for (int n : n_mics_list)
            if (n < 2) throw std::invalid_argument("sweep: mic counts must be >= 2");
        if (!(radius_m > 0.0)) throw std::invalid_argument("sweep: radius must be positive");
        if (l_steps < 1 || theta_steps < 1)
            throw std::invalid_argument("sweep: step counts must be >= 1");
        if (!(l_min_m <= l_max_m) || !(theta_min_deg <= theta_max_deg))
            throw std::invalid_argument("sweep: empty range");
        if (!(l_min_m > radius_m))
            throw std::invalid_argument("sweep: distances must exceed the radius");
    }
};

struct SweepRow {
    int n_mics;
    double l_m;
    double theta_deg;
    double sigma_d_m;
};

struct SweepSummary {
    int n_mics;
    double min;
    double mean;
    double max;
    double range;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
};

// Grid evaluation of sigma_d over L x theta per mic count (endpoints included).
inline SweepResult sigma_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepResult out;
    for (int n : spec.n_mics_list) {
        double mn = 0.0, mx = 0.0, sum = 0.0;
        bool first = true;
        for (int li = 0; li < spec.l_steps; ++li) {
            const double l = spec.l_steps == 1
                                 ? spec.l_min_m
                                 : spec.l_min_m + (spec.l_max_m - spec.l_min_m) *
                                                      static_cast<double>(li) /
                                                      static_cast<double>(spec.l_steps - 1);
            for (int ti = 0; ti < spec.theta_steps; ++ti) {
                const double deg =
                    spec.theta_steps == 1
                        ? spec.theta_min_deg
                        : spec.theta_min_deg + (spec.theta_max_deg - spec.theta_min_deg) *
                                                   static_cast<double>(ti) /
                                                   static_cast<double>(spec.theta_steps - 1);
                ArrayGeometry g{n, spec.radius_m, deg * dsp::kPi / 180.0};
                const double s = sigma_d(g, l);
                out.rows.push_back({n, l, deg, s});
                if (first) {
                    mn = mx = s;
                    first = false;
                } else {
                    mn = std::min(mn, s);
                    mx = std::max(mx, s);
                }
                sum += s;
            }
        }
        const double count = static_cast<double>(spec.l_steps) *
                             static_cast<double>(spec.theta_steps);
        out.summary.push_back({n, mn, sum / count, mx, mx - mn});
    }
    return out;
}

inline std::string sweep_to_csv(const SweepResult& result) {
    std::string csv = "N,L_m,theta_deg,sigma_d_m\n";
    for (const auto& r : result.rows) {
        csv += std::to_string(r.n_mics);
        csv += ',';
        csv += format_double(r.l_m);
        csv += ',';
        csv += format_double(r.theta_deg);
        csv += ',';
        csv += format_double(r.sigma_d_m);
        csv += '\n';
    }
    return csv;
}

}  // namespace arrayid::geometry
