#pragma once

// Brute-force reference for the Gini index on tiny datasets. Everything is
// derived from explicit permutation enumeration plus trapezoidal integration
// of the cumulative polygon, with no shared machinery with the library:
//  - numerator extremes: max/min polygon area over the permutations whose
//    score sequence is non-increasing,
//  - denominator: max polygon area over all permutations (the best curve
//    any ordering can achieve).

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "driftmon/metrics.hpp"

namespace oracle {

inline double polygon_area(const std::vector<driftmon::ScoredObservation>& obs,
                           const std::vector<std::size_t>& order, bool exposure_weighted) {
    double total_w = 0.0, total_y = 0.0;
    for (const auto& o : obs) {
        total_w += exposure_weighted ? o.weight : 1.0;
        total_y += o.response;
    }
    double area = 0.0, cum_y = 0.0;
    for (std::size_t i : order) {
        const double run = (exposure_weighted ? obs[i].weight : 1.0) / total_w;
        const double y0 = cum_y / total_y;
        cum_y += obs[i].response;
        const double y1 = cum_y / total_y;
        area += run * 0.5 * (y0 + y1);
    }
    return area;
}

struct BruteForceGini {
    double best = 0.0;
    double worst = 0.0;
    double average = 0.0;
    double denominator_area = 0.0;
};

inline BruteForceGini brute_force_gini(const std::vector<driftmon::ScoredObservation>& obs,
                                       driftmon::WeightingMode weighting) {
    const bool exposure_weighted = weighting == driftmon::WeightingMode::ExposureWeighting;
    std::vector<std::size_t> perm(obs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end());

    double numerator_max = -std::numeric_limits<double>::infinity();
    double numerator_min = std::numeric_limits<double>::infinity();
    double denominator_max = -std::numeric_limits<double>::infinity();
    do {
        const double area = polygon_area(obs, perm, exposure_weighted);
        denominator_max = std::max(denominator_max, area);
        bool respects_scores = true;
        for (std::size_t k = 1; k < perm.size(); ++k) {
            if (obs[perm[k - 1]].score < obs[perm[k]].score) {
                respects_scores = false;
                break;
            }
        }
        if (respects_scores) {
            numerator_max = std::max(numerator_max, area);
            numerator_min = std::min(numerator_min, area);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    BruteForceGini result;
    result.denominator_area = denominator_max - 0.5;
    result.best = (numerator_max - 0.5) / result.denominator_area;
    result.worst = (numerator_min - 0.5) / result.denominator_area;
    result.average = 0.5 * (result.best + result.worst);
    return result;
}

}  // namespace oracle
