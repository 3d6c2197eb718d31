#pragma once

// Ranking metrics on scored observations: empirical CAP curves, Gini indices
// under explicit tie and weighting policies, Poisson deviance loss, and
// balance correction of predictions.
//
// Conventions, fixed so that golden values are stable:
//  - Curves are integrated as the exact area under the piecewise-linear
//    interpolation of the cumulative points anchored at (0,0).
//  - Score ties are detected by exact floating-point equality; no epsilon.
//    Ties in practice come from identical covariate combinations, which
//    produce identical predictions.
//  - BestWithinTies / WorstWithinTies order a tie block to maximize /
//    minimize the area under the curve. The area-extremal order sorts a
//    block by response per unit of x-axis weight; under count weighting this
//    is simply descending / ascending response.
//  - The reference curve in the Gini denominator ranks by response per unit
//    of x-axis weight, the best ordering any score vector can achieve, so
//    the Gini never exceeds 1 under either weighting.

#include <cstdint>
#include <optional>
#include <vector>

#include "driftmon/dataset.hpp"
#include "driftmon/errors.hpp"

namespace driftmon {

struct ScoredObservation {
    double response = 0.0;  // count-scale outcome, >= 0
    double weight = 1.0;    // x-axis weight: 1.0 (count) or exposure, > 0
    double score = 0.0;     // ranking key, finite
};

enum class WeightingMode { CountWeighting, ExposureWeighting };

struct TiePolicy {
    enum class Kind {
        RandomWithinTies,
        BestWithinTies,
        WorstWithinTies,
        AverageOfExtremes,
    };
    Kind kind = Kind::AverageOfExtremes;
    std::uint64_t seed = 0;  // used by RandomWithinTies only

    static TiePolicy best() { return {Kind::BestWithinTies, 0}; }
    static TiePolicy worst() { return {Kind::WorstWithinTies, 0}; }
    static TiePolicy average_of_extremes() { return {Kind::AverageOfExtremes, 0}; }
    static TiePolicy random(std::uint64_t seed) { return {Kind::RandomWithinTies, seed}; }
    const char* name() const;
};

enum class CapOrdering { Score, Response };

struct CapPoint {
    double x = 0.0;    // cumulative weight fraction
    double cap = 0.0;  // cumulative response fraction
};

struct CapCurve {
    std::vector<CapPoint> points;  // (0,0) first, (1,1) last, x strictly increasing
    WeightingMode weighting = WeightingMode::CountWeighting;

    double area() const;    // trapezoidal integral over [0,1]
    void validate() const;  // throws Error on an invariant violation
};

struct GiniResult {
    double value = 0.0;  // numerator_area / denominator_area, in [-1, 1]
    TiePolicy tie_policy;
    WeightingMode weighting = WeightingMode::CountWeighting;
    std::size_t n = 0;
    double numerator_area = 0.0;    // integral of the CAP curve minus 1/2
    double denominator_area = 0.0;  // integral of the best CAP curve minus 1/2
};

struct DevianceConfig {
    double dispersion = 1.0;  // phi > 0
};

struct CountObservation {
    double response = 0.0;         // claim count
    double predicted_count = 0.0;  // frequency x exposure, > 0
};

enum class ScoreKind { PredictedCount, PredictedFrequency };

// Turns a dataset with predictions into scored observations. The default
// ranking key is the predicted count (frequency x exposure) so predictions
// and observations live on the same scale; ranking by raw frequency is
// available for sensitivity analysis.
std::vector<ScoredObservation> score_dataset(const Dataset& d, WeightingMode weighting,
                                             ScoreKind score_kind = ScoreKind::PredictedCount);

// Empirical CAP: observations sorted descending by the ordering key, tie
// blocks ordered per tie_policy, points accumulated as (weight fraction,
// response fraction). AverageOfExtremes is not a curve ordering; callers
// needing it evaluate Best and Worst separately (see gini).
CapCurve empirical_cap(const std::vector<ScoredObservation>& obs, CapOrdering order_by,
                       const TiePolicy& tie_policy, WeightingMode weighting);

// Empirical Gini index: excess area of the CAP curve over the diagonal,
// normalized by the excess area of the best-ordering curve. AverageOfExtremes
// averages the Best and Worst runs (the two runs share the weighting and the
// denominator). Deterministic given the tie policy; RandomWithinTies is
// deterministic given its seed.
GiniResult gini(const std::vector<ScoredObservation>& obs, const TiePolicy& tie_policy,
                WeightingMode weighting);

// Mean Poisson unit deviance on the count scale, divided by the dispersion:
// (1/(n*phi)) * sum 2*(y*ln(y/m) - y + m), with the y = 0 term of y*ln(y/m)
// read as 0. Exposure is absorbed into the predicted count.
double poisson_deviance_loss(const std::vector<CountObservation>& obs,
                             const DevianceConfig& cfg = {});

// Replaces each prediction by the observed frequency of its prediction
// cohort: grouped by exact predicted value when `bins` is empty, otherwise
// by `bins` exposure-quantile bins over the prediction rank (ties in the
// prediction never straddle a bin; bins > n clamps to n).
Dataset balance_correct(const Dataset& d, std::optional<int> bins = std::nullopt);

struct CalibrationBin {
    int bin = 0;                      // 1-based
    double exposure = 0.0;            // total exposure in the bin
    double observed_frequency = 0.0;  // sum response / sum exposure
    double predicted_frequency = 0.0; // exposure-weighted mean prediction
};

// Binned calibration diagnostic over exposure-quantile bins of the
// prediction rank; bins > n clamps to n.
std::vector<CalibrationBin> calibration_table(const Dataset& d, int bins);

}  // namespace driftmon
