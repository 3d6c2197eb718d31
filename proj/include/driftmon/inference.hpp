#pragma once

// Bootstrap estimation of the holdout Gini null distribution and the drift
// hypothesis test on top of it. Replicate b (1-based) resamples the
// (response, score, weight) tuples with replacement, drawing its n indices
// via next_below(n) from rng::Xoshiro256pp::for_stream(seed, b, attempt)
// where attempt counts degenerate redraws from 0. Replicates depend only on
// (seed, b, attempt), so results are bit-identical for any thread count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftmon/dataset.hpp"
#include "driftmon/metrics.hpp"

namespace driftmon {

struct BootstrapConfig {
    std::size_t replicates = 10000;  // B >= 2
    std::uint64_t seed = 0;
    TiePolicy tie_policy = TiePolicy::average_of_extremes();
    WeightingMode weighting = WeightingMode::CountWeighting;
    bool keep_replicates = false;
    int threads = 0;  // 0 = hardware concurrency; never affects the values
};

struct NullDistribution {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation over replicates, divisor B-1
    std::size_t replicates = 0;
    std::size_t n = 0;
    std::vector<double> replicate_values;  // retained when keep_replicates
};

enum class TestSidedness { TwoSided, OneSidedDeterioration };

struct DriftTestResult {
    double gini_new = 0.0;
    double z = 0.0;
    double p_two_sided = 1.0;
    double p_one_sided_deterioration = 1.0;
    double alpha = 0.0;
    TestSidedness sidedness = TestSidedness::TwoSided;
    bool reject = false;
};

struct MonitoringReport {
    std::string old_provenance;
    std::string new_provenance;
    std::size_t n_old = 0;  // aggregated record counts entering the statistics
    std::size_t n_new = 0;
    BootstrapConfig config;
    NullDistribution null_distribution;
    GiniResult gini_new;
    DriftTestResult test;
    std::vector<std::string> warnings;

    std::string to_json() const;  // versioned report document
    static MonitoringReport from_json(const std::string& text);
};

// Gini of each of B with-replacement resamples of obs; returns their sample
// mean and standard deviation. A degenerate replicate (all responses equal)
// is redrawn from substreams up to 100 times before DegenerateResamples.
NullDistribution bootstrap_null(const std::vector<ScoredObservation>& obs,
                                const BootstrapConfig& cfg);

// z = (gini_new - null.mean) / null.sd with the normal CDF p-values; the
// reject flag follows the requested sidedness at level alpha.
DriftTestResult drift_test(double gini_new, const NullDistribution& null_dist, double alpha,
                           TestSidedness sidedness = TestSidedness::TwoSided);

// Full pipeline: preaggregate both datasets over all covariates, score them,
// bootstrap the null on the old holdout, compute the Gini on the new data
// with the same policies, and run the test. The new data must carry at least
// as many aggregated records as the old holdout unless allow_smaller, which
// stamps a warning instead.
MonitoringReport monitor(const Dataset& old_holdout, const Dataset& new_data,
                         const BootstrapConfig& cfg, double alpha,
                         TestSidedness sidedness = TestSidedness::TwoSided,
                         bool allow_smaller = false);

// monitor() once per period against the same new data; the bootstrap seed
// for period k is derived from (cfg.seed, k). p-values are reported raw,
// without a multiplicity correction (flagged in each report's warnings).
std::vector<std::pair<std::string, MonitoringReport>> per_period_monitor(
    const std::vector<std::pair<std::string, Dataset>>& old_holdouts, const Dataset& new_data,
    const BootstrapConfig& cfg, double alpha,
    TestSidedness sidedness = TestSidedness::TwoSided, bool allow_smaller = false);

}  // namespace driftmon
