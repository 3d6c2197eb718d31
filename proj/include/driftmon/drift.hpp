#pragma once

// Synthetic portfolio generation and controlled real-concept-drift injection
// by redistributing claims between record groups. The redistribution keeps
// the portfolio claim total constant and never touches exposures, covariates
// or predictions, so only the observed group frequencies move.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftmon/dataset.hpp"

namespace driftmon {

// Selects records by a categorical value set or a numeric half-open
// interval [lo, hi) on one covariate.
struct GroupPredicate {
    std::string covariate;
    std::vector<std::string> values;  // categorical match, any of
    std::optional<double> lo, hi;     // numeric match, lo <= x < hi

    bool matches(const Dataset& d, std::size_t record_index) const;
    std::vector<std::size_t> select(const Dataset& d) const;  // error when empty
};

struct DriftScenario {
    GroupPredicate source;
    GroupPredicate target;
    std::int64_t transfer_count = 0;
    std::uint64_t seed = 0;

    // Parses "key = value" lines: source_covariate, source_values |
    // source_range, target_covariate, target_values | target_range,
    // transfer_count, seed.
    static DriftScenario from_config_file(const std::string& path);
};

// Moves transfer_count claims from the source group to the target group:
// decrements are applied to distinct source records sampled uniformly
// without replacement among records with at least one claim; increments to
// distinct target records sampled uniformly without replacement regardless
// of their claim count. For a fixed seed and dataset, the sampled records
// for a smaller transfer_count are a prefix of those for a larger one.
Dataset inject_drift(const Dataset& d, const DriftScenario& scenario);

struct SyntheticGroup {
    std::string label;       // value of the categorical "group" covariate
    double frequency = 0.0;  // true claims per unit exposure, > 0
    double share = 0.0;      // sampling proportion, > 0 (normalized)
};

struct SyntheticSpec {
    std::vector<SyntheticGroup> groups;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double exposure_min = 0.05;  // exposures uniform on (exposure_min, exposure_max]
    double exposure_max = 1.0;
    std::string group_covariate = "group";
    // Frequency-neutral continuous covariate: keeps covariate combinations
    // near-unique (as in real portfolios) so preaggregation does not collapse
    // the dataset, and gives drift predicates a numeric axis.
    std::string age_covariate = "age";
    double age_min = 18.0;
    double age_max = 70.0;

    // Parses "key = value" lines: n, seed, exposure_min, exposure_max,
    // age_min, age_max, and one "group = <label> <frequency> <share>" line
    // per group.
    static SyntheticSpec from_config_file(const std::string& path);
};

// Draws records per group with uniform exposures, a uniform age covariate,
// and Poisson claim counts with mean frequency x exposure; the true group
// frequency is retained as the oracle prediction.
Dataset generate_portfolio(const SyntheticSpec& spec);

enum class DriftKind { Sudden, Gradual, Incremental };

// Per-period datasets under a drift schedule over `periods` periods:
//  - Sudden: the full transfer appears in the final period only.
//  - Incremental: period k carries a cumulative transfer of
//    round(total * k / periods), applied on top of the previous period.
//  - Gradual: each period mixes the base dataset with the fully drifted one;
//    a decrement/increment pair is active with probability k / periods, so
//    every period conserves the claim total exactly.
std::vector<std::pair<std::string, Dataset>> drift_schedule(
    const Dataset& d0, DriftKind kind, int periods, std::int64_t total_transfer,
    const GroupPredicate& source, const GroupPredicate& target, std::uint64_t seed);

}  // namespace driftmon
