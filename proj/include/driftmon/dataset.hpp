#pragma once

// Tabular policy datasets: one record per (covariates, exposure, claim count)
// tuple, with an optional model prediction expressed as a claim frequency per
// unit of exposure. Datasets are immutable after construction; every
// operation returns a new dataset.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "driftmon/errors.hpp"

namespace driftmon {

enum class CovariateKind { Categorical, Numeric };

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
};

// Categorical values are level strings, numeric values are doubles.
using CovariateValue = std::variant<std::string, double>;

std::string covariate_value_to_string(const CovariateValue& v);

struct PolicyRecord {
    std::vector<CovariateValue> covariates;  // aligned with Dataset::schema
    double exposure = 0.0;                   // time at risk, > 0
    std::int64_t response = 0;               // claim count, >= 0
    std::optional<double> prediction;        // expected frequency per unit exposure
};

struct Dataset {
    std::vector<CovariateSpec> schema;
    std::vector<PolicyRecord> records;
    std::string provenance;

    std::size_t size() const { return records.size(); }
    bool has_predictions() const;
    int covariate_index(const std::string& name) const;  // -1 when absent

    // Compensated left-to-right sums over the stored record order.
    double total_exposure() const;
    std::int64_t total_response() const;

    // Enforces the type invariants; throws Error with the offending row.
    void validate() const;
};

struct AggregationKey {
    std::vector<std::string> key_columns;  // nonempty, unique, subset of schema
};

AggregationKey all_covariates_key(const Dataset& d);

// Collapses records that share a key tuple: exposure and response are summed,
// the prediction becomes the exposure-weighted mean. Output is ordered
// lexicographically by the stringified key tuple.
Dataset preaggregate(const Dataset& d, const AggregationKey& key);

// Worst-case ETL time split: every record with k >= 1 claims becomes k rows
// of (day_fraction, 1 claim) plus a zero-claim remainder row carrying the
// rest of the exposure (dropped when the remainder is exactly zero).
// Frequency predictions and covariates are copied unchanged.
Dataset time_split_extreme(const Dataset& d, double day_fraction = 1.0 / 365.0);

}  // namespace driftmon
