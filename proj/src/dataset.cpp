#include "driftmon/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "driftmon/numerics.hpp"

namespace driftmon {

std::string covariate_value_to_string(const CovariateValue& v) {
    if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
    // Shortest representation that round-trips the double.
    char buf[32];
    const double x = std::get<double>(v);
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

bool Dataset::has_predictions() const {
    return !records.empty() && records.front().prediction.has_value();
}

int Dataset::covariate_index(const std::string& name) const {
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].name == name) return static_cast<int>(j);
    }
    return -1;
}

double Dataset::total_exposure() const {
    KahanSum s;
    for (const auto& r : records) s.add(r.exposure);
    return s.value();
}

std::int64_t Dataset::total_response() const {
    std::int64_t t = 0;
    for (const auto& r : records) t += r.response;
    return t;
}

void Dataset::validate() const {
    if (records.empty()) throw Error("dataset '" + provenance + "' is empty");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.covariates.size() != schema.size()) {
            throw Error("row " + std::to_string(i + 1) + ": covariate count " +
                        std::to_string(r.covariates.size()) + " does not match schema size " +
                        std::to_string(schema.size()));
        }
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const bool is_num = std::holds_alternative<double>(r.covariates[j]);
            if (is_num != (schema[j].kind == CovariateKind::Numeric)) {
                throw Error("row " + std::to_string(i + 1) + ", column '" + schema[j].name +
                            "': value kind does not match declared kind");
            }
        }
        if (!(r.exposure > 0.0) || !std::isfinite(r.exposure)) {
            throw Error("ZeroExposure: row " + std::to_string(i + 1) +
                        " has nonpositive exposure");
        }
        if (r.response < 0) {
            throw Error("row " + std::to_string(i + 1) + " has negative response");
        }
        if (r.prediction && (!std::isfinite(*r.prediction) || *r.prediction < 0.0)) {
            throw Error("row " + std::to_string(i + 1) + " has invalid prediction");
        }
    }
}

AggregationKey all_covariates_key(const Dataset& d) {
    AggregationKey key;
    for (const auto& spec : d.schema) key.key_columns.push_back(spec.name);
    return key;
}

namespace {

struct AggCell {
    std::vector<CovariateValue> covariates;
    KahanSum exposure;
    std::int64_t response = 0;
    KahanSum weighted_prediction;  // sum of prediction * exposure
};

}  // namespace

Dataset preaggregate(const Dataset& d, const AggregationKey& key) {
    if (key.key_columns.empty()) throw Error("aggregation key has no columns");
    std::vector<int> key_idx;
    for (const auto& col : key.key_columns) {
        const int j = d.covariate_index(col);
        if (j < 0) throw Error("aggregation key column '" + col + "' not in schema");
        if (std::count(key_idx.begin(), key_idx.end(), j) > 0) {
            throw Error("aggregation key column '" + col + "' listed twice");
        }
        key_idx.push_back(j);
    }

    const bool with_pred = d.has_predictions();
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (d.records[i].prediction.has_value() != with_pred) {
            throw Error("MixedPredictionPresence: row " + std::to_string(i + 1) +
                        (with_pred ? " is missing a prediction" : " carries a prediction"));
        }
    }

    // std::map keeps the output in lexicographic order of the stringified key.
    std::map<std::vector<std::string>, AggCell> cells;
    for (const auto& r : d.records) {
        std::vector<std::string> k;
        k.reserve(key_idx.size());
        for (int j : key_idx) k.push_back(covariate_value_to_string(r.covariates[j]));
        AggCell& cell = cells[std::move(k)];
        if (cell.covariates.empty()) {
            cell.covariates.resize(key_idx.size());
            for (std::size_t p = 0; p < key_idx.size(); ++p) {
                cell.covariates[p] = r.covariates[key_idx[p]];
            }
        }
        cell.exposure.add(r.exposure);
        cell.response += r.response;
        if (with_pred) cell.weighted_prediction.add(*r.prediction * r.exposure);
    }

    Dataset out;
    out.provenance = d.provenance + "/aggregated";
    for (int j : key_idx) out.schema.push_back(d.schema[j]);
    out.records.reserve(cells.size());
    for (auto& [k, cell] : cells) {
        PolicyRecord r;
        r.covariates = std::move(cell.covariates);
        r.exposure = cell.exposure.value();
        r.response = cell.response;
        if (with_pred) r.prediction = cell.weighted_prediction.value() / r.exposure;
        out.records.push_back(std::move(r));
    }
    out.validate();
    return out;
}

Dataset time_split_extreme(const Dataset& d, double day_fraction) {
    if (!(day_fraction > 0.0)) throw Error("day_fraction must be positive");
    Dataset out;
    out.schema = d.schema;
    out.provenance = d.provenance + "/time-split";
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        if (r.response == 0) {
            out.records.push_back(r);
            continue;
        }
        const double claimed = static_cast<double>(r.response) * day_fraction;
        if (r.exposure < claimed) {
            throw Error("InsufficientExposure: row " + std::to_string(i + 1) + " has exposure " +
                        std::to_string(r.exposure) + " < response x day_fraction " +
                        std::to_string(claimed));
        }
        for (std::int64_t k = 0; k < r.response; ++k) {
            PolicyRecord claim_row = r;
            claim_row.exposure = day_fraction;
            claim_row.response = 1;
            out.records.push_back(std::move(claim_row));
        }
        const double remainder = r.exposure - claimed;
        if (remainder > 0.0) {
            PolicyRecord rest = r;
            rest.exposure = remainder;
            rest.response = 0;
            out.records.push_back(std::move(rest));
        }
    }
    out.validate();
    return out;
}

}  // namespace driftmon
