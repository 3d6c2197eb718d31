#include "driftmon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftmon/numerics.hpp"
#include "driftmon/rng.hpp"

namespace driftmon {

const char* TiePolicy::name() const {
    switch (kind) {
        case Kind::RandomWithinTies: return "random";
        case Kind::BestWithinTies: return "best";
        case Kind::WorstWithinTies: return "worst";
        case Kind::AverageOfExtremes: return "average-extremes";
    }
    return "?";
}

namespace {

double effective_weight(const ScoredObservation& o, WeightingMode weighting) {
    return weighting == WeightingMode::CountWeighting ? 1.0 : o.weight;
}

void check_observations(const std::vector<ScoredObservation>& obs, WeightingMode weighting) {
    if (obs.empty()) throw Error("EmptyInput: no observations");
    KahanSum total_response;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        if (!(effective_weight(o, weighting) > 0.0)) {
            throw Error("observation " + std::to_string(i + 1) + " has nonpositive weight");
        }
        if (o.response < 0.0 || !std::isfinite(o.response)) {
            throw Error("observation " + std::to_string(i + 1) + " has invalid response");
        }
        if (!std::isfinite(o.score)) {
            throw Error("observation " + std::to_string(i + 1) + " has non-finite score");
        }
        total_response.add(o.response);
    }
    if (!(total_response.value() > 0.0)) {
        throw Error("ZeroTotalResponse: responses sum to zero");
    }
}

// Ordering for curve construction: descending primary key, tie blocks
// arranged per policy. The primary key for CapOrdering::Response is the
// response per unit of x-axis weight (the area-extremal ranking).
std::vector<std::size_t> curve_order(const std::vector<ScoredObservation>& obs,
                                     CapOrdering order_by, const TiePolicy& tie_policy,
                                     WeightingMode weighting) {
    auto key = [&](std::size_t i) {
        return order_by == CapOrdering::Score
                   ? obs[i].score
                   : obs[i].response / effective_weight(obs[i], weighting);
    };
    auto slope = [&](std::size_t i) {
        return obs[i].response / effective_weight(obs[i], weighting);
    };

    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) > key(b); });

    std::optional<rng::Xoshiro256pp> gen;
    if (tie_policy.kind == TiePolicy::Kind::RandomWithinTies) {
        gen.emplace(rng::Xoshiro256pp::for_stream(tie_policy.seed));
    }

    // Tie blocks are contiguous runs of exactly equal keys.
    std::size_t block_begin = 0;
    while (block_begin < order.size()) {
        std::size_t block_end = block_begin + 1;
        while (block_end < order.size() && key(order[block_end]) == key(order[block_begin])) {
            ++block_end;
        }
        if (block_end - block_begin > 1) {
            const auto first = order.begin() + static_cast<std::ptrdiff_t>(block_begin);
            const auto last = order.begin() + static_cast<std::ptrdiff_t>(block_end);
            switch (tie_policy.kind) {
                case TiePolicy::Kind::BestWithinTies:
                    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
                        return slope(a) > slope(b);
                    });
                    break;
                case TiePolicy::Kind::WorstWithinTies:
                    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
                        return slope(a) < slope(b);
                    });
                    break;
                case TiePolicy::Kind::RandomWithinTies: {
                    std::vector<std::size_t> block(first, last);
                    rng::shuffle(block, *gen);
                    std::copy(block.begin(), block.end(), first);
                    break;
                }
                case TiePolicy::Kind::AverageOfExtremes:
                    throw Error(
                        "AverageOfExtremes is not a curve ordering; evaluate Best and Worst "
                        "separately");
            }
        }
        block_begin = block_end;
    }
    return order;
}

CapCurve build_curve(const std::vector<ScoredObservation>& obs,
                     const std::vector<std::size_t>& order, WeightingMode weighting) {
    KahanSum total_w, total_y;
    for (const auto& o : obs) {
        total_w.add(effective_weight(o, weighting));
        total_y.add(o.response);
    }
    const double tw = total_w.value();
    const double ty = total_y.value();

    CapCurve curve;
    curve.weighting = weighting;
    curve.points.reserve(obs.size() + 1);
    curve.points.push_back({0.0, 0.0});
    KahanSum cum_w, cum_y;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& o = obs[order[k]];
        cum_w.add(effective_weight(o, weighting));
        cum_y.add(o.response);
        if (k + 1 == order.size()) {
            curve.points.push_back({1.0, 1.0});  // exact endpoint by construction
        } else {
            curve.points.push_back({cum_w.value() / tw, cum_y.value() / ty});
        }
    }
    return curve;
}

}  // namespace

double CapCurve::area() const {
    KahanSum area;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area.add((points[i].x - points[i - 1].x) * (points[i].cap + points[i - 1].cap) * 0.5);
    }
    return area.value();
}

void CapCurve::validate() const {
    if (points.size() < 2) throw Error("CAP curve needs at least two points");
    if (points.front().x != 0.0 || points.front().cap != 0.0) {
        throw Error("CAP curve must start at (0,0)");
    }
    if (points.back().x != 1.0 || points.back().cap != 1.0) {
        throw Error("CAP curve must end at (1,1)");
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i].x > points[i - 1].x)) {
            throw Error("CAP curve x coordinates must be strictly increasing");
        }
        if (points[i].cap < points[i - 1].cap) {
            throw Error("CAP curve must be nondecreasing");
        }
    }
}

std::vector<ScoredObservation> score_dataset(const Dataset& d, WeightingMode weighting,
                                             ScoreKind score_kind) {
    std::vector<ScoredObservation> obs;
    obs.reserve(d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        if (!r.prediction) {
            throw Error("MissingPrediction: row " + std::to_string(i + 1));
        }
        ScoredObservation o;
        o.response = static_cast<double>(r.response);
        o.weight = weighting == WeightingMode::CountWeighting ? 1.0 : r.exposure;
        o.score = score_kind == ScoreKind::PredictedCount ? *r.prediction * r.exposure
                                                          : *r.prediction;
        obs.push_back(o);
    }
    return obs;
}

CapCurve empirical_cap(const std::vector<ScoredObservation>& obs, CapOrdering order_by,
                       const TiePolicy& tie_policy, WeightingMode weighting) {
    check_observations(obs, weighting);
    const auto order = curve_order(obs, order_by, tie_policy, weighting);
    return build_curve(obs, order, weighting);
}

GiniResult gini(const std::vector<ScoredObservation>& obs, const TiePolicy& tie_policy,
                WeightingMode weighting) {
    check_observations(obs, weighting);
    const double first_response = obs.front().response;
    const bool all_equal = std::all_of(obs.begin(), obs.end(), [&](const ScoredObservation& o) {
        return o.response == first_response;
    });
    if (all_equal) {
        throw DegeneracyError("DegenerateDenominator: all responses are equal");
    }

    const auto best_order = curve_order(obs, CapOrdering::Response, TiePolicy::best(), weighting);
    const double denominator = build_curve(obs, best_order, weighting).area() - 0.5;
    if (!(denominator > 0.0)) {
        throw DegeneracyError("DegenerateDenominator: reference curve has no excess area");
    }

    auto numerator_for = [&](const TiePolicy& policy) {
        const auto order = curve_order(obs, CapOrdering::Score, policy, weighting);
        return build_curve(obs, order, weighting).area() - 0.5;
    };

    GiniResult result;
    result.tie_policy = tie_policy;
    result.weighting = weighting;
    result.n = obs.size();
    result.denominator_area = denominator;
    if (tie_policy.kind == TiePolicy::Kind::AverageOfExtremes) {
        const double best = numerator_for(TiePolicy::best());
        const double worst = numerator_for(TiePolicy::worst());
        result.numerator_area = 0.5 * (best + worst);
    } else {
        result.numerator_area = numerator_for(tie_policy);
    }
    result.value = result.numerator_area / result.denominator_area;
    return result;
}

double poisson_deviance_loss(const std::vector<CountObservation>& obs,
                             const DevianceConfig& cfg) {
    if (obs.empty()) throw Error("EmptyInput: no observations");
    if (!(cfg.dispersion > 0.0)) throw Error("dispersion must be positive");
    KahanSum sum;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double y = obs[i].response;
        const double m = obs[i].predicted_count;
        if (!(m > 0.0) || !std::isfinite(m)) {
            throw Error("NonpositivePrediction: row " + std::to_string(i + 1));
        }
        if (y < 0.0) throw Error("negative response at row " + std::to_string(i + 1));
        const double unit = y > 0.0 ? 2.0 * (y * std::log(y / m) - y + m) : 2.0 * m;
        sum.add(unit);
    }
    return sum.value() / (static_cast<double>(obs.size()) * cfg.dispersion);
}

namespace {

// Exposure-quantile bins over the prediction rank. Records with equal
// predictions always land in the same bin. Returns per-record bin ids.
std::vector<int> quantile_bins(const Dataset& d, int bins) {
    const std::size_t n = d.records.size();
    if (bins < 1) throw Error("bins must be positive");
    if (static_cast<std::size_t>(bins) > n) bins = static_cast<int>(n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *d.records[a].prediction < *d.records[b].prediction;
    });

    const double total = d.total_exposure();
    std::vector<int> bin_of(n, 0);
    int bin = 0;
    KahanSum cum;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        // Open a new bin once the previous quantile boundary is passed, but
        // never inside a run of equal predictions.
        if (k > 0 && bin + 1 < bins &&
            cum.value() >= total * (static_cast<double>(bin) + 1.0) / bins &&
            *d.records[i].prediction != *d.records[order[k - 1]].prediction) {
            ++bin;
        }
        cum.add(d.records[i].exposure);
        bin_of[i] = bin;
    }
    return bin_of;
}

void require_predictions(const Dataset& d) {
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (!d.records[i].prediction) {
            throw Error("MissingPrediction: row " + std::to_string(i + 1));
        }
    }
    if (d.records.empty()) throw Error("EmptyInput: dataset has no records");
}

}  // namespace

Dataset balance_correct(const Dataset& d, std::optional<int> bins) {
    require_predictions(d);

    std::vector<int> group_of(d.records.size());
    int group_count = 0;
    if (bins) {
        group_of = quantile_bins(d, *bins);
        group_count = 1 + *std::max_element(group_of.begin(), group_of.end());
    } else {
        // Group by exact predicted value.
        std::vector<std::size_t> order(d.records.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return *d.records[a].prediction < *d.records[b].prediction;
        });
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (k > 0 &&
                *d.records[order[k]].prediction != *d.records[order[k - 1]].prediction) {
                ++group_count;
            }
            group_of[order[k]] = group_count;
        }
        ++group_count;
    }

    std::vector<KahanSum> exposure(group_count);
    std::vector<double> response(group_count, 0.0);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        exposure[group_of[i]].add(d.records[i].exposure);
        response[group_of[i]] += static_cast<double>(d.records[i].response);
    }

    Dataset out = d;
    out.provenance = d.provenance + "/balance-corrected";
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        out.records[i].prediction = response[group_of[i]] / exposure[group_of[i]].value();
    }
    return out;
}

std::vector<CalibrationBin> calibration_table(const Dataset& d, int bins) {
    require_predictions(d);
    const auto bin_of = quantile_bins(d, bins);
    const int group_count = 1 + *std::max_element(bin_of.begin(), bin_of.end());

    std::vector<KahanSum> exposure(group_count), weighted_pred(group_count);
    std::vector<double> response(group_count, 0.0);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        exposure[bin_of[i]].add(r.exposure);
        weighted_pred[bin_of[i]].add(*r.prediction * r.exposure);
        response[bin_of[i]] += static_cast<double>(r.response);
    }

    std::vector<CalibrationBin> table(group_count);
    for (int g = 0; g < group_count; ++g) {
        table[g].bin = g + 1;
        table[g].exposure = exposure[g].value();
        table[g].observed_frequency = response[g] / exposure[g].value();
        table[g].predicted_frequency = weighted_pred[g].value() / exposure[g].value();
    }
    return table;
}

}  // namespace driftmon
