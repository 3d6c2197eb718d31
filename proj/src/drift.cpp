#include "driftmon/drift.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "driftmon/rng.hpp"

namespace driftmon {

bool GroupPredicate::matches(const Dataset& d, std::size_t record_index) const {
    const int j = d.covariate_index(covariate);
    if (j < 0) throw Error("predicate covariate '" + covariate + "' not in schema");
    const CovariateValue& v = d.records[record_index].covariates[static_cast<std::size_t>(j)];
    if (lo || hi) {
        if (!std::holds_alternative<double>(v)) {
            throw Error("predicate range on non-numeric covariate '" + covariate + "'");
        }
        const double x = std::get<double>(v);
        if (lo && x < *lo) return false;
        if (hi && x >= *hi) return false;
        return true;
    }
    if (!std::holds_alternative<std::string>(v)) {
        throw Error("predicate value set on non-categorical covariate '" + covariate + "'");
    }
    const std::string& level = std::get<std::string>(v);
    return std::find(values.begin(), values.end(), level) != values.end();
}

std::vector<std::size_t> GroupPredicate::select(const Dataset& d) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (matches(d, i)) out.push_back(i);
    }
    if (out.empty()) {
        throw Error("predicate on covariate '" + covariate + "' selects no records");
    }
    return out;
}

namespace {

// Decrement/increment pairs for a claim transfer, sampled with the partial
// Fisher-Yates discipline (prefix property over transfer_count).
struct TransferPlan {
    std::vector<std::size_t> decrements;
    std::vector<std::size_t> increments;
};

TransferPlan plan_transfers(const Dataset& d, const DriftScenario& s,
                            std::int64_t transfer_count) {
    const auto source_all = s.source.select(d);
    const auto target_all = s.target.select(d);
    for (std::size_t i : source_all) {
        if (s.target.matches(d, i)) {
            throw Error("DisjointnessViolation: record " + std::to_string(i + 1) +
                        " matches both source and target");
        }
    }

    std::vector<std::size_t> eligible_source;
    for (std::size_t i : source_all) {
        if (d.records[i].response >= 1) eligible_source.push_back(i);
    }
    if (static_cast<std::int64_t>(eligible_source.size()) < transfer_count) {
        throw Error("InsufficientClaimsInSource: " + std::to_string(eligible_source.size()) +
                    " records with claims, need " + std::to_string(transfer_count));
    }
    if (static_cast<std::int64_t>(target_all.size()) < transfer_count) {
        throw Error("InsufficientTargetRecords: " + std::to_string(target_all.size()) +
                    " target records, need " + std::to_string(transfer_count));
    }

    auto src_gen = rng::Xoshiro256pp::for_stream(s.seed, 1);
    auto tgt_gen = rng::Xoshiro256pp::for_stream(s.seed, 2);
    TransferPlan plan;
    plan.decrements = rng::sample_without_replacement(
        eligible_source, static_cast<std::size_t>(transfer_count), src_gen);
    plan.increments = rng::sample_without_replacement(
        target_all, static_cast<std::size_t>(transfer_count), tgt_gen);
    return plan;
}

}  // namespace

Dataset inject_drift(const Dataset& d, const DriftScenario& scenario) {
    d.validate();
    if (scenario.transfer_count < 0) throw Error("transfer_count must be nonnegative");
    Dataset out = d;
    out.provenance = d.provenance + "/drifted";
    if (scenario.transfer_count == 0) return out;

    const TransferPlan plan = plan_transfers(d, scenario, scenario.transfer_count);
    for (std::size_t i : plan.decrements) out.records[i].response -= 1;
    for (std::size_t i : plan.increments) out.records[i].response += 1;
    return out;
}

Dataset generate_portfolio(const SyntheticSpec& spec) {
    if (spec.groups.empty()) throw Error("synthetic spec has no groups");
    if (spec.n < 1) throw Error("synthetic spec needs n >= 1");
    if (!(spec.exposure_min >= 0.0) || !(spec.exposure_max > spec.exposure_min)) {
        throw Error("synthetic spec needs 0 <= exposure_min < exposure_max");
    }
    double share_total = 0.0;
    for (const auto& g : spec.groups) {
        if (!(g.frequency > 0.0)) throw Error("group '" + g.label + "' needs frequency > 0");
        if (!(g.share > 0.0)) throw Error("group '" + g.label + "' needs share > 0");
        share_total += g.share;
    }

    if (!(spec.age_max > spec.age_min)) throw Error("synthetic spec needs age_min < age_max");

    Dataset d;
    d.provenance = "synthetic";
    d.schema.push_back({spec.group_covariate, CovariateKind::Categorical});
    d.schema.push_back({spec.age_covariate, CovariateKind::Numeric});

    auto gen = rng::Xoshiro256pp::for_stream(spec.seed);
    for (std::size_t i = 0; i < spec.n; ++i) {
        // Group by cumulative share, then age, exposure on (min, max], count.
        const double u = gen.next_double() * share_total;
        std::size_t g = 0;
        double cum = spec.groups[0].share;
        while (g + 1 < spec.groups.size() && u >= cum) cum += spec.groups[++g].share;

        PolicyRecord r;
        r.covariates.emplace_back(spec.groups[g].label);
        r.covariates.emplace_back(spec.age_min +
                                  gen.next_double() * (spec.age_max - spec.age_min));
        const double span = spec.exposure_max - spec.exposure_min;
        r.exposure = spec.exposure_max - gen.next_double() * span;  // (min, max]
        r.response = static_cast<std::int64_t>(
            rng::poisson(spec.groups[g].frequency * r.exposure, gen));
        r.prediction = spec.groups[g].frequency;
        d.records.push_back(std::move(r));
    }
    d.validate();
    return d;
}

std::vector<std::pair<std::string, Dataset>> drift_schedule(
    const Dataset& d0, DriftKind kind, int periods, std::int64_t total_transfer,
    const GroupPredicate& source, const GroupPredicate& target, std::uint64_t seed) {
    if (periods < 1) throw Error("periods must be positive");
    if (total_transfer < 0) throw Error("total_transfer must be nonnegative");

    std::vector<std::pair<std::string, Dataset>> out;
    auto label = [](int k) { return "period-" + std::to_string(k); };

    switch (kind) {
        case DriftKind::Sudden: {
            for (int k = 1; k < periods; ++k) {
                Dataset copy = d0;
                copy.provenance = d0.provenance + "/sudden-" + std::to_string(k);
                out.emplace_back(label(k), std::move(copy));
            }
            DriftScenario s{source, target, total_transfer, rng::derive_key(seed, 0)};
            out.emplace_back(label(periods), inject_drift(d0, s));
            break;
        }
        case DriftKind::Incremental: {
            Dataset current = d0;
            std::int64_t applied = 0;
            for (int k = 1; k <= periods; ++k) {
                const auto cumulative = static_cast<std::int64_t>(std::llround(
                    static_cast<double>(total_transfer) * k / periods));
                DriftScenario s{source, target, cumulative - applied,
                                rng::derive_key(seed, static_cast<std::uint64_t>(k))};
                current = inject_drift(current, s);
                applied = cumulative;
                out.emplace_back(label(k), current);
            }
            break;
        }
        case DriftKind::Gradual: {
            // One fixed transfer plan; each decrement/increment pair switches
            // on independently with the period's ramp probability.
            DriftScenario full{source, target, total_transfer, rng::derive_key(seed, 0)};
            TransferPlan plan;
            if (total_transfer > 0) plan = plan_transfers(d0, full, total_transfer);
            for (int k = 1; k <= periods; ++k) {
                const double ramp = static_cast<double>(k) / periods;
                auto gen = rng::Xoshiro256pp::for_stream(seed, 3,
                                                         static_cast<std::uint64_t>(k));
                Dataset period = d0;
                period.provenance =
                    d0.provenance + "/gradual-" + std::to_string(k);
                for (std::size_t t = 0; t < plan.decrements.size(); ++t) {
                    if (gen.next_double() < ramp) {
                        period.records[plan.decrements[t]].response -= 1;
                        period.records[plan.increments[t]].response += 1;
                    }
                }
                out.emplace_back(label(k), std::move(period));
            }
            break;
        }
    }
    return out;
}

DriftScenario DriftScenario::from_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario config: " + path);
    DriftScenario s;
    std::string line;
    auto parse_values = [](const std::string& v) {
        std::vector<std::string> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
        }
        return out;
    };
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (eq == std::string::npos) throw Error("bad scenario config line: " + line);
        std::istringstream key_ss(line.substr(0, eq));
        std::string key;
        key_ss >> key;
        const std::string value = line.substr(eq + 1);
        std::istringstream vs(value);
        if (key == "source_covariate") {
            vs >> s.source.covariate;
        } else if (key == "target_covariate") {
            vs >> s.target.covariate;
        } else if (key == "source_values") {
            s.source.values = parse_values(value);
        } else if (key == "target_values") {
            s.target.values = parse_values(value);
        } else if (key == "source_range") {
            double lo, hi;
            if (!(vs >> lo >> hi)) throw Error("source_range needs two numbers");
            s.source.lo = lo;
            s.source.hi = hi;
        } else if (key == "target_range") {
            double lo, hi;
            if (!(vs >> lo >> hi)) throw Error("target_range needs two numbers");
            s.target.lo = lo;
            s.target.hi = hi;
        } else if (key == "transfer_count") {
            vs >> s.transfer_count;
        } else if (key == "seed") {
            vs >> s.seed;
        } else {
            throw Error("unknown scenario config key: " + key);
        }
    }
    if (s.source.covariate.empty() || s.target.covariate.empty()) {
        throw Error("scenario config must set source_covariate and target_covariate");
    }
    return s;
}

SyntheticSpec SyntheticSpec::from_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open synthetic spec: " + path);
    SyntheticSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("bad synthetic spec line: " + line);
        std::istringstream key_ss(line.substr(0, eq));
        std::string key;
        key_ss >> key;
        std::istringstream vs(line.substr(eq + 1));
        if (key == "n") {
            vs >> spec.n;
        } else if (key == "seed") {
            vs >> spec.seed;
        } else if (key == "exposure_min") {
            vs >> spec.exposure_min;
        } else if (key == "exposure_max") {
            vs >> spec.exposure_max;
        } else if (key == "age_min") {
            vs >> spec.age_min;
        } else if (key == "age_max") {
            vs >> spec.age_max;
        } else if (key == "group_covariate") {
            vs >> spec.group_covariate;
        } else if (key == "age_covariate") {
            vs >> spec.age_covariate;
        } else if (key == "group") {
            SyntheticGroup g;
            if (!(vs >> g.label >> g.frequency >> g.share)) {
                throw Error("group line needs: label frequency share");
            }
            spec.groups.push_back(std::move(g));
        } else {
            throw Error("unknown synthetic spec key: " + key);
        }
    }
    return spec;
}

}  // namespace driftmon
