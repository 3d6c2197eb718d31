#include "driftmon/inference.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "driftmon/numerics.hpp"
#include "driftmon/rng.hpp"

namespace driftmon {

namespace {

using json = nlohmann::json;

constexpr int kVersion = 1;
constexpr const char* kToolVersion = "0.1.0";
constexpr int kDegenerateRetryLimit = 100;

// One bootstrap replicate: resample n tuples with the stream derived from
// (seed, replicate, attempt) and evaluate the Gini under cfg's policies.
double replicate_gini(const std::vector<ScoredObservation>& obs, const BootstrapConfig& cfg,
                      std::size_t replicate) {
    const std::size_t n = obs.size();
    std::vector<ScoredObservation> sample(n);
    for (int attempt = 0; attempt <= kDegenerateRetryLimit; ++attempt) {
        auto gen = rng::Xoshiro256pp::for_stream(cfg.seed, replicate + 1,
                                                 static_cast<std::uint64_t>(attempt));
        for (std::size_t i = 0; i < n; ++i) {
            sample[i] = obs[gen.next_below(n)];
        }
        try {
            return gini(sample, cfg.tie_policy, cfg.weighting).value;
        } catch (const DegeneracyError&) {
            // redraw from the next substream
        }
    }
    throw DegeneracyError("DegenerateResamples: replicate " + std::to_string(replicate + 1) +
                          " stayed degenerate after " + std::to_string(kDegenerateRetryLimit) +
                          " redraws");
}

const char* weighting_name(WeightingMode w) {
    return w == WeightingMode::CountWeighting ? "count" : "exposure";
}

const char* sidedness_name(TestSidedness s) {
    return s == TestSidedness::TwoSided ? "two-sided" : "one-sided-deterioration";
}

}  // namespace

NullDistribution bootstrap_null(const std::vector<ScoredObservation>& obs,
                                const BootstrapConfig& cfg) {
    if (cfg.replicates < 2) throw Error("bootstrap needs B >= 2 replicates");
    if (obs.empty()) throw Error("EmptyInput: no observations");
    // Surface degenerate input directly rather than through every replicate.
    gini(obs, cfg.tie_policy, cfg.weighting);

    std::vector<double> values(cfg.replicates);
    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.replicates));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run_range = [&](std::size_t begin, std::size_t end) {
        try {
            for (std::size_t b = begin; b < end; ++b) {
                values[b] = replicate_gini(obs, cfg, b);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    if (workers <= 1) {
        run_range(0, cfg.replicates);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cfg.replicates + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(cfg.replicates, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const SampleMoments moments = sample_moments(values);
    NullDistribution null_dist;
    null_dist.mean = moments.mean;
    null_dist.sd = moments.sd;
    null_dist.replicates = cfg.replicates;
    null_dist.n = obs.size();
    if (cfg.keep_replicates) null_dist.replicate_values = std::move(values);
    return null_dist;
}

DriftTestResult drift_test(double gini_new, const NullDistribution& null_dist, double alpha,
                           TestSidedness sidedness) {
    if (!(null_dist.sd > 0.0)) throw DegeneracyError("ZeroSd: null distribution has sd = 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");

    DriftTestResult r;
    r.gini_new = gini_new;
    r.alpha = alpha;
    r.sidedness = sidedness;
    r.z = (gini_new - null_dist.mean) / null_dist.sd;
    r.p_two_sided = 2.0 * (1.0 - normal_cdf(std::abs(r.z)));
    r.p_one_sided_deterioration = normal_cdf(r.z);
    r.reject = sidedness == TestSidedness::TwoSided ? r.p_two_sided < alpha
                                                    : r.p_one_sided_deterioration < alpha;
    return r;
}

MonitoringReport monitor(const Dataset& old_holdout, const Dataset& new_data,
                         const BootstrapConfig& cfg, double alpha, TestSidedness sidedness,
                         bool allow_smaller) {
    MonitoringReport report;
    report.config = cfg;
    report.old_provenance = old_holdout.provenance;
    report.new_provenance = new_data.provenance;

    auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const DegeneracyError& e) {
            throw DegeneracyError(std::string(name) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(std::string(name) + ": " + e.what());
        }
    };

    const Dataset old_agg = stage("preaggregate(old)", [&] {
        return preaggregate(old_holdout, all_covariates_key(old_holdout));
    });
    const Dataset new_agg = stage("preaggregate(new)", [&] {
        return preaggregate(new_data, all_covariates_key(new_data));
    });
    report.n_old = old_agg.size();
    report.n_new = new_agg.size();

    if (new_agg.size() < old_agg.size()) {
        if (!allow_smaller) {
            throw Error("monitor: new data has fewer aggregated records (" +
                        std::to_string(new_agg.size()) + ") than the old holdout (" +
                        std::to_string(old_agg.size()) +
                        "); pass allow_smaller to override");
        }
        report.warnings.push_back(
            "new data is smaller than the old holdout; the test statistic's distribution "
            "is sensitive to sample size");
    }

    const auto old_obs =
        stage("score(old)", [&] { return score_dataset(old_agg, cfg.weighting); });
    const auto new_obs =
        stage("score(new)", [&] { return score_dataset(new_agg, cfg.weighting); });

    report.null_distribution =
        stage("bootstrap_null", [&] { return bootstrap_null(old_obs, cfg); });
    report.gini_new =
        stage("gini(new)", [&] { return gini(new_obs, cfg.tie_policy, cfg.weighting); });
    report.test = stage("drift_test", [&] {
        return drift_test(report.gini_new.value, report.null_distribution, alpha, sidedness);
    });
    return report;
}

std::vector<std::pair<std::string, MonitoringReport>> per_period_monitor(
    const std::vector<std::pair<std::string, Dataset>>& old_holdouts, const Dataset& new_data,
    const BootstrapConfig& cfg, double alpha, TestSidedness sidedness, bool allow_smaller) {
    if (old_holdouts.empty()) throw Error("per_period_monitor needs at least one period");
    std::vector<std::pair<std::string, MonitoringReport>> out;
    out.reserve(old_holdouts.size());
    for (std::size_t k = 0; k < old_holdouts.size(); ++k) {
        BootstrapConfig period_cfg = cfg;
        period_cfg.seed = old_holdouts.size() == 1 ? cfg.seed : rng::derive_key(cfg.seed, k);
        MonitoringReport report = monitor(old_holdouts[k].second, new_data, period_cfg, alpha,
                                          sidedness, allow_smaller);
        report.warnings.push_back("p-values are raw; no multiplicity correction applied");
        out.emplace_back(old_holdouts[k].first, std::move(report));
    }
    return out;
}

std::string MonitoringReport::to_json() const {
    json j;
    j["schema_version"] = kVersion;
    j["tool_version"] = kToolVersion;
    j["old_provenance"] = old_provenance;
    j["new_provenance"] = new_provenance;
    j["n_old"] = n_old;
    j["n_new"] = n_new;
    j["tie_policy"] = config.tie_policy.name();
    j["tie_seed"] = config.tie_policy.seed;
    j["weighting"] = weighting_name(config.weighting);
    j["B"] = config.replicates;
    j["seed"] = config.seed;
    j["mean"] = null_distribution.mean;
    j["sd"] = null_distribution.sd;
    j["gini_new"] = gini_new.value;
    j["z"] = test.z;
    j["p_two_sided"] = test.p_two_sided;
    j["p_one_sided"] = test.p_one_sided_deterioration;
    j["alpha"] = test.alpha;
    j["sidedness"] = sidedness_name(test.sidedness);
    j["reject"] = test.reject;
    j["warnings"] = warnings;
    return j.dump(2);
}

MonitoringReport MonitoringReport::from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kVersion) {
        throw Error("unsupported report schema version");
    }
    MonitoringReport r;
    r.old_provenance = j.at("old_provenance").get<std::string>();
    r.new_provenance = j.at("new_provenance").get<std::string>();
    r.n_old = j.at("n_old").get<std::size_t>();
    r.n_new = j.at("n_new").get<std::size_t>();
    const std::string tie = j.at("tie_policy").get<std::string>();
    if (tie == "random") {
        r.config.tie_policy = TiePolicy::random(j.at("tie_seed").get<std::uint64_t>());
    } else if (tie == "best") {
        r.config.tie_policy = TiePolicy::best();
    } else if (tie == "worst") {
        r.config.tie_policy = TiePolicy::worst();
    } else {
        r.config.tie_policy = TiePolicy::average_of_extremes();
    }
    r.config.weighting = j.at("weighting").get<std::string>() == "exposure"
                             ? WeightingMode::ExposureWeighting
                             : WeightingMode::CountWeighting;
    r.config.replicates = j.at("B").get<std::size_t>();
    r.config.seed = j.at("seed").get<std::uint64_t>();
    r.null_distribution.mean = j.at("mean").get<double>();
    r.null_distribution.sd = j.at("sd").get<double>();
    r.null_distribution.replicates = r.config.replicates;
    r.gini_new.value = j.at("gini_new").get<double>();
    r.test.gini_new = r.gini_new.value;
    r.test.z = j.at("z").get<double>();
    r.test.p_two_sided = j.at("p_two_sided").get<double>();
    r.test.p_one_sided_deterioration = j.at("p_one_sided").get<double>();
    r.test.alpha = j.at("alpha").get<double>();
    r.test.sidedness = j.at("sidedness").get<std::string>() == "two-sided"
                           ? TestSidedness::TwoSided
                           : TestSidedness::OneSidedDeterioration;
    r.test.reject = j.at("reject").get<bool>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
}

}  // namespace driftmon
