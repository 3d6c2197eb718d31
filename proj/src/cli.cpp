#include "driftmon/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "driftmon/csv.hpp"
#include "driftmon/drift.hpp"
#include "driftmon/glm.hpp"
#include "driftmon/inference.hpp"
#include "driftmon/metrics.hpp"

namespace driftmon::cli {

namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitReject = 10;

// Schema flags shared by every subcommand that reads a dataset CSV.
struct SchemaFlags {
    std::string config_path;
    std::string exposure_col;
    std::string response_col;
    std::string prediction_col;
    std::string covariate_list;

    void attach(CLI::App* cmd) {
        cmd->add_option("--schema", config_path,
                        "schema config file (key=value: exposure_col, response_col, "
                        "prediction_col, covariate_cols)");
        cmd->add_option("--exposure-col", exposure_col, "exposure column name");
        cmd->add_option("--response-col", response_col, "claim count column name");
        cmd->add_option("--prediction-col", prediction_col,
                        "predicted frequency column name");
        cmd->add_option("--covariates", covariate_list,
                        "comma separated covariates, each name or name:cat|num");
    }

    CsvColumnMap resolve() const {
        CsvColumnMap map;
        if (!config_path.empty()) map = CsvColumnMap::from_config_file(config_path);
        if (!exposure_col.empty()) map.exposure_col = exposure_col;
        if (!response_col.empty()) map.response_col = response_col;
        if (!prediction_col.empty()) map.prediction_col = prediction_col;
        if (!covariate_list.empty()) {
            map.covariates = CsvColumnMap::parse_covariate_list(covariate_list);
        }
        if (map.exposure_col.empty() || map.response_col.empty() || map.covariates.empty()) {
            throw Error(
                "schema incomplete: need exposure_col, response_col and covariates "
                "(via --schema or flags)");
        }
        return map;
    }
};

struct MetricFlags {
    std::string tie = "average-extremes";
    std::uint64_t tie_seed = 0;
    std::string weighting = "count";
    std::string rank_by = "count";

    void attach(CLI::App* cmd) {
        cmd->add_option("--tie", tie, "tie policy: average-extremes|best|worst|random")
            ->check(CLI::IsMember({"average-extremes", "best", "worst", "random"}));
        cmd->add_option("--tie-seed", tie_seed, "seed for --tie random");
        cmd->add_option("--weighting", weighting, "CAP x-axis weighting: count|exposure")
            ->check(CLI::IsMember({"count", "exposure"}));
        cmd->add_option("--rank-by", rank_by,
                        "ranking key: count (prediction x exposure) or frequency")
            ->check(CLI::IsMember({"count", "frequency"}));
    }

    TiePolicy tie_policy() const {
        if (tie == "best") return TiePolicy::best();
        if (tie == "worst") return TiePolicy::worst();
        if (tie == "random") return TiePolicy::random(tie_seed);
        return TiePolicy::average_of_extremes();
    }
    WeightingMode weighting_mode() const {
        return weighting == "exposure" ? WeightingMode::ExposureWeighting
                                       : WeightingMode::CountWeighting;
    }
    ScoreKind score_kind() const {
        return rank_by == "frequency" ? ScoreKind::PredictedFrequency
                                      : ScoreKind::PredictedCount;
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << text;
    if (!out) throw Error("write failed: " + path);
}

void emit(const std::string& output_path, const std::string& text) {
    if (output_path.empty()) {
        std::cout << text << '\n';
    } else {
        write_text(output_path, text + "\n");
    }
}

json gini_to_json(const GiniResult& g) {
    return json{{"gini", g.value},
                {"tie_policy", g.tie_policy.name()},
                {"tie_seed", g.tie_policy.seed},
                {"weighting",
                 g.weighting == WeightingMode::CountWeighting ? "count" : "exposure"},
                {"n", g.n},
                {"numerator_area", g.numerator_area},
                {"denominator_area", g.denominator_area}};
}

json null_to_json(const NullDistribution& nd) {
    return json{{"mean", nd.mean}, {"sd", nd.sd}, {"B", nd.replicates}, {"n", nd.n}};
}

NullDistribution null_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open null distribution: " + path);
    json j;
    in >> j;
    NullDistribution nd;
    nd.mean = j.at("mean").get<double>();
    nd.sd = j.at("sd").get<double>();
    nd.replicates = j.value("B", std::size_t{0});
    nd.n = j.value("n", std::size_t{0});
    return nd;
}

void write_replicates_csv(const std::string& path, const std::vector<double>& values) {
    std::ostringstream out;
    out << "gini\n";
    char buf[32];
    for (double v : values) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, ptr - buf);
        out << '\n';
    }
    write_text(path, out.str());
}

Dataset load_dataset(const std::string& path, const SchemaFlags& schema,
                     bool drop_zero_exposure, std::vector<std::string>* warnings = nullptr) {
    LoadOptions options;
    options.drop_zero_exposure = drop_zero_exposure;
    LoadResult r = load_csv(path, schema.resolve(), options);
    for (const auto& w : r.warnings) {
        if (warnings) warnings->push_back(w);
        std::cerr << "warning: " << w << '\n';
    }
    return std::move(r.dataset);
}

int run_or_throw(const std::vector<std::string>& args) {
    CLI::App app{"driftmon: Gini-based concept-drift monitoring for "
                 "exposure-weighted frequency models"};
    app.require_subcommand(1);

    // aggregate
    auto* agg = app.add_subcommand(
        "aggregate", "collapse records sharing a covariate key (sums exposure and claims)");
    SchemaFlags agg_schema;
    std::string agg_input, agg_output, agg_keys;
    bool agg_drop_zero = false;
    agg->add_option("--input", agg_input, "input CSV")->required();
    agg->add_option("--output", agg_output, "output CSV")->required();
    agg->add_option("--keys", agg_keys, "comma separated key columns (default: all covariates)");
    agg->add_flag("--drop-zero-exposure", agg_drop_zero,
                  "drop zero-exposure rows with a warning instead of failing");
    agg_schema.attach(agg);

    // fit-glm
    auto* fit = app.add_subcommand("fit-glm",
                                   "fit a Poisson log-link GLM with exposure offset");
    SchemaFlags fit_schema;
    std::string fit_input, fit_design, fit_model_out;
    double fit_tol = 1e-10;
    int fit_max_iter = 50;
    fit->add_option("--input", fit_input, "training CSV")->required();
    fit->add_option("--design", fit_design, "design config file")->required();
    fit->add_option("--model-out", fit_model_out, "model JSON output")->required();
    fit->add_option("--tol", fit_tol, "gradient max-norm tolerance");
    fit->add_option("--max-iter", fit_max_iter, "Newton iteration cap");
    fit_schema.attach(fit);

    // predict
    auto* pred = app.add_subcommand("predict", "attach model frequencies to a dataset");
    SchemaFlags pred_schema;
    std::string pred_input, pred_model, pred_output;
    pred->add_option("--input", pred_input, "input CSV")->required();
    pred->add_option("--model", pred_model, "model JSON")->required();
    pred->add_option("--output", pred_output, "output CSV")->required();
    pred_schema.attach(pred);

    // gini
    auto* gini_cmd = app.add_subcommand("gini", "Gini index of a scored dataset");
    SchemaFlags gini_schema;
    MetricFlags gini_metrics;
    std::string gini_input, gini_output;
    gini_cmd->add_option("--input", gini_input, "input CSV with predictions")->required();
    gini_cmd->add_option("--output", gini_output, "write JSON here instead of stdout");
    gini_schema.attach(gini_cmd);
    gini_metrics.attach(gini_cmd);

    // cap
    auto* cap_cmd = app.add_subcommand("cap", "empirical CAP curve points");
    SchemaFlags cap_schema;
    MetricFlags cap_metrics;
    std::string cap_input, cap_output, cap_json_output, cap_order = "score";
    cap_cmd->add_option("--input", cap_input, "input CSV with predictions")->required();
    cap_cmd->add_option("--output", cap_output, "CSV output (alpha,cap)");
    cap_cmd->add_option("--json-output", cap_json_output, "JSON output");
    cap_cmd->add_option("--order-by", cap_order, "ranking key: score|response")
        ->check(CLI::IsMember({"score", "response"}));
    cap_schema.attach(cap_cmd);
    cap_metrics.attach(cap_cmd);

    // bootstrap
    auto* boot = app.add_subcommand("bootstrap",
                                    "bootstrap null distribution of the holdout Gini");
    SchemaFlags boot_schema;
    MetricFlags boot_metrics;
    std::string boot_input, boot_output, boot_replicates_out;
    std::size_t boot_B = 10000;
    std::uint64_t boot_seed = 0;
    int boot_threads = 0;
    boot->add_option("--input", boot_input, "holdout CSV with predictions")->required();
    boot->add_option("--B", boot_B, "bootstrap replicates");
    boot->add_option("--seed", boot_seed, "bootstrap seed")->required();
    boot->add_option("--output", boot_output, "null distribution JSON output");
    boot->add_option("--replicates-out", boot_replicates_out,
                     "one-column CSV of replicate Gini values");
    boot->add_option("--threads", boot_threads, "worker threads (0 = hardware)");
    boot_schema.attach(boot);
    boot_metrics.attach(boot);

    // test
    auto* test_cmd = app.add_subcommand("test", "drift hypothesis test given a null");
    std::string test_null, test_output, test_sided = "two-sided";
    double test_gini_new = 0.0, test_alpha = 0.0;
    test_cmd->add_option("--gini-new", test_gini_new, "Gini on the new data")->required();
    test_cmd->add_option("--null", test_null, "null distribution JSON")->required();
    test_cmd->add_option("--alpha", test_alpha, "significance level in (0,1)")->required();
    test_cmd->add_option("--sided", test_sided, "two-sided|one-sided-deterioration")
        ->check(CLI::IsMember({"two-sided", "one-sided-deterioration"}));
    test_cmd->add_option("--output", test_output, "write JSON here instead of stdout");

    // monitor
    auto* mon = app.add_subcommand(
        "monitor", "full pipeline: aggregate, score, bootstrap, test (exit 10 on reject)");
    SchemaFlags mon_schema;
    MetricFlags mon_metrics;
    std::string mon_old, mon_new, mon_output, mon_replicates_out, mon_sided = "two-sided";
    std::size_t mon_B = 10000;
    std::uint64_t mon_seed = 0;
    double mon_alpha = 0.0;
    int mon_threads = 0;
    bool mon_allow_smaller = false, mon_drop_zero = false;
    mon->add_option("--old", mon_old, "training-period holdout CSV")->required();
    mon->add_option("--new", mon_new, "new-period CSV")->required();
    mon->add_option("--B", mon_B, "bootstrap replicates");
    mon->add_option("--seed", mon_seed, "bootstrap seed")->required();
    mon->add_option("--alpha", mon_alpha, "significance level in (0,1)")->required();
    mon->add_option("--sided", mon_sided, "two-sided|one-sided-deterioration")
        ->check(CLI::IsMember({"two-sided", "one-sided-deterioration"}));
    mon->add_option("--output", mon_output, "report JSON output");
    mon->add_option("--replicates-out", mon_replicates_out,
                    "one-column CSV of replicate Gini values");
    mon->add_option("--threads", mon_threads, "worker threads (0 = hardware)");
    mon->add_flag("--allow-smaller", mon_allow_smaller,
                  "accept new data smaller than the holdout (stamps a warning)");
    mon->add_flag("--drop-zero-exposure", mon_drop_zero,
                  "drop zero-exposure rows with a warning instead of failing");
    mon_schema.attach(mon);
    mon_metrics.attach(mon);

    // inject
    auto* inj = app.add_subcommand("inject", "redistribute claims per a drift scenario");
    SchemaFlags inj_schema;
    std::string inj_input, inj_scenario, inj_output;
    inj->add_option("--input", inj_input, "input CSV")->required();
    inj->add_option("--scenario", inj_scenario, "scenario config file")->required();
    inj->add_option("--output", inj_output, "output CSV")->required();
    inj_schema.attach(inj);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic portfolio");
    std::string sim_spec, sim_output;
    sim->add_option("--spec", sim_spec, "synthetic spec config file")->required();
    sim->add_option("--output", sim_output, "output CSV")->required();

    // schedule
    auto* sched = app.add_subcommand("schedule", "per-period datasets under a drift schedule");
    SchemaFlags sched_schema;
    std::string sched_input, sched_scenario, sched_kind, sched_out_dir;
    int sched_periods = 1;
    std::int64_t sched_total = 0;
    std::uint64_t sched_seed = 0;
    sched->add_option("--input", sched_input, "base dataset CSV")->required();
    sched->add_option("--scenario", sched_scenario,
                      "scenario config (source/target groups)")->required();
    sched->add_option("--kind", sched_kind, "sudden|gradual|incremental")
        ->required()
        ->check(CLI::IsMember({"sudden", "gradual", "incremental"}));
    sched->add_option("--periods", sched_periods, "number of periods")->required();
    sched->add_option("--total", sched_total, "total claims to transfer")->required();
    sched->add_option("--seed", sched_seed, "schedule seed")->required();
    sched->add_option("--out-dir", sched_out_dir, "directory for period CSVs")->required();
    sched_schema.attach(sched);

    // report
    auto* rep = app.add_subcommand(
        "report", "plot-ready files from an emitted monitor report (no recomputation)");
    std::string rep_report, rep_replicates, rep_prefix;
    int rep_bins = 30;
    rep->add_option("--report", rep_report, "monitor report JSON")->required();
    rep->add_option("--replicates", rep_replicates, "replicate CSV from --replicates-out");
    rep->add_option("--bins", rep_bins, "histogram bin count");
    rep->add_option("--out-prefix", rep_prefix, "output path prefix")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("driftmon");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (*agg) {
        Dataset d = load_dataset(agg_input, agg_schema, agg_drop_zero);
        AggregationKey key = agg_keys.empty()
                                 ? all_covariates_key(d)
                                 : AggregationKey{[&] {
                                       std::vector<std::string> cols;
                                       std::stringstream ss(agg_keys);
                                       std::string c;
                                       while (std::getline(ss, c, ',')) cols.push_back(c);
                                       return cols;
                                   }()};
        write_csv(preaggregate(d, key), agg_output, agg_schema.resolve());
        return kExitOk;
    }

    if (*fit) {
        Dataset d = load_dataset(fit_input, fit_schema, false);
        const DesignSpec spec = DesignSpec::from_config_file(fit_design);
        const GlmModel model = fit_poisson(d, spec, fit_tol, fit_max_iter);
        for (const auto& w : model.fit.warnings) std::cerr << "warning: " << w << '\n';
        write_text(fit_model_out, model.to_json() + "\n");
        return kExitOk;
    }

    if (*pred) {
        Dataset d = load_dataset(pred_input, pred_schema, false);
        std::ifstream in(pred_model);
        if (!in) throw Error("cannot open model: " + pred_model);
        std::ostringstream buf;
        buf << in.rdbuf();
        const GlmModel model = GlmModel::from_json(buf.str());
        CsvColumnMap out_map = pred_schema.resolve();
        if (out_map.prediction_col.empty()) out_map.prediction_col = "prediction";
        write_csv(predict(model, d), pred_output, out_map);
        return kExitOk;
    }

    if (*gini_cmd) {
        Dataset d = load_dataset(gini_input, gini_schema, false);
        const auto obs =
            score_dataset(d, gini_metrics.weighting_mode(), gini_metrics.score_kind());
        const GiniResult g =
            gini(obs, gini_metrics.tie_policy(), gini_metrics.weighting_mode());
        emit(gini_output, gini_to_json(g).dump(2));
        return kExitOk;
    }

    if (*cap_cmd) {
        Dataset d = load_dataset(cap_input, cap_schema, false);
        const auto obs =
            score_dataset(d, cap_metrics.weighting_mode(), cap_metrics.score_kind());
        const CapCurve curve = empirical_cap(
            obs, cap_order == "response" ? CapOrdering::Response : CapOrdering::Score,
            cap_metrics.tie_policy(), cap_metrics.weighting_mode());
        curve.validate();
        if (!cap_output.empty() || cap_json_output.empty()) {
            std::ostringstream out;
            out << "alpha,cap\n";
            char buf[32];
            for (const auto& p : curve.points) {
                auto [p1, e1] = std::to_chars(buf, buf + sizeof(buf), p.x);
                out.write(buf, p1 - buf);
                out << ',';
                auto [p2, e2] = std::to_chars(buf, buf + sizeof(buf), p.cap);
                out.write(buf, p2 - buf);
                out << '\n';
            }
            if (cap_output.empty()) {
                std::cout << out.str();
            } else {
                write_text(cap_output, out.str());
            }
        }
        if (!cap_json_output.empty()) {
            json j;
            j["weighting"] = cap_metrics.weighting;
            json points = json::array();
            for (const auto& p : curve.points) points.push_back({p.x, p.cap});
            j["points"] = std::move(points);
            write_text(cap_json_output, j.dump(2) + "\n");
        }
        return kExitOk;
    }

    if (*boot) {
        Dataset d = load_dataset(boot_input, boot_schema, false);
        BootstrapConfig cfg;
        cfg.replicates = boot_B;
        cfg.seed = boot_seed;
        cfg.tie_policy = boot_metrics.tie_policy();
        cfg.weighting = boot_metrics.weighting_mode();
        cfg.threads = boot_threads;
        cfg.keep_replicates = !boot_replicates_out.empty();
        const auto obs = score_dataset(d, cfg.weighting, boot_metrics.score_kind());
        const NullDistribution nd = bootstrap_null(obs, cfg);
        if (!boot_replicates_out.empty()) {
            write_replicates_csv(boot_replicates_out, nd.replicate_values);
        }
        emit(boot_output, null_to_json(nd).dump(2));
        return kExitOk;
    }

    if (*test_cmd) {
        const NullDistribution nd = null_from_json(test_null);
        const DriftTestResult r =
            drift_test(test_gini_new, nd, test_alpha,
                       test_sided == "two-sided" ? TestSidedness::TwoSided
                                                 : TestSidedness::OneSidedDeterioration);
        json j{{"gini_new", r.gini_new},
               {"z", r.z},
               {"p_two_sided", r.p_two_sided},
               {"p_one_sided", r.p_one_sided_deterioration},
               {"alpha", r.alpha},
               {"sidedness", test_sided},
               {"reject", r.reject}};
        emit(test_output, j.dump(2));
        return kExitOk;
    }

    if (*mon) {
        std::vector<std::string> warnings;
        Dataset old_d = load_dataset(mon_old, mon_schema, mon_drop_zero, &warnings);
        Dataset new_d = load_dataset(mon_new, mon_schema, mon_drop_zero, &warnings);
        BootstrapConfig cfg;
        cfg.replicates = mon_B;
        cfg.seed = mon_seed;
        cfg.tie_policy = mon_metrics.tie_policy();
        cfg.weighting = mon_metrics.weighting_mode();
        cfg.threads = mon_threads;
        cfg.keep_replicates = !mon_replicates_out.empty();
        MonitoringReport report =
            monitor(old_d, new_d, cfg, mon_alpha,
                    mon_sided == "two-sided" ? TestSidedness::TwoSided
                                             : TestSidedness::OneSidedDeterioration,
                    mon_allow_smaller);
        report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
        if (!mon_replicates_out.empty()) {
            write_replicates_csv(mon_replicates_out,
                                 report.null_distribution.replicate_values);
        }
        emit(mon_output, report.to_json());
        return report.test.reject ? kExitReject : kExitOk;
    }

    if (*inj) {
        Dataset d = load_dataset(inj_input, inj_schema, false);
        const DriftScenario scenario = DriftScenario::from_config_file(inj_scenario);
        write_csv(inject_drift(d, scenario), inj_output, inj_schema.resolve());
        return kExitOk;
    }

    if (*sim) {
        const SyntheticSpec spec = SyntheticSpec::from_config_file(sim_spec);
        const Dataset d = generate_portfolio(spec);
        CsvColumnMap map;
        map.exposure_col = "exposure";
        map.response_col = "claims";
        map.prediction_col = "prediction";
        map.covariates = d.schema;
        write_csv(d, sim_output, map);
        return kExitOk;
    }

    if (*sched) {
        Dataset d = load_dataset(sched_input, sched_schema, false);
        const DriftScenario scenario = DriftScenario::from_config_file(sched_scenario);
        const DriftKind kind = sched_kind == "sudden"      ? DriftKind::Sudden
                               : sched_kind == "gradual"   ? DriftKind::Gradual
                                                           : DriftKind::Incremental;
        const auto periods = drift_schedule(d, kind, sched_periods, sched_total,
                                            scenario.source, scenario.target, sched_seed);
        std::filesystem::create_directories(sched_out_dir);
        for (const auto& [name, dataset] : periods) {
            write_csv(dataset, sched_out_dir + "/" + name + ".csv", sched_schema.resolve());
        }
        return kExitOk;
    }

    if (*rep) {
        std::ifstream in(rep_report);
        if (!in) throw Error("cannot open report: " + rep_report);
        std::ostringstream buf;
        buf << in.rdbuf();
        const MonitoringReport report = MonitoringReport::from_json(buf.str());

        std::ostringstream summary;
        summary << "old data:   " << report.old_provenance << " (n=" << report.n_old << ")\n"
                << "new data:   " << report.new_provenance << " (n=" << report.n_new << ")\n"
                << "null:       mean=" << report.null_distribution.mean
                << " sd=" << report.null_distribution.sd << " (B=" << report.config.replicates
                << ")\n"
                << "gini (new): " << report.gini_new.value << "\n"
                << "z:          " << report.test.z << "\n"
                << "p (2-sided):" << report.test.p_two_sided << "\n"
                << "p (deter.): " << report.test.p_one_sided_deterioration << "\n"
                << "alpha:      " << report.test.alpha << "\n"
                << "decision:   " << (report.test.reject ? "REJECT (refit advised)" : "keep")
                << "\n";
        for (const auto& w : report.warnings) summary << "warning:    " << w << "\n";
        write_text(rep_prefix + "summary.txt", summary.str());

        if (!rep_replicates.empty()) {
            std::ifstream rin(rep_replicates);
            if (!rin) throw Error("cannot open replicates: " + rep_replicates);
            std::vector<double> values;
            std::string line;
            std::getline(rin, line);  // header
            while (std::getline(rin, line)) {
                if (!line.empty()) values.push_back(std::stod(line));
            }
            if (values.empty()) throw Error("replicate file has no values");
            if (rep_bins < 1) throw Error("bins must be positive");
            const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
            const double lo = *lo_it, hi = *hi_it;
            const double width = (hi - lo) / rep_bins;
            std::vector<std::size_t> counts(static_cast<std::size_t>(rep_bins), 0);
            for (double v : values) {
                auto b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width)
                                     : std::size_t{0};
                if (b >= counts.size()) b = counts.size() - 1;
                ++counts[b];
            }
            std::ostringstream hist;
            hist << "bin_lo,bin_hi,count\n";
            for (std::size_t b = 0; b < counts.size(); ++b) {
                hist << lo + width * static_cast<double>(b) << ','
                     << lo + width * static_cast<double>(b + 1) << ',' << counts[b] << '\n';
            }
            write_text(rep_prefix + "hist.csv", hist.str());
        }
        return kExitOk;
    }

    return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        return run_or_throw(args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace driftmon::cli
