#include <doctest.h>

#include <cmath>

#include "driftmon/drift.hpp"
#include "driftmon/glm.hpp"
#include "driftmon/metrics.hpp"

using namespace driftmon;

namespace {

SyntheticSpec two_group_spec(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.groups = {{"low", 0.05, 0.5}, {"high", 0.15, 0.5}};
    return spec;
}

DesignSpec group_design() {
    DesignSpec spec;
    spec.covariates.push_back({"group", CategoricalEncoding{"low"}});
    return spec;
}

}  // namespace

TEST_SUITE("glm") {

TEST_CASE("intercept-only model reproduces the portfolio frequency") {
    const Dataset d = generate_portfolio(two_group_spec(5000, 11));
    const GlmModel model = fit_poisson(d, DesignSpec{});
    REQUIRE(model.fit.converged);
    REQUIRE(model.coefficients.size() == 1);
    const double fitted = std::exp(model.coefficients[0]);
    const double portfolio =
        static_cast<double>(d.total_response()) / d.total_exposure();
    CHECK(fitted == doctest::Approx(portfolio).epsilon(1e-12));
}

TEST_CASE("single binary covariate recovers per-group frequencies") {
    const Dataset d = generate_portfolio(two_group_spec(8000, 23));
    const GlmModel model = fit_poisson(d, group_design());
    REQUIRE(model.fit.converged);
    const Dataset scored = predict(model, d);

    // Closed-form two-cell MLE: each group's fitted frequency is its
    // observed claims over exposure.
    double v_low = 0, v_high = 0, y_low = 0, y_high = 0;
    for (const auto& r : d.records) {
        const bool low = std::get<std::string>(r.covariates[0]) == "low";
        (low ? v_low : v_high) += r.exposure;
        (low ? y_low : y_high) += static_cast<double>(r.response);
    }
    for (const auto& r : scored.records) {
        const bool low = std::get<std::string>(r.covariates[0]) == "low";
        const double expected = low ? y_low / v_low : y_high / v_high;
        REQUIRE(*r.prediction == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("portfolio balance holds at any converged fit") {
    const Dataset d = generate_portfolio(two_group_spec(6000, 37));
    const GlmModel model = fit_poisson(d, group_design());
    const Dataset scored = predict(model, d);
    double predicted = 0.0;
    for (const auto& r : scored.records) predicted += *r.prediction * r.exposure;
    CHECK(predicted ==
          doctest::Approx(static_cast<double>(d.total_response())).epsilon(1e-8));
}

TEST_CASE("time-split invariance of the fit, with metric distortion") {
    const Dataset d = generate_portfolio(two_group_spec(4000, 5));
    const GlmModel base = fit_poisson(d, group_design());
    const Dataset split = time_split_extreme(d);
    const GlmModel refit = fit_poisson(split, group_design());

    REQUIRE(base.coefficients.size() == refit.coefficients.size());
    for (std::size_t i = 0; i < base.coefficients.size(); ++i) {
        CHECK(base.coefficients[i] == doctest::Approx(refit.coefficients[i]).epsilon(1e-8));
    }

    // Same coefficients, very different ranking metric.
    const auto obs_before =
        score_dataset(predict(base, d), WeightingMode::CountWeighting);
    const auto obs_after =
        score_dataset(predict(base, split), WeightingMode::CountWeighting);
    const double g_before =
        gini(obs_before, TiePolicy::average_of_extremes(), WeightingMode::CountWeighting).value;
    const double g_after =
        gini(obs_after, TiePolicy::average_of_extremes(), WeightingMode::CountWeighting).value;
    CHECK(g_after < g_before);
}

TEST_CASE("aggregation invariance of the fit") {
    const Dataset d = generate_portfolio(two_group_spec(3000, 41));
    const Dataset agg = preaggregate(d, all_covariates_key(d));
    const GlmModel base = fit_poisson(d, group_design());
    const GlmModel on_agg = fit_poisson(agg, group_design());
    REQUIRE(base.coefficients.size() == on_agg.coefficients.size());
    for (std::size_t i = 0; i < base.coefficients.size(); ++i) {
        CHECK(base.coefficients[i] == doctest::Approx(on_agg.coefficients[i]).epsilon(1e-8));
    }
}

TEST_CASE("numeric binning encodes buckets") {
    Dataset d;
    d.provenance = "bins";
    d.schema = {{"age", CovariateKind::Numeric}};
    auto add = [&](double age, double v, std::int64_t y) {
        PolicyRecord r;
        r.covariates = {age};
        r.exposure = v;
        r.response = y;
        d.records.push_back(std::move(r));
    };
    for (int rep = 0; rep < 50; ++rep) {
        add(20.0 + rep % 10, 1.0, rep % 7 == 0 ? 1 : 0);
        add(40.0 + rep % 10, 1.0, rep % 3 == 0 ? 1 : 0);
    }

    DesignSpec spec;
    spec.covariates.push_back({"age", NumericBinning{{35.0}, 0}});
    const GlmModel model = fit_poisson(d, spec);
    REQUIRE(model.column_names.size() == 2);

    double v_young = 0, v_old = 0, y_young = 0, y_old = 0;
    for (const auto& r : d.records) {
        const bool young = std::get<double>(r.covariates[0]) < 35.0;
        (young ? v_young : v_old) += r.exposure;
        (young ? y_young : y_old) += static_cast<double>(r.response);
    }
    const Dataset scored = predict(model, d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const bool young = std::get<double>(d.records[i].covariates[0]) < 35.0;
        const double expected = young ? y_young / v_young : y_old / v_old;
        REQUIRE(*scored.records[i].prediction == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("rank-deficient design is rejected with column names") {
    Dataset d;
    d.provenance = "rank";
    d.schema = {{"a", CovariateKind::Categorical}, {"b", CovariateKind::Categorical}};
    auto add = [&](const std::string& a, const std::string& b) {
        PolicyRecord r;
        r.covariates = {a, b};
        r.exposure = 1.0;
        r.response = 1;
        d.records.push_back(std::move(r));
    };
    // b duplicates a exactly, so b's dummy column is collinear with a's.
    add("x", "u");
    add("x", "u");
    add("y", "w");
    add("y", "w");

    DesignSpec spec;
    spec.covariates.push_back({"a", CategoricalEncoding{"x"}});
    spec.covariates.push_back({"b", CategoricalEncoding{"u"}});
    CHECK_THROWS_WITH_AS(fit_poisson(d, spec), doctest::Contains("RankDeficientDesign"),
                         Error);
}

TEST_CASE("unseen level at prediction is rejected") {
    const Dataset d = generate_portfolio(two_group_spec(500, 3));
    const GlmModel model = fit_poisson(d, group_design());
    Dataset other = d;
    other.records[0].covariates[0] = std::string("unknown");
    CHECK_THROWS_WITH_AS(predict(model, other), doctest::Contains("UnseenLevel"), Error);
}

TEST_CASE("model JSON round-trips coefficients exactly") {
    const Dataset d = generate_portfolio(two_group_spec(1000, 17));
    const GlmModel model = fit_poisson(d, group_design());
    const GlmModel back = GlmModel::from_json(model.to_json());
    REQUIRE(back.coefficients.size() == model.coefficients.size());
    for (std::size_t i = 0; i < model.coefficients.size(); ++i) {
        CHECK(back.coefficients[i] == model.coefficients[i]);
    }
    CHECK(back.column_names == model.column_names);

    // Predictions through the round-tripped model are identical.
    const Dataset a = predict(model, d);
    const Dataset b = predict(back, d);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(*a.records[i].prediction == *b.records[i].prediction);
    }
}

TEST_CASE("predict then balance_correct is a fixed point for a saturated model") {
    const Dataset d = generate_portfolio(two_group_spec(3000, 29));
    const GlmModel model = fit_poisson(d, group_design());
    const Dataset scored = predict(model, d);
    const Dataset corrected = balance_correct(scored);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        CHECK(*corrected.records[i].prediction ==
              doctest::Approx(*scored.records[i].prediction).epsilon(1e-9));
    }
}

}  // TEST_SUITE
