#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "driftmon/drift.hpp"

using namespace driftmon;

namespace {

SyntheticSpec base_spec(std::size_t n = 2000, std::uint64_t seed = 99) {
    SyntheticSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.groups = {{"low", 0.05, 0.5}, {"high", 0.20, 0.5}};
    return spec;
}

GroupPredicate group_is(const std::string& label) {
    GroupPredicate p;
    p.covariate = "group";
    p.values = {label};
    return p;
}

std::int64_t group_response(const Dataset& d, const GroupPredicate& p) {
    std::int64_t total = 0;
    for (std::size_t i : p.select(d)) total += d.records[i].response;
    return total;
}

}  // namespace

TEST_SUITE("drift") {

TEST_CASE("generate_portfolio respects spec and seed") {
    const Dataset a = generate_portfolio(base_spec());
    const Dataset b = generate_portfolio(base_spec());
    REQUIRE(a.size() == 2000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.records[i].exposure == b.records[i].exposure);
        CHECK(a.records[i].response == b.records[i].response);
        CHECK(a.records[i].covariates == b.records[i].covariates);
    }
    for (const auto& r : a.records) {
        CHECK(r.exposure > 0.05);
        CHECK(r.exposure <= 1.0);
    }

    SUBCASE("different seed moves the draws") {
        auto spec = base_spec();
        spec.seed = 100;
        const Dataset c = generate_portfolio(spec);
        bool any_different = false;
        for (std::size_t i = 0; i < a.size() && !any_different; ++i) {
            any_different = a.records[i].exposure != c.records[i].exposure;
        }
        CHECK(any_different);
    }
}

TEST_CASE("empirical group frequencies track the spec within 3 standard errors") {
    auto spec = base_spec(50000, 8);
    const Dataset d = generate_portfolio(spec);
    for (const auto& g : spec.groups) {
        double exposure = 0.0, claims = 0.0;
        for (const auto& r : d.records) {
            if (std::get<std::string>(r.covariates[0]) == g.label) {
                exposure += r.exposure;
                claims += static_cast<double>(r.response);
            }
        }
        const double observed = claims / exposure;
        const double se = std::sqrt(g.frequency / exposure);  // Poisson CLT
        CHECK(std::abs(observed - g.frequency) < 3.0 * se);
    }
}

TEST_CASE("near-zero frequency yields almost surely zero responses") {
    SyntheticSpec spec;
    spec.n = 100;
    spec.seed = 4;
    spec.groups = {{"tiny", 1e-9, 1.0}};
    const Dataset d = generate_portfolio(spec);
    CHECK(d.total_response() == 0);
}

TEST_CASE("inject_drift bookkeeping") {
    const Dataset d = generate_portfolio(base_spec());
    DriftScenario s;
    s.source = group_is("high");
    s.target = group_is("low");
    s.transfer_count = 25;
    s.seed = 7;

    const std::int64_t source_before = group_response(d, s.source);
    const std::int64_t target_before = group_response(d, s.target);

    const Dataset drifted = inject_drift(d, s);
    CHECK(drifted.total_response() == d.total_response());
    CHECK(group_response(drifted, s.source) == source_before - 25);
    CHECK(group_response(drifted, s.target) == target_before + 25);

    // Exposures, covariates and predictions bit-identical; claim moves are
    // single-step on distinct records.
    std::int64_t decremented = 0, incremented = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(drifted.records[i].exposure == d.records[i].exposure);
        CHECK(drifted.records[i].covariates == d.records[i].covariates);
        CHECK(*drifted.records[i].prediction == *d.records[i].prediction);
        const auto delta = drifted.records[i].response - d.records[i].response;
        REQUIRE((delta == -1 || delta == 0 || delta == 1));
        if (delta == -1) ++decremented;
        if (delta == 1) ++incremented;
        if (delta == -1) CHECK(d.records[i].response >= 1);
    }
    CHECK(decremented == 25);
    CHECK(incremented == 25);
}

TEST_CASE("inject_drift with zero transfers is the identity") {
    const Dataset d = generate_portfolio(base_spec());
    DriftScenario s;
    s.source = group_is("high");
    s.target = group_is("low");
    s.transfer_count = 0;
    const Dataset same = inject_drift(d, s);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(same.records[i].response == d.records[i].response);
    }
}

TEST_CASE("inject_drift determinism and seed sensitivity") {
    const Dataset d = generate_portfolio(base_spec());
    DriftScenario s;
    s.source = group_is("high");
    s.target = group_is("low");
    s.transfer_count = 30;
    s.seed = 1;
    const Dataset a = inject_drift(d, s);
    const Dataset b = inject_drift(d, s);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(a.records[i].response == b.records[i].response);
    }

    s.seed = 2;
    const Dataset c = inject_drift(d, s);
    CHECK(group_response(c, s.source) == group_response(a, s.source));
    CHECK(group_response(c, s.target) == group_response(a, s.target));
    bool any_different = false;
    for (std::size_t i = 0; i < d.size() && !any_different; ++i) {
        any_different = a.records[i].response != c.records[i].response;
    }
    CHECK(any_different);
}

TEST_CASE("sampling prefix property: smaller transfers nest inside larger ones") {
    const Dataset d = generate_portfolio(base_spec());
    DriftScenario s;
    s.source = group_is("high");
    s.target = group_is("low");
    s.seed = 12;
    s.transfer_count = 10;
    const Dataset small = inject_drift(d, s);
    s.transfer_count = 40;
    const Dataset large = inject_drift(d, s);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto delta_small = small.records[i].response - d.records[i].response;
        const auto delta_large = large.records[i].response - d.records[i].response;
        if (delta_small == -1) CHECK(delta_large == -1);
        if (delta_small == 1) CHECK(delta_large == 1);
    }
}

TEST_CASE("inject_drift failure modes") {
    const Dataset d = generate_portfolio(base_spec(200, 77));
    SUBCASE("insufficient claims in source") {
        DriftScenario s;
        s.source = group_is("high");
        s.target = group_is("low");
        s.transfer_count = 100000;
        CHECK_THROWS_WITH_AS(inject_drift(d, s),
                             doctest::Contains("InsufficientClaimsInSource"), Error);
    }
    SUBCASE("overlapping groups") {
        DriftScenario s;
        s.source = group_is("high");
        s.target.covariate = "group";
        s.target.values = {"high", "low"};
        s.transfer_count = 1;
        CHECK_THROWS_WITH_AS(inject_drift(d, s), doctest::Contains("DisjointnessViolation"),
                             Error);
    }
    SUBCASE("empty selection") {
        DriftScenario s;
        s.source = group_is("nonexistent");
        s.target = group_is("low");
        s.transfer_count = 1;
        CHECK_THROWS_WITH_AS(inject_drift(d, s), doctest::Contains("selects no records"),
                             Error);
    }
}

TEST_CASE("numeric range predicates select half-open intervals") {
    Dataset d;
    d.provenance = "ages";
    d.schema = {{"age", CovariateKind::Numeric}};
    for (double age : {25.0, 30.0, 34.999, 35.0, 40.0}) {
        PolicyRecord r;
        r.covariates = {age};
        r.exposure = 1.0;
        r.response = 1;
        d.records.push_back(std::move(r));
    }
    GroupPredicate p;
    p.covariate = "age";
    p.lo = 25.0;
    p.hi = 35.0;
    const auto selected = p.select(d);
    REQUIRE(selected.size() == 3);  // 35.0 excluded
}

TEST_CASE("drift_schedule shapes") {
    const Dataset d = generate_portfolio(base_spec(3000, 15));
    const auto src = group_is("high");
    const auto tgt = group_is("low");
    const std::int64_t base_target = group_response(d, tgt);

    SUBCASE("single period: every kind equals one full injection") {
        for (auto kind : {DriftKind::Sudden, DriftKind::Gradual, DriftKind::Incremental}) {
            const auto periods = drift_schedule(d, kind, 1, 20, src, tgt, 5);
            REQUIRE(periods.size() == 1);
            CHECK(group_response(periods[0].second, tgt) == base_target + 20);
            CHECK(periods[0].second.total_response() == d.total_response());
        }
    }
    SUBCASE("sudden: all transfer lands in the final period") {
        const auto periods = drift_schedule(d, DriftKind::Sudden, 4, 20, src, tgt, 5);
        REQUIRE(periods.size() == 4);
        for (int k = 0; k < 3; ++k) {
            CHECK(group_response(periods[k].second, tgt) == base_target);
        }
        CHECK(group_response(periods[3].second, tgt) == base_target + 20);
    }
    SUBCASE("incremental: cumulative transfer grows linearly") {
        const auto periods = drift_schedule(d, DriftKind::Incremental, 4, 200, src, tgt, 5);
        REQUIRE(periods.size() == 4);
        for (int k = 0; k < 4; ++k) {
            CHECK(group_response(periods[k].second, tgt) == base_target + 50 * (k + 1));
            CHECK(periods[k].second.total_response() == d.total_response());
        }
    }
    SUBCASE("gradual: active transfers ramp and totals are conserved") {
        const auto periods = drift_schedule(d, DriftKind::Gradual, 5, 100, src, tgt, 5);
        REQUIRE(periods.size() == 5);
        std::int64_t previous = 0;
        for (const auto& [label, period] : periods) {
            CHECK(period.total_response() == d.total_response());
            const std::int64_t moved = group_response(period, tgt) - base_target;
            CHECK(moved >= 0);
            CHECK(moved <= 100);
            previous = moved;
        }
        // Final period has ramp probability 1: the full transfer.
        CHECK(previous == 100);
    }
}

TEST_CASE("scenario and synthetic spec config parsing") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto scenario_path = dir / "driftmon_scenario.cfg";
    {
        std::ofstream out(scenario_path);
        out << "# move claims between age bands\n"
            << "source_covariate = age\n"
            << "source_range = 25 35\n"
            << "target_covariate = age\n"
            << "target_range = 35 45\n"
            << "transfer_count = 150\n"
            << "seed = 9\n";
    }
    const DriftScenario s = DriftScenario::from_config_file(scenario_path.string());
    CHECK(s.source.covariate == "age");
    CHECK(*s.source.lo == 25.0);
    CHECK(*s.source.hi == 35.0);
    CHECK(*s.target.lo == 35.0);
    CHECK(s.transfer_count == 150);
    CHECK(s.seed == 9);

    const auto spec_path = dir / "driftmon_spec.cfg";
    {
        std::ofstream out(spec_path);
        out << "n = 1000\nseed = 3\nexposure_min = 0.1\nexposure_max = 0.9\n"
            << "group = low 0.05 0.6\ngroup = high 0.15 0.4\n";
    }
    const SyntheticSpec spec = SyntheticSpec::from_config_file(spec_path.string());
    CHECK(spec.n == 1000);
    REQUIRE(spec.groups.size() == 2);
    CHECK(spec.groups[1].frequency == 0.15);
    CHECK(spec.exposure_max == 0.9);

    std::filesystem::remove(scenario_path);
    std::filesystem::remove(spec_path);
}

}  // TEST_SUITE
