#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "driftmon/csv.hpp"
#include "driftmon/dataset.hpp"

using namespace driftmon;

namespace {

Dataset toy_dataset() {
    Dataset d;
    d.provenance = "toy";
    d.schema = {{"age", CovariateKind::Numeric}, {"region", CovariateKind::Categorical}};
    auto add = [&](double age, const std::string& region, double exposure,
                   std::int64_t response, double prediction) {
        PolicyRecord r;
        r.covariates = {age, region};
        r.exposure = exposure;
        r.response = response;
        r.prediction = prediction;
        d.records.push_back(std::move(r));
    };
    add(30.0, "north", 0.5, 1, 0.2);
    add(30.0, "north", 0.5, 0, 0.4);
    add(40.0, "south", 1.0, 0, 0.1);
    add(25.0, "north", 0.25, 2, 0.3);
    return d;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("preaggregate merges identical key tuples with weighted predictions") {
    Dataset d = toy_dataset();
    const Dataset agg = preaggregate(d, all_covariates_key(d));
    REQUIRE(agg.size() == 3);

    // The two (30, north) rows collapse: exposures 0.5+0.5, responses 1+0,
    // prediction (0.2*0.5 + 0.4*0.5) / 1.0 = 0.3.
    bool found = false;
    for (const auto& r : agg.records) {
        if (std::get<double>(r.covariates[0]) == 30.0) {
            found = true;
            CHECK(r.exposure == doctest::Approx(1.0));
            CHECK(r.response == 1);
            CHECK(*r.prediction == doctest::Approx(0.3));
        }
    }
    CHECK(found);

    CHECK(agg.total_response() == d.total_response());
    CHECK(agg.total_exposure() == doctest::Approx(d.total_exposure()).epsilon(1e-15));
}

TEST_CASE("preaggregate with all-distinct keys preserves content and is idempotent") {
    Dataset d = toy_dataset();
    d.records.pop_back();
    d.records[1].covariates = {CovariateValue{31.0}, CovariateValue{std::string("north")}};
    const Dataset agg = preaggregate(d, all_covariates_key(d));
    REQUIRE(agg.size() == d.size());

    const Dataset twice = preaggregate(agg, all_covariates_key(agg));
    REQUIRE(twice.size() == agg.size());
    for (std::size_t i = 0; i < agg.size(); ++i) {
        CHECK(twice.records[i].exposure == agg.records[i].exposure);
        CHECK(twice.records[i].response == agg.records[i].response);
        CHECK(*twice.records[i].prediction == *agg.records[i].prediction);
    }
}

TEST_CASE("preaggregate rejects mixed prediction presence") {
    Dataset d = toy_dataset();
    d.records[2].prediction.reset();
    CHECK_THROWS_WITH_AS(preaggregate(d, all_covariates_key(d)),
                         doctest::Contains("MixedPredictionPresence"), Error);
}

TEST_CASE("time_split_extreme fans claims out into one-day rows") {
    Dataset d;
    d.provenance = "split-toy";
    d.schema = {{"g", CovariateKind::Categorical}};
    PolicyRecord r;
    r.covariates = {std::string("a")};
    r.exposure = 1.0;
    r.response = 2;
    r.prediction = 0.25;
    d.records.push_back(r);

    const Dataset split = time_split_extreme(d);
    REQUIRE(split.size() == 3);
    CHECK(split.records[0].exposure == doctest::Approx(1.0 / 365.0));
    CHECK(split.records[0].response == 1);
    CHECK(split.records[1].exposure == doctest::Approx(1.0 / 365.0));
    CHECK(split.records[1].response == 1);
    CHECK(split.records[2].exposure == doctest::Approx(1.0 - 2.0 / 365.0));
    CHECK(split.records[2].response == 0);
    // Frequency predictions survive the split unchanged.
    for (const auto& row : split.records) CHECK(*row.prediction == 0.25);

    CHECK(split.total_response() == d.total_response());
    CHECK(split.total_exposure() == doctest::Approx(d.total_exposure()).epsilon(1e-12));
}

TEST_CASE("time_split_extreme passes zero-claim records through") {
    Dataset d;
    d.provenance = "zero";
    d.schema = {{"g", CovariateKind::Categorical}};
    PolicyRecord r;
    r.covariates = {std::string("a")};
    r.exposure = 0.5;
    r.response = 0;
    d.records.push_back(r);
    const Dataset split = time_split_extreme(d);
    REQUIRE(split.size() == 1);
    CHECK(split.records[0].exposure == 0.5);
}

TEST_CASE("time_split_extreme rejects exposure below response x day_fraction") {
    Dataset d;
    d.provenance = "thin";
    d.schema = {{"g", CovariateKind::Categorical}};
    PolicyRecord r;
    r.covariates = {std::string("a")};
    r.exposure = 0.002;
    r.response = 1;
    d.records.push_back(r);
    CHECK_THROWS_WITH_AS(time_split_extreme(d), doctest::Contains("InsufficientExposure"),
                         Error);
}

TEST_CASE("time_split then aggregate recovers per-key totals") {
    Dataset d = toy_dataset();
    // Make keys unique so per-key totals are per-record totals.
    d.records[1].covariates = {CovariateValue{31.0}, CovariateValue{std::string("north")}};
    const Dataset split = time_split_extreme(d);
    const Dataset back = preaggregate(split, all_covariates_key(split));
    const Dataset direct = preaggregate(d, all_covariates_key(d));
    REQUIRE(back.size() == direct.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back.records[i].response == direct.records[i].response);
        CHECK(back.records[i].exposure ==
              doctest::Approx(direct.records[i].exposure).epsilon(1e-12));
    }
}

TEST_CASE("load_csv enforces schema and reports offending rows") {
    const auto path = temp_file("driftmon_test_load.csv");
    {
        std::ofstream out(path);
        out << "Exposure,ClaimNb,DrivAge,Region\n"
            << "1.0,0,30,\"north, coastal\"\n"
            << "0.5,1,45,south\n"
            << "0.25,0,28,north\n";
    }
    CsvColumnMap map;
    map.exposure_col = "Exposure";
    map.response_col = "ClaimNb";
    map.covariates = {{"DrivAge", CovariateKind::Numeric},
                      {"Region", CovariateKind::Categorical}};

    const LoadResult loaded = load_csv(path.string(), map);
    REQUIRE(loaded.dataset.size() == 3);
    CHECK(loaded.dataset.total_exposure() == doctest::Approx(1.75));
    CHECK(loaded.dataset.total_response() == 1);
    CHECK(std::get<std::string>(loaded.dataset.records[0].covariates[1]) == "north, coastal");

    SUBCASE("missing column is named") {
        CsvColumnMap bad = map;
        bad.prediction_col = "fitted";
        CHECK_THROWS_WITH_AS(load_csv(path.string(), bad),
                             doctest::Contains("MissingColumn"), Error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("load_csv zero-exposure handling") {
    const auto path = temp_file("driftmon_test_zero.csv");
    {
        std::ofstream out(path);
        out << "v,y,g\n1.0,0,a\n0.0,1,b\n2.0,2,c\n";
    }
    CsvColumnMap map;
    map.exposure_col = "v";
    map.response_col = "y";
    map.covariates = {{"g", CovariateKind::Categorical}};

    SUBCASE("strict mode names the row") {
        CHECK_THROWS_WITH_AS(load_csv(path.string(), map),
                             doctest::Contains("ZeroExposure: row 2"), Error);
    }
    SUBCASE("drop mode keeps the rest and warns") {
        LoadOptions opt;
        opt.drop_zero_exposure = true;
        const LoadResult loaded = load_csv(path.string(), map, opt);
        CHECK(loaded.dataset.size() == 2);
        REQUIRE(loaded.warnings.size() == 1);
        CHECK(loaded.warnings[0].find("row 2") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("load_csv rejects non-integer responses with row and column") {
    const auto path = temp_file("driftmon_test_frac.csv");
    {
        std::ofstream out(path);
        out << "v,y,g\n1.0,0.5,a\n";
    }
    CsvColumnMap map;
    map.exposure_col = "v";
    map.response_col = "y";
    map.covariates = {{"g", CovariateKind::Categorical}};
    CHECK_THROWS_WITH_AS(load_csv(path.string(), map), doctest::Contains("row 1"), Error);
    std::filesystem::remove(path);
}

TEST_CASE("csv round-trip is value-exact") {
    Dataset d = toy_dataset();
    d.records[0].exposure = 0.1;  // not exactly representable
    d.records[1].exposure = 1.0 / 3.0;
    CsvColumnMap map;
    map.exposure_col = "v";
    map.response_col = "y";
    map.prediction_col = "p";
    map.covariates = d.schema;

    const auto path = temp_file("driftmon_test_roundtrip.csv");
    write_csv(d, path.string(), map);
    const Dataset back = load_csv(path.string(), map).dataset;
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.records[i].exposure == d.records[i].exposure);
        CHECK(back.records[i].response == d.records[i].response);
        CHECK(*back.records[i].prediction == *d.records[i].prediction);
        CHECK(back.records[i].covariates == d.records[i].covariates);
    }
    std::filesystem::remove(path);
}

TEST_CASE("schema config file parsing") {
    const auto path = temp_file("driftmon_test_schema.cfg");
    {
        std::ofstream out(path);
        out << "# mapping\n"
            << "exposure_col = Exposure\n"
            << "response_col = ClaimNb\n"
            << "prediction_col = fitted\n"
            << "covariate_cols = DrivAge:num, Region\n";
    }
    const CsvColumnMap map = CsvColumnMap::from_config_file(path.string());
    CHECK(map.exposure_col == "Exposure");
    CHECK(map.response_col == "ClaimNb");
    CHECK(map.prediction_col == "fitted");
    REQUIRE(map.covariates.size() == 2);
    CHECK(map.covariates[0].kind == CovariateKind::Numeric);
    CHECK(map.covariates[1].kind == CovariateKind::Categorical);
    std::filesystem::remove(path);
}

TEST_CASE("dataset validation rejects bad records") {
    Dataset d = toy_dataset();
    SUBCASE("empty") {
        d.records.clear();
        CHECK_THROWS_AS(d.validate(), Error);
    }
    SUBCASE("nonpositive exposure") {
        d.records[0].exposure = 0.0;
        CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("ZeroExposure"), Error);
    }
    SUBCASE("negative response") {
        d.records[0].response = -1;
        CHECK_THROWS_AS(d.validate(), Error);
    }
    SUBCASE("negative prediction") {
        d.records[0].prediction = -0.1;
        CHECK_THROWS_AS(d.validate(), Error);
    }
}

}  // TEST_SUITE
