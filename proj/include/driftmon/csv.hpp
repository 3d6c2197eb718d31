#pragma once

// CSV ingestion and emission for policy datasets. Dialect: comma separated,
// first row is the header, UTF-8, RFC 4180 quoting (embedded commas, quotes
// and newlines inside double-quoted fields).

#include <string>
#include <vector>

#include "driftmon/dataset.hpp"

namespace driftmon {

// Column-role mapping. Covariate kinds default to categorical; numeric
// covariates are declared as "name:num" in config/CLI form.
struct CsvColumnMap {
    std::string exposure_col;
    std::string response_col;
    std::string prediction_col;           // empty = no prediction column
    std::vector<CovariateSpec> covariates;

    // Parses "key = value" lines: exposure_col, response_col, prediction_col,
    // covariate_cols (comma separated, each "name" or "name:cat|num").
    static CsvColumnMap from_config_file(const std::string& path);
    static std::vector<CovariateSpec> parse_covariate_list(const std::string& spec);
};

struct LoadOptions {
    bool drop_zero_exposure = false;  // downgrade ZeroExposure to drop-with-warning
};

struct LoadResult {
    Dataset dataset;
    std::vector<std::string> warnings;
};

// Errors: MissingColumn, ParseError(row, column), ZeroExposure(row); each
// message names the offending location. Row numbers count data rows from 1.
LoadResult load_csv(const std::string& path, const CsvColumnMap& map,
                    const LoadOptions& options = {});

// Emits exposure/response/prediction plus all covariates. Doubles are written
// in their shortest round-trip form, so load -> write -> load is value-exact.
void write_csv(const Dataset& d, const std::string& path, const CsvColumnMap& map);

// Low-level RFC 4180 row reader shared with the config tooling.
std::vector<std::vector<std::string>> parse_csv_text(const std::string& text);

}  // namespace driftmon
