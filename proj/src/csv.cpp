#include "driftmon/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace driftmon {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double parse_double(const std::string& field, std::size_t row, const std::string& column) {
    const std::string t = trim(field);
    double value = 0.0;
    const auto* begin = t.data();
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || t.empty()) {
        throw Error("ParseError: row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse '" + field + "' as a number");
    }
    return value;
}

std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& field) {
    if (!needs_quoting(field)) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv_text(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            row_has_content = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (row_has_content || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                field.clear();
                rows.push_back(std::move(row));
                row.clear();
                row_has_content = false;
            }
        } else {
            field += c;
            row_has_content = true;
        }
    }
    if (in_quotes) throw Error("unterminated quoted CSV field");
    if (row_has_content || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CovariateSpec> CsvColumnMap::parse_covariate_list(const std::string& spec) {
    std::vector<CovariateSpec> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        CovariateSpec cov;
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) {
            cov.name = item;
        } else {
            cov.name = trim(item.substr(0, colon));
            const std::string kind = trim(item.substr(colon + 1));
            if (kind == "num" || kind == "numeric") {
                cov.kind = CovariateKind::Numeric;
            } else if (kind == "cat" || kind == "categorical") {
                cov.kind = CovariateKind::Categorical;
            } else {
                throw Error("unknown covariate kind '" + kind + "' for column '" + cov.name +
                            "' (expected cat or num)");
            }
        }
        out.push_back(std::move(cov));
    }
    if (out.empty()) throw Error("covariate list is empty");
    return out;
}

CsvColumnMap CsvColumnMap::from_config_file(const std::string& path) {
    CsvColumnMap map;
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema config: " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("bad config line (expected key=value): " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "exposure_col") {
            map.exposure_col = value;
        } else if (key == "response_col") {
            map.response_col = value;
        } else if (key == "prediction_col") {
            map.prediction_col = value;
        } else if (key == "covariate_cols") {
            map.covariates = parse_covariate_list(value);
        } else {
            throw Error("unknown schema config key: " + key);
        }
    }
    if (map.exposure_col.empty() || map.response_col.empty() || map.covariates.empty()) {
        throw Error("schema config must set exposure_col, response_col and covariate_cols");
    }
    return map;
}

LoadResult load_csv(const std::string& path, const CsvColumnMap& map,
                    const LoadOptions& options) {
    const auto rows = parse_csv_text(read_file(path));
    if (rows.empty()) throw Error("empty CSV file: " + path);
    const auto& header = rows.front();

    auto column_of = [&](const std::string& name) -> int {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (trim(header[j]) == name) return static_cast<int>(j);
        }
        return -1;
    };
    auto required_column = [&](const std::string& name) {
        const int j = column_of(name);
        if (j < 0) throw Error("MissingColumn: '" + name + "' not found in " + path);
        return j;
    };

    const int exposure_idx = required_column(map.exposure_col);
    const int response_idx = required_column(map.response_col);
    const int prediction_idx =
        map.prediction_col.empty() ? -1 : required_column(map.prediction_col);
    std::vector<int> cov_idx;
    for (const auto& cov : map.covariates) cov_idx.push_back(required_column(cov.name));

    LoadResult result;
    result.dataset.schema = map.covariates;
    result.dataset.provenance = path;
    result.dataset.records.reserve(rows.size() - 1);

    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        const std::size_t data_row = i;  // 1-based over data rows
        auto field_at = [&](int j) -> const std::string& {
            if (j < 0 || static_cast<std::size_t>(j) >= fields.size()) {
                throw Error("ParseError: row " + std::to_string(data_row) +
                            " has too few fields");
            }
            return fields[static_cast<std::size_t>(j)];
        };

        PolicyRecord r;
        r.exposure = parse_double(field_at(exposure_idx), data_row, map.exposure_col);
        const double resp = parse_double(field_at(response_idx), data_row, map.response_col);
        if (resp < 0.0 || resp != std::floor(resp)) {
            throw Error("ParseError: row " + std::to_string(data_row) + ", column '" +
                        map.response_col + "': response must be a nonnegative integer");
        }
        r.response = static_cast<std::int64_t>(resp);
        if (prediction_idx >= 0) {
            r.prediction = parse_double(field_at(prediction_idx), data_row, map.prediction_col);
            if (!std::isfinite(*r.prediction) || *r.prediction < 0.0) {
                throw Error("ParseError: row " + std::to_string(data_row) + ", column '" +
                            map.prediction_col + "': prediction must be finite and >= 0");
            }
        }
        for (std::size_t k = 0; k < map.covariates.size(); ++k) {
            const std::string& raw = field_at(cov_idx[k]);
            if (map.covariates[k].kind == CovariateKind::Numeric) {
                r.covariates.emplace_back(parse_double(raw, data_row, map.covariates[k].name));
            } else {
                r.covariates.emplace_back(trim(raw));
            }
        }
        if (!(r.exposure > 0.0)) {
            if (options.drop_zero_exposure) {
                result.warnings.push_back("dropped row " + std::to_string(data_row) +
                                          ": nonpositive exposure");
                continue;
            }
            throw Error("ZeroExposure: row " + std::to_string(data_row) + " in " + path +
                        " has exposure " + field_at(exposure_idx));
        }
        result.dataset.records.push_back(std::move(r));
    }
    result.dataset.validate();
    return result;
}

void write_csv(const Dataset& d, const std::string& path, const CsvColumnMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open file for writing: " + path);
    const bool with_pred = d.has_predictions() && !map.prediction_col.empty();

    out << quote(map.exposure_col) << ',' << quote(map.response_col);
    if (with_pred) out << ',' << quote(map.prediction_col);
    for (const auto& cov : d.schema) out << ',' << quote(cov.name);
    out << '\n';

    for (const auto& r : d.records) {
        out << format_double(r.exposure) << ',' << r.response;
        if (with_pred) out << ',' << format_double(*r.prediction);
        for (const auto& v : r.covariates) out << ',' << quote(covariate_value_to_string(v));
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

}  // namespace driftmon
