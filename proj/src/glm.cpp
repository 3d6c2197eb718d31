#include "driftmon/glm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "driftmon/numerics.hpp"

namespace driftmon {

namespace {

using json = nlohmann::json;

struct EncodedDesign {
    std::vector<std::string> column_names;            // intercept first
    std::vector<std::vector<std::size_t>> active_col; // per record, nonzero columns
};

std::size_t bin_index(const NumericBinning& binning, double value) {
    std::size_t b = 0;
    while (b < binning.edges.size() && value >= binning.edges[b]) ++b;
    return b;
}

std::string bin_label(const NumericBinning& binning, std::size_t b) {
    auto fmt = [](double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    };
    const std::string lo = b == 0 ? "-inf" : fmt(binning.edges[b - 1]);
    const std::string hi = b == binning.edges.size() ? "inf" : fmt(binning.edges[b]);
    return "[" + lo + "," + hi + ")";
}

// One-hot encoding against the declared references. When `training` is set,
// categorical levels are collected from the data; otherwise unseen levels
// throw UnseenLevel.
EncodedDesign encode(const Dataset& d, const DesignSpec& spec,
                     std::vector<std::vector<std::string>>* level_table, bool training) {
    EncodedDesign design;
    design.column_names.push_back("(intercept)");

    std::vector<int> cov_idx;
    for (const auto& cov : spec.covariates) {
        const int j = d.covariate_index(cov.name);
        if (j < 0) throw Error("design covariate '" + cov.name + "' not in dataset schema");
        if (std::holds_alternative<CategoricalEncoding>(cov.encoding) !=
            (d.schema[static_cast<std::size_t>(j)].kind == CovariateKind::Categorical)) {
            throw Error("design covariate '" + cov.name + "' kind does not match schema");
        }
        cov_idx.push_back(j);
    }

    if (training) {
        level_table->assign(spec.covariates.size(), {});
        for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
            const auto& cov = spec.covariates[c];
            if (const auto* cat = std::get_if<CategoricalEncoding>(&cov.encoding)) {
                std::vector<std::string>& levels = (*level_table)[c];
                for (const auto& r : d.records) {
                    const auto& level = std::get<std::string>(r.covariates[cov_idx[c]]);
                    if (std::find(levels.begin(), levels.end(), level) == levels.end()) {
                        levels.push_back(level);
                    }
                }
                std::sort(levels.begin(), levels.end());
                if (std::find(levels.begin(), levels.end(), cat->reference_level) ==
                    levels.end()) {
                    throw Error("reference level '" + cat->reference_level +
                                "' of covariate '" + cov.name + "' not present in data");
                }
            }
        }
    }

    // Column layout: intercept, then per covariate the non-reference levels
    // (sorted) or non-reference bins (ascending).
    std::vector<std::vector<std::size_t>> column_of_level(spec.covariates.size());
    for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
        const auto& cov = spec.covariates[c];
        if (const auto* cat = std::get_if<CategoricalEncoding>(&cov.encoding)) {
            const auto& levels = (*level_table)[c];
            column_of_level[c].assign(levels.size(), SIZE_MAX);
            for (std::size_t l = 0; l < levels.size(); ++l) {
                if (levels[l] == cat->reference_level) continue;
                column_of_level[c][l] = design.column_names.size();
                design.column_names.push_back(cov.name + "=" + levels[l]);
            }
        } else {
            const auto& binning = std::get<NumericBinning>(cov.encoding);
            const std::size_t nbins = binning.edges.size() + 1;
            if (binning.reference_bin >= nbins) {
                throw Error("reference bin out of range for covariate '" + cov.name + "'");
            }
            column_of_level[c].assign(nbins, SIZE_MAX);
            for (std::size_t b = 0; b < nbins; ++b) {
                if (b == binning.reference_bin) continue;
                column_of_level[c][b] = design.column_names.size();
                design.column_names.push_back(cov.name + "=" + bin_label(binning, b));
            }
        }
    }

    design.active_col.reserve(d.records.size());
    for (const auto& r : d.records) {
        std::vector<std::size_t> active{0};  // intercept
        for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
            const auto& cov = spec.covariates[c];
            std::size_t slot;
            if (std::holds_alternative<CategoricalEncoding>(cov.encoding)) {
                const auto& level = std::get<std::string>(r.covariates[cov_idx[c]]);
                const auto& levels = (*level_table)[c];
                const auto it = std::find(levels.begin(), levels.end(), level);
                if (it == levels.end()) {
                    throw Error("UnseenLevel: covariate '" + cov.name + "', value '" + level +
                                "'");
                }
                slot = static_cast<std::size_t>(it - levels.begin());
            } else {
                const auto& binning = std::get<NumericBinning>(cov.encoding);
                slot = bin_index(binning, std::get<double>(r.covariates[cov_idx[c]]));
            }
            const std::size_t col = column_of_level[c][slot];
            if (col != SIZE_MAX) active.push_back(col);
        }
        design.active_col.push_back(std::move(active));
    }
    return design;
}

double log_likelihood(const Dataset& d, const EncodedDesign& design,
                      const Eigen::VectorXd& beta) {
    // Poisson log-likelihood up to the y! constant: sum y*eta - mu, with
    // eta = x'beta + log(v).
    KahanSum ll;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        double eta = std::log(d.records[i].exposure);
        for (std::size_t c : design.active_col[i]) eta += beta[static_cast<Eigen::Index>(c)];
        const double y = static_cast<double>(d.records[i].response);
        ll.add(y * eta - std::exp(eta));
    }
    return ll.value();
}

}  // namespace

DesignSpec DesignSpec::from_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open design config: " + path);
    DesignSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key, eq;
        if (!(ss >> key)) continue;
        if (key != "covariate" || !(ss >> eq) || eq != "=") {
            throw Error("bad design config line: " + line);
        }
        std::string name, kind;
        if (!(ss >> name >> kind)) throw Error("bad design config line: " + line);
        CovariateEncoding cov;
        cov.name = name;
        if (kind == "cat") {
            std::string ref;
            if (!(ss >> ref)) throw Error("categorical covariate needs a reference level: " + line);
            cov.encoding = CategoricalEncoding{ref};
        } else if (kind == "num") {
            NumericBinning binning;
            std::string tok;
            while (ss >> tok) {
                if (tok.rfind("ref=", 0) == 0) {
                    binning.reference_bin = static_cast<std::size_t>(std::stoul(tok.substr(4)));
                } else {
                    binning.edges.push_back(std::stod(tok));
                }
            }
            if (binning.edges.empty()) {
                throw Error("numeric covariate needs at least one edge: " + line);
            }
            if (!std::is_sorted(binning.edges.begin(), binning.edges.end())) {
                throw Error("numeric bin edges must be ascending: " + line);
            }
            cov.encoding = std::move(binning);
        } else {
            throw Error("unknown covariate kind '" + kind + "' in design config");
        }
        spec.covariates.push_back(std::move(cov));
    }
    return spec;
}

GlmModel fit_poisson(const Dataset& d, const DesignSpec& spec, double tol, int max_iter) {
    d.validate();
    if (!(tol > 0.0)) throw Error("tol must be positive");
    if (max_iter < 1) throw Error("max_iter must be positive");

    std::vector<std::vector<std::string>> level_table;
    const EncodedDesign design = encode(d, spec, &level_table, /*training=*/true);
    const auto p = static_cast<Eigen::Index>(design.column_names.size());
    const auto n = static_cast<Eigen::Index>(d.records.size());

    // Rank check on the dense design matrix.
    {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t c : design.active_col[static_cast<std::size_t>(i)]) {
                X(i, static_cast<Eigen::Index>(c)) = 1.0;
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            const auto perm = qr.colsPermutation().indices();
            std::string cols;
            for (Eigen::Index k = qr.rank(); k < p; ++k) {
                if (!cols.empty()) cols += ", ";
                cols += design.column_names[static_cast<std::size_t>(perm[k])];
            }
            throw Error("RankDeficientDesign: dependent columns: " + cols);
        }
    }

    // Start at the portfolio-frequency intercept.
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = std::log(static_cast<double>(d.total_response()) / d.total_exposure());
    if (!std::isfinite(beta[0])) beta[0] = 0.0;  // zero-claim datasets

    GlmModel model;
    model.spec = spec;
    model.column_names = design.column_names;

    double ll = log_likelihood(d, design, beta);
    Eigen::VectorXd gradient(p);
    for (int iter = 1; iter <= max_iter; ++iter) {
        // Score and expected information under the current fit.
        std::vector<KahanSum> grad_acc(static_cast<std::size_t>(p));
        Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i < d.records.size(); ++i) {
            double eta = std::log(d.records[i].exposure);
            for (std::size_t c : design.active_col[i]) eta += beta[static_cast<Eigen::Index>(c)];
            const double mu = std::exp(eta);
            const double resid = static_cast<double>(d.records[i].response) - mu;
            for (std::size_t a : design.active_col[i]) {
                grad_acc[a].add(resid);
                for (std::size_t b : design.active_col[i]) {
                    hessian(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += mu;
                }
            }
        }
        for (Eigen::Index c = 0; c < p; ++c) {
            gradient[c] = grad_acc[static_cast<std::size_t>(c)].value();
        }

        model.fit.iterations = iter - 1;
        model.fit.gradient_norm = gradient.cwiseAbs().maxCoeff();
        if (model.fit.gradient_norm < tol) {
            model.fit.converged = true;
            model.coefficients.assign(beta.data(), beta.data() + p);
            return model;
        }

        const Eigen::VectorXd step = hessian.ldlt().solve(gradient);
        // Step-halving keeps the likelihood nondecreasing.
        double scale = 1.0;
        bool improved = false;
        for (int halving = 0; halving <= 20; ++halving) {
            const Eigen::VectorXd candidate = beta + scale * step;
            const double candidate_ll = log_likelihood(d, design, candidate);
            if (candidate_ll >= ll && std::isfinite(candidate_ll)) {
                beta = candidate;
                ll = candidate_ll;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) {
            throw Error("NonConvergence: step-halving exhausted at iteration " +
                        std::to_string(iter) + ", gradient max-norm " +
                        std::to_string(model.fit.gradient_norm));
        }
    }

    // Recompute the gradient norm at the returned point.
    std::vector<KahanSum> grad_acc(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        double eta = std::log(d.records[i].exposure);
        for (std::size_t c : design.active_col[i]) eta += beta[static_cast<Eigen::Index>(c)];
        const double resid = static_cast<double>(d.records[i].response) - std::exp(eta);
        for (std::size_t a : design.active_col[i]) grad_acc[a].add(resid);
    }
    double gnorm = 0.0;
    for (const auto& g : grad_acc) gnorm = std::max(gnorm, std::abs(g.value()));

    model.fit.iterations = max_iter;
    model.fit.gradient_norm = gnorm;
    model.fit.converged = gnorm < tol;
    if (!model.fit.converged) {
        model.fit.warnings.push_back("ConvergenceWarning: max_iter reached with gradient max-norm " +
                                     std::to_string(gnorm));
    }
    model.coefficients.assign(beta.data(), beta.data() + p);
    return model;
}

Dataset predict(const GlmModel& model, const Dataset& d) {
    d.validate();
    // Rebuild the level table from the trained column names so prediction
    // never depends on the new data's levels.
    std::vector<std::vector<std::string>> level_table(model.spec.covariates.size());
    for (std::size_t c = 0; c < model.spec.covariates.size(); ++c) {
        const auto& cov = model.spec.covariates[c];
        if (const auto* cat = std::get_if<CategoricalEncoding>(&cov.encoding)) {
            std::vector<std::string>& levels = level_table[c];
            levels.push_back(cat->reference_level);
            const std::string prefix = cov.name + "=";
            for (const auto& col : model.column_names) {
                if (col.rfind(prefix, 0) == 0) levels.push_back(col.substr(prefix.size()));
            }
            std::sort(levels.begin(), levels.end());
        }
    }

    const EncodedDesign design = encode(d, model.spec, &level_table, /*training=*/false);
    Dataset out = d;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        double eta = 0.0;
        for (std::size_t c : design.active_col[i]) eta += model.coefficients[c];
        out.records[i].prediction = std::exp(eta);
    }
    return out;
}

std::string GlmModel::to_json() const {
    json j;
    j["model"] = "poisson-log-link";
    j["columns"] = column_names;
    j["coefficients"] = coefficients;
    j["fit"] = {{"iterations", fit.iterations},
                {"gradient_norm", fit.gradient_norm},
                {"converged", fit.converged},
                {"warnings", fit.warnings}};
    json covs = json::array();
    for (const auto& cov : spec.covariates) {
        json c;
        c["name"] = cov.name;
        if (const auto* cat = std::get_if<CategoricalEncoding>(&cov.encoding)) {
            c["kind"] = "cat";
            c["reference_level"] = cat->reference_level;
        } else {
            const auto& binning = std::get<NumericBinning>(cov.encoding);
            c["kind"] = "num";
            c["edges"] = binning.edges;
            c["reference_bin"] = binning.reference_bin;
        }
        covs.push_back(std::move(c));
    }
    j["design"] = std::move(covs);
    return j.dump(2);
}

GlmModel GlmModel::from_json(const std::string& text) {
    const json j = json::parse(text);
    GlmModel model;
    model.column_names = j.at("columns").get<std::vector<std::string>>();
    model.coefficients = j.at("coefficients").get<std::vector<double>>();
    model.fit.iterations = j.at("fit").at("iterations").get<int>();
    model.fit.gradient_norm = j.at("fit").at("gradient_norm").get<double>();
    model.fit.converged = j.at("fit").at("converged").get<bool>();
    model.fit.warnings = j.at("fit").at("warnings").get<std::vector<std::string>>();
    for (const auto& c : j.at("design")) {
        CovariateEncoding cov;
        cov.name = c.at("name").get<std::string>();
        if (c.at("kind").get<std::string>() == "cat") {
            cov.encoding = CategoricalEncoding{c.at("reference_level").get<std::string>()};
        } else {
            NumericBinning binning;
            binning.edges = c.at("edges").get<std::vector<double>>();
            binning.reference_bin = c.at("reference_bin").get<std::size_t>();
            cov.encoding = std::move(binning);
        }
        model.spec.covariates.push_back(std::move(cov));
    }
    return model;
}

}  // namespace driftmon
