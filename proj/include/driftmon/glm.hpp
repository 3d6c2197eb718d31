#pragma once

// Minimal Poisson log-link GLM with the exposure as a multiplicative offset.
// Covariates enter one-hot encoded: categorical levels against a declared
// reference level, numeric covariates binned into labeled buckets (the
// outermost buckets extend to +-infinity at prediction time).

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "driftmon/dataset.hpp"

namespace driftmon {

struct CategoricalEncoding {
    std::string reference_level;
};

struct NumericBinning {
    // Ascending interior cut points; values fall into [-inf, edges[0]),
    // [edges[0], edges[1]), ..., [edges.back(), +inf). reference_bin indexes
    // the bucket dropped from the design matrix.
    std::vector<double> edges;
    std::size_t reference_bin = 0;
};

struct CovariateEncoding {
    std::string name;
    std::variant<CategoricalEncoding, NumericBinning> encoding;
};

struct DesignSpec {
    std::vector<CovariateEncoding> covariates;  // intercept always included

    // Parses "key = value" lines: covariate = name cat <reference-level>
    // or covariate = name num <edge> <edge> ... [ref=<bin-index>].
    static DesignSpec from_config_file(const std::string& path);
};

struct GlmFitInfo {
    int iterations = 0;
    double gradient_norm = 0.0;  // max-norm of the score at the returned fit
    bool converged = false;
    std::vector<std::string> warnings;
};

struct GlmModel {
    DesignSpec spec;
    std::vector<std::string> column_names;  // "(intercept)" first
    std::vector<double> coefficients;       // aligned with column_names
    GlmFitInfo fit;

    std::string to_json() const;  // exact round-trip for coefficients
    static GlmModel from_json(const std::string& text);
};

// Maximizes the Poisson log-likelihood with log(exposure) offset by damped
// Newton iterations (step-halving on a likelihood decrease, at most 20
// halvings). Converged when the gradient max-norm drops below tol; hitting
// max_iter records a ConvergenceWarning instead. Throws RankDeficientDesign
// when the encoded design matrix is column-rank deficient, NonConvergence
// when step-halving cannot improve the likelihood while the gradient is
// still above tol.
GlmModel fit_poisson(const Dataset& d, const DesignSpec& spec, double tol = 1e-10,
                     int max_iter = 50);

// Attaches exp(x' beta) as the frequency prediction of every record.
// Unseen categorical levels are rejected (UnseenLevel).
Dataset predict(const GlmModel& model, const Dataset& d);

}  // namespace driftmon
