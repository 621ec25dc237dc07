#pragma once

#include <span>
#include <string>
#include <vector>

#include "phydra/model.hpp"
#include "phydra/sampler.hpp"

namespace phydra {

// Per-draw, per-observation log-likelihood values for one fitted model.
struct PointwiseMatrix {
    std::string model;
    std::size_t n_draws = 0;
    std::size_t n_obs = 0;
    std::vector<double> loglik;  // row-major [draw][observation]

    double& at(std::size_t s, std::size_t i) { return loglik[s * n_obs + i]; }
    double at(std::size_t s, std::size_t i) const { return loglik[s * n_obs + i]; }
};

// Scores pooled posterior draws observation-by-observation; each draw is
// evaluated on the tree it was sampled against. Draw values are expected on
// the reporting scale, as produced by run_family.
PointwiseMatrix pointwise_matrix(const ModelSpec& spec, const DataBundle& bundle,
                                 const PosteriorDraws& draws, const std::string& model_name);

struct LooResult {
    std::string model;
    double elpd = 0.0;
    double se = 0.0;
    std::vector<double> pointwise;  // per-observation contributions; sums to elpd
    std::vector<double> pareto_k;   // NaN marks a degenerate (zero-spread) tail

    std::size_t n_high_k(double threshold = 0.7) const;
};

// Leave-one-out expected log predictive density with Pareto-smoothed
// importance weights. Throws if the tail would hold fewer than 5 draws.
LooResult psis_loo(const PointwiseMatrix& pw, int jobs = 1);

// In-sample log pointwise predictive density, sum_i log mean_s exp(ll).
double lppd(const PointwiseMatrix& pw);

struct GpdFit {
    double k = 0.0;
    double sigma = 0.0;
};

// Zhang-Stephens posterior-mean fit to exceedances over a zero threshold
// (ascending order required).
GpdFit fit_gpd(std::span<const double> exceedances);

// Quantile of the fitted generalized Pareto distribution at probability p.
double gpd_quantile(double p, double k, double sigma);

struct ComparisonRow {
    std::string model;
    double elpd = 0.0;
    double se = 0.0;
    double elpd_diff = 0.0;  // relative to the best model (non-positive)
    double se_diff = 0.0;    // from paired per-observation differences
    std::size_t n_high_k = 0;
};

// Rows ordered best-first; differences taken against the top row.
std::vector<ComparisonRow> compare(const std::vector<LooResult>& models);

// CSV layout: draw,obs,loglik with 1-based indices, draw-major order.
void write_pointwise_csv(const std::string& path, const PointwiseMatrix& pw);
PointwiseMatrix read_pointwise_csv(const std::string& path, const std::string& model_name);

void write_loo_json(const std::string& path, const LooResult& loo);
void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows);

}  // namespace phydra
