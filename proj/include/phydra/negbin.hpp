#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace phydra {

struct CountDataset {
    std::vector<std::string> pair_ids;
    std::vector<std::string> predictor_names;
    std::vector<std::vector<double>> x;  // [observation][predictor]
    std::vector<double> counts;          // non-negative integers
};

// CSV layout: pair_id, one column per predictor, and a `count` column.
CountDataset read_count_data(const std::string& path);
void write_count_data(const std::string& path, const CountDataset& data);

struct NegBinFit {
    std::vector<std::string> names;  // (Intercept) first, then predictors
    std::vector<double> beta;
    std::vector<double> se;
    double theta = 0.0;
    double theta_se = 0.0;
    double loglik = 0.0;
    double aic = 0.0;
    bool converged = false;
    int outer_iterations = 0;
    std::size_t n_obs = 0;
    std::vector<double> loglik_trace;  // profile log-likelihood per outer pass
};

// Log-link negative binomial regression (variance mu + mu^2/theta).
// Alternates IRLS for the coefficients with a profile-likelihood Newton
// update of theta until the joint log-likelihood is stable.
NegBinFit fit_negbin(const CountDataset& data);

// Coefficients only, dispersion held fixed (theta_se reported as 0).
NegBinFit fit_negbin_fixed(const CountDataset& data, double theta);

double negbin_log_likelihood(std::span<const double> counts, std::span<const double> mu,
                             double theta);

struct WaldRow {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
    std::string stars;  // * <0.1, ** <0.05, *** <0.01
};

std::vector<WaldRow> wald_pvalues(const NegBinFit& fit);

void write_negbin_json(const std::string& path, const NegBinFit& fit);

}  // namespace phydra
