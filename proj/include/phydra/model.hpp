#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phydra/ctmc.hpp"
#include "phydra/likelihood.hpp"
#include "phydra/target.hpp"
#include "phydra/trees.hpp"

namespace phydra {

// Taxa x characters, one column per concept pair.
struct TraitMatrix {
    std::vector<std::string> taxa;
    std::vector<std::string> character_ids;
    std::vector<std::vector<std::int8_t>> cells;  // [taxon][character], kMissingState allowed
};

// Per-character regression inputs.
struct PredictorTable {
    std::vector<std::string> character_ids;
    std::vector<std::string> predictor_names;
    std::vector<std::vector<double>> x;  // [character][predictor]
};

// CSV layouts: traits have a leading `taxon` column and 0|1|NA cells;
// predictors have `pair_id` followed by one column per predictor.
TraitMatrix read_trait_matrix(const std::string& path);
void write_trait_matrix(const std::string& path, const TraitMatrix& traits);
PredictorTable read_predictor_table(const std::string& path);
void write_predictor_table(const std::string& path, const PredictorTable& preds);

struct Standardization {
    std::vector<double> mean;
    std::vector<double> sd;
};

// Z-scores each predictor column in place; callers echo the returned
// transform so coefficients can be mapped back.
Standardization standardize_predictors(PredictorTable& preds);

enum class Variant { kFull, kStationaryOnly, kSpeedOnly, kNull };

Variant parse_variant(const std::string& name);  // full|stationary-only|speed-only|null
std::string variant_name(Variant v);

struct PriorSettings {
    double coef_mean = 0.0;  // normal prior on intercepts and coefficients
    double coef_sd = 1.0;
    double log_speed_mean = 0.0;  // log-normal prior on the constant speed
    double log_speed_sd = 1.0;
    // constant stationary probability gets a flat prior on (0,1)
};

struct ModelSpec {
    Variant variant = Variant::kFull;
    std::size_t n_predictors = 3;
    PriorSettings priors;

    bool p_regressed() const {
        return variant == Variant::kFull || variant == Variant::kStationaryOnly;
    }
    bool s_regressed() const {
        return variant == Variant::kFull || variant == Variant::kSpeedOnly;
    }
    // number of free parameters
    std::size_t dim() const {
        return (p_regressed() ? n_predictors + 1 : 1) +
               (s_regressed() ? n_predictors + 1 : 1);
    }
};

// Free parameters of one variant. Regressed blocks hold an intercept plus one
// coefficient per predictor; unregressed components collapse to a constant.
struct CoefficientSet {
    double beta_p0 = 0.0;
    std::vector<double> beta_p;
    double beta_s0 = 0.0;
    std::vector<double> beta_s;
    double const_p = 0.5;
    double const_s = 1.0;
};

// p_i = logistic(b_p0 + beta_p . x_i) or the constant; s_i likewise with exp.
RateParams link_params(const ModelSpec& spec, const CoefficientSet& coefs,
                       std::span<const double> x);

// Natural-scale prior: Normal(coef_mean, coef_sd) on every intercept and
// coefficient, LogNormal on a constant speed, Uniform(0,1) on a constant p.
double log_prior(const ModelSpec& spec, const CoefficientSet& coefs);

// Parameter ordering: p-block then s-block. Constants keep natural-scale
// names; sampling happens on log/logit scales internally.
std::vector<std::string> param_names(const ModelSpec& spec,
                                     const std::vector<std::string>& predictor_names);

// Unconstrained vector layout matching param_names: betas as-is, constants as
// logit(p) / log(s).
std::vector<double> pack_unconstrained(const ModelSpec& spec, const CoefficientSet& coefs);
CoefficientSet unpack_unconstrained(const ModelSpec& spec, std::span<const double> theta);

// Trait matrix, aligned predictors, and trees pruned to the trait taxa.
struct DataBundle {
    TraitMatrix traits;
    PredictorTable predictors;
    TreeSample trees;
};

// Joins predictors to trait columns by character id (reordering as needed)
// and prunes every tree to the trait taxa. Throws on any mismatch.
DataBundle make_bundle(TraitMatrix traits, PredictorTable predictors, TreeSample trees);

// log_prior + summed pruning log-likelihood on one tree.
double log_posterior(const ModelSpec& spec, const CoefficientSet& coefs, const PhyloTree& tree,
                     const TraitMatrix& traits, const PredictorTable& predictors);

// Per-character log-likelihood contributions (sums to the likelihood part of
// log_posterior).
std::vector<double> pointwise_loglik(const ModelSpec& spec, const CoefficientSet& coefs,
                                     const PhyloTree& tree, const TraitMatrix& traits,
                                     const PredictorTable& predictors);

// The sampler-facing density on the unconstrained scale: priors carry the
// log/logit change-of-variable corrections, so constants follow Normal(0,1)
// (log s) and standard-logistic (logit p) densities there.
class Posterior final : public LogDensityTarget {
  public:
    Posterior(const PhyloTree& tree, const TraitMatrix& traits,
              const PredictorTable& predictors, ModelSpec spec);

    std::size_t dim() const override { return spec_.dim(); }
    double log_density(std::span<const double> theta, double* grad) const override;

    const std::vector<std::string>& names() const { return names_; }
    const ModelSpec& spec() const { return spec_; }
    std::size_t n_characters() const { return chars_.size(); }

    // natural-scale values for reporting draws (exp/logistic on constants)
    std::vector<double> reported(std::span<const double> theta) const;
    std::vector<double> pointwise(std::span<const double> theta) const;

  private:
    PhyloTree tree_;
    ModelSpec spec_;
    std::vector<std::vector<double>> x_;
    std::vector<std::vector<std::int8_t>> chars_;
    std::vector<std::string> names_;
};

}  // namespace phydra
