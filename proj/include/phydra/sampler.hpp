#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phydra/model.hpp"
#include "phydra/target.hpp"

namespace phydra {

struct SamplerConfig {
    int n_chains = 3;
    int n_iterations = 4000;  // per chain, warmup included
    double warmup_fraction = 0.5;
    double target_accept = 0.8;
    int max_depth = 10;
    std::uint64_t seed = 0;
    std::vector<int> tree_indices;  // 1-based tree ids to run; empty = all
    // per-parameter: jitter the start point (coefficients) or hold it at the
    // prior median (constants). Empty = jitter everything.
    std::vector<std::uint8_t> init_jitter_mask;
    int jobs = 1;

    int warmup_draws() const;
    int retained_draws() const;
    void validate(std::size_t dim) const;
};

struct PosteriorDraws {
    std::vector<std::string> param_names;
    std::vector<int> chain;      // 1-based
    std::vector<int> tree;       // 1-based tree-sample id
    std::vector<int> iteration;  // 1-based retained iteration within its chain
    std::vector<std::uint8_t> divergent;
    std::vector<std::vector<double>> values;  // [draw][param]

    std::size_t size() const { return values.size(); }
    std::size_t n_params() const { return param_names.size(); }
    std::vector<double> column(std::size_t j) const;
};

// Multi-chain NUTS over one target; draws are in the target's own
// coordinates. Chain c is seeded with mix_seed(config.seed, tree_id, c), so
// results are reproducible and independent of execution order.
PosteriorDraws nuts_sample(const LogDensityTarget& target, const SamplerConfig& config,
                           const std::vector<std::string>& param_names, int tree_id = 1);

// One independent NUTS run per tree in the bundle, pooled by ordered
// concatenation (tree-major). Draw values are on the reporting scale
// (constants mapped back through exp/logistic).
PosteriorDraws run_family(const ModelSpec& spec, const DataBundle& bundle,
                          const SamplerConfig& config);

struct ParamSummary {
    std::string param;
    double median;
    double eti_low;   // 2.5% quantile
    double eti_high;  // 97.5% quantile
    double rhat;      // split R-hat over chains-within-trees
    double ess;       // rank-normalized bulk ESS
};

std::vector<ParamSummary> summarize(const PosteriorDraws& draws);

// Diagnostics on raw sequences (split in halves internally).
double split_rhat(const std::vector<std::vector<double>>& chains);
double rank_normalized_ess(const std::vector<std::vector<double>>& chains);

// CSV layout: chain,tree,iteration,<param...>,divergent
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path);

void write_summary_json(const std::string& path, const std::vector<ParamSummary>& summary);

}  // namespace phydra
