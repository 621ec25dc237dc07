#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phydra/ctmc.hpp"
#include "phydra/trees.hpp"

namespace phydra {

constexpr std::int8_t kMissingState = -1;

// One binary character's observations at the tips.
struct TipStates {
    std::map<std::string, std::int8_t> states;  // 0, 1, or kMissingState
    std::string character_id;
};

// Aligns observations to a tree's node indexing (internal nodes get
// kMissingState). Throws unless the label sets match exactly.
std::vector<std::int8_t> bind_tip_states(const PhyloTree& tree, const TipStates& tips);

// Felsenstein pruning with per-node rescaling; missing tips contribute (1,1)
// partials and the root is closed with the stationary distribution (1-p, p).
// Data of probability zero yields -inf.
double log_likelihood(const PhyloTree& tree, std::span<const std::int8_t> node_states,
                      const RateParams& rp);
double log_likelihood(const PhyloTree& tree, const TipStates& tips, const RateParams& rp);

struct LogLikGrad {
    double loglik;
    double d_s;  // dlogL/ds
    double d_p;  // dlogL/dp
};

// Same traversal carrying forward-mode tangents in (s, p) through the
// closed-form transition probabilities; exact up to rounding.
LogLikGrad log_likelihood_grad(const PhyloTree& tree, std::span<const std::int8_t> node_states,
                               const RateParams& rp);
LogLikGrad log_likelihood_grad(const PhyloTree& tree, const TipStates& tips,
                               const RateParams& rp);

// Likelihood by explicit summation over every unobserved node state.
// Test oracle only; throws if more than ~2^22 assignments would be needed.
double enumerate_likelihood_oracle(const PhyloTree& tree, const TipStates& tips,
                                   const RateParams& rp);

}  // namespace phydra
