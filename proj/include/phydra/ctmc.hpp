#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "phydra/trees.hpp"

namespace phydra {

// Two-state process parameterized by an overall speed and the stationary
// probability of state 1; the instantaneous rates are the products below.
struct RateParams {
    double s;  // speed of change, events per unit branch length
    double p;  // stationary probability of state 1

    bool valid() const { return s > 0.0 && p > 0.0 && p < 1.0; }
};

struct RateMatrix {
    double q_gain;  // 0 -> 1
    double q_loss;  // 1 -> 0
};

RateMatrix rates_from_params(const RateParams& rp);

// Row-stochastic: prob(from, to) over a branch.
struct TransitionMatrix {
    double p00, p01, p10, p11;

    double operator()(int from, int to) const {
        return from == 0 ? (to == 0 ? p00 : p01) : (to == 0 ? p10 : p11);
    }
};

// Closed form: P01 = p(1-e^{-st}), P10 = (1-p)(1-e^{-st}), diagonal is the
// complement. expm1 keeps the off-diagonal accurate when st is tiny.
TransitionMatrix transition_matrix(const RateParams& rp, double t);

// Transition probabilities plus their partial derivatives in s and p.
struct TransitionMatrixGrad {
    TransitionMatrix value;
    TransitionMatrix ds;
    TransitionMatrix dp;
};

TransitionMatrixGrad transition_matrix_grad(const RateParams& rp, double t);

enum class RootState { kZero = 0, kOne = 1, kStationary = 2 };

// Gillespie-style simulation down the tree: exponential waiting times at the
// state's exit rate, flipping until the branch is exhausted.
std::map<std::string, int> simulate_history(const PhyloTree& tree, const RateParams& rp,
                                            RootState root_state, std::uint64_t seed);

}  // namespace phydra
