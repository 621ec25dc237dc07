#include "phydra/ctmc.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "phydra/rng.hpp"

namespace phydra {

namespace {

void require_valid(const RateParams& rp) {
    if (!rp.valid()) throw std::invalid_argument("rate params need s > 0 and 0 < p < 1");
}

}  // namespace

RateMatrix rates_from_params(const RateParams& rp) {
    require_valid(rp);
    return RateMatrix{rp.s * rp.p, rp.s * (1.0 - rp.p)};
}

TransitionMatrix transition_matrix(const RateParams& rp, double t) {
    require_valid(rp);
    if (t < 0.0) throw std::invalid_argument("negative branch length");
    double w = -std::expm1(-rp.s * t);  // 1 - e^{-st}
    TransitionMatrix m;
    m.p01 = rp.p * w;
    m.p10 = (1.0 - rp.p) * w;
    m.p00 = 1.0 - m.p01;
    m.p11 = 1.0 - m.p10;
    return m;
}

TransitionMatrixGrad transition_matrix_grad(const RateParams& rp, double t) {
    TransitionMatrixGrad g;
    g.value = transition_matrix(rp, t);
    double decay = std::exp(-rp.s * t);
    double w = -std::expm1(-rp.s * t);
    double dw_ds = t * decay;  // d(1-e^{-st})/ds
    g.ds.p01 = rp.p * dw_ds;
    g.ds.p10 = (1.0 - rp.p) * dw_ds;
    g.ds.p00 = -g.ds.p01;
    g.ds.p11 = -g.ds.p10;
    g.dp.p01 = w;
    g.dp.p10 = -w;
    g.dp.p00 = -w;
    g.dp.p11 = w;
    return g;
}

std::map<std::string, int> simulate_history(const PhyloTree& tree, const RateParams& rp,
                                            RootState root_state, std::uint64_t seed) {
    require_valid(rp);
    RateMatrix q = rates_from_params(rp);
    Rng rng(seed);

    std::vector<int> state(static_cast<std::size_t>(tree.node_count()), -1);
    int root = tree.root();
    switch (root_state) {
        case RootState::kZero: state[static_cast<std::size_t>(root)] = 0; break;
        case RootState::kOne: state[static_cast<std::size_t>(root)] = 1; break;
        case RootState::kStationary:
            state[static_cast<std::size_t>(root)] = rng.uniform() < rp.p ? 1 : 0;
            break;
    }

    const auto& order = tree.postorder();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int v = *it;
        if (v == root) continue;
        int s = state[static_cast<std::size_t>(tree.node(v).parent)];
        double remaining = tree.node(v).length;
        while (true) {
            double rate = s == 0 ? q.q_gain : q.q_loss;
            double wait = rng.exponential(rate);
            if (wait > remaining) break;
            remaining -= wait;
            s ^= 1;
        }
        state[static_cast<std::size_t>(v)] = s;
    }

    std::map<std::string, int> out;
    for (int v : tree.tips()) out[tree.node(v).label] = state[static_cast<std::size_t>(v)];
    return out;
}

}  // namespace phydra
