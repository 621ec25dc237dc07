#include "phydra/likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace phydra {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_states(const PhyloTree& tree, std::span<const std::int8_t> node_states) {
    if (node_states.size() != static_cast<std::size_t>(tree.node_count()))
        throw std::invalid_argument("node state vector does not match tree size");
}

// Scratch partials reused across calls; the sampler evaluates this in a tight
// loop, once per character per tree per leapfrog step.
struct Scratch {
    std::vector<double> f0, f1;          // partial likelihoods
    std::vector<double> s0, s1, p0, p1;  // tangents in s and p

    void resize(std::size_t n, bool grad) {
        f0.resize(n);
        f1.resize(n);
        if (grad) {
            s0.resize(n);
            s1.resize(n);
            p0.resize(n);
            p1.resize(n);
        }
    }
};

thread_local Scratch scratch;

}  // namespace

std::vector<std::int8_t> bind_tip_states(const PhyloTree& tree, const TipStates& tips) {
    std::vector<std::int8_t> out(static_cast<std::size_t>(tree.node_count()), kMissingState);
    std::size_t matched = 0;
    for (int v : tree.tips()) {
        auto it = tips.states.find(tree.node(v).label);
        if (it == tips.states.end())
            throw std::invalid_argument("character '" + tips.character_id +
                                        "' lacks a state for tip: " + tree.node(v).label);
        if (it->second != 0 && it->second != 1 && it->second != kMissingState)
            throw std::invalid_argument("tip state must be 0, 1, or missing");
        out[static_cast<std::size_t>(v)] = it->second;
        ++matched;
    }
    if (matched != tips.states.size())
        throw std::invalid_argument("character '" + tips.character_id +
                                    "' covers taxa absent from the tree");
    return out;
}

double log_likelihood(const PhyloTree& tree, std::span<const std::int8_t> node_states,
                      const RateParams& rp) {
    check_states(tree, node_states);
    const std::size_t n = node_states.size();
    scratch.resize(n, false);
    auto& f0 = scratch.f0;
    auto& f1 = scratch.f1;

    double log_scale = 0.0;
    for (int v : tree.postorder()) {
        const TreeNode& nd = tree.node(v);
        const auto vi = static_cast<std::size_t>(v);
        if (nd.is_tip()) {
            std::int8_t s = node_states[vi];
            f0[vi] = s != 1 ? 1.0 : 0.0;
            f1[vi] = s != 0 ? 1.0 : 0.0;
            continue;
        }
        double a0 = 1.0, a1 = 1.0;
        for (int c : nd.children) {
            const auto ci = static_cast<std::size_t>(c);
            TransitionMatrix m = transition_matrix(rp, tree.node(c).length);
            a0 *= m.p00 * f0[ci] + m.p01 * f1[ci];
            a1 *= m.p10 * f0[ci] + m.p11 * f1[ci];
        }
        double mx = std::max(a0, a1);
        if (!(mx > 0.0)) return kNegInf;
        f0[vi] = a0 / mx;
        f1[vi] = a1 / mx;
        log_scale += std::log(mx);
    }

    const auto ri = static_cast<std::size_t>(tree.root());
    double root_sum = (1.0 - rp.p) * f0[ri] + rp.p * f1[ri];
    if (!(root_sum > 0.0)) return kNegInf;
    return std::log(root_sum) + log_scale;
}

double log_likelihood(const PhyloTree& tree, const TipStates& tips, const RateParams& rp) {
    return log_likelihood(tree, bind_tip_states(tree, tips), rp);
}

LogLikGrad log_likelihood_grad(const PhyloTree& tree, std::span<const std::int8_t> node_states,
                               const RateParams& rp) {
    check_states(tree, node_states);
    const std::size_t n = node_states.size();
    scratch.resize(n, true);
    auto& f0 = scratch.f0;
    auto& f1 = scratch.f1;
    auto& s0 = scratch.s0;
    auto& s1 = scratch.s1;
    auto& p0 = scratch.p0;
    auto& p1 = scratch.p1;

    double log_scale = 0.0;
    for (int v : tree.postorder()) {
        const TreeNode& nd = tree.node(v);
        const auto vi = static_cast<std::size_t>(v);
        if (nd.is_tip()) {
            std::int8_t s = node_states[vi];
            f0[vi] = s != 1 ? 1.0 : 0.0;
            f1[vi] = s != 0 ? 1.0 : 0.0;
            s0[vi] = s1[vi] = p0[vi] = p1[vi] = 0.0;
            continue;
        }
        double a0 = 1.0, a1 = 1.0;          // running product per root-side state
        double as0 = 0.0, as1 = 0.0;        // its s-tangent
        double ap0 = 0.0, ap1 = 0.0;        // its p-tangent
        for (int c : nd.children) {
            const auto ci = static_cast<std::size_t>(c);
            TransitionMatrixGrad g = transition_matrix_grad(rp, tree.node(c).length);
            double b0 = g.value.p00 * f0[ci] + g.value.p01 * f1[ci];
            double b1 = g.value.p10 * f0[ci] + g.value.p11 * f1[ci];
            double bs0 = g.ds.p00 * f0[ci] + g.ds.p01 * f1[ci] + g.value.p00 * s0[ci] +
                         g.value.p01 * s1[ci];
            double bs1 = g.ds.p10 * f0[ci] + g.ds.p11 * f1[ci] + g.value.p10 * s0[ci] +
                         g.value.p11 * s1[ci];
            double bp0 = g.dp.p00 * f0[ci] + g.dp.p01 * f1[ci] + g.value.p00 * p0[ci] +
                         g.value.p01 * p1[ci];
            double bp1 = g.dp.p10 * f0[ci] + g.dp.p11 * f1[ci] + g.value.p10 * p0[ci] +
                         g.value.p11 * p1[ci];
            as0 = as0 * b0 + a0 * bs0;
            as1 = as1 * b1 + a1 * bs1;
            ap0 = ap0 * b0 + a0 * bp0;
            ap1 = ap1 * b1 + a1 * bp1;
            a0 *= b0;
            a1 *= b1;
        }
        double mx = std::max(a0, a1);
        if (!(mx > 0.0)) return {kNegInf, 0.0, 0.0};
        // dividing value and tangents by the same constant keeps the final
        // ratio (and thus dlogL) exact; the scaler's log enters value only
        f0[vi] = a0 / mx;
        f1[vi] = a1 / mx;
        s0[vi] = as0 / mx;
        s1[vi] = as1 / mx;
        p0[vi] = ap0 / mx;
        p1[vi] = ap1 / mx;
        log_scale += std::log(mx);
    }

    const auto ri = static_cast<std::size_t>(tree.root());
    double root_sum = (1.0 - rp.p) * f0[ri] + rp.p * f1[ri];
    if (!(root_sum > 0.0)) return {kNegInf, 0.0, 0.0};
    double ds = ((1.0 - rp.p) * s0[ri] + rp.p * s1[ri]) / root_sum;
    double dp = ((1.0 - rp.p) * p0[ri] + rp.p * p1[ri] - f0[ri] + f1[ri]) / root_sum;
    return {std::log(root_sum) + log_scale, ds, dp};
}

LogLikGrad log_likelihood_grad(const PhyloTree& tree, const TipStates& tips,
                               const RateParams& rp) {
    return log_likelihood_grad(tree, bind_tip_states(tree, tips), rp);
}

double enumerate_likelihood_oracle(const PhyloTree& tree, const TipStates& tips,
                                   const RateParams& rp) {
    auto states = bind_tip_states(tree, tips);

    std::vector<int> free_nodes;
    for (int v = 0; v < tree.node_count(); ++v)
        if (states[static_cast<std::size_t>(v)] == kMissingState) free_nodes.push_back(v);
    if (free_nodes.size() > 22) throw std::invalid_argument("tree too large to enumerate");

    std::vector<int> assign(static_cast<std::size_t>(tree.node_count()));
    for (int v = 0; v < tree.node_count(); ++v)
        assign[static_cast<std::size_t>(v)] = states[static_cast<std::size_t>(v)];

    double total = 0.0;
    const std::uint64_t combos = 1ull << free_nodes.size();
    for (std::uint64_t mask = 0; mask < combos; ++mask) {
        for (std::size_t i = 0; i < free_nodes.size(); ++i)
            assign[static_cast<std::size_t>(free_nodes[i])] =
                static_cast<int>((mask >> i) & 1u);
        int root_state = assign[static_cast<std::size_t>(tree.root())];
        double prob = root_state == 1 ? rp.p : 1.0 - rp.p;
        for (int v = 0; v < tree.node_count(); ++v) {
            if (v == tree.root()) continue;
            TransitionMatrix m = transition_matrix(rp, tree.node(v).length);
            prob *= m(assign[static_cast<std::size_t>(tree.node(v).parent)],
                      assign[static_cast<std::size_t>(v)]);
        }
        total += prob;
    }
    return total;
}

}  // namespace phydra
