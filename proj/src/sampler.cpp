#include "phydra/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "phydra/csv.hpp"
#include "phydra/rng.hpp"
#include "phydra/util.hpp"

namespace phydra {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDivergenceThreshold = 1000.0;  // on H - H0

struct State {
    std::vector<double> theta;
    std::vector<double> r;
    std::vector<double> grad;
    double logp = kNegInf;
};

struct BuildResult {
    State minus, plus;
    std::vector<double> prop_theta;
    std::vector<double> prop_grad;
    double prop_logp = kNegInf;
    double log_w = kNegInf;
    bool stop = false;
    bool divergent = false;
};

struct DualAveraging {
    double mu = 0.0;
    double log_eps = 0.0;
    double log_eps_bar = 0.0;
    double h_bar = 0.0;
    int m = 0;
    static constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;

    void reset(double eps0) {
        mu = std::log(10.0 * eps0);
        log_eps = std::log(eps0);
        log_eps_bar = std::log(eps0);
        h_bar = 0.0;
        m = 0;
    }
    void update(double accept_prob, double target) {
        ++m;
        double w = 1.0 / (m + kT0);
        h_bar = (1.0 - w) * h_bar + w * (target - accept_prob);
        log_eps = mu - std::sqrt(static_cast<double>(m)) / kGamma * h_bar;
        double k = std::pow(static_cast<double>(m), -kKappa);
        log_eps_bar = k * log_eps + (1.0 - k) * log_eps_bar;
    }
};

class NutsChain {
  public:
    NutsChain(const LogDensityTarget& target, const SamplerConfig& cfg, std::uint64_t seed)
        : target_(target),
          cfg_(cfg),
          rng_(seed),
          dim_(target.dim()),
          inv_mass_(dim_, 1.0) {}

    // Fills retained draws (target coordinates) and per-draw divergence flags.
    void run(std::vector<std::vector<double>>& draws, std::vector<std::uint8_t>& flags) {
        const int warmup = cfg_.warmup_draws();
        const int total = cfg_.n_iterations;
        initialize();
        double eps0 = find_reasonable_epsilon();
        da_.reset(eps0);

        auto windows = slow_windows(warmup);
        std::size_t window_idx = 0;
        std::vector<std::vector<double>> window_draws;

        int saturated = 0;
        for (int iter = 1; iter <= total; ++iter) {
            bool in_warmup = iter <= warmup;
            epsilon_ = std::exp(in_warmup ? da_.log_eps : final_log_eps_);
            auto [accept_stat, divergent, hit_max_depth] = transition();
            if (hit_max_depth) ++saturated;

            if (in_warmup) {
                da_.update(accept_stat, cfg_.target_accept);
                if (window_idx < windows.size()) {
                    const auto& [lo, hi] = windows[window_idx];
                    if (iter >= lo && iter <= hi) window_draws.push_back(current_.theta);
                    if (iter == hi) {
                        update_metric(window_draws);
                        window_draws.clear();
                        ++window_idx;
                        da_.reset(find_reasonable_epsilon());
                    }
                }
                if (iter == warmup) final_log_eps_ = da_.log_eps_bar;
            } else {
                draws.push_back(current_.theta);
                flags.push_back(divergent ? 1 : 0);
            }
        }
        if (saturated > 0)
            std::fprintf(stderr,
                         "warning: %d of %d iterations saturated max tree depth %d\n",
                         saturated, total, cfg_.max_depth);
    }

  private:
    const LogDensityTarget& target_;
    const SamplerConfig& cfg_;
    Rng rng_;
    std::size_t dim_;
    std::vector<double> inv_mass_;
    State current_;
    DualAveraging da_;
    double epsilon_ = 1.0;
    double final_log_eps_ = 0.0;
    double h0_ = 0.0;
    double metro_sum_ = 0.0;
    int n_leaves_ = 0;

    double eval(std::vector<double>& theta, std::vector<double>& grad) {
        double lp = target_.log_density(theta, grad.data());
        if (!std::isfinite(lp)) return kNegInf;
        for (double g : grad)
            if (!std::isfinite(g)) return kNegInf;
        return lp;
    }

    void initialize() {
        current_.theta.assign(dim_, 0.0);
        current_.r.assign(dim_, 0.0);
        current_.grad.assign(dim_, 0.0);
        const auto& mask = cfg_.init_jitter_mask;
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (std::size_t j = 0; j < dim_; ++j) {
                bool jitter = attempt >= 50 || mask.empty() || mask[j];
                current_.theta[j] = jitter ? rng_.uniform(-0.1, 0.1) : 0.0;
            }
            current_.logp = eval(current_.theta, current_.grad);
            if (std::isfinite(current_.logp)) return;
        }
        throw std::runtime_error(
            "sampler initialization failed: target not finite after 100 jittered tries");
    }

    double kinetic(const std::vector<double>& r) const {
        double k = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) k += r[j] * r[j] * inv_mass_[j];
        return 0.5 * k;
    }

    void sample_momentum(std::vector<double>& r) {
        for (std::size_t j = 0; j < dim_; ++j) r[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
    }

    // One leapfrog step; returns false if the target became non-finite.
    bool leapfrog(State& z, double eps) {
        for (std::size_t j = 0; j < dim_; ++j) z.r[j] += 0.5 * eps * z.grad[j];
        for (std::size_t j = 0; j < dim_; ++j) z.theta[j] += eps * inv_mass_[j] * z.r[j];
        z.logp = eval(z.theta, z.grad);
        if (!std::isfinite(z.logp)) return false;
        for (std::size_t j = 0; j < dim_; ++j) z.r[j] += 0.5 * eps * z.grad[j];
        return true;
    }

    bool is_uturn(const State& minus, const State& plus) const {
        double dot_minus = 0.0, dot_plus = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            double d = plus.theta[j] - minus.theta[j];
            dot_minus += d * inv_mass_[j] * minus.r[j];
            dot_plus += d * inv_mass_[j] * plus.r[j];
        }
        return dot_minus < 0.0 || dot_plus < 0.0;
    }

    void build_tree(const State& from, int dir, int depth, BuildResult& out) {
        if (depth == 0) {
            State z = from;
            bool ok = leapfrog(z, dir * epsilon_);
            double delta = ok ? h0_ - (-z.logp + kinetic(z.r)) : kNegInf;
            bool divergent = !(delta > -kDivergenceThreshold);
            metro_sum_ += std::isfinite(delta) ? std::exp(std::min(0.0, delta)) : 0.0;
            ++n_leaves_;
            out.minus = z;
            out.plus = std::move(z);
            out.prop_theta = out.plus.theta;
            out.prop_grad = out.plus.grad;
            out.prop_logp = out.plus.logp;
            out.log_w = divergent ? kNegInf : delta;
            out.divergent = divergent;
            out.stop = divergent;
            return;
        }
        build_tree(from, dir, depth - 1, out);
        if (out.stop) return;
        BuildResult second;
        build_tree(dir > 0 ? out.plus : out.minus, dir, depth - 1, second);
        if (second.stop) {
            out.stop = true;
            out.divergent = out.divergent || second.divergent;
            return;
        }
        double combined = log_sum_exp(out.log_w, second.log_w);
        if (rng_.uniform() < std::exp(second.log_w - combined)) {
            out.prop_theta = std::move(second.prop_theta);
            out.prop_grad = std::move(second.prop_grad);
            out.prop_logp = second.prop_logp;
        }
        out.log_w = combined;
        if (dir > 0)
            out.plus = std::move(second.plus);
        else
            out.minus = std::move(second.minus);
        out.stop = is_uturn(out.minus, out.plus);
    }

    // One NUTS transition from current_; returns (accept stat, divergent,
    // saturated max depth).
    std::tuple<double, bool, bool> transition() {
        sample_momentum(current_.r);
        h0_ = -current_.logp + kinetic(current_.r);
        metro_sum_ = 0.0;
        n_leaves_ = 0;

        State traj_minus = current_;
        State traj_plus = current_;
        std::vector<double> sel_theta = current_.theta;
        std::vector<double> sel_grad = current_.grad;
        double sel_logp = current_.logp;
        double log_w_traj = 0.0;  // weight of the start state
        bool divergent = false;
        bool saturated = true;

        BuildResult sub;
        for (int depth = 0; depth < cfg_.max_depth; ++depth) {
            int dir = rng_.uniform() < 0.5 ? -1 : 1;
            build_tree(dir > 0 ? traj_plus : traj_minus, dir, depth, sub);
            if (sub.divergent) divergent = true;
            if (sub.stop) {
                saturated = false;
                break;
            }
            // biased progressive sampling toward the new subtree
            if (rng_.uniform() < std::exp(std::min(0.0, sub.log_w - log_w_traj))) {
                sel_theta = std::move(sub.prop_theta);
                sel_grad = std::move(sub.prop_grad);
                sel_logp = sub.prop_logp;
            }
            log_w_traj = log_sum_exp(log_w_traj, sub.log_w);
            if (dir > 0)
                traj_plus = std::move(sub.plus);
            else
                traj_minus = std::move(sub.minus);
            if (is_uturn(traj_minus, traj_plus)) {
                saturated = false;
                break;
            }
        }

        current_.theta = std::move(sel_theta);
        current_.grad = std::move(sel_grad);
        current_.logp = sel_logp;
        double accept = n_leaves_ > 0 ? metro_sum_ / n_leaves_ : 0.0;
        return {accept, divergent, saturated};
    }

    double find_reasonable_epsilon() {
        double eps = 1.0;
        State z0 = current_;
        sample_momentum(z0.r);
        double h0 = -z0.logp + kinetic(z0.r);
        auto log_ratio = [&](double e) {
            State z = z0;
            if (!leapfrog(z, e)) return kNegInf;
            return h0 - (-z.logp + kinetic(z.r));
        };
        double delta = log_ratio(eps);
        double a = delta > std::log(0.5) ? 1.0 : -1.0;
        for (int i = 0; i < 100; ++i) {
            if (!(a * delta > -a * std::log(2.0))) break;
            eps *= std::pow(2.0, a);
            if (eps > 1e7 || eps < 1e-10) break;
            delta = log_ratio(eps);
        }
        return eps;
    }

    // Inclusive [first, last] iteration ranges whose draws feed the metric.
    static std::vector<std::pair<int, int>> slow_windows(int warmup) {
        std::vector<std::pair<int, int>> out;
        if (warmup < 20) return out;  // too short to estimate a metric
        int init = warmup >= 150 ? 75 : std::max(1, warmup * 15 / 100);
        int term = warmup >= 150 ? 50 : std::max(1, warmup * 10 / 100);
        int slow_total = warmup - init - term;
        if (slow_total < 1) return out;
        int base = warmup >= 150 ? 25 : slow_total;
        int start = init + 1;
        int remaining = slow_total;
        int size = base;
        while (remaining > 0) {
            if (size >= remaining || size * 2 > remaining - size) size = remaining;
            out.emplace_back(start, start + size - 1);
            start += size;
            remaining -= size;
            size *= 2;
        }
        return out;
    }

    void update_metric(const std::vector<std::vector<double>>& window_draws) {
        const auto n = static_cast<double>(window_draws.size());
        if (n < 2) return;
        for (std::size_t j = 0; j < dim_; ++j) {
            double m = 0.0;
            for (const auto& d : window_draws) m += d[j];
            m /= n;
            double v = 0.0;
            for (const auto& d : window_draws) v += (d[j] - m) * (d[j] - m);
            v /= (n - 1.0);
            // shrink toward unit scale as Stan does
            inv_mass_[j] = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
        }
    }
};

void run_single_chain(const LogDensityTarget& target, const SamplerConfig& cfg,
                      std::uint64_t seed, std::vector<std::vector<double>>& draws,
                      std::vector<std::uint8_t>& flags) {
    NutsChain chain(target, cfg, seed);
    chain.run(draws, flags);
}

}  // namespace

int SamplerConfig::warmup_draws() const {
    return static_cast<int>(std::llround(n_iterations * warmup_fraction));
}

int SamplerConfig::retained_draws() const { return n_iterations - warmup_draws(); }

void SamplerConfig::validate(std::size_t dim) const {
    if (n_chains < 1) throw std::invalid_argument("need at least one chain");
    if (n_iterations < 4 || n_iterations % 2 != 0)
        throw std::invalid_argument("n_iterations must be even and at least 4");
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
        throw std::invalid_argument("warmup fraction must lie in (0,1)");
    if (!(target_accept > 0.0 && target_accept < 1.0))
        throw std::invalid_argument("target acceptance must lie in (0,1)");
    if (max_depth < 1 || max_depth > 20)
        throw std::invalid_argument("max tree depth must lie in [1,20]");
    if (warmup_draws() < 1 || retained_draws() < 1)
        throw std::invalid_argument("iteration count leaves no warmup or no retained draws");
    if (!init_jitter_mask.empty() && init_jitter_mask.size() != dim)
        throw std::invalid_argument("init jitter mask length does not match dimension");
    if (jobs < 1) throw std::invalid_argument("jobs must be positive");
}

std::vector<double> PosteriorDraws::column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& row : values) out.push_back(row[j]);
    return out;
}

PosteriorDraws nuts_sample(const LogDensityTarget& target, const SamplerConfig& config,
                           const std::vector<std::string>& param_names, int tree_id) {
    config.validate(target.dim());
    if (param_names.size() != target.dim())
        throw std::invalid_argument("parameter name count does not match target dimension");

    PosteriorDraws out;
    out.param_names = param_names;
    for (int c = 1; c <= config.n_chains; ++c) {
        std::vector<std::vector<double>> draws;
        std::vector<std::uint8_t> flags;
        run_single_chain(target, config,
                         mix_seed(config.seed, static_cast<std::uint64_t>(tree_id),
                                  static_cast<std::uint64_t>(c)),
                         draws, flags);
        for (std::size_t i = 0; i < draws.size(); ++i) {
            out.chain.push_back(c);
            out.tree.push_back(tree_id);
            out.iteration.push_back(static_cast<int>(i) + 1);
            out.divergent.push_back(flags[i]);
            out.values.push_back(std::move(draws[i]));
        }
    }
    return out;
}

PosteriorDraws run_family(const ModelSpec& spec, const DataBundle& bundle,
                          const SamplerConfig& config) {
    std::vector<int> tree_ids = config.tree_indices;
    if (tree_ids.empty())
        for (std::size_t k = 0; k < bundle.trees.trees.size(); ++k)
            tree_ids.push_back(static_cast<int>(k) + 1);
    for (int id : tree_ids)
        if (id < 1 || id > static_cast<int>(bundle.trees.trees.size()))
            throw std::invalid_argument("tree index " + std::to_string(id) + " out of range");

    SamplerConfig cfg = config;
    cfg.init_jitter_mask.assign(spec.dim(), 1);
    if (!spec.p_regressed()) cfg.init_jitter_mask[0] = 0;  // constants start at prior median
    if (!spec.s_regressed()) cfg.init_jitter_mask[spec.p_regressed() ? spec.n_predictors + 1 : 1] = 0;
    cfg.validate(spec.dim());

    std::vector<std::unique_ptr<Posterior>> posts;
    for (int id : tree_ids) {
        try {
            posts.push_back(std::make_unique<Posterior>(
                bundle.trees.trees[static_cast<std::size_t>(id - 1)], bundle.traits,
                bundle.predictors, spec));
        } catch (const std::exception& e) {
            throw std::runtime_error("tree " + std::to_string(id) + ": " + e.what());
        }
    }

    struct Unit {
        std::size_t tree_pos;
        int chain;
        std::vector<std::vector<double>> draws;
        std::vector<std::uint8_t> flags;
        std::string error;
    };
    std::vector<Unit> units;
    for (std::size_t t = 0; t < tree_ids.size(); ++t)
        for (int c = 1; c <= cfg.n_chains; ++c) units.push_back({t, c, {}, {}, {}});

    auto run_unit = [&](Unit& u) {
        try {
            run_single_chain(*posts[u.tree_pos], cfg,
                             mix_seed(cfg.seed, static_cast<std::uint64_t>(tree_ids[u.tree_pos]),
                                      static_cast<std::uint64_t>(u.chain)),
                             u.draws, u.flags);
        } catch (const std::exception& e) {
            u.error = e.what();
        }
    };

    if (cfg.jobs <= 1 || units.size() <= 1) {
        for (auto& u : units) run_unit(u);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= units.size()) return;
                run_unit(units[i]);
            }
        };
        std::vector<std::thread> threads;
        auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), units.size());
        for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    for (const auto& u : units)
        if (!u.error.empty())
            throw std::runtime_error("tree " + std::to_string(tree_ids[u.tree_pos]) +
                                     ", chain " + std::to_string(u.chain) + ": " + u.error);

    PosteriorDraws out;
    out.param_names = posts.front()->names();
    for (auto& u : units) {
        const auto& post = *posts[u.tree_pos];
        for (std::size_t i = 0; i < u.draws.size(); ++i) {
            out.chain.push_back(u.chain);
            out.tree.push_back(tree_ids[u.tree_pos]);
            out.iteration.push_back(static_cast<int>(i) + 1);
            out.divergent.push_back(u.flags[i]);
            out.values.push_back(post.reported(u.draws[i]));
        }
    }
    return out;
}

namespace {

// Split each sequence in half, dropping the middle draw of odd-length ones.
std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        std::size_t half = c.size() / 2;
        if (half < 1) continue;
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

// Rank-normalize pooled values (average ranks on ties), then map through the
// normal quantile function.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& seqs) {
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> pooled;
    std::size_t total = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i)
        for (std::size_t j = 0; j < seqs[i].size(); ++j) {
            pooled.push_back({seqs[i][j], {i, j}});
            ++total;
        }
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<std::vector<double>> z(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) z[i].resize(seqs[i].size());
    std::size_t i = 0;
    const auto s = static_cast<double>(total);
    while (i < pooled.size()) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        double val = inverse_normal_cdf((avg_rank - 0.375) / (s + 0.25));
        for (std::size_t k = i; k < j; ++k)
            z[pooled[k].second.first][pooled[k].second.second] = val;
        i = j;
    }
    return z;
}

double rhat_of_split(const std::vector<std::vector<double>>& seqs) {
    const std::size_t m = seqs.size();
    if (m < 2) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = seqs.front().size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();

    std::vector<double> means(m), vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = mean(seqs[j]);
        vars[j] = variance(seqs[j]);
    }
    double w = mean(vars);
    double b = static_cast<double>(n) * variance(means);
    if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
                      b / static_cast<double>(n);
    return std::sqrt(var_plus / w);
}

double ess_of_split(const std::vector<std::vector<double>>& seqs) {
    const std::size_t m = seqs.size();
    if (m < 1) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = seqs.front().size();
    if (n < 4) return std::numeric_limits<double>::quiet_NaN();
    const double total = static_cast<double>(m) * static_cast<double>(n);

    std::vector<std::vector<double>> centered(m);
    std::vector<double> seq_means(m), seq_vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        seq_means[j] = mean(seqs[j]);
        seq_vars[j] = variance(seqs[j]);
        centered[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) centered[j][i] = seqs[j][i] - seq_means[j];
    }
    double mean_var = mean(seq_vars);
    double var_plus = mean_var * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
    if (m > 1) var_plus += variance(seq_means);
    if (!(var_plus > 0.0)) return total;  // constant input carries no autocorrelation

    auto acov_mean = [&](std::size_t t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double a = 0.0;
            for (std::size_t i = 0; i + t < n; ++i) a += centered[j][i] * centered[j][i + t];
            acc += a / static_cast<double>(n);
        }
        return acc / static_cast<double>(m);
    };
    auto rho = [&](std::size_t t) {
        if (t == 0) return 1.0;
        return 1.0 - (mean_var - acov_mean(t)) / var_plus;
    };

    // Geyer initial monotone positive sequence over paired autocorrelations
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (!(pair > 0.0)) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1e-12);
    double ess = total / tau;
    return std::min(ess, total * std::log10(std::max(10.0, total)));
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    return rhat_of_split(split_halves(chains));
}

double rank_normalized_ess(const std::vector<std::vector<double>>& chains) {
    auto split = split_halves(chains);
    if (split.empty()) return std::numeric_limits<double>::quiet_NaN();
    return ess_of_split(rank_normalize(split));
}

std::vector<ParamSummary> summarize(const PosteriorDraws& draws) {
    if (draws.size() < 4) throw std::invalid_argument("need at least 4 draws to summarize");

    // group into chains-within-trees, preserving draw order
    std::vector<std::pair<int, int>> keys;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        std::pair<int, int> key{draws.tree[i], draws.chain[i]};
        auto it = std::find(keys.begin(), keys.end(), key);
        if (it == keys.end()) {
            keys.push_back(key);
            groups.emplace_back();
            it = keys.end() - 1;
        }
        groups[static_cast<std::size_t>(it - keys.begin())].push_back(i);
    }
    std::size_t min_len = groups.front().size();
    for (const auto& g : groups) min_len = std::min(min_len, g.size());

    std::vector<ParamSummary> out;
    for (std::size_t j = 0; j < draws.n_params(); ++j) {
        auto col = draws.column(j);
        std::vector<std::vector<double>> seqs;
        for (const auto& g : groups) {
            std::vector<double> s;
            s.reserve(min_len);
            for (std::size_t i = 0; i < min_len; ++i) s.push_back(col[g[i]]);
            seqs.push_back(std::move(s));
        }
        ParamSummary ps;
        ps.param = draws.param_names[j];
        ps.median = quantile(col, 0.5);
        ps.eti_low = quantile(col, 0.025);
        ps.eti_high = quantile(col, 0.975);
        ps.rhat = split_rhat(seqs);
        ps.ess = rank_normalized_ess(seqs);
        out.push_back(std::move(ps));
    }
    return out;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
    CsvTable t;
    t.header = {"chain", "tree", "iteration"};
    for (const auto& n : draws.param_names) t.header.push_back(n);
    t.header.push_back("divergent");
    for (std::size_t i = 0; i < draws.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(draws.chain[i]));
        row.push_back(std::to_string(draws.tree[i]));
        row.push_back(std::to_string(draws.iteration[i]));
        for (double v : draws.values[i]) row.push_back(format_double(v));
        row.push_back(draws.divergent[i] ? "1" : "0");
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

PosteriorDraws read_draws_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 5 || t.header[0] != "chain" || t.header[1] != "tree" ||
        t.header[2] != "iteration" || t.header.back() != "divergent")
        throw std::runtime_error(path + ": not a draws file");
    PosteriorDraws d;
    d.param_names.assign(t.header.begin() + 3, t.header.end() - 1);
    for (const auto& row : t.rows) {
        d.chain.push_back(static_cast<int>(parse_long(row[0])));
        d.tree.push_back(static_cast<int>(parse_long(row[1])));
        d.iteration.push_back(static_cast<int>(parse_long(row[2])));
        std::vector<double> vals;
        for (std::size_t j = 3; j + 1 < row.size(); ++j) vals.push_back(parse_double(row[j]));
        d.values.push_back(std::move(vals));
        d.divergent.push_back(row.back() == "1" ? 1 : 0);
    }
    return d;
}

void write_summary_json(const std::string& path, const std::vector<ParamSummary>& summary) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : summary) {
        nlohmann::ordered_json obj;
        obj["param"] = s.param;
        obj["median"] = s.median;
        obj["eti_low"] = s.eti_low;
        obj["eti_high"] = s.eti_high;
        obj["rhat"] = s.rhat;
        obj["ess"] = s.ess;
        arr.push_back(std::move(obj));
    }
    write_text_file(path, arr.dump(2) + "\n");
}

}  // namespace phydra
