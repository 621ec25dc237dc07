#include "phydra/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "phydra/csv.hpp"
#include "phydra/util.hpp"

namespace phydra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kHighK = 0.7;

std::size_t tail_length(std::size_t n_draws) {
    double m = std::min(0.2 * static_cast<double>(n_draws),
                        3.0 * std::sqrt(static_cast<double>(n_draws)));
    return static_cast<std::size_t>(std::ceil(m));
}

// Smooths the importance weights for one observation in place and returns the
// Pareto shape estimate (NaN when the tail has no spread to fit).
double smooth_tail(std::vector<double>& lw) {
    const std::size_t s = lw.size();
    const std::size_t m = tail_length(s);
    if (m < 5) throw std::invalid_argument("importance-sampling tail has fewer than 5 draws");

    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return lw[a] < lw[b] || (lw[a] == lw[b] && a < b);
    });

    const double cutoff = std::exp(lw[order[s - m - 1]]);
    const double raw_max = lw[order[s - 1]];
    std::vector<double> exceed(m);
    for (std::size_t j = 0; j < m; ++j) exceed[j] = std::exp(lw[order[s - m + j]]) - cutoff;
    if (!(exceed.back() > 0.0)) return kNaN;  // flat tail, nothing to smooth

    GpdFit fit = fit_gpd(exceed);
    if (!std::isfinite(fit.k) || !(fit.sigma > 0.0)) return kNaN;

    for (std::size_t j = 0; j < m; ++j) {
        double q = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
        double smoothed = std::log(gpd_quantile(q, fit.k, fit.sigma) + cutoff);
        lw[order[s - m + j]] = std::min(smoothed, raw_max);
    }
    return fit.k;
}

// elpd contribution and Pareto k for column i of the matrix.
std::pair<double, double> loo_observation(const PointwiseMatrix& pw, std::size_t i) {
    const std::size_t s = pw.n_draws;
    std::vector<double> lw(s);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < s; ++d) {
        lw[d] = -pw.at(d, i);
        max_lw = std::max(max_lw, lw[d]);
    }
    for (double& v : lw) v -= max_lw;

    double k = smooth_tail(lw);

    std::vector<double> num(s);
    for (std::size_t d = 0; d < s; ++d) num[d] = lw[d] + pw.at(d, i);
    double elpd_i = log_sum_exp(num) - log_sum_exp(lw);
    return {elpd_i, k};
}

}  // namespace

GpdFit fit_gpd(std::span<const double> exceedances) {
    const std::size_t n = exceedances.size();
    if (n < 5) throw std::invalid_argument("generalized Pareto fit needs at least 5 values");
    const double z_max = exceedances.back();
    if (!(z_max > 0.0)) throw std::invalid_argument("exceedances must have a positive maximum");

    double quart = exceedances[static_cast<std::size_t>(
                                   std::floor(static_cast<double>(n) / 4.0 + 0.5)) -
                               1];
    if (!(quart > 0.0)) {
        for (double z : exceedances)
            if (z > 0.0) {
                quart = z;
                break;
            }
    }

    const std::size_t m = 30 + static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    std::vector<double> theta(m), logl(m);
    for (std::size_t j = 0; j < m; ++j) {
        theta[j] = 1.0 / z_max +
                   (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j) + 0.5))) /
                       (3.0 * quart);
        double k = 0.0;
        bool ok = theta[j] != 0.0;
        for (double z : exceedances) {
            double arg = -theta[j] * z;
            if (arg <= -1.0) {
                ok = false;
                break;
            }
            k += std::log1p(arg);
        }
        if (ok) {
            k /= static_cast<double>(n);
            logl[j] = static_cast<double>(n) * (std::log(-theta[j] / k) - k - 1.0);
            if (!std::isfinite(logl[j])) ok = false;
        }
        if (!ok) logl[j] = -std::numeric_limits<double>::infinity();
    }

    double lse = log_sum_exp(logl);
    if (!std::isfinite(lse)) return {kNaN, kNaN};
    double theta_hat = 0.0;
    for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(logl[j] - lse);

    double k = 0.0;
    for (double z : exceedances) k += std::log1p(-theta_hat * z);
    k /= static_cast<double>(n);
    double sigma = -k / theta_hat;
    // weakly informative prior pulls the shape toward 0.5 for small tails
    k = (k * static_cast<double>(n) + 5.0) / (static_cast<double>(n) + 10.0);
    return {k, sigma};
}

double gpd_quantile(double p, double k, double sigma) {
    if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
    return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

std::size_t LooResult::n_high_k(double threshold) const {
    std::size_t n = 0;
    for (double k : pareto_k)
        if (k > threshold) ++n;
    return n;
}

LooResult psis_loo(const PointwiseMatrix& pw, int jobs) {
    if (pw.n_draws == 0 || pw.n_obs == 0)
        throw std::invalid_argument("pointwise matrix is empty");
    if (pw.n_draws < 100)
        std::fprintf(stderr, "warning: only %zu draws for importance sampling; 100+ recommended\n",
                     pw.n_draws);
    for (double v : pw.loglik)
        if (!std::isfinite(v))
            throw std::invalid_argument("pointwise log-likelihood contains non-finite values");

    LooResult out;
    out.model = pw.model;
    out.pointwise.resize(pw.n_obs);
    out.pareto_k.resize(pw.n_obs);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
        while (!failed.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= pw.n_obs) return;
            try {
                auto [elpd_i, k] = loo_observation(pw, i);
                out.pointwise[i] = elpd_i;
                out.pareto_k[i] = k;
            } catch (...) {
                failed.store(true);
                throw;
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), pw.n_obs);
        std::exception_ptr err;
        std::mutex err_mu;
        for (std::size_t t = 0; t < n_threads; ++t)
            threads.emplace_back([&] {
                try {
                    worker();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        for (auto& th : threads) th.join();
        if (err) std::rethrow_exception(err);
    }

    out.elpd = std::accumulate(out.pointwise.begin(), out.pointwise.end(), 0.0);
    out.se = std::sqrt(static_cast<double>(pw.n_obs) * variance(out.pointwise));
    std::size_t high = out.n_high_k();
    if (high > 0)
        std::fprintf(stderr, "warning: %zu of %zu observations have Pareto k > %.1f\n", high,
                     pw.n_obs, kHighK);
    return out;
}

double lppd(const PointwiseMatrix& pw) {
    double total = 0.0;
    std::vector<double> col(pw.n_draws);
    for (std::size_t i = 0; i < pw.n_obs; ++i) {
        for (std::size_t d = 0; d < pw.n_draws; ++d) col[d] = pw.at(d, i);
        total += log_sum_exp(col) - std::log(static_cast<double>(pw.n_draws));
    }
    return total;
}

std::vector<ComparisonRow> compare(const std::vector<LooResult>& models) {
    if (models.empty()) throw std::invalid_argument("nothing to compare");
    const std::size_t n = models.front().pointwise.size();
    for (const auto& m : models)
        if (m.pointwise.size() != n)
            throw std::invalid_argument("model " + m.model +
                                        ": mismatched observation count in comparison");

    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return models[a].elpd > models[b].elpd;
    });
    const LooResult& best = models[order.front()];

    std::vector<ComparisonRow> rows;
    for (std::size_t idx : order) {
        const LooResult& m = models[idx];
        ComparisonRow row;
        row.model = m.model;
        row.elpd = m.elpd;
        row.se = m.se;
        row.n_high_k = m.n_high_k();
        if (&m == &best) {
            row.elpd_diff = 0.0;
            row.se_diff = 0.0;
        } else {
            std::vector<double> diff(n);
            for (std::size_t i = 0; i < n; ++i) diff[i] = m.pointwise[i] - best.pointwise[i];
            row.elpd_diff = std::accumulate(diff.begin(), diff.end(), 0.0);
            row.se_diff = std::sqrt(static_cast<double>(n) * variance(diff));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

PointwiseMatrix pointwise_matrix(const ModelSpec& spec, const DataBundle& bundle,
                                 const PosteriorDraws& draws, const std::string& model_name) {
    if (draws.size() == 0) throw std::invalid_argument("no draws to score");
    auto expected = param_names(spec, bundle.predictors.predictor_names);
    if (draws.param_names != expected)
        throw std::invalid_argument("draws do not match the model's parameter layout");

    std::map<int, std::unique_ptr<Posterior>> posts;
    for (int id : draws.tree) {
        if (id < 1 || id > static_cast<int>(bundle.trees.trees.size()))
            throw std::invalid_argument("draw references tree " + std::to_string(id) +
                                        " outside the bundle");
        if (!posts.count(id))
            posts[id] = std::make_unique<Posterior>(
                bundle.trees.trees[static_cast<std::size_t>(id - 1)], bundle.traits,
                bundle.predictors, spec);
    }

    PointwiseMatrix pw;
    pw.model = model_name;
    pw.n_draws = draws.size();
    pw.n_obs = posts.begin()->second->n_characters();
    pw.loglik.resize(pw.n_draws * pw.n_obs);

    const std::size_t s_idx = spec.p_regressed() ? spec.n_predictors + 1 : 1;
    std::vector<double> theta(spec.dim());
    for (std::size_t d = 0; d < pw.n_draws; ++d) {
        for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = draws.values[d][j];
        if (!spec.p_regressed()) theta[0] = logit(theta[0]);
        if (!spec.s_regressed()) theta[s_idx] = std::log(theta[s_idx]);
        auto row = posts.at(draws.tree[d])->pointwise(theta);
        std::copy(row.begin(), row.end(), pw.loglik.begin() + static_cast<std::ptrdiff_t>(d * pw.n_obs));
    }
    return pw;
}

void write_pointwise_csv(const std::string& path, const PointwiseMatrix& pw) {
    CsvTable t;
    t.header = {"draw", "obs", "loglik"};
    t.rows.reserve(pw.n_draws * pw.n_obs);
    for (std::size_t d = 0; d < pw.n_draws; ++d)
        for (std::size_t i = 0; i < pw.n_obs; ++i)
            t.rows.push_back({std::to_string(d + 1), std::to_string(i + 1),
                              format_double(pw.at(d, i))});
    write_csv(path, t);
}

PointwiseMatrix read_pointwise_csv(const std::string& path, const std::string& model_name) {
    CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"draw", "obs", "loglik"})
        throw std::runtime_error(path + ": expected draw,obs,loglik columns");
    PointwiseMatrix pw;
    pw.model = model_name;
    for (const auto& row : t.rows) {
        pw.n_draws = std::max(pw.n_draws, static_cast<std::size_t>(parse_long(row[0])));
        pw.n_obs = std::max(pw.n_obs, static_cast<std::size_t>(parse_long(row[1])));
    }
    if (t.rows.size() != pw.n_draws * pw.n_obs)
        throw std::runtime_error(path + ": incomplete draw-by-observation grid");
    pw.loglik.assign(pw.n_draws * pw.n_obs, kNaN);
    for (const auto& row : t.rows) {
        auto d = static_cast<std::size_t>(parse_long(row[0])) - 1;
        auto i = static_cast<std::size_t>(parse_long(row[1])) - 1;
        pw.at(d, i) = parse_double(row[2]);
    }
    for (double v : pw.loglik)
        if (std::isnan(v)) throw std::runtime_error(path + ": missing grid entries");
    return pw;
}

void write_loo_json(const std::string& path, const LooResult& loo) {
    nlohmann::ordered_json obj;
    obj["model"] = loo.model;
    obj["elpd"] = loo.elpd;
    obj["se"] = loo.se;
    obj["n_high_k"] = loo.n_high_k();
    write_text_file(path, obj.dump(2) + "\n");
}

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
    CsvTable t;
    t.header = {"model", "elpd", "se", "elpd_diff", "se_diff", "n_high_k"};
    for (const auto& r : rows)
        t.rows.push_back({r.model, format_double(r.elpd), format_double(r.se),
                          format_double(r.elpd_diff), format_double(r.se_diff),
                          std::to_string(r.n_high_k)});
    write_csv(path, t);
}

}  // namespace phydra
