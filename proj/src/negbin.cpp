#include "phydra/negbin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "json.hpp"
#include "phydra/csv.hpp"
#include "phydra/util.hpp"

namespace phydra {

namespace {

constexpr double kEtaCap = 30.0;  // keeps exp(eta) finite under separation

Eigen::VectorXd mean_from(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        eta[i] = std::clamp(eta[i], -kEtaCap, kEtaCap);
    return eta.array().exp();
}

double loglik_at(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta) {
    return negbin_log_likelihood({y.data(), static_cast<std::size_t>(y.size())},
                                 {mu.data(), static_cast<std::size_t>(mu.size())}, theta);
}

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        ll += -mu[i] - std::lgamma(y[i] + 1.0);
        if (y[i] > 0.0) ll += y[i] * std::log(mu[i]);
    }
    return ll;
}

// One weighted least-squares pass of the IRLS recursion at fixed theta.
// poisson=true uses the Poisson weights (the initializer).
Eigen::VectorXd irls_step(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double theta, bool poisson) {
    Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        eta[i] = std::clamp(eta[i], -kEtaCap, kEtaCap);
    Eigen::VectorXd mu = eta.array().exp();
    Eigen::VectorXd w(y.size()), z(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        w[i] = poisson ? mu[i] : mu[i] * theta / (theta + mu[i]);
        z[i] = eta[i] + (y[i] - mu[i]) / mu[i];
    }
    Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    Eigen::VectorXd xtwz = x.transpose() * (w.array() * z.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    Eigen::VectorXd d = ldlt.vectorD();
    if (d.minCoeff() < 1e-10 * std::max(1.0, d.maxCoeff()))
        throw std::runtime_error("design matrix is rank deficient (or the fit separated)");
    return ldlt.solve(xtwz);
}

// Coefficients at fixed theta with monotone-ascent step halving.
Eigen::VectorXd fit_beta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         Eigen::VectorXd beta, double theta, bool poisson) {
    auto objective = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd mu = mean_from(x, b);
        return poisson ? poisson_loglik(y, mu) : loglik_at(y, mu, theta);
    };
    double ll = objective(beta);
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::VectorXd proposal = irls_step(x, y, beta, theta, poisson);
        double step = 1.0;
        Eigen::VectorXd candidate = proposal;
        double cand_ll = objective(candidate);
        for (int half = 0; half < 30 && !(cand_ll >= ll - 1e-12); ++half) {
            step *= 0.5;
            candidate = beta + step * (proposal - beta);
            cand_ll = objective(candidate);
        }
        double delta = (candidate - beta).cwiseAbs().maxCoeff();
        beta = candidate;
        ll = cand_ll;
        if (delta < 1e-10) break;
    }
    return beta;
}

// Score and curvature of the profile log-likelihood in theta.
std::pair<double, double> theta_score(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                                      double theta) {
    double score = 0.0, curve = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double denom = theta + mu[i];
        score += boost::math::digamma(y[i] + theta) - boost::math::digamma(theta) +
                 std::log(theta) + 1.0 - std::log(denom) - (y[i] + theta) / denom;
        curve += boost::math::trigamma(y[i] + theta) - boost::math::trigamma(theta) +
                 1.0 / theta - 2.0 / denom + (y[i] + theta) / (denom * denom);
    }
    return {score, curve};
}

double update_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta) {
    double ll = loglik_at(y, mu, theta);
    for (int iter = 0; iter < 25; ++iter) {
        auto [score, curve] = theta_score(y, mu, theta);
        if (std::abs(score) < 1e-10 * static_cast<double>(y.size())) break;
        double proposal;
        if (curve < 0.0) {
            proposal = theta - score / curve;
            if (!(proposal > 0.0)) proposal = theta * (score > 0.0 ? 2.0 : 0.5);
        } else {
            proposal = theta * (score > 0.0 ? 2.0 : 0.5);
        }
        double cand = proposal;
        double cand_ll = loglik_at(y, mu, cand);
        for (int half = 0; half < 30 && !(cand_ll >= ll - 1e-12); ++half) {
            cand = 0.5 * (cand + theta);
            cand_ll = loglik_at(y, mu, cand);
        }
        if (std::abs(cand - theta) < 1e-12 * theta) {
            theta = cand;
            break;
        }
        theta = cand;
        ll = cand_ll;
    }
    return theta;
}

struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Design build_design(const CountDataset& data) {
    const auto n = data.counts.size();
    const auto k = data.predictor_names.size();
    if (data.x.size() != n)
        throw std::invalid_argument("predictor rows do not match the count vector");
    if (n <= k + 2)
        throw std::invalid_argument("need more observations than parameters to fit");
    bool any_positive = false;
    for (double c : data.counts) {
        if (!(c >= 0.0) || c != std::floor(c))
            throw std::invalid_argument("counts must be non-negative integers");
        if (c > 0.0) any_positive = true;
    }
    if (!any_positive) throw std::invalid_argument("all counts are zero; nothing to fit");

    Design d;
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
    d.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (data.x[i].size() != k)
            throw std::invalid_argument("ragged predictor row in count dataset");
        d.x(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (!std::isfinite(data.x[i][j]))
                throw std::invalid_argument("non-finite predictor value");
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) + 1) = data.x[i][j];
        }
        d.y[static_cast<Eigen::Index>(i)] = data.counts[i];
    }
    return d;
}

Eigen::VectorXd initial_beta(const Design& d) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.x.cols());
    double m = d.y.mean();
    beta[0] = std::log(std::max(m, 1e-8));
    return fit_beta(d.x, d.y, beta, 0.0, /*poisson=*/true);
}

double initial_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        num += mu[i] * mu[i];
        den += (y[i] - mu[i]) * (y[i] - mu[i]) - mu[i];
    }
    if (!(den > 0.0)) return 100.0;  // under-dispersed start
    return std::clamp(num / den, 0.01, 1e4);
}

NegBinFit finish_fit(const Design& d, const CountDataset& data, const Eigen::VectorXd& beta,
                     double theta, double theta_se, bool converged, int iterations,
                     std::vector<double> trace) {
    Eigen::VectorXd mu = mean_from(d.x, beta);
    Eigen::VectorXd w(d.y.size());
    for (Eigen::Index i = 0; i < d.y.size(); ++i) w[i] = mu[i] * theta / (theta + mu[i]);
    Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    Eigen::MatrixXd cov = info.inverse();

    NegBinFit fit;
    fit.names.push_back("(Intercept)");
    for (const auto& n : data.predictor_names) fit.names.push_back(n);
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        fit.beta.push_back(beta[j]);
        fit.se.push_back(std::sqrt(std::max(cov(j, j), 0.0)));
    }
    fit.theta = theta;
    fit.theta_se = theta_se;
    fit.loglik = loglik_at(d.y, mu, theta);
    fit.aic = 2.0 * (static_cast<double>(data.predictor_names.size()) + 2.0) - 2.0 * fit.loglik;
    fit.converged = converged;
    fit.outer_iterations = iterations;
    fit.n_obs = data.counts.size();
    fit.loglik_trace = std::move(trace);
    return fit;
}

}  // namespace

double negbin_log_likelihood(std::span<const double> counts, std::span<const double> mu,
                             double theta) {
    if (counts.size() != mu.size()) throw std::invalid_argument("count/mean size mismatch");
    if (!(theta > 0.0)) throw std::invalid_argument("dispersion must be positive");
    double ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double y = counts[i], m = mu[i];
        ll += std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) +
              theta * std::log(theta / (theta + m));
        if (y > 0.0) ll += y * std::log(m / (theta + m));
    }
    return ll;
}

NegBinFit fit_negbin(const CountDataset& data) {
    Design d = build_design(data);
    Eigen::VectorXd beta = initial_beta(d);
    double theta = initial_theta(d.y, mean_from(d.x, beta));

    std::vector<double> trace;
    double ll = loglik_at(d.y, mean_from(d.x, beta), theta);
    bool converged = false;
    int iter = 0;
    for (; iter < 50; ++iter) {
        beta = fit_beta(d.x, d.y, beta, theta, /*poisson=*/false);
        theta = update_theta(d.y, mean_from(d.x, beta), theta);
        double next = loglik_at(d.y, mean_from(d.x, beta), theta);
        trace.push_back(next);
        if (std::abs(next - ll) < 1e-8) {
            converged = true;
            ll = next;
            ++iter;
            break;
        }
        ll = next;
    }
    if (!converged)
        std::fprintf(stderr, "warning: negative binomial fit did not converge in 50 passes\n");

    auto [score, curve] = theta_score(d.y, mean_from(d.x, beta), theta);
    (void)score;
    double theta_se =
        curve < 0.0 ? 1.0 / std::sqrt(-curve) : std::numeric_limits<double>::infinity();
    return finish_fit(d, data, beta, theta, theta_se, converged, iter, std::move(trace));
}

NegBinFit fit_negbin_fixed(const CountDataset& data, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("dispersion must be positive");
    Design d = build_design(data);
    Eigen::VectorXd beta = fit_beta(d.x, d.y, initial_beta(d), theta, /*poisson=*/false);
    std::vector<double> trace{loglik_at(d.y, mean_from(d.x, beta), theta)};
    return finish_fit(d, data, beta, theta, 0.0, true, 1, std::move(trace));
}

std::vector<WaldRow> wald_pvalues(const NegBinFit& fit) {
    std::vector<WaldRow> rows;
    for (std::size_t j = 0; j < fit.beta.size(); ++j) {
        WaldRow r;
        r.name = fit.names[j];
        r.estimate = fit.beta[j];
        r.se = fit.se[j];
        if (!(r.se > 0.0)) throw std::runtime_error("zero standard error for " + r.name);
        r.z = r.estimate / r.se;
        r.p = 2.0 * normal_cdf(-std::abs(r.z));
        if (r.p < 0.01)
            r.stars = "***";
        else if (r.p < 0.05)
            r.stars = "**";
        else if (r.p < 0.1)
            r.stars = "*";
        rows.push_back(std::move(r));
    }
    return rows;
}

CountDataset read_count_data(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.header[0] != "pair_id")
        throw std::runtime_error(path + ": expected a leading pair_id column");
    auto count_col = std::find(t.header.begin(), t.header.end(), "count");
    if (count_col == t.header.end())
        throw std::runtime_error(path + ": missing the count column");
    auto count_idx = static_cast<std::size_t>(count_col - t.header.begin());

    CountDataset data;
    for (std::size_t j = 1; j < t.header.size(); ++j)
        if (j != count_idx) data.predictor_names.push_back(t.header[j]);
    for (const auto& row : t.rows) {
        data.pair_ids.push_back(row[0]);
        std::vector<double> xs;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (j == count_idx)
                data.counts.push_back(parse_double(row[j]));
            else
                xs.push_back(parse_double(row[j]));
        }
        data.x.push_back(std::move(xs));
    }
    return data;
}

void write_count_data(const std::string& path, const CountDataset& data) {
    CsvTable t;
    t.header = {"pair_id"};
    for (const auto& n : data.predictor_names) t.header.push_back(n);
    t.header.push_back("count");
    for (std::size_t i = 0; i < data.counts.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(i < data.pair_ids.size() ? data.pair_ids[i]
                                               : "pair_" + std::to_string(i + 1));
        for (double v : data.x[i]) row.push_back(format_double(v));
        row.push_back(format_double(data.counts[i]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

void write_negbin_json(const std::string& path, const NegBinFit& fit) {
    nlohmann::ordered_json obj;
    obj["observations"] = fit.n_obs;
    auto rows = wald_pvalues(fit);
    nlohmann::ordered_json coefs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json c;
        c["name"] = r.name;
        c["estimate"] = r.estimate;
        c["se"] = r.se;
        c["z"] = r.z;
        c["p"] = r.p;
        c["stars"] = r.stars;
        coefs.push_back(std::move(c));
    }
    obj["coefficients"] = std::move(coefs);
    obj["theta"] = fit.theta;
    obj["theta_se"] = fit.theta_se;
    obj["loglik"] = fit.loglik;
    obj["aic"] = fit.aic;
    obj["converged"] = fit.converged;
    write_text_file(path, obj.dump(2) + "\n");
}

}  // namespace phydra
