#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "phydra/csv.hpp"
#include "phydra/negbin.hpp"
#include "phydra/rng.hpp"
#include "phydra/util.hpp"

using namespace phydra;

namespace {

long nb_draw(Rng& rng, double mu, double theta) {
    // gamma-poisson mixture: y ~ Poisson(mu * g), g ~ Gamma(theta, 1/theta)
    return rng.poisson(mu * rng.gamma(theta, 1.0 / theta));
}

CountDataset simulate(std::size_t n, const std::vector<double>& beta, double theta,
                      std::uint64_t seed) {
    Rng rng(seed);
    CountDataset d;
    const std::size_t k = beta.size() - 1;
    for (std::size_t j = 0; j < k; ++j) d.predictor_names.push_back("x" + std::to_string(j + 1));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xs(k);
        double eta = beta[0];
        for (std::size_t j = 0; j < k; ++j) {
            xs[j] = rng.normal();
            eta += beta[j + 1] * xs[j];
        }
        d.pair_ids.push_back("p" + std::to_string(i + 1));
        d.x.push_back(std::move(xs));
        d.counts.push_back(static_cast<double>(nb_draw(rng, std::exp(eta), theta)));
    }
    return d;
}

}  // namespace

TEST_CASE("intercept-only fit recovers the log of the sample mean") {
    CountDataset d;
    d.counts = {3, 5, 7, 2, 0, 8, 4, 4, 6, 1};
    d.x.assign(10, {});
    double m = mean(d.counts);
    auto fit = fit_negbin(d);
    REQUIRE(fit.beta.size() == 1);
    CHECK(std::abs(std::exp(fit.beta[0]) - m) < 1e-10);
    CHECK(fit.converged);
    CHECK(fit.theta > 0.0);
    CHECK(fit.aic == doctest::Approx(2.0 * 2.0 - 2.0 * fit.loglik));
}

TEST_CASE("coefficients and dispersion are recovered on a large sample") {
    auto d = simulate(2000, {1.0, 0.6, -0.4}, 5.0, 424242);
    auto fit = fit_negbin(d);
    CHECK(fit.converged);
    CHECK(fit.beta[0] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit.beta[1] == doctest::Approx(0.6).epsilon(0.15));
    CHECK(fit.beta[2] == doctest::Approx(-0.4).epsilon(0.15));
    CHECK(fit.theta == doctest::Approx(5.0).epsilon(0.25));
    CHECK(fit.theta_se > 0.0);
    CHECK(fit.theta_se < 1.0);
    CHECK(fit.aic == doctest::Approx(2.0 * 4.0 - 2.0 * fit.loglik));
}

TEST_CASE("wald confidence intervals are calibrated") {
    const std::vector<double> truth{0.5, 0.8, -0.6, 0.3};
    int inside[4] = {0, 0, 0, 0};
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        auto d = simulate(300, truth, 5.0, 9000 + static_cast<std::uint64_t>(r));
        auto fit = fit_negbin(d);
        for (std::size_t j = 0; j < 4; ++j)
            if (std::abs(fit.beta[j] - truth[j]) <= 1.959963984540054 * fit.se[j]) ++inside[j];
    }
    for (int j = 0; j < 4; ++j) CHECK(inside[j] >= 90);
}

TEST_CASE("huge fixed dispersion reproduces the Poisson fit") {
    auto d = simulate(400, {0.8, 0.5}, 1e9, 77);  // essentially Poisson data
    auto fit = fit_negbin_fixed(d, 1e8);
    double pois = 0.0;
    for (std::size_t i = 0; i < d.counts.size(); ++i) {
        double eta = fit.beta[0] + fit.beta[1] * d.x[i][0];
        double mu = std::exp(eta);
        pois += -mu - std::lgamma(d.counts[i] + 1.0);
        if (d.counts[i] > 0.0) pois += d.counts[i] * std::log(mu);
    }
    CHECK(std::abs(fit.loglik - pois) < 1e-4 * static_cast<double>(d.counts.size()));
    CHECK(fit.theta_se == 0.0);
}

TEST_CASE("profile log-likelihood ascends monotonically") {
    auto d = simulate(500, {0.4, 0.7, -0.2}, 2.0, 31337);
    auto fit = fit_negbin(d);
    REQUIRE(!fit.loglik_trace.empty());
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
        CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-10);
    CHECK(fit.loglik == doctest::Approx(fit.loglik_trace.back()));
}

TEST_CASE("rescaling a predictor rescales its coefficient and nothing else") {
    auto d = simulate(600, {0.5, 0.9}, 4.0, 1234);
    auto base = fit_negbin(d);
    auto scaled = d;
    const double c = 10.0;
    for (auto& row : scaled.x) row[0] *= c;
    auto refit = fit_negbin(scaled);
    CHECK(refit.beta[1] == doctest::Approx(base.beta[1] / c).epsilon(1e-6));
    CHECK(refit.se[1] == doctest::Approx(base.se[1] / c).epsilon(1e-4));
    for (std::size_t i = 0; i < d.counts.size(); i += 37) {
        double mu_a = std::exp(base.beta[0] + base.beta[1] * d.x[i][0]);
        double mu_b = std::exp(refit.beta[0] + refit.beta[1] * scaled.x[i][0]);
        CHECK(std::abs(mu_a - mu_b) < 1e-8 * std::max(1.0, mu_a));
    }
}

TEST_CASE("wald rows carry the right tails and stars") {
    NegBinFit fit;
    fit.names = {"(Intercept)", "a", "b", "c", "d"};
    fit.beta = {0.0, 2.68, 2.0, 1.7, 1.5};
    fit.se = {1.0, 1.0, 1.0, 1.0, 1.0};
    auto rows = wald_pvalues(fit);
    CHECK(rows[0].p == doctest::Approx(1.0));
    CHECK(rows[0].stars == "");
    CHECK(rows[1].stars == "***");
    CHECK(rows[2].stars == "**");
    CHECK(rows[3].stars == "*");
    CHECK(rows[4].stars == "");

    NegBinFit q;
    q.names = {"(Intercept)"};
    q.beta = {1.96};
    q.se = {1.0};
    CHECK(wald_pvalues(q)[0].p == doctest::Approx(0.05).epsilon(1e-3));
    q.se = {0.0};
    CHECK_THROWS(wald_pvalues(q));
}

TEST_CASE("bad inputs are rejected") {
    CountDataset tiny;
    tiny.predictor_names = {"x1", "x2", "x3"};
    tiny.counts = {1, 2, 3, 4, 5};
    tiny.x.assign(5, {0.1, 0.2, 0.3});
    CHECK_THROWS(fit_negbin(tiny));  // N <= K + 2

    CountDataset zeros;
    zeros.counts.assign(20, 0.0);
    zeros.x.assign(20, {});
    CHECK_THROWS(fit_negbin(zeros));

    CountDataset frac;
    frac.counts = {1, 2, 2.5, 3, 4, 5, 6, 7};
    frac.x.assign(8, {});
    CHECK_THROWS(fit_negbin(frac));

    CountDataset dup;  // duplicated column -> rank deficient
    dup.predictor_names = {"x1", "x2"};
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        double v = rng.normal();
        dup.x.push_back({v, v});
        dup.counts.push_back(static_cast<double>(rng.poisson(3.0)));
    }
    CHECK_THROWS(fit_negbin(dup));
}

TEST_CASE("count data and fit reports round trip through files") {
    auto d = simulate(40, {0.5, 0.3}, 3.0, 2222);
    auto dir = std::filesystem::temp_directory_path();
    auto csv_path = (dir / "phydra_counts_test.csv").string();
    write_count_data(csv_path, d);
    auto back = read_count_data(csv_path);
    REQUIRE(back.counts.size() == d.counts.size());
    CHECK(back.predictor_names == d.predictor_names);
    for (std::size_t i = 0; i < d.counts.size(); ++i) {
        CHECK(back.counts[i] == d.counts[i]);
        CHECK(back.x[i][0] == d.x[i][0]);
    }

    auto fit = fit_negbin(d);
    auto json_path = (dir / "phydra_negbin_test.json").string();
    write_negbin_json(json_path, fit);
    auto text = read_text_file(json_path);
    CHECK(text.find("\"observations\": 40") != std::string::npos);
    CHECK(text.find("\"theta\"") != std::string::npos);
    CHECK(text.find("\"aic\"") != std::string::npos);
    std::filesystem::remove(csv_path);
    std::filesystem::remove(json_path);
}
