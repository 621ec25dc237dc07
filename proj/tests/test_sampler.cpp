#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "phydra/csv.hpp"
#include "phydra/rng.hpp"
#include "phydra/sampler.hpp"
#include "phydra/util.hpp"

using namespace phydra;

namespace {

class StdNormalTarget final : public LogDensityTarget {
  public:
    explicit StdNormalTarget(std::size_t d) : d_(d) {}
    std::size_t dim() const override { return d_; }
    double log_density(std::span<const double> theta, double* grad) const override {
        double lp = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            lp += -0.5 * theta[j] * theta[j];
            if (grad) grad[j] = -theta[j];
        }
        return lp;
    }

  private:
    std::size_t d_;
};

class ShiftedNormalTarget final : public LogDensityTarget {
  public:
    ShiftedNormalTarget(double mu, double sd) : mu_(mu), sd_(sd) {}
    std::size_t dim() const override { return 1; }
    double log_density(std::span<const double> theta, double* grad) const override {
        double z = (theta[0] - mu_) / sd_;
        if (grad) grad[0] = -z / sd_;
        return -0.5 * z * z;
    }

  private:
    double mu_, sd_;
};

std::vector<std::string> names_for(std::size_t d) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < d; ++j) out.push_back("x" + std::to_string(j));
    return out;
}

std::vector<std::vector<double>> chains_of(const PosteriorDraws& draws, std::size_t param) {
    std::vector<std::vector<double>> out;
    int max_chain = 0;
    for (int c : draws.chain) max_chain = std::max(max_chain, c);
    out.resize(static_cast<std::size_t>(max_chain));
    for (std::size_t i = 0; i < draws.size(); ++i)
        out[static_cast<std::size_t>(draws.chain[i] - 1)].push_back(draws.values[i][param]);
    return out;
}

}  // namespace

TEST_CASE("five-dimensional standard normal is recovered") {
    StdNormalTarget target(5);
    SamplerConfig cfg;
    cfg.n_chains = 3;
    cfg.n_iterations = 2000;
    cfg.seed = 20240901;
    auto draws = nuts_sample(target, cfg, names_for(5));
    CHECK(draws.size() == 3000);

    std::size_t n_div = 0;
    for (auto f : draws.divergent) n_div += f;
    CHECK(n_div <= 1);  // about one per ten thousand draws at most

    for (std::size_t j = 0; j < 5; ++j) {
        auto col = draws.column(j);
        CHECK(std::abs(mean(col)) < 0.05);
        CHECK(std::abs(std::sqrt(variance(col)) - 1.0) < 0.05);
        auto seqs = chains_of(draws, j);
        CHECK(split_rhat(seqs) < 1.01);
        CHECK(rank_normalized_ess(seqs) > 1000.0);
    }
}

TEST_CASE("shifted scaled normal recovers its location and spread") {
    ShiftedNormalTarget target(3.0, 0.5);
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iterations = 2000;
    cfg.seed = 7;
    auto draws = nuts_sample(target, cfg, {"x"});
    auto col = draws.column(0);
    CHECK(mean(col) == doctest::Approx(3.0).epsilon(0.02));
    CHECK(std::sqrt(variance(col)) == doctest::Approx(0.5).epsilon(0.05));
    auto summary = summarize(draws);
    CHECK(summary[0].median == doctest::Approx(3.0).epsilon(0.02));
    CHECK(summary[0].eti_low == doctest::Approx(3.0 - 1.96 * 0.5).epsilon(0.05));
    CHECK(summary[0].eti_high == doctest::Approx(3.0 + 1.96 * 0.5).epsilon(0.05));
    CHECK(summary[0].rhat < 1.01);
}

TEST_CASE("same seed gives bitwise-identical draws") {
    StdNormalTarget target(3);
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iterations = 400;
    cfg.seed = 42;
    auto a = nuts_sample(target, cfg, names_for(3));
    auto b = nuts_sample(target, cfg, names_for(3));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.chain[i] == b.chain[i]);
        CHECK(a.iteration[i] == b.iteration[i]);
        for (std::size_t j = 0; j < a.n_params(); ++j) CHECK(a.values[i][j] == b.values[i][j]);
    }

    SamplerConfig other = cfg;
    other.seed = 43;
    auto c = nuts_sample(target, other, names_for(3));
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.values[i][0] != c.values[i][0];
    CHECK(any_diff);
}

TEST_CASE("draw layout: chains, iterations, warmup discarded") {
    StdNormalTarget target(2);
    SamplerConfig cfg;
    cfg.n_chains = 3;
    cfg.n_iterations = 100;
    cfg.seed = 5;
    auto draws = nuts_sample(target, cfg, names_for(2), 4);
    CHECK(draws.size() == 150);  // 3 chains x 50 retained
    CHECK(draws.tree.front() == 4);
    CHECK(draws.chain.front() == 1);
    CHECK(draws.chain.back() == 3);
    CHECK(draws.iteration.front() == 1);
    CHECK(draws.iteration.back() == 50);
}

TEST_CASE("config validation rejects bad settings") {
    StdNormalTarget target(2);
    SamplerConfig cfg;
    cfg.n_iterations = 5;  // odd
    CHECK_THROWS(nuts_sample(target, cfg, names_for(2)));
    cfg.n_iterations = 100;
    cfg.warmup_fraction = 1.0;
    CHECK_THROWS(nuts_sample(target, cfg, names_for(2)));
    cfg.warmup_fraction = 0.5;
    cfg.init_jitter_mask = {1};  // wrong length
    CHECK_THROWS(nuts_sample(target, cfg, names_for(2)));
    cfg.init_jitter_mask.clear();
    CHECK_THROWS(nuts_sample(target, cfg, {"only_one_name"}));
}

TEST_CASE("split R-hat matches a direct computation") {
    // two constant-but-different chains: within variance 0, between positive
    CHECK(std::isinf(split_rhat({{1, 1, 1, 1}, {2, 2, 2, 2}})));
    // identical chains halves equal -> rhat 1
    CHECK(split_rhat({{1, 2, 1, 2}, {1, 2, 1, 2}}) ==
          doctest::Approx(split_rhat({{1, 2, 1, 2}, {1, 2, 1, 2}})));

    std::vector<double> c1{0.1, -0.4, 0.3, 0.2, -0.1, 0.0, 0.5, -0.3};
    std::vector<double> c2{0.0, 0.2, -0.2, 0.4, -0.5, 0.1, -0.1, 0.3};
    // hand evaluation of the split formula
    std::vector<std::vector<double>> seqs;
    for (const auto& c : {c1, c2}) {
        seqs.emplace_back(c.begin(), c.begin() + 4);
        seqs.emplace_back(c.begin() + 4, c.end());
    }
    double w = 0.0, b = 0.0;
    std::vector<double> ms;
    for (const auto& s : seqs) {
        ms.push_back(mean(s));
        w += variance(s);
    }
    w /= 4.0;
    b = 4.0 * variance(ms);
    double expected = std::sqrt((3.0 / 4.0 * w + b / 4.0) / w);
    CHECK(split_rhat({c1, c2}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("diagnostics behave on independent draws") {
    Rng rng(99);
    std::vector<std::vector<double>> chains(4);
    for (auto& c : chains)
        for (int i = 0; i < 1000; ++i) c.push_back(rng.normal());
    CHECK(split_rhat(chains) < 1.01);
    double ess = rank_normalized_ess(chains);
    CHECK(ess > 3200.0);  // iid: close to the 4000 total
    CHECK(ess < 4000.0 * std::log10(4000.0));
}

TEST_CASE("ESS drops for autocorrelated chains") {
    Rng rng(123);
    std::vector<std::vector<double>> chains(4);
    for (auto& c : chains) {
        double x = 0.0;
        for (int i = 0; i < 1000; ++i) {
            x = 0.9 * x + std::sqrt(1 - 0.81) * rng.normal();
            c.push_back(x);
        }
    }
    double ess = rank_normalized_ess(chains);
    // AR(1) with rho=0.9 has tau ~ (1+rho)/(1-rho) = 19
    CHECK(ess < 600.0);
    CHECK(ess > 80.0);
}

TEST_CASE("rank normalization makes ESS insensitive to monotone transforms") {
    Rng rng(7);
    std::vector<std::vector<double>> chains(2), cubed(2);
    for (std::size_t k = 0; k < 2; ++k)
        for (int i = 0; i < 500; ++i) {
            double v = rng.normal();
            chains[k].push_back(v);
            cubed[k].push_back(v * v * v);
        }
    CHECK(rank_normalized_ess(chains) == doctest::Approx(rank_normalized_ess(cubed)));
}

TEST_CASE("summarize quantiles use the interpolating definition") {
    PosteriorDraws d;
    d.param_names = {"v"};
    for (int c = 1; c <= 2; ++c)
        for (int i = 1; i <= 500; ++i) {
            d.chain.push_back(c);
            d.tree.push_back(1);
            d.iteration.push_back(i);
            d.divergent.push_back(0);
            d.values.push_back({static_cast<double>((c - 1) * 500 + i)});
        }
    auto s = summarize(d);
    CHECK(s[0].median == doctest::Approx(500.5));
    CHECK(s[0].eti_low == doctest::Approx(25.975));
    CHECK(s[0].eti_high == doctest::Approx(975.025));
}

TEST_CASE("draws survive a CSV round trip") {
    StdNormalTarget target(2);
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iterations = 60;
    cfg.seed = 17;
    auto draws = nuts_sample(target, cfg, {"alpha", "beta"}, 2);
    auto path = std::filesystem::temp_directory_path() / "phydra_draws_test.csv";
    write_draws_csv(path.string(), draws);
    auto back = read_draws_csv(path.string());
    REQUIRE(back.size() == draws.size());
    CHECK(back.param_names == draws.param_names);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        CHECK(back.chain[i] == draws.chain[i]);
        CHECK(back.tree[i] == draws.tree[i]);
        CHECK(back.iteration[i] == draws.iteration[i]);
        CHECK(back.divergent[i] == draws.divergent[i]);
        for (std::size_t j = 0; j < draws.n_params(); ++j)
            CHECK(back.values[i][j] == draws.values[i][j]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("summary JSON is written with one record per parameter") {
    std::vector<ParamSummary> s{{"a", 1.5, 0.5, 2.5, 1.001, 812.0},
                                {"b", -2.0, -3.0, -1.0, 1.002, 650.5}};
    auto path = std::filesystem::temp_directory_path() / "phydra_summary_test.json";
    write_summary_json(path.string(), s);
    auto text = read_text_file(path.string());
    CHECK(text.find("\"param\": \"a\"") != std::string::npos);
    CHECK(text.find("\"median\": 1.5") != std::string::npos);
    CHECK(text.find("\"ess\": 650.5") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("family runs pool draws tree-major and reproduce per-tree subsets") {
    TraitMatrix traits;
    traits.taxa = {"A", "B", "C", "D"};
    traits.character_ids = {"c1", "c2", "c3"};
    traits.cells = {{0, 1, 0}, {1, 1, kMissingState}, {0, 0, 1}, {1, 0, 1}};
    PredictorTable pred;
    pred.character_ids = {"c1", "c2", "c3"};
    pred.predictor_names = {"z1"};
    pred.x = {{0.3}, {-1.1}, {0.8}};
    TreeSample trees = make_tree_sample(
        {parse_newick("((A:1,B:1):0.5,(C:1,D:1):0.5);"),
         parse_newick("((A:0.8,C:0.8):0.7,(B:0.8,D:0.8):0.7);")},
        "test");
    auto bundle = make_bundle(traits, pred, trees);

    ModelSpec spec;
    spec.variant = Variant::kNull;
    spec.n_predictors = 1;

    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iterations = 200;
    cfg.seed = 11;
    auto draws = run_family(spec, bundle, cfg);
    CHECK(draws.size() == 400);  // 2 trees x 2 chains x 100 retained
    CHECK(draws.param_names == std::vector<std::string>{"p_const", "s_const"});
    for (std::size_t i = 0; i < draws.size(); ++i) {
        CHECK(draws.values[i][0] > 0.0);
        CHECK(draws.values[i][0] < 1.0);  // reporting scale, not logit
        CHECK(draws.values[i][1] > 0.0);
    }
    CHECK(draws.tree.front() == 1);
    CHECK(draws.tree.back() == 2);

    SamplerConfig sub = cfg;
    sub.tree_indices = {2};
    auto part = run_family(spec, bundle, sub);
    CHECK(part.size() == 200);
    std::size_t offset = 200;  // tree-2 block of the pooled run
    for (std::size_t i = 0; i < part.size(); ++i) {
        CHECK(part.tree[i] == 2);
        CHECK(part.values[i][0] == draws.values[offset + i][0]);
        CHECK(part.values[i][1] == draws.values[offset + i][1]);
    }

    SamplerConfig par = cfg;
    par.jobs = 4;
    auto threaded = run_family(spec, bundle, par);
    REQUIRE(threaded.size() == draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i)
        CHECK(threaded.values[i] == draws.values[i]);
}

TEST_CASE("acceptance statistic lands near the adaptation target") {
    // With adaptation working, the sampler should neither diverge constantly
    // nor produce near-degenerate moves; proxy: healthy ESS per draw and the
    // chain explores several standard deviations.
    StdNormalTarget target(10);
    SamplerConfig cfg;
    cfg.n_chains = 1;
    cfg.n_iterations = 1000;
    cfg.seed = 2718;
    auto draws = nuts_sample(target, cfg, names_for(10));
    auto col = draws.column(3);
    double lo = *std::min_element(col.begin(), col.end());
    double hi = *std::max_element(col.begin(), col.end());
    CHECK(lo < -2.0);
    CHECK(hi > 2.0);
}
