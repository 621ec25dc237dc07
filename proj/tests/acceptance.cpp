// Acceptance gate: ten checks covering transition probabilities, pruning,
// gradients, sampling, simulation-based validation, model selection, the
// negative binomial baseline, ingestion, determinism, and model invariances.
// Prints one line per criterion; the exit code is the number of failures.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "phydra/ctmc.hpp"
#include "phydra/ingest.hpp"
#include "phydra/likelihood.hpp"
#include "phydra/model.hpp"
#include "phydra/negbin.hpp"
#include "phydra/rng.hpp"
#include "phydra/sampler.hpp"
#include "phydra/selection.hpp"
#include "phydra/simval.hpp"
#include "phydra/trees.hpp"

using namespace phydra;

namespace {

std::string g_cli;
std::string g_fixtures;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. closed-form transition matrix vs matrix exponential

Outcome transition_probabilities() {
    Rng rng(101);
    double max_err = 0.0, max_row = 0.0;
    for (int i = 0; i < 1000; ++i) {
        RateParams rp{rng.uniform(0.01, 50.0), rng.uniform(0.011, 0.989)};
        double t = rng.uniform(0.0, 100.0);
        auto rates = rates_from_params(rp);
        auto got = transition_matrix(rp, t);
        auto want = oracle::expm_2state(rates.q_gain, rates.q_loss, t);
        for (int from = 0; from < 2; ++from) {
            for (int to = 0; to < 2; ++to)
                max_err = std::max(max_err, std::fabs(got(from, to) - want[from][to]));
            max_row = std::max(max_row, std::fabs(got(from, 0) + got(from, 1) - 1.0));
        }
    }
    return {max_err <= 1e-10 && max_row <= 1e-12,
            fmt("max entry err %.2e, max row-sum err %.2e", max_err, max_row)};
}

// ---------------------------------------------------------------------------
// 2. pruning vs brute-force enumeration on small trees

Outcome pruning_enumeration() {
    Rng rng(202);
    double max_err = 0.0;
    for (int i = 0; i < 200; ++i) {
        int tips = 2 + static_cast<int>(rng.integer(4));
        auto tree = simulate_coalescent(tips, 5000 + static_cast<std::uint64_t>(i));
        TipStates ts;
        ts.character_id = "c";
        for (const auto& label : tree.tip_labels()) {
            double u = rng.uniform();
            ts.states[label] =
                u < 0.2 ? kMissingState : static_cast<std::int8_t>(u < 0.6 ? 0 : 1);
        }
        RateParams rp{rng.uniform(0.05, 5.0), rng.uniform(0.05, 0.95)};
        double ll = log_likelihood(tree, ts, rp);
        double oracle_ll = std::log(enumerate_likelihood_oracle(tree, ts, rp));
        max_err = std::max(max_err, std::fabs(ll - oracle_ll));
    }
    return {max_err <= 1e-12, fmt("200 trees, max |log L| err %.2e", max_err)};
}

// ---------------------------------------------------------------------------
// 3. posterior gradient vs central finite differences

Outcome gradient_finite_differences() {
    Rng rng(303);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        int tips = 4 + static_cast<int>(rng.integer(17));       // 4..20
        int chars = 1 + static_cast<int>(rng.integer(10));      // 1..10
        auto tree = simulate_coalescent(tips, 7000 + static_cast<std::uint64_t>(inst));

        TraitMatrix traits;
        traits.taxa = tree.tip_labels();
        PredictorTable preds;
        preds.predictor_names = {"x1", "x2", "x3"};
        for (int c = 0; c < chars; ++c) {
            std::string id = "a" + std::to_string(c) + "|b" + std::to_string(c);
            traits.character_ids.push_back(id);
            preds.character_ids.push_back(id);
            preds.x.push_back({rng.normal(), rng.normal(), rng.normal()});
        }
        traits.cells.assign(traits.taxa.size(), {});
        for (auto& row : traits.cells)
            for (int c = 0; c < chars; ++c) {
                double u = rng.uniform();
                row.push_back(u < 0.15 ? kMissingState
                                       : static_cast<std::int8_t>(u < 0.55 ? 0 : 1));
            }

        ModelSpec spec;
        spec.variant = Variant::kFull;
        spec.n_predictors = 3;
        Posterior post(tree, traits, preds, spec);

        std::vector<double> theta(post.dim());
        for (auto& v : theta) v = 0.5 * rng.normal();
        std::vector<double> grad(post.dim());
        post.log_density(theta, grad.data());

        const double h = 1e-5;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            auto shifted = theta;
            shifted[j] = theta[j] + h;
            double up = post.log_density(shifted, nullptr);
            shifted[j] = theta[j] - h;
            double down = post.log_density(shifted, nullptr);
            double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::fabs(fd - grad[j]) / std::max(1.0, std::fabs(grad[j])));
        }
    }
    return {worst <= 1e-5, fmt("50 instances, worst relative gradient err %.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4. NUTS calibration on a 5-D standard normal

class StdNormal final : public LogDensityTarget {
  public:
    std::size_t dim() const override { return 5; }
    double log_density(std::span<const double> theta, double* grad) const override {
        double lp = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            lp -= 0.5 * theta[i] * theta[i];
            if (grad != nullptr) grad[i] = -theta[i];
        }
        return lp;
    }
};

Outcome sampler_calibration() {
    StdNormal target;
    SamplerConfig cfg;
    cfg.n_chains = 3;
    cfg.n_iterations = 4000;  // 2000 retained per chain
    cfg.seed = 404;
    auto draws = nuts_sample(target, cfg, {"z1", "z2", "z3", "z4", "z5"});
    auto rows = summarize(draws);

    double worst_mean = 0.0, worst_sd = 0.0, worst_rhat = 0.0, min_ess = 1e18;
    for (std::size_t p = 0; p < 5; ++p) {
        auto col = draws.column(p);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size() - 1);
        worst_mean = std::max(worst_mean, std::fabs(mean));
        worst_sd = std::max(worst_sd, std::fabs(std::sqrt(var) - 1.0));
        worst_rhat = std::max(worst_rhat, rows[p].rhat);
        min_ess = std::min(min_ess, rows[p].ess);
    }
    bool pass = worst_mean <= 0.05 && worst_sd <= 0.05 && worst_rhat < 1.01 && min_ess > 1000;
    return {pass, fmt("worst |mean| %.3f, worst |sd-1| %.3f, ", worst_mean, worst_sd) +
                      fmt("max R-hat %.4f, min ESS %.0f", worst_rhat, min_ess)};
}

// ---------------------------------------------------------------------------
// 5. simulation-based validation at reduced scale

struct EtiPair {
    double low, high;
};

EtiPair eti_of(const std::vector<ParamSummary>& rows, const std::string& name) {
    for (const auto& r : rows)
        if (r.param == name) return {r.eti_low, r.eti_high};
    throw std::runtime_error("missing parameter " + name);
}

PosteriorDraws fit_once(const ModelSpec& spec, const SyntheticData& data, std::uint64_t seed,
                        int iterations) {
    PredictorTable preds;
    preds.character_ids = data.traits.character_ids;
    preds.predictor_names = {"x"};
    for (double v : data.x) preds.x.push_back({v});
    auto bundle =
        make_bundle(data.traits, std::move(preds), make_tree_sample({data.tree}, "sim"));
    SamplerConfig cfg;
    cfg.n_chains = 1;
    cfg.n_iterations = iterations;
    cfg.seed = seed;
    return run_family(spec, bundle, cfg);
}

Outcome simulation_validation() {
    ModelSpec spec;
    spec.variant = Variant::kFull;
    spec.n_predictors = 1;

    int n_zero = 0, fp = 0, sign_errors = 0, strong = 0, strong_hit = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (int pattern = 0; pattern < 4; ++pattern) {
            bool s_active = (pattern & 1) != 0;
            bool p_active = (pattern & 2) != 0;
            auto data = generate_synthetic(
                make_setting(SimSize::kSmall, s_active, p_active, seed));
            auto draws = fit_once(spec, data, mix_seed(41, seed, pattern), 1000);
            auto rows = summarize(draws);

            const double truths[2] = {data.truth.beta_p[0], data.truth.beta_s[0]};
            const char* names[2] = {"b_p_x", "b_s_x"};
            for (int k = 0; k < 2; ++k) {
                auto eti = eti_of(rows, names[k]);
                auto verdict = classify_recovery(truths[k], eti.low, eti.high);
                if (truths[k] == 0.0) {
                    ++n_zero;
                    if (verdict == Recovery::kFalsePositive) ++fp;
                } else {
                    if (verdict == Recovery::kSignError) ++sign_errors;
                    if (std::fabs(truths[k]) >= 0.75) {
                        ++strong;
                        if (verdict == Recovery::kTrue) ++strong_hit;
                    }
                }
            }
        }
    }
    double fp_rate = static_cast<double>(fp) / static_cast<double>(n_zero);
    double t_rate = strong == 0 ? 0.0 : static_cast<double>(strong_hit) / strong;
    bool pass = fp_rate <= 0.10 && sign_errors == 0 && t_rate >= 0.70;
    std::ostringstream detail;
    detail << "FP " << fp << "/" << n_zero << ", SE " << sign_errors << ", strong T "
           << strong_hit << "/" << strong;
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. PSIS-LOO ranks full vs null sensibly on synthetic data

Outcome model_selection() {
    ModelSpec full;
    full.variant = Variant::kFull;
    full.n_predictors = 1;
    ModelSpec null_spec;
    null_spec.variant = Variant::kNull;
    null_spec.n_predictors = 1;

    auto loo_pair = [&](const SyntheticData& data, std::uint64_t seed) {
        PredictorTable preds;
        preds.character_ids = data.traits.character_ids;
        preds.predictor_names = {"x"};
        for (double v : data.x) preds.x.push_back({v});
        auto bundle =
            make_bundle(data.traits, std::move(preds), make_tree_sample({data.tree}, "sim"));
        SamplerConfig cfg;
        cfg.n_chains = 1;
        cfg.n_iterations = 1000;
        cfg.seed = seed;
        auto full_draws = run_family(full, bundle, cfg);
        cfg.seed = seed + 1;
        auto null_draws = run_family(null_spec, bundle, cfg);
        auto loo_full = psis_loo(pointwise_matrix(full, bundle, full_draws, "full"));
        auto loo_null = psis_loo(pointwise_matrix(null_spec, bundle, null_draws, "null"));
        return std::pair{loo_full, loo_null};
    };

    // effect arm: both coefficients active with magnitude >= 0.5
    int full_wins = 0;
    int found = 0;
    for (std::uint64_t seed = 1000; found < 20; ++seed) {
        auto data = generate_synthetic(make_setting(SimSize::kSmall, true, true, seed));
        if (std::fabs(data.truth.beta_s[0]) < 0.5 || std::fabs(data.truth.beta_p[0]) < 0.5)
            continue;
        ++found;
        auto [loo_full, loo_null] = loo_pair(data, 6000 + seed);
        if (loo_full.elpd > loo_null.elpd) ++full_wins;
    }

    // no-effect arm: null within 2 SE of full
    int close = 0;
    for (std::uint64_t seed = 3000; seed < 3020; ++seed) {
        auto data = generate_synthetic(make_setting(SimSize::kSmall, false, false, seed));
        auto [loo_full, loo_null] = loo_pair(data, 8000 + seed);
        auto rows = compare({loo_full, loo_null});
        if (std::fabs(rows[1].elpd_diff) <= 2.0 * rows[1].se_diff) ++close;
    }

    bool pass = full_wins >= 18 && close >= 16;
    std::ostringstream detail;
    detail << "full beats null " << full_wins << "/20, null within 2 SE " << close << "/20";
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. negative binomial Wald coverage and intercept-only identity

Outcome negbin_recovery() {
    const std::vector<double> beta_true = {0.5, 0.8, -0.6, 0.3};
    const double theta_true = 5.0;
    const int n = 300;
    int inside[4] = {0, 0, 0, 0};

    for (std::uint64_t rep = 1; rep <= 100; ++rep) {
        Rng rng(mix_seed(707, rep));
        CountDataset data;
        data.predictor_names = {"x1", "x2", "x3"};
        for (int i = 0; i < n; ++i) {
            std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
            double eta = beta_true[0] + beta_true[1] * x[0] + beta_true[2] * x[1] +
                         beta_true[3] * x[2];
            double mu = std::exp(eta);
            double lambda = mu * rng.gamma(theta_true, 1.0 / theta_true);
            data.pair_ids.push_back("p" + std::to_string(i) + "|q" + std::to_string(i));
            data.x.push_back(x);
            data.counts.push_back(static_cast<double>(rng.poisson(lambda)));
        }
        auto fit = fit_negbin(data);
        for (int j = 0; j < 4; ++j) {
            double z = 1.959963984540054;
            if (std::fabs(fit.beta[j] - beta_true[j]) <= z * fit.se[j]) ++inside[j];
        }
    }

    Rng rng(909);
    CountDataset flat;
    double total = 0.0;
    for (int i = 0; i < 200; ++i) {
        double count = static_cast<double>(rng.poisson(4.0));
        flat.pair_ids.push_back("u" + std::to_string(i) + "|v" + std::to_string(i));
        flat.x.push_back({});
        flat.counts.push_back(count);
        total += count;
    }
    auto flat_fit = fit_negbin(flat);
    double intercept_err = std::fabs(flat_fit.beta[0] - std::log(total / 200.0));

    bool pass = intercept_err <= 1e-10;
    std::ostringstream detail;
    detail << "CI coverage";
    for (int j = 0; j < 4; ++j) {
        detail << " " << inside[j] << "/100";
        if (inside[j] < 90) pass = false;
    }
    detail << ", intercept err " << fmt("%.1e", intercept_err);
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 8. ingestion fixture fidelity and exact Zipf anchors

Outcome ingestion_fidelity() {
    IngestPaths paths;
    std::string dir = g_fixtures + "/ingest";
    paths.wordlist = dir + "/wordlist.csv";
    paths.association = dir + "/association.csv";
    paths.concept_forms = dir + "/concept_forms.csv";
    paths.frequency = dir + "/frequency.csv";
    paths.borrowability = dir + "/borrowability.csv";
    paths.blocklist = dir + "/blocklist.txt";
    auto result = run_ingest(paths);

    std::ifstream in(dir + "/expected.json");
    auto expected = nlohmann::json::parse(in);

    bool pass = result.n_pairs_initial == expected["n_pairs_initial"].get<std::size_t>() &&
                result.n_pairs_filtered == expected["n_pairs_filtered"].get<std::size_t>() &&
                result.n_pairs_scored == expected["n_pairs_scored"].get<std::size_t>();
    std::vector<std::string> want_pairs;
    for (const auto& s : expected["survivors"]) want_pairs.push_back(s["pair"]);
    pass = pass && result.predictors.character_ids == want_pairs;
    for (std::size_t i = 0; pass && i < want_pairs.size(); ++i) {
        const auto& want = expected["survivors"][i];
        pass = std::fabs(result.predictors.x[i][0] - want["associativity"].get<double>()) <= 1e-9 &&
               std::fabs(result.predictors.x[i][1] - want["zipf"].get<double>()) <= 1e-9 &&
               std::fabs(result.predictors.x[i][2] - want["borrowability"].get<double>()) <= 1e-9;
    }

    ConceptFormMap map;
    map.forms["eng"]["a"] = {"fa"};
    map.forms["eng"]["b"] = {"fb"};
    FrequencyInput freq;
    freq.corpus_size["eng"] = 1e8;
    freq.counts["eng"]["fa"] = 1.0;  // 0.01 per million
    bool anchor_low = zipf_score(make_pair_id("a", "b"), map, freq) == 1.0;
    freq.corpus_size["eng"] = 1e6;
    freq.counts["eng"]["fa"] = 1e5;  // 100000 per million
    bool anchor_high = zipf_score(make_pair_id("a", "b"), map, freq) == 8.0;

    pass = pass && anchor_low && anchor_high;
    std::ostringstream detail;
    detail << result.n_pairs_scored << " survivors match expected.json"
           << (anchor_low && anchor_high ? ", Zipf anchors exact" : ", Zipf anchors WRONG");
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 9. byte-identical reruns of the CLI fit and validate commands

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) return "<missing " + path + ">";
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

int run_cli_cmd(const std::string& args) {
    std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

Outcome determinism() {
    std::string work = "/tmp/phydra_acceptance";
    std::filesystem::remove_all(work);
    std::filesystem::create_directories(work);

    auto synth = generate_synthetic(make_setting(SimSize::kSmall, true, true, 7));
    write_tree_file(work + "/trees.nwk", {synth.tree});
    write_trait_matrix(work + "/traits.csv", synth.traits);
    PredictorTable preds;
    preds.character_ids = synth.traits.character_ids;
    preds.predictor_names = {"x"};
    for (double v : synth.x) preds.x.push_back({v});
    write_predictor_table(work + "/predictors.csv", preds);

    std::string fit_args = "fit --variant full --trees " + work + "/trees.nwk --traits " + work +
                           "/traits.csv --predictors " + work +
                           "/predictors.csv --seed 77 --iterations 400 --chains 2 --jobs 2";
    int rc1 = run_cli_cmd(fit_args + " --out " + work + "/f1");
    int rc2 = run_cli_cmd(fit_args + " --out " + work + "/f2");
    bool fit_ok = rc1 >= 0 && rc1 <= 3 && rc1 != 2 && rc1 == rc2 &&
                  slurp(work + "/f1/draws.csv") == slurp(work + "/f2/draws.csv") &&
                  slurp(work + "/f1/summary.json") == slurp(work + "/f2/summary.json");

    std::string val_args = "validate --sizes SMALL --n-seeds 2 --iterations 300 --seed 9 --jobs 2";
    int rv1 = run_cli_cmd(val_args + " --out " + work + "/v1");
    int rv2 = run_cli_cmd(val_args + " --out " + work + "/v2");
    bool val_ok = rv1 == 0 && rv2 == 0 &&
                  slurp(work + "/v1/validation.csv") == slurp(work + "/v2/validation.csv");

    return {fit_ok && val_ok,
            std::string("fit reruns ") + (fit_ok ? "identical" : "DIFFER") + ", validate reruns " +
                (val_ok ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// 10. invariance properties

PhyloTree scale_branches(const PhyloTree& tree, double c) {
    std::vector<TreeNode> nodes;
    for (int v = 0; v < tree.node_count(); ++v) {
        nodes.push_back(tree.node(v));
        nodes.back().length *= c;
    }
    return PhyloTree(std::move(nodes), tree.root());
}

Outcome invariances() {
    Rng rng(1010);
    double rescale_err = 0.0, relabel_err = 0.0, ck_err = 0.0, shift_err = 0.0, k_err = 0.0;
    bool k_nan_stable = true;

    for (int i = 0; i < 200; ++i) {
        // Chapman-Kolmogorov: P(t1 + t2) = P(t1) P(t2)
        RateParams rp{rng.uniform(0.05, 10.0), rng.uniform(0.05, 0.95)};
        double t1 = rng.uniform(0.0, 5.0), t2 = rng.uniform(0.0, 5.0);
        auto a = transition_matrix(rp, t1);
        auto b = transition_matrix(rp, t2);
        auto ab = transition_matrix(rp, t1 + t2);
        for (int from = 0; from < 2; ++from)
            for (int to = 0; to < 2; ++to) {
                double prod = a(from, 0) * b(0, to) + a(from, 1) * b(1, to);
                ck_err = std::max(ck_err, std::fabs(prod - ab(from, to)));
            }

        // likelihood level: time rescaling and state relabeling
        int tips = 3 + static_cast<int>(rng.integer(6));
        auto tree = simulate_coalescent(tips, 12000 + static_cast<std::uint64_t>(i));
        TipStates ts, flipped;
        ts.character_id = flipped.character_id = "c";
        for (const auto& label : tree.tip_labels()) {
            double u = rng.uniform();
            std::int8_t v =
                u < 0.2 ? kMissingState : static_cast<std::int8_t>(u < 0.6 ? 0 : 1);
            ts.states[label] = v;
            flipped.states[label] = v == kMissingState ? v : static_cast<std::int8_t>(1 - v);
        }
        double c = rng.uniform(0.1, 10.0);
        double base = log_likelihood(tree, ts, rp);
        double rescaled = log_likelihood(scale_branches(tree, c), ts, {rp.s / c, rp.p});
        rescale_err = std::max(rescale_err, std::fabs(base - rescaled));
        double relabeled = log_likelihood(tree, flipped, {rp.s, 1.0 - rp.p});
        relabel_err = std::max(relabel_err, std::fabs(base - relabeled));

        // LOO shift invariance on a small random pointwise matrix
        PointwiseMatrix pw;
        pw.model = "m";
        pw.n_draws = 400;
        pw.n_obs = 5;
        pw.loglik.resize(2000);
        for (auto& v : pw.loglik) v = -1.5 + 0.5 * rng.normal();
        auto shifted = pw;
        double shift = rng.uniform(-3.0, 3.0);
        for (auto& v : shifted.loglik) v += shift;
        auto base_loo = psis_loo(pw);
        auto shifted_loo = psis_loo(shifted);
        for (std::size_t k = 0; k < pw.n_obs; ++k) {
            shift_err = std::max(shift_err, std::fabs(shifted_loo.pointwise[k] -
                                                      base_loo.pointwise[k] - shift));
            if (std::isnan(base_loo.pareto_k[k]) != std::isnan(shifted_loo.pareto_k[k]))
                k_nan_stable = false;
            else if (!std::isnan(base_loo.pareto_k[k]))
                k_err = std::max(k_err,
                                 std::fabs(shifted_loo.pareto_k[k] - base_loo.pareto_k[k]));
        }
    }

    bool pass = rescale_err <= 1e-10 && relabel_err <= 1e-12 && ck_err <= 1e-12 &&
                shift_err <= 1e-10 && k_err <= 1e-8 && k_nan_stable;
    return {pass, fmt("rescale %.1e, relabel %.1e, ", rescale_err, relabel_err) +
                      fmt("Chapman-Kolmogorov %.1e, LOO shift %.1e, k-hat %.1e", ck_err,
                          shift_err, k_err) +
                      (k_nan_stable ? "" : ", k-hat NaN pattern UNSTABLE")};
}

// ---------------------------------------------------------------------------

struct Criterion {
    const char* label;
    std::function<Outcome()> check;
    double time_limit;  // seconds; 0 = no limit stated
};

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance <phydra-cli> <fixtures-dir>\n");
        return 64;
    }
    g_cli = argv[1];
    g_fixtures = argv[2];

    const std::vector<Criterion> criteria = {
        {"transition probabilities vs matrix exponential", transition_probabilities, 1.0},
        {"pruning vs brute-force enumeration", pruning_enumeration, 10.0},
        {"posterior gradient vs finite differences", gradient_finite_differences, 30.0},
        {"NUTS calibration on 5-D standard normal", sampler_calibration, 30.0},
        {"simulation-based coefficient recovery", simulation_validation, 7200.0},
        {"PSIS-LOO model selection sanity", model_selection, 0.0},
        {"negative binomial Wald coverage", negbin_recovery, 60.0},
        {"ingestion fixture and Zipf anchors", ingestion_fidelity, 0.0},
        {"byte-identical fit/validate reruns", determinism, 0.0},
        {"invariance properties (200 cases each)", invariances, 0.0},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                             .count();
        bool in_time = c.time_limit == 0.0 || seconds < c.time_limit;
        bool pass = outcome.pass && in_time;
        if (!pass) ++failures;
        std::printf("%2zu %s %-48s (%6.2f s) %s%s\n", i + 1, pass ? "PASS" : "FAIL", c.label,
                    seconds, outcome.detail.c_str(),
                    in_time ? "" : " [over time limit]");
        std::fflush(stdout);
    }
    return failures;
}
