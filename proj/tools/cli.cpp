#include "phydra/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phydra/csv.hpp"
#include "phydra/ingest.hpp"
#include "phydra/model.hpp"
#include "phydra/negbin.hpp"
#include "phydra/sampler.hpp"
#include "phydra/selection.hpp"
#include "phydra/simval.hpp"
#include "phydra/trees.hpp"

namespace phydra {
namespace {

#ifndef PHYDRA_VERSION
#define PHYDRA_VERSION "0.0.0"
#endif

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) fail("missing required path: --" + what);
    if (!std::filesystem::exists(path)) fail(path + ": no such file (--" + what + ")");
}

ordered_json load_config(const std::string& path) {
    if (path.empty()) return ordered_json::object();
    require_file(path, "config");
    std::ifstream in(path);
    ordered_json cfg = ordered_json::parse(in);
    if (!cfg.is_object()) fail(path + ": config must be a flat JSON object");
    return cfg;
}

// flag > config key > fallback; keys the subcommand does not use are ignored
// so one config document can drive a whole pipeline.
class Settings {
  public:
    Settings(const CLI::App* cmd, ordered_json cfg) : cmd_(cmd), cfg_(std::move(cfg)) {}

    template <class T>
    T pick(const std::string& flag, const T& flag_value, const std::string& key,
           const T& fallback) const {
        if (cmd_->count(flag) > 0) return flag_value;
        if (cfg_.contains(key)) {
            try {
                return cfg_.at(key).get<T>();
            } catch (const nlohmann::json::exception&) {
                fail("config key '" + key + "' has the wrong type");
            }
        }
        return fallback;
    }

    bool has(const std::string& flag, const std::string& key) const {
        return cmd_->count(flag) > 0 || cfg_.contains(key);
    }

    const ordered_json& config() const { return cfg_; }

  private:
    const CLI::App* cmd_;
    ordered_json cfg_;
};

int default_jobs() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

std::string output_dir(const std::string& out) {
    if (out.empty()) fail("missing required path: --out");
    std::filesystem::create_directories(out);
    return out;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    ordered_json config, ordered_json extra = {}) {
    ordered_json m;
    m["command"] = command;
    m["version"] = PHYDRA_VERSION;
    m["config"] = std::move(config);
    for (auto& [key, value] : extra.items()) m[key] = value;
    std::ofstream out(out_dir + "/manifest.json");
    out << m.dump(2) << "\n";
}

std::string format_diff(double diff, double se) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", diff, se);
    return buf;
}

// ---------------------------------------------------------------------------
// shared option blocks

struct CommonOpts {
    std::string config;
    std::string out;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "JSON config file with flat keys; flags override");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--jobs", o.jobs, "worker threads (default: available cores)");
}

struct SamplerOpts {
    std::uint64_t seed = 0;
    long long iterations = 0;
    int chains = 0;
    double warmup_fraction = 0.0;
    double target_accept = 0.0;
    int max_depth = 0;
    double rhat_limit = 0.0;
    bool paper_scale = false;
};

void add_sampler(CLI::App* cmd, SamplerOpts& o) {
    cmd->add_option("--seed", o.seed, "RNG seed (required)");
    cmd->add_option("--iterations", o.iterations, "iterations per chain incl. warmup (default 1000)");
    cmd->add_option("--chains", o.chains, "chain count (default 3)");
    cmd->add_option("--warmup-fraction", o.warmup_fraction, "warmup share of iterations (default 0.5)");
    cmd->add_option("--target-accept", o.target_accept, "step-size adaptation target (default 0.8)");
    cmd->add_option("--max-depth", o.max_depth, "trajectory doubling limit (default 10)");
    cmd->add_option("--rhat-limit", o.rhat_limit, "convergence warning threshold (default 1.05)");
    cmd->add_flag("--paper-scale", o.paper_scale, "preset: 4000 iterations, 3 chains");
}

std::uint64_t required_seed(const CLI::App* cmd, const Settings& s, const SamplerOpts& o) {
    if (!s.has("--seed", "seed")) fail("--seed is required for " + cmd->get_name());
    return s.pick<std::uint64_t>("--seed", o.seed, "seed", 0);
}

SamplerConfig resolve_sampler(const CLI::App* cmd, const Settings& s, const SamplerOpts& o,
                              int jobs) {
    SamplerConfig cfg;
    bool paper = s.pick("--paper-scale", o.paper_scale, "paper_scale", false);
    if (cmd->count("--iterations") > 0)
        cfg.n_iterations = o.iterations;
    else if (paper)
        cfg.n_iterations = 4000;
    else
        cfg.n_iterations = s.pick<long long>("--iterations", 0, "iterations", 1000);
    if (cmd->count("--chains") > 0)
        cfg.n_chains = o.chains;
    else if (paper)
        cfg.n_chains = 3;
    else
        cfg.n_chains = s.pick("--chains", 0, "chains", 3);
    cfg.warmup_fraction = s.pick("--warmup-fraction", o.warmup_fraction, "warmup_fraction", 0.5);
    cfg.target_accept = s.pick("--target-accept", o.target_accept, "target_accept", 0.8);
    cfg.max_depth = s.pick("--max-depth", o.max_depth, "max_depth", 10);
    cfg.seed = required_seed(cmd, s, o);
    cfg.jobs = jobs;
    return cfg;
}

ordered_json echo_sampler(const SamplerConfig& cfg, double rhat_limit) {
    ordered_json e;
    e["iterations"] = cfg.n_iterations;
    e["chains"] = cfg.n_chains;
    e["warmup_fraction"] = cfg.warmup_fraction;
    e["target_accept"] = cfg.target_accept;
    e["max_depth"] = cfg.max_depth;
    e["seed"] = cfg.seed;
    e["rhat_limit"] = rhat_limit;
    return e;
}

// ---------------------------------------------------------------------------
// subcommands

struct IngestOpts {
    CommonOpts common;
    std::string wordlist, association, concept_forms, frequency, borrowability, blocklist;
    int min_colex = 0;
    int min_attested = 0;
};

int cmd_ingest(const CLI::App* cmd, const IngestOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    IngestPaths paths;
    paths.wordlist = s.pick("--wordlist", o.wordlist, "wordlist", std::string());
    paths.association = s.pick("--association", o.association, "association", std::string());
    paths.concept_forms = s.pick("--concept-forms", o.concept_forms, "concept_forms", std::string());
    paths.frequency = s.pick("--frequency", o.frequency, "frequency", std::string());
    paths.borrowability = s.pick("--borrowability", o.borrowability, "borrowability", std::string());
    paths.blocklist = s.pick("--blocklist", o.blocklist, "blocklist", std::string());
    require_file(paths.wordlist, "wordlist");
    require_file(paths.association, "association");
    require_file(paths.concept_forms, "concept-forms");
    require_file(paths.frequency, "frequency");
    require_file(paths.borrowability, "borrowability");
    if (!paths.blocklist.empty()) require_file(paths.blocklist, "blocklist");

    IngestOptions options;
    options.min_colex = s.pick("--min-colex", o.min_colex, "min_colex", 5);
    options.min_attested = s.pick("--min-attested", o.min_attested, "min_attested", 30);
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));

    auto result = run_ingest(paths, options);
    write_trait_matrix(out + "/traits.csv", result.traits);
    write_predictor_table(out + "/predictors.csv", result.predictors);

    ordered_json echo;
    echo["wordlist"] = paths.wordlist;
    echo["association"] = paths.association;
    echo["concept_forms"] = paths.concept_forms;
    echo["frequency"] = paths.frequency;
    echo["borrowability"] = paths.borrowability;
    echo["blocklist"] = paths.blocklist;
    echo["min_colex"] = options.min_colex;
    echo["min_attested"] = options.min_attested;
    ordered_json counts;
    counts["n_languages"] = result.n_languages;
    counts["n_pairs_initial"] = result.n_pairs_initial;
    counts["n_pairs_filtered"] = result.n_pairs_filtered;
    counts["n_pairs_scored"] = result.n_pairs_scored;
    write_manifest(out, "ingest", std::move(echo), {{"counts", counts}});
    return 0;
}

struct FitOpts {
    CommonOpts common;
    SamplerOpts sampler;
    std::string trees, traits, predictors, variant;
    bool standardize = true;
};

int cmd_fit(const CLI::App* cmd, const FitOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    std::string trees_path = s.pick("--trees", o.trees, "trees", std::string());
    std::string traits_path = s.pick("--traits", o.traits, "traits", std::string());
    std::string pred_path = s.pick("--predictors", o.predictors, "predictors", std::string());
    require_file(trees_path, "trees");
    require_file(traits_path, "traits");

    ModelSpec spec;
    spec.variant = parse_variant(s.pick("--variant", o.variant, "variant", std::string("full")));

    auto traits = read_trait_matrix(traits_path);
    PredictorTable preds;
    if (!pred_path.empty()) {
        require_file(pred_path, "predictors");
        preds = read_predictor_table(pred_path);
    } else if (spec.variant == Variant::kNull) {
        preds.character_ids = traits.character_ids;
        preds.x.assign(traits.character_ids.size(), {});
    } else {
        fail("missing required path: --predictors (variant " + variant_name(spec.variant) + ")");
    }
    spec.n_predictors = preds.predictor_names.size();

    bool standardize = s.pick("--standardize", o.standardize, "standardize", true);
    Standardization transform;
    if (standardize && !preds.predictor_names.empty()) transform = standardize_predictors(preds);

    auto bundle = make_bundle(std::move(traits), std::move(preds),
                              make_tree_sample(read_tree_file(trees_path), trees_path));

    int jobs = s.pick("--jobs", o.common.jobs, "jobs", default_jobs());
    SamplerConfig cfg = resolve_sampler(cmd, s, o.sampler, jobs);
    double rhat_limit = s.pick("--rhat-limit", o.sampler.rhat_limit, "rhat_limit", 1.05);
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));

    auto draws = run_family(spec, bundle, cfg);
    auto summary = summarize(draws);
    write_draws_csv(out + "/draws.csv", draws);
    write_summary_json(out + "/summary.json", summary);
    write_pointwise_csv(out + "/pointwise.csv",
                        pointwise_matrix(spec, bundle, draws, variant_name(spec.variant)));

    ordered_json echo;
    echo["trees"] = trees_path;
    echo["traits"] = traits_path;
    echo["predictors"] = pred_path;
    echo["variant"] = variant_name(spec.variant);
    echo["standardize"] = standardize;
    ordered_json sampler_echo = echo_sampler(cfg, rhat_limit);
    for (auto& [key, value] : sampler_echo.items()) echo[key] = value;
    echo["jobs"] = jobs;
    ordered_json extra;
    if (standardize && !bundle.predictors.predictor_names.empty()) {
        extra["standardization"] = {{"mean", transform.mean}, {"sd", transform.sd}};
    }
    write_manifest(out, "fit", std::move(echo), std::move(extra));

    double worst = 0.0;
    std::string worst_param;
    for (const auto& row : summary) {
        if (std::isnan(row.rhat) || row.rhat > worst) {
            worst = row.rhat;
            worst_param = row.param;
        }
        if (std::isnan(row.rhat)) break;
    }
    if (!(worst <= rhat_limit)) {
        std::cerr << "warning: R-hat " << worst << " for " << worst_param << " exceeds "
                  << rhat_limit << "; treat these draws with suspicion\n";
        return 3;
    }
    return 0;
}

struct CompareOpts {
    CommonOpts common;
    std::vector<std::string> pointwise;
};

int cmd_compare(const CLI::App* cmd, const CompareOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    auto files = s.pick("pointwise", o.pointwise, "pointwise", std::vector<std::string>{});
    if (files.size() < 2) fail("compare needs at least two pointwise CSV files");
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));
    int jobs = s.pick("--jobs", o.common.jobs, "jobs", default_jobs());

    std::vector<LooResult> loos;
    std::set<std::string> names;
    for (const auto& file : files) {
        require_file(file, "pointwise");
        std::string model = std::filesystem::path(file).stem().string();
        if (!names.insert(model).second) fail("duplicate model name: " + model);
        auto pw = read_pointwise_csv(file, model);
        loos.push_back(psis_loo(pw, jobs));
        write_loo_json(out + "/loo_" + model + ".json", loos.back());
    }
    auto rows = compare(loos);

    CsvTable t;
    t.header = {"model", "elpd", "se", "elpd_diff", "se_diff", "display", "n_high_k"};
    for (const auto& r : rows) {
        t.rows.push_back({r.model, format_double(r.elpd), format_double(r.se),
                          format_double(r.elpd_diff), format_double(r.se_diff),
                          format_diff(r.elpd_diff, r.se_diff), std::to_string(r.n_high_k)});
    }
    write_csv(out + "/comparison.csv", t);

    ordered_json echo;
    echo["pointwise"] = files;
    echo["jobs"] = jobs;
    write_manifest(out, "compare", std::move(echo));
    return 0;
}

struct ValidateOpts {
    CommonOpts common;
    SamplerOpts sampler;
    std::string sizes;
    int n_seeds = 0;
};

int cmd_validate(const CLI::App* cmd, const ValidateOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    StudyConfig study;
    std::string sizes = s.pick("--sizes", o.sizes, "sizes", std::string("SMALL"));
    study.sizes.clear();
    std::stringstream ss(sizes);
    for (std::string token; std::getline(ss, token, ',');) {
        if (!token.empty()) study.sizes.push_back(parse_size(token));
    }
    if (study.sizes.empty()) fail("--sizes is empty");
    study.n_seeds = s.pick("--n-seeds", o.n_seeds, "n_seeds", 25);
    study.jobs = s.pick("--jobs", o.common.jobs, "jobs", default_jobs());
    study.sampler = resolve_sampler(cmd, s, o.sampler, study.jobs);
    study.rhat_limit = s.pick("--rhat-limit", o.sampler.rhat_limit, "rhat_limit", 1.05);
    study.seed = study.sampler.seed;
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));

    auto cells = run_study(study);
    write_study_csv(out + "/validation.csv", cells);

    int sign_errors = 0;
    for (const auto& cell : cells) sign_errors += cell.se;
    if (sign_errors > 0) {
        std::cerr << "warning: " << sign_errors
                  << " sign error(s) in the validation study; expected none\n";
    }

    ordered_json echo;
    echo["sizes"] = sizes;
    echo["n_seeds"] = study.n_seeds;
    ordered_json sampler_echo = echo_sampler(study.sampler, study.rhat_limit);
    for (auto& [key, value] : sampler_echo.items()) echo[key] = value;
    echo["jobs"] = study.jobs;
    write_manifest(out, "validate", std::move(echo));
    return 0;
}

struct NegbinOpts {
    CommonOpts common;
    std::string traits, predictors;
};

int cmd_negbin(const CLI::App* cmd, const NegbinOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    std::string traits_path = s.pick("--traits", o.traits, "traits", std::string());
    std::string pred_path = s.pick("--predictors", o.predictors, "predictors", std::string());
    require_file(traits_path, "traits");
    require_file(pred_path, "predictors");
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));

    auto traits = read_trait_matrix(traits_path);
    auto preds = read_predictor_table(pred_path);
    std::map<std::string, std::size_t> pred_index;
    for (std::size_t i = 0; i < preds.character_ids.size(); ++i)
        pred_index[preds.character_ids[i]] = i;

    CountDataset data;
    data.predictor_names = preds.predictor_names;
    for (std::size_t c = 0; c < traits.character_ids.size(); ++c) {
        auto it = pred_index.find(traits.character_ids[c]);
        if (it == pred_index.end())
            fail("pair " + traits.character_ids[c] + " has no predictor row");
        double count = 0;
        for (const auto& row : traits.cells) count += row[c] == 1 ? 1 : 0;
        data.pair_ids.push_back(traits.character_ids[c]);
        data.x.push_back(preds.x[it->second]);
        data.counts.push_back(count);
    }

    write_count_data(out + "/counts.csv", data);
    auto fit = fit_negbin(data);
    write_negbin_json(out + "/negbin.json", fit);

    ordered_json echo;
    echo["traits"] = traits_path;
    echo["predictors"] = pred_path;
    write_manifest(out, "negbin", std::move(echo));
    return 0;
}

struct SummaryOpts {
    CommonOpts common;
    std::string draws;
};

int cmd_summary(const CLI::App* cmd, const SummaryOpts& o) {
    Settings s(cmd, load_config(o.common.config));
    std::string draws_path = s.pick("--draws", o.draws, "draws", std::string());
    require_file(draws_path, "draws");
    std::string out = output_dir(s.pick("--out", o.common.out, "out", std::string()));

    auto draws = read_draws_csv(draws_path);
    write_summary_json(out + "/summary.json", summarize(draws));

    ordered_json echo;
    echo["draws"] = draws_path;
    write_manifest(out, "summary", std::move(echo));
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"phylogenetic analysis of colexification dynamics"};
    app.set_version_flag("--version", PHYDRA_VERSION);
    app.require_subcommand(1);

    IngestOpts ingest_opts;
    auto* ingest = app.add_subcommand("ingest", "build trait matrix and predictors from raw tables");
    add_common(ingest, ingest_opts.common);
    ingest->add_option("--wordlist", ingest_opts.wordlist, "glottocode,variety,concept_id,form CSV");
    ingest->add_option("--association", ingest_opts.association, "resource_lang,form_a,form_b,score CSV");
    ingest->add_option("--concept-forms", ingest_opts.concept_forms, "resource_lang,concept_id,form CSV");
    ingest->add_option("--frequency", ingest_opts.frequency, "resource_lang,form,count,corpus_size CSV");
    ingest->add_option("--borrowability", ingest_opts.borrowability, "concept_id,score CSV");
    ingest->add_option("--blocklist", ingest_opts.blocklist, "excluded concept ids, one per line");
    ingest->add_option("--min-colex", ingest_opts.min_colex, "colexification floor (default 5)");
    ingest->add_option("--min-attested", ingest_opts.min_attested, "attestation floor (default 30)");

    FitOpts fit_opts;
    auto* fit = app.add_subcommand("fit", "sample a model variant over the tree posterior");
    add_common(fit, fit_opts.common);
    add_sampler(fit, fit_opts.sampler);
    fit->add_option("--trees", fit_opts.trees, "Newick trees, one per line");
    fit->add_option("--traits", fit_opts.traits, "trait matrix CSV");
    fit->add_option("--predictors", fit_opts.predictors, "predictor table CSV");
    fit->add_option("--variant", fit_opts.variant, "full|stationary-only|speed-only|null");
    fit->add_flag("--standardize,!--no-standardize", fit_opts.standardize,
                  "z-score predictors before fitting (default on)");

    CompareOpts compare_opts;
    auto* cmp = app.add_subcommand("compare", "rank fitted variants by PSIS-LOO");
    add_common(cmp, compare_opts.common);
    cmp->add_option("pointwise", compare_opts.pointwise, "two or more pointwise CSV files");

    ValidateOpts validate_opts;
    auto* validate = app.add_subcommand("validate", "coefficient recovery study on synthetic data");
    add_common(validate, validate_opts.common);
    add_sampler(validate, validate_opts.sampler);
    validate->add_option("--sizes", validate_opts.sizes, "comma list of SMALL,MEDIUM,LARGE");
    validate->add_option("--n-seeds", validate_opts.n_seeds, "replicates per size (default 25)");

    NegbinOpts negbin_opts;
    auto* negbin = app.add_subcommand("negbin", "tree-free negative binomial baseline");
    add_common(negbin, negbin_opts.common);
    negbin->add_option("--traits", negbin_opts.traits, "trait matrix CSV");
    negbin->add_option("--predictors", negbin_opts.predictors, "predictor table CSV");

    SummaryOpts summary_opts;
    auto* summary = app.add_subcommand("summary", "recompute the summary table from saved draws");
    add_common(summary, summary_opts.common);
    summary->add_option("--draws", summary_opts.draws, "draws CSV from a fit run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(ingest, ingest_opts);
        if (*fit) return cmd_fit(fit, fit_opts);
        if (*cmp) return cmd_compare(cmp, compare_opts);
        if (*validate) return cmd_validate(validate, validate_opts);
        if (*negbin) return cmd_negbin(negbin, negbin_opts);
        if (*summary) return cmd_summary(summary, summary_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace phydra
