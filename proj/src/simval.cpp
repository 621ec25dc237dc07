#include "phydra/simval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "phydra/csv.hpp"
#include "phydra/ctmc.hpp"
#include "phydra/rng.hpp"
#include "phydra/util.hpp"

namespace phydra {

std::string size_name(SimSize size) {
    switch (size) {
        case SimSize::kSmall: return "SMALL";
        case SimSize::kMedium: return "MEDIUM";
        case SimSize::kLarge: return "LARGE";
    }
    throw std::logic_error("unreachable size label");
}

SimSize parse_size(const std::string& name) {
    if (name == "SMALL") return SimSize::kSmall;
    if (name == "MEDIUM") return SimSize::kMedium;
    if (name == "LARGE") return SimSize::kLarge;
    throw std::invalid_argument("unknown size label: " + name +
                                " (expected SMALL, MEDIUM, or LARGE)");
}

SimSetting make_setting(SimSize size, bool s_active, bool p_active, std::uint64_t seed) {
    SimSetting s;
    s.size = size;
    switch (size) {
        case SimSize::kSmall: s.n_taxa = 35, s.n_traits = 85; break;
        case SimSize::kMedium: s.n_taxa = 75, s.n_traits = 85; break;
        case SimSize::kLarge: s.n_taxa = 100, s.n_traits = 200; break;
    }
    s.s_active = s_active;
    s.p_active = p_active;
    s.seed = seed;
    return s;
}

SyntheticData generate_synthetic(const SimSetting& setting) {
    PhyloTree tree = simulate_coalescent(setting.n_taxa, mix_seed(setting.seed, 1));

    Rng rng(mix_seed(setting.seed, 2));
    std::vector<double> x(static_cast<std::size_t>(setting.n_traits));
    for (auto& v : x) v = rng.normal();

    CoefficientSet truth;
    truth.beta_p0 = rng.normal();
    double cand_p = rng.normal();
    truth.beta_s0 = rng.normal();
    double cand_s = rng.normal();
    truth.beta_p = {setting.p_active ? cand_p : 0.0};
    truth.beta_s = {setting.s_active ? cand_s : 0.0};

    TraitMatrix traits;
    traits.taxa = tree.tip_labels();
    traits.cells.assign(traits.taxa.size(),
                        std::vector<std::int8_t>(static_cast<std::size_t>(setting.n_traits), 0));
    for (int d = 0; d < setting.n_traits; ++d) {
        traits.character_ids.push_back("trait_" + std::to_string(d + 1));
        RateParams rp;
        rp.p = logistic(truth.beta_p0 + truth.beta_p[0] * x[static_cast<std::size_t>(d)]);
        rp.s = std::exp(truth.beta_s0 + truth.beta_s[0] * x[static_cast<std::size_t>(d)]);
        auto states = simulate_history(tree, rp, RootState::kStationary,
                                       mix_seed(setting.seed, 3, static_cast<std::uint64_t>(d)));
        for (std::size_t t = 0; t < traits.taxa.size(); ++t)
            traits.cells[t][static_cast<std::size_t>(d)] =
                static_cast<std::int8_t>(states.at(traits.taxa[t]));
    }
    return {std::move(tree), std::move(x), std::move(truth), std::move(traits)};
}

std::string recovery_name(Recovery r) {
    switch (r) {
        case Recovery::kTrue: return "T";
        case Recovery::kFalsePositive: return "FP";
        case Recovery::kFalseNegative: return "FN";
        case Recovery::kSignError: return "SE";
    }
    throw std::logic_error("unreachable recovery label");
}

Recovery classify_recovery(double truth, double eti_low, double eti_high) {
    if (!(eti_low <= eti_high) || !std::isfinite(eti_low) || !std::isfinite(eti_high))
        throw std::invalid_argument("malformed credible interval");
    const bool zero_inside = eti_low <= 0.0 && 0.0 <= eti_high;
    if (truth == 0.0) return zero_inside ? Recovery::kTrue : Recovery::kFalsePositive;
    if (zero_inside) return Recovery::kFalseNegative;
    const bool wrong_side = truth > 0.0 ? eti_high < 0.0 : eti_low > 0.0;
    return wrong_side ? Recovery::kSignError : Recovery::kTrue;
}

namespace {

struct SimTask {
    SimSetting setting;
    std::size_t size_idx;
    int seed_no;
    int pattern;
    bool failed = false;
    std::string note;
    Recovery p_outcome = Recovery::kTrue;
    Recovery s_outcome = Recovery::kTrue;
};

void run_one(SimTask& task, const StudyConfig& config) {
    try {
        auto synthetic = generate_synthetic(task.setting);

        PredictorTable preds;
        preds.character_ids = synthetic.traits.character_ids;
        preds.predictor_names = {"x"};
        for (double v : synthetic.x) preds.x.push_back({v});

        auto bundle = make_bundle(synthetic.traits, preds,
                                  make_tree_sample({synthetic.tree}, "simulated"));
        ModelSpec spec;
        spec.variant = Variant::kFull;
        spec.n_predictors = 1;

        SamplerConfig cfg = config.sampler;
        cfg.n_chains = 1;
        cfg.jobs = 1;
        cfg.seed = task.setting.seed;
        cfg.tree_indices.clear();

        auto draws = run_family(spec, bundle, cfg);
        auto summary = summarize(draws);

        double max_rhat = 0.0;
        for (const auto& row : summary) max_rhat = std::max(max_rhat, row.rhat);
        if (!(max_rhat <= config.rhat_limit)) {
            task.failed = true;
            task.note = "R-hat " + format_double(max_rhat);
            return;
        }
        auto eti_of = [&](const std::string& name) {
            for (const auto& row : summary)
                if (row.param == name) return std::pair<double, double>{row.eti_low, row.eti_high};
            throw std::logic_error("parameter " + name + " missing from summary");
        };
        auto [p_lo, p_hi] = eti_of("b_p_x");
        auto [s_lo, s_hi] = eti_of("b_s_x");
        task.p_outcome = classify_recovery(synthetic.truth.beta_p[0], p_lo, p_hi);
        task.s_outcome = classify_recovery(synthetic.truth.beta_s[0], s_lo, s_hi);
    } catch (const std::exception& e) {
        task.failed = true;
        task.note = e.what();
    }
}

void bump(StudyCell& cell, Recovery r) {
    switch (r) {
        case Recovery::kTrue: ++cell.t; break;
        case Recovery::kFalsePositive: ++cell.fp; break;
        case Recovery::kFalseNegative: ++cell.fn; break;
        case Recovery::kSignError: ++cell.se; break;
    }
}

}  // namespace

std::vector<StudyCell> run_study(const StudyConfig& config) {
    if (config.sizes.empty() || config.n_seeds < 1)
        throw std::invalid_argument("study needs at least one size and one seed");

    std::vector<SimTask> tasks;
    for (std::size_t si = 0; si < config.sizes.size(); ++si)
        for (int seed_no = 1; seed_no <= config.n_seeds; ++seed_no)
            for (int pattern = 0; pattern < 4; ++pattern) {
                bool s_active = pattern & 1;
                bool p_active = pattern & 2;
                std::uint64_t sim_seed =
                    mix_seed(config.seed, static_cast<std::uint64_t>(si * 100000 + seed_no),
                             static_cast<std::uint64_t>(pattern + 1));
                SimTask t;
                t.setting = make_setting(config.sizes[si], s_active, p_active, sim_seed);
                t.size_idx = si;
                t.seed_no = seed_no;
                t.pattern = pattern;
                tasks.push_back(std::move(t));
            }

    if (config.jobs <= 1 || tasks.size() <= 1) {
        for (auto& t : tasks) run_one(t, config);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                run_one(tasks[i], config);
            }
        };
        std::vector<std::thread> threads;
        auto n = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), tasks.size());
        for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    std::vector<StudyCell> cells;
    for (std::size_t si = 0; si < config.sizes.size(); ++si) {
        StudyCell p_cell, s_cell;
        p_cell.param = "b_p_x";
        s_cell.param = "b_s_x";
        p_cell.size = s_cell.size = size_name(config.sizes[si]);
        for (const auto& t : tasks) {
            if (t.size_idx != si) continue;
            if (t.failed) {
                std::fprintf(stderr, "warning: %s seed %d pattern %d excluded: %s\n",
                             p_cell.size.c_str(), t.seed_no, t.pattern, t.note.c_str());
                ++p_cell.failed;
                ++s_cell.failed;
                continue;
            }
            bump(p_cell, t.p_outcome);
            bump(s_cell, t.s_outcome);
        }
        cells.push_back(std::move(p_cell));
        cells.push_back(std::move(s_cell));
    }
    return cells;
}

void write_study_csv(const std::string& path, const std::vector<StudyCell>& cells) {
    CsvTable t;
    t.header = {"param", "size", "T", "FP", "FN", "SE", "failed"};
    for (const auto& c : cells)
        t.rows.push_back({c.param, c.size, std::to_string(c.t), std::to_string(c.fp),
                          std::to_string(c.fn), std::to_string(c.se), std::to_string(c.failed)});
    write_csv(path, t);
}

}  // namespace phydra
