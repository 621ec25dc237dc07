#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phydra/model.hpp"
#include "phydra/sampler.hpp"
#include "phydra/trees.hpp"

namespace phydra {

enum class SimSize { kSmall, kMedium, kLarge };

std::string size_name(SimSize size);               // SMALL | MEDIUM | LARGE
SimSize parse_size(const std::string& name);

struct SimSetting {
    SimSize size = SimSize::kSmall;
    int n_taxa = 35;
    int n_traits = 85;
    bool s_active = false;
    bool p_active = false;
    std::uint64_t seed = 0;
};

// Fills in the taxon/trait counts that belong to the size label.
SimSetting make_setting(SimSize size, bool s_active, bool p_active, std::uint64_t seed);

struct SyntheticData {
    PhyloTree tree;
    std::vector<double> x;   // one predictor value per trait
    CoefficientSet truth;    // single-predictor ground truth
    TraitMatrix traits;
};

// Coalescent tree, x ~ N(0,1), intercepts and active coefficients ~ N(0,1)
// (inactive ones pinned to 0), traits simulated from the stationary root.
// The tree, predictor, and candidate coefficients depend only on the seed, so
// the four activation patterns of one seed share them.
SyntheticData generate_synthetic(const SimSetting& setting);

enum class Recovery { kTrue, kFalsePositive, kFalseNegative, kSignError };

std::string recovery_name(Recovery r);  // T | FP | FN | SE

// Zero truths: T when 0 sits inside the interval, FP otherwise. Nonzero
// truths: FN when 0 is inside, SE when the interval sits entirely on the
// wrong side, T otherwise.
Recovery classify_recovery(double truth, double eti_low, double eti_high);

struct StudyConfig {
    std::vector<SimSize> sizes{SimSize::kSmall};
    int n_seeds = 25;
    SamplerConfig sampler;     // chain count is forced to 1 per fit
    double rhat_limit = 1.05;
    int jobs = 1;
    std::uint64_t seed = 0;    // master seed for the whole study
};

struct StudyCell {
    std::string param;
    std::string size;
    int t = 0;
    int fp = 0;
    int fn = 0;
    int se = 0;
    int failed = 0;  // excluded fits for this size (same value on both rows)
};

// One single-chain full-model fit per (seed, activation pattern), outcomes
// aggregated per regression coefficient and size. Fits whose R-hat exceeds
// the limit (or that error out) are excluded with a warning.
std::vector<StudyCell> run_study(const StudyConfig& config);

void write_study_csv(const std::string& path, const std::vector<StudyCell>& cells);

}  // namespace phydra
