#include "phydra/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "phydra/csv.hpp"
#include "phydra/util.hpp"

namespace phydra {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::int8_t parse_cell(const std::string& s) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    if (s == "NA") return kMissingState;
    throw std::runtime_error("trait cell must be 0, 1, or NA; got '" + s + "'");
}

}  // namespace

TraitMatrix read_trait_matrix(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "taxon")
        throw std::runtime_error(path + ": first trait column must be 'taxon'");
    TraitMatrix m;
    m.character_ids.assign(t.header.begin() + 1, t.header.end());
    for (const auto& row : t.rows) {
        m.taxa.push_back(row[0]);
        std::vector<std::int8_t> cells;
        cells.reserve(row.size() - 1);
        for (std::size_t j = 1; j < row.size(); ++j) cells.push_back(parse_cell(row[j]));
        m.cells.push_back(std::move(cells));
    }
    for (std::size_t i = 0; i < m.taxa.size(); ++i)
        for (std::size_t j = i + 1; j < m.taxa.size(); ++j)
            if (m.taxa[i] == m.taxa[j])
                throw std::runtime_error(path + ": duplicate taxon " + m.taxa[i]);
    return m;
}

void write_trait_matrix(const std::string& path, const TraitMatrix& traits) {
    CsvTable t;
    t.header.push_back("taxon");
    for (const auto& id : traits.character_ids) t.header.push_back(id);
    for (std::size_t i = 0; i < traits.taxa.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(traits.taxa[i]);
        for (std::int8_t c : traits.cells[i])
            row.push_back(c == kMissingState ? "NA" : (c == 1 ? "1" : "0"));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

PredictorTable read_predictor_table(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "pair_id")
        throw std::runtime_error(path + ": first predictor column must be 'pair_id'");
    PredictorTable p;
    p.predictor_names.assign(t.header.begin() + 1, t.header.end());
    for (const auto& row : t.rows) {
        p.character_ids.push_back(row[0]);
        std::vector<double> x;
        x.reserve(row.size() - 1);
        for (std::size_t j = 1; j < row.size(); ++j) {
            double v = parse_double(row[j]);
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": non-finite predictor for " + row[0]);
            x.push_back(v);
        }
        p.x.push_back(std::move(x));
    }
    return p;
}

void write_predictor_table(const std::string& path, const PredictorTable& preds) {
    CsvTable t;
    t.header.push_back("pair_id");
    for (const auto& name : preds.predictor_names) t.header.push_back(name);
    for (std::size_t i = 0; i < preds.character_ids.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(preds.character_ids[i]);
        for (double v : preds.x[i]) row.push_back(format_double(v));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

Standardization standardize_predictors(PredictorTable& preds) {
    const std::size_t n = preds.x.size();
    const std::size_t k = preds.predictor_names.size();
    if (n < 2) throw std::invalid_argument("need at least 2 rows to standardize");
    Standardization st;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = preds.x[i][j];
        double m = mean(col);
        double s = std::sqrt(variance(col));
        if (!(s > 0.0))
            throw std::invalid_argument("predictor '" + preds.predictor_names[j] +
                                        "' is constant; cannot standardize");
        for (std::size_t i = 0; i < n; ++i) preds.x[i][j] = (preds.x[i][j] - m) / s;
        st.mean.push_back(m);
        st.sd.push_back(s);
    }
    return st;
}

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::kFull;
    if (name == "stationary-only") return Variant::kStationaryOnly;
    if (name == "speed-only") return Variant::kSpeedOnly;
    if (name == "null") return Variant::kNull;
    throw std::invalid_argument(
        "unknown model variant '" + name +
        "' (expected full, stationary-only, speed-only, or null)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kFull: return "full";
        case Variant::kStationaryOnly: return "stationary-only";
        case Variant::kSpeedOnly: return "speed-only";
        case Variant::kNull: return "null";
    }
    return "?";
}

namespace {

void check_dims(const ModelSpec& spec, const CoefficientSet& coefs) {
    if (spec.p_regressed() && coefs.beta_p.size() != spec.n_predictors)
        throw std::invalid_argument("beta_p length does not match predictor count");
    if (spec.s_regressed() && coefs.beta_s.size() != spec.n_predictors)
        throw std::invalid_argument("beta_s length does not match predictor count");
}

}  // namespace

RateParams link_params(const ModelSpec& spec, const CoefficientSet& coefs,
                       std::span<const double> x) {
    check_dims(spec, coefs);
    if (x.size() != spec.n_predictors)
        throw std::invalid_argument("predictor row length does not match model");
    double p;
    if (spec.p_regressed()) {
        double eta = coefs.beta_p0;
        for (std::size_t j = 0; j < x.size(); ++j) eta += coefs.beta_p[j] * x[j];
        p = logistic(eta);
    } else {
        p = coefs.const_p;
    }
    double s;
    if (spec.s_regressed()) {
        double eta = coefs.beta_s0;
        for (std::size_t j = 0; j < x.size(); ++j) eta += coefs.beta_s[j] * x[j];
        s = std::exp(eta);
    } else {
        s = coefs.const_s;
    }
    return RateParams{s, p};
}

double log_prior(const ModelSpec& spec, const CoefficientSet& coefs) {
    check_dims(spec, coefs);
    const PriorSettings& pr = spec.priors;
    double lp = 0.0;
    if (spec.p_regressed()) {
        lp += normal_log_pdf(coefs.beta_p0, pr.coef_mean, pr.coef_sd);
        for (double b : coefs.beta_p) lp += normal_log_pdf(b, pr.coef_mean, pr.coef_sd);
    } else {
        if (!(coefs.const_p > 0.0 && coefs.const_p < 1.0)) return kNegInf;
        // Uniform(0,1): density 1
    }
    if (spec.s_regressed()) {
        lp += normal_log_pdf(coefs.beta_s0, pr.coef_mean, pr.coef_sd);
        for (double b : coefs.beta_s) lp += normal_log_pdf(b, pr.coef_mean, pr.coef_sd);
    } else {
        if (!(coefs.const_s > 0.0)) return kNegInf;
        lp += normal_log_pdf(std::log(coefs.const_s), pr.log_speed_mean, pr.log_speed_sd) -
              std::log(coefs.const_s);
    }
    return lp;
}

std::vector<std::string> param_names(const ModelSpec& spec,
                                     const std::vector<std::string>& predictor_names) {
    if (predictor_names.size() != spec.n_predictors)
        throw std::invalid_argument("predictor name count does not match model");
    std::vector<std::string> names;
    if (spec.p_regressed()) {
        names.push_back("b_p_0");
        for (const auto& n : predictor_names) names.push_back("b_p_" + n);
    } else {
        names.push_back("p_const");
    }
    if (spec.s_regressed()) {
        names.push_back("b_s_0");
        for (const auto& n : predictor_names) names.push_back("b_s_" + n);
    } else {
        names.push_back("s_const");
    }
    return names;
}

std::vector<double> pack_unconstrained(const ModelSpec& spec, const CoefficientSet& coefs) {
    check_dims(spec, coefs);
    std::vector<double> theta;
    theta.reserve(spec.dim());
    if (spec.p_regressed()) {
        theta.push_back(coefs.beta_p0);
        theta.insert(theta.end(), coefs.beta_p.begin(), coefs.beta_p.end());
    } else {
        theta.push_back(logit(coefs.const_p));
    }
    if (spec.s_regressed()) {
        theta.push_back(coefs.beta_s0);
        theta.insert(theta.end(), coefs.beta_s.begin(), coefs.beta_s.end());
    } else {
        theta.push_back(std::log(coefs.const_s));
    }
    return theta;
}

CoefficientSet unpack_unconstrained(const ModelSpec& spec, std::span<const double> theta) {
    if (theta.size() != spec.dim())
        throw std::invalid_argument("parameter vector length does not match model");
    CoefficientSet coefs;
    std::size_t i = 0;
    if (spec.p_regressed()) {
        coefs.beta_p0 = theta[i++];
        coefs.beta_p.assign(theta.begin() + static_cast<std::ptrdiff_t>(i),
                            theta.begin() + static_cast<std::ptrdiff_t>(i + spec.n_predictors));
        i += spec.n_predictors;
    } else {
        coefs.const_p = logistic(theta[i++]);
    }
    if (spec.s_regressed()) {
        coefs.beta_s0 = theta[i++];
        coefs.beta_s.assign(theta.begin() + static_cast<std::ptrdiff_t>(i),
                            theta.begin() + static_cast<std::ptrdiff_t>(i + spec.n_predictors));
    } else {
        coefs.const_s = std::exp(theta[i]);
    }
    return coefs;
}

DataBundle make_bundle(TraitMatrix traits, PredictorTable predictors, TreeSample trees) {
    if (traits.taxa.size() < 2) throw std::invalid_argument("trait matrix needs >= 2 taxa");
    if (traits.character_ids.empty())
        throw std::invalid_argument("trait matrix has no characters");

    std::unordered_map<std::string, std::size_t> pred_row;
    for (std::size_t i = 0; i < predictors.character_ids.size(); ++i)
        if (!pred_row.emplace(predictors.character_ids[i], i).second)
            throw std::invalid_argument("duplicate predictor row: " +
                                        predictors.character_ids[i]);
    if (predictors.character_ids.size() != traits.character_ids.size())
        throw std::invalid_argument("predictor rows and trait columns differ in count");

    PredictorTable aligned;
    aligned.predictor_names = predictors.predictor_names;
    for (const auto& id : traits.character_ids) {
        auto it = pred_row.find(id);
        if (it == pred_row.end())
            throw std::invalid_argument("no predictor row for character " + id);
        aligned.character_ids.push_back(id);
        aligned.x.push_back(predictors.x[it->second]);
    }

    std::vector<PhyloTree> pruned;
    pruned.reserve(trees.trees.size());
    for (std::size_t k = 0; k < trees.trees.size(); ++k) {
        for (const auto& taxon : traits.taxa)
            if (trees.trees[k].find_tip(taxon) < 0)
                throw std::invalid_argument("tree " + std::to_string(k + 1) +
                                            " lacks taxon " + taxon);
        pruned.push_back(prune_to_taxa(trees.trees[k], traits.taxa));
    }
    return DataBundle{std::move(traits), std::move(aligned),
                      make_tree_sample(std::move(pruned), std::move(trees.source))};
}

Posterior::Posterior(const PhyloTree& tree, const TraitMatrix& traits,
                     const PredictorTable& predictors, ModelSpec spec)
    : tree_(tree), spec_(spec) {
    if (predictors.predictor_names.size() != spec_.n_predictors)
        throw std::invalid_argument("model and predictor table disagree on K");
    if (predictors.character_ids != traits.character_ids)
        throw std::invalid_argument("predictor rows not aligned with trait columns");
    names_ = param_names(spec_, predictors.predictor_names);
    x_ = predictors.x;

    const std::size_t n_chars = traits.character_ids.size();
    chars_.reserve(n_chars);
    for (std::size_t c = 0; c < n_chars; ++c) {
        TipStates ts;
        ts.character_id = traits.character_ids[c];
        for (std::size_t i = 0; i < traits.taxa.size(); ++i)
            ts.states[traits.taxa[i]] = traits.cells[i][c];
        chars_.push_back(bind_tip_states(tree_, ts));
    }
}

double Posterior::log_density(std::span<const double> theta, double* grad) const {
    if (theta.size() != spec_.dim())
        throw std::invalid_argument("theta length does not match model");
    const PriorSettings& pr = spec_.priors;
    const std::size_t K = spec_.n_predictors;
    const std::size_t p_off = 0;
    const std::size_t s_off = spec_.p_regressed() ? K + 1 : 1;

    if (grad) std::fill(grad, grad + spec_.dim(), 0.0);
    double lp = 0.0;

    if (spec_.p_regressed()) {
        for (std::size_t j = 0; j <= K; ++j) {
            double b = theta[p_off + j];
            lp += normal_log_pdf(b, pr.coef_mean, pr.coef_sd);
            if (grad) grad[p_off + j] -= (b - pr.coef_mean) / (pr.coef_sd * pr.coef_sd);
        }
    } else {
        double t = theta[p_off];
        lp += t - 2.0 * log1pexp(t);  // standard-logistic density of logit(p)
        if (grad) grad[p_off] += 1.0 - 2.0 * logistic(t);
    }
    if (spec_.s_regressed()) {
        for (std::size_t j = 0; j <= K; ++j) {
            double b = theta[s_off + j];
            lp += normal_log_pdf(b, pr.coef_mean, pr.coef_sd);
            if (grad) grad[s_off + j] -= (b - pr.coef_mean) / (pr.coef_sd * pr.coef_sd);
        }
    } else {
        double t = theta[s_off];
        lp += normal_log_pdf(t, pr.log_speed_mean, pr.log_speed_sd);
        if (grad)
            grad[s_off] -= (t - pr.log_speed_mean) / (pr.log_speed_sd * pr.log_speed_sd);
    }

    for (std::size_t c = 0; c < chars_.size(); ++c) {
        const auto& x = x_[c];
        double p, dp_deta = 0.0;
        if (spec_.p_regressed()) {
            double eta = theta[p_off];
            for (std::size_t j = 0; j < K; ++j) eta += theta[p_off + 1 + j] * x[j];
            p = logistic(eta);
            dp_deta = p * (1.0 - p);
        } else {
            p = logistic(theta[p_off]);
            dp_deta = p * (1.0 - p);
        }
        double s;
        if (spec_.s_regressed()) {
            double eta = theta[s_off];
            for (std::size_t j = 0; j < K; ++j) eta += theta[s_off + 1 + j] * x[j];
            s = std::exp(eta);
        } else {
            s = std::exp(theta[s_off]);
        }
        RateParams rp{s, p};
        if (!rp.valid() || !std::isfinite(s)) return kNegInf;

        if (grad) {
            LogLikGrad g = log_likelihood_grad(tree_, chars_[c], rp);
            if (!std::isfinite(g.loglik)) return kNegInf;
            lp += g.loglik;
            double dp = g.d_p * dp_deta;  // chain rule through the logit link
            double ds = g.d_s * s;        // and through the log link
            if (spec_.p_regressed()) {
                grad[p_off] += dp;
                for (std::size_t j = 0; j < K; ++j) grad[p_off + 1 + j] += dp * x[j];
            } else {
                grad[p_off] += dp;
            }
            if (spec_.s_regressed()) {
                grad[s_off] += ds;
                for (std::size_t j = 0; j < K; ++j) grad[s_off + 1 + j] += ds * x[j];
            } else {
                grad[s_off] += ds;
            }
        } else {
            double ll = log_likelihood(tree_, chars_[c], rp);
            if (!std::isfinite(ll)) return kNegInf;
            lp += ll;
        }
    }
    return lp;
}

std::vector<double> Posterior::reported(std::span<const double> theta) const {
    std::vector<double> out(theta.begin(), theta.end());
    std::size_t s_off = spec_.p_regressed() ? spec_.n_predictors + 1 : 1;
    if (!spec_.p_regressed()) out[0] = logistic(theta[0]);
    if (!spec_.s_regressed()) out[s_off] = std::exp(theta[s_off]);
    return out;
}

std::vector<double> Posterior::pointwise(std::span<const double> theta) const {
    CoefficientSet coefs = unpack_unconstrained(spec_, theta);
    std::vector<double> out;
    out.reserve(chars_.size());
    for (std::size_t c = 0; c < chars_.size(); ++c) {
        RateParams rp = link_params(spec_, coefs, x_[c]);
        out.push_back(log_likelihood(tree_, chars_[c], rp));
    }
    return out;
}

double log_posterior(const ModelSpec& spec, const CoefficientSet& coefs, const PhyloTree& tree,
                     const TraitMatrix& traits, const PredictorTable& predictors) {
    double lp = log_prior(spec, coefs);
    if (!std::isfinite(lp)) return lp;
    for (double ll : pointwise_loglik(spec, coefs, tree, traits, predictors)) lp += ll;
    return lp;
}

std::vector<double> pointwise_loglik(const ModelSpec& spec, const CoefficientSet& coefs,
                                     const PhyloTree& tree, const TraitMatrix& traits,
                                     const PredictorTable& predictors) {
    check_dims(spec, coefs);
    Posterior post(tree, traits, predictors, spec);
    return post.pointwise(pack_unconstrained(spec, coefs));
}

}  // namespace phydra
