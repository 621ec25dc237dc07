#include "phydra/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "phydra/csv.hpp"
#include "phydra/likelihood.hpp"
#include "phydra/util.hpp"

namespace phydra {

namespace {

void require_header(const CsvTable& t, const std::vector<std::string>& expected,
                    const std::string& path) {
    if (t.header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw std::runtime_error(path + ": expected header " + want);
    }
}

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<WordlistRecord> read_wordlist(const std::string& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"glottocode", "variety", "concept_id", "form"}, path);
    std::vector<WordlistRecord> records;
    for (const auto& row : t.rows) {
        for (const auto& field : row)
            if (field.empty()) throw std::runtime_error(path + ": empty field in wordlist row");
        records.push_back({row[0], row[1], row[2], row[3]});
    }
    return records;
}

ConceptPair make_pair_id(std::string first, std::string second) {
    if (first == second) throw std::invalid_argument("a concept cannot pair with itself");
    if (second < first) std::swap(first, second);
    return {std::move(first), std::move(second)};
}

ConceptPair split_pair_id(const std::string& pair_id) {
    auto bar = pair_id.find('|');
    if (bar == std::string::npos || bar == 0 || bar + 1 == pair_id.size())
        throw std::invalid_argument("malformed pair id: " + pair_id);
    return {pair_id.substr(0, bar), pair_id.substr(bar + 1)};
}

namespace {

// glottocode -> variety -> concept -> forms
using FormTable =
    std::map<std::string, std::map<std::string, std::map<std::string, std::set<std::string>>>>;

FormTable group_forms(const std::vector<WordlistRecord>& records) {
    FormTable table;
    for (const auto& r : records) table[r.glottocode][r.variety][r.concept_id].insert(r.form);
    return table;
}

bool shares_form(const std::set<std::string>& a, const std::set<std::string>& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (const auto& f : small)
        if (large.count(f)) return true;
    return false;
}

}  // namespace

std::vector<ConceptPair> co_attested_pairs(const std::vector<WordlistRecord>& records) {
    if (records.empty()) throw std::invalid_argument("empty wordlist");
    std::set<std::string> ids;
    FormTable table = group_forms(records);
    for (const auto& [glotto, varieties] : table) {
        (void)glotto;
        for (const auto& [variety, concepts] : varieties) {
            (void)variety;
            std::vector<std::string> attested;
            attested.reserve(concepts.size());
            for (const auto& [cid, forms] : concepts) {
                (void)forms;
                attested.push_back(cid);
            }
            for (std::size_t i = 0; i < attested.size(); ++i)
                for (std::size_t j = i + 1; j < attested.size(); ++j)
                    ids.insert(make_pair_id(attested[i], attested[j]).id());
        }
    }
    std::vector<ConceptPair> pairs;
    for (const auto& id : ids) pairs.push_back(split_pair_id(id));
    return pairs;
}

TraitMatrix build_colex_matrix(const std::vector<WordlistRecord>& records,
                               const std::vector<ConceptPair>& pairs) {
    if (records.empty()) throw std::invalid_argument("empty wordlist");
    FormTable table = group_forms(records);

    TraitMatrix matrix;
    for (const auto& [glotto, varieties] : table) {
        (void)varieties;
        matrix.taxa.push_back(glotto);
    }
    for (const auto& p : pairs) matrix.character_ids.push_back(p.id());

    for (const auto& [glotto, varieties] : table) {
        (void)glotto;
        // cell per variety, then merge: the most pair-complete variety is the
        // base and the rest only fill its missing cells
        std::vector<std::pair<std::string, std::vector<std::int8_t>>> rows;
        for (const auto& [variety, concepts] : varieties) {
            std::vector<std::int8_t> cells;
            cells.reserve(pairs.size());
            for (const auto& p : pairs) {
                auto fa = concepts.find(p.a);
                auto fb = concepts.find(p.b);
                if (fa == concepts.end() || fb == concepts.end())
                    cells.push_back(kMissingState);
                else
                    cells.push_back(shares_form(fa->second, fb->second) ? 1 : 0);
            }
            rows.emplace_back(variety, std::move(cells));
        }
        std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
            auto complete = [](const std::vector<std::int8_t>& cells) {
                return std::count_if(cells.begin(), cells.end(),
                                     [](std::int8_t c) { return c != kMissingState; });
            };
            auto cx = complete(x.second), cy = complete(y.second);
            return cx != cy ? cx > cy : x.first < y.first;
        });
        std::vector<std::int8_t> merged = rows.front().second;
        for (std::size_t r = 1; r < rows.size(); ++r)
            for (std::size_t c = 0; c < merged.size(); ++c)
                if (merged[c] == kMissingState) merged[c] = rows[r].second[c];
        matrix.cells.push_back(std::move(merged));
    }
    return matrix;
}

TraitMatrix filter_pairs(const TraitMatrix& matrix, int min_colex, int min_attested,
                         const std::set<std::string>& blocklist) {
    if (min_colex < 0 || min_attested < 0)
        throw std::invalid_argument("filter thresholds must be non-negative");
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < matrix.character_ids.size(); ++c) {
        auto pair = split_pair_id(matrix.character_ids[c]);
        if (blocklist.count(pair.a) || blocklist.count(pair.b)) continue;
        int colex = 0, attested = 0;
        for (const auto& row : matrix.cells) {
            if (row[c] == kMissingState) continue;
            ++attested;
            if (row[c] == 1) ++colex;
        }
        if (colex >= min_colex && attested >= min_attested) keep.push_back(c);
    }
    TraitMatrix out;
    out.taxa = matrix.taxa;
    for (auto c : keep) out.character_ids.push_back(matrix.character_ids[c]);
    for (const auto& row : matrix.cells) {
        std::vector<std::int8_t> cells;
        cells.reserve(keep.size());
        for (auto c : keep) cells.push_back(row[c]);
        out.cells.push_back(std::move(cells));
    }
    return out;
}

std::set<std::string> read_blocklist(const std::string& path) {
    std::set<std::string> out;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto entry = trimmed(line);
        if (entry.empty() || entry[0] == '#') continue;
        out.insert(entry);
    }
    return out;
}

double AssociationScores::combo(const std::string& lang, const std::string& u,
                                const std::string& v) const {
    auto lang_it = directed.find(lang);
    if (lang_it == directed.end()) return 0.0;
    auto fwd = lang_it->second.find({u, v});
    auto rev = lang_it->second.find({v, u});
    bool has_fwd = fwd != lang_it->second.end();
    bool has_rev = rev != lang_it->second.end();
    if (has_fwd && has_rev) return 0.5 * (fwd->second + rev->second);
    if (has_fwd) return fwd->second;
    if (has_rev) return rev->second;
    return 0.0;
}

AssociationScores read_association_scores(const std::string& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"resource_lang", "form_a", "form_b", "score"}, path);
    AssociationScores scores;
    for (const auto& row : t.rows) {
        double v = parse_double(row[3]);
        if (!std::isfinite(v) || v < 0.0)
            throw std::runtime_error(path + ": association scores must be finite and >= 0");
        scores.directed[row[0]][{row[1], row[2]}] = v;
    }
    return scores;
}

bool ConceptFormMap::covers(const std::string& lang, const std::string& concept_id) const {
    auto lang_it = forms.find(lang);
    if (lang_it == forms.end()) return false;
    auto it = lang_it->second.find(concept_id);
    return it != lang_it->second.end() && !it->second.empty();
}

std::vector<std::string> ConceptFormMap::languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, concepts] : forms) {
        (void)concepts;
        out.push_back(lang);
    }
    return out;
}

ConceptFormMap read_concept_forms(const std::string& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"resource_lang", "concept_id", "form"}, path);
    ConceptFormMap map;
    for (const auto& row : t.rows) {
        auto& forms = map.forms[row[0]][row[1]];
        if (std::find(forms.begin(), forms.end(), row[2]) == forms.end())
            forms.push_back(row[2]);
    }
    return map;
}

FrequencyInput read_frequencies(const std::string& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"resource_lang", "form", "count", "corpus_size"}, path);
    FrequencyInput freq;
    for (const auto& row : t.rows) {
        double count = parse_double(row[2]);
        double corpus = parse_double(row[3]);
        if (!(count >= 0.0)) throw std::runtime_error(path + ": counts must be >= 0");
        if (!(corpus > 0.0)) throw std::runtime_error(path + ": corpus size must be positive");
        auto [it, inserted] = freq.corpus_size.try_emplace(row[0], corpus);
        if (!inserted && it->second != corpus)
            throw std::runtime_error(path + ": inconsistent corpus size for " + row[0]);
        freq.counts[row[0]][row[1]] += count;
    }
    return freq;
}

BorrowabilityInput read_borrowability(const std::string& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"concept_id", "score"}, path);
    BorrowabilityInput borrow;
    for (const auto& row : t.rows) {
        double v = parse_double(row[1]);
        if (!(v >= 0.0 && v <= 1.0))
            throw std::runtime_error(path + ": borrowed scores must lie in [0,1]");
        if (!borrow.score.emplace(row[0], v).second)
            throw std::runtime_error(path + ": duplicate concept " + row[0]);
    }
    return borrow;
}

std::optional<double> associativity_score(const ConceptPair& pair, const ConceptFormMap& map,
                                          const AssociationScores& scores) {
    std::vector<double> per_lang;
    for (const auto& [lang, concepts] : map.forms) {
        (void)concepts;
        if (!map.covers(lang, pair.a) || !map.covers(lang, pair.b)) continue;
        const auto& fa = map.forms.at(lang).at(pair.a);
        const auto& fb = map.forms.at(lang).at(pair.b);
        double total = 0.0;
        for (const auto& u : fa)
            for (const auto& v : fb) total += scores.combo(lang, u, v);
        per_lang.push_back(total / static_cast<double>(fa.size() * fb.size()));
    }
    if (per_lang.empty()) return std::nullopt;
    return mean(per_lang);
}

std::optional<double> zipf_score(const ConceptPair& pair, const ConceptFormMap& map,
                                 const FrequencyInput& freq) {
    std::vector<double> per_lang;
    for (const auto& [lang, concepts] : map.forms) {
        (void)concepts;
        if (!map.covers(lang, pair.a) || !map.covers(lang, pair.b)) continue;
        auto corpus_it = freq.corpus_size.find(lang);
        if (corpus_it == freq.corpus_size.end()) continue;

        std::set<std::string> forms;
        for (const auto& f : map.forms.at(lang).at(pair.a)) forms.insert(f);
        for (const auto& f : map.forms.at(lang).at(pair.b)) forms.insert(f);
        double total = 0.0;
        auto counts_it = freq.counts.find(lang);
        for (const auto& f : forms) {
            if (counts_it == freq.counts.end()) break;
            auto c = counts_it->second.find(f);
            if (c != counts_it->second.end()) total += c->second;
        }
        if (total == 0.0) total = 1.0;  // Laplace add-one keeps the log finite
        double per_million = total / corpus_it->second * 1e6;
        per_lang.push_back(std::log10(per_million) + 3.0);
    }
    if (per_lang.empty()) return std::nullopt;
    return mean(per_lang);
}

std::optional<double> borrowability_score(const ConceptPair& pair,
                                          const BorrowabilityInput& borrow) {
    auto a = borrow.score.find(pair.a);
    auto b = borrow.score.find(pair.b);
    bool has_a = a != borrow.score.end();
    bool has_b = b != borrow.score.end();
    if (has_a && has_b) return 0.5 * (a->second + b->second);
    if (has_a) return a->second;
    if (has_b) return b->second;
    return std::nullopt;
}

IngestResult run_ingest(const IngestPaths& paths, const IngestOptions& options) {
    auto records = read_wordlist(paths.wordlist);
    auto pairs = co_attested_pairs(records);
    auto matrix = build_colex_matrix(records, pairs);

    std::set<std::string> blocklist;
    if (!paths.blocklist.empty()) blocklist = read_blocklist(paths.blocklist);
    auto filtered = filter_pairs(matrix, options.min_colex, options.min_attested, blocklist);

    auto concept_map = read_concept_forms(paths.concept_forms);
    auto assoc = read_association_scores(paths.association);
    auto freq = read_frequencies(paths.frequency);
    auto borrow = read_borrowability(paths.borrowability);

    IngestResult result;
    result.n_languages = matrix.taxa.size();
    result.n_pairs_initial = pairs.size();
    result.n_pairs_filtered = filtered.character_ids.size();

    std::vector<std::size_t> keep;
    PredictorTable preds;
    preds.predictor_names = {"associativity", "zipf", "borrowability"};
    for (std::size_t c = 0; c < filtered.character_ids.size(); ++c) {
        auto pair = split_pair_id(filtered.character_ids[c]);
        auto a = associativity_score(pair, concept_map, assoc);
        auto z = zipf_score(pair, concept_map, freq);
        auto b = borrowability_score(pair, borrow);
        if (!a || !z || !b) continue;
        keep.push_back(c);
        preds.character_ids.push_back(filtered.character_ids[c]);
        preds.x.push_back({*a, *z, *b});
    }

    result.traits.taxa = filtered.taxa;
    for (auto c : keep) result.traits.character_ids.push_back(filtered.character_ids[c]);
    for (const auto& row : filtered.cells) {
        std::vector<std::int8_t> cells;
        cells.reserve(keep.size());
        for (auto c : keep) cells.push_back(row[c]);
        result.traits.cells.push_back(std::move(cells));
    }
    result.predictors = std::move(preds);
    result.n_pairs_scored = result.traits.character_ids.size();
    return result;
}

}  // namespace phydra
