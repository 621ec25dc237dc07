#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "phydra/model.hpp"

namespace phydra {

struct WordlistRecord {
    std::string glottocode;
    std::string variety;
    std::string concept_id;
    std::string form;
};

// CSV layout: glottocode,variety,concept_id,form
std::vector<WordlistRecord> read_wordlist(const std::string& path);

// Unordered concept pair; id is "a|b" with the concepts sorted.
struct ConceptPair {
    std::string a;
    std::string b;
    std::string id() const { return a + "|" + b; }
};

ConceptPair make_pair_id(std::string first, std::string second);
ConceptPair split_pair_id(const std::string& pair_id);

// All unordered pairs of concepts attested together in at least one language.
std::vector<ConceptPair> co_attested_pairs(const std::vector<WordlistRecord>& records);

// One row per glottocode (same-glottocode varieties merged: the variety
// covering the most pairs supplies the base row, others fill its gaps), one
// column per pair: 1 when a single form expresses both concepts, 0 when both
// are attested without a shared form, missing when either is unattested.
TraitMatrix build_colex_matrix(const std::vector<WordlistRecord>& records,
                               const std::vector<ConceptPair>& pairs);

// Keeps pairs colexified in >= min_colex languages, attested in >=
// min_attested languages, with neither concept blocklisted.
TraitMatrix filter_pairs(const TraitMatrix& matrix, int min_colex = 5, int min_attested = 30,
                         const std::set<std::string>& blocklist = {});

// Plain text, one concept id per line; blank lines and # comments skipped.
std::set<std::string> read_blocklist(const std::string& path);

// Word-association scores between forms, per resource language. Lookups try
// both directions and average when both are present.
struct AssociationScores {
    std::map<std::string, std::map<std::pair<std::string, std::string>, double>> directed;

    double combo(const std::string& lang, const std::string& u, const std::string& v) const;
};

// CSV layout: resource_lang,form_a,form_b,score
AssociationScores read_association_scores(const std::string& path);

// Forms expressing each concept, per resource language.
struct ConceptFormMap {
    std::map<std::string, std::map<std::string, std::vector<std::string>>> forms;

    bool covers(const std::string& lang, const std::string& concept_id) const;
    std::vector<std::string> languages() const;
};

// CSV layout: resource_lang,concept_id,form
ConceptFormMap read_concept_forms(const std::string& path);

// Corpus frequencies per resource language.
struct FrequencyInput {
    std::map<std::string, std::map<std::string, double>> counts;  // lang -> form -> count
    std::map<std::string, double> corpus_size;                    // lang -> token total
};

// CSV layout: resource_lang,form,count,corpus_size
FrequencyInput read_frequencies(const std::string& path);

struct BorrowabilityInput {
    std::map<std::string, double> score;  // concept -> borrowed score in [0,1]
};

// CSV layout: concept_id,score
BorrowabilityInput read_borrowability(const std::string& path);

// Mean over form combinations within each covering resource language, then
// mean across those languages; empty when no language covers both concepts.
std::optional<double> associativity_score(const ConceptPair& pair, const ConceptFormMap& map,
                                          const AssociationScores& scores);

// Summed per-million frequency of all forms of the pair, log10 + 3, averaged
// over covering resource languages; a zero sum gets a Laplace add-one.
std::optional<double> zipf_score(const ConceptPair& pair, const ConceptFormMap& map,
                                 const FrequencyInput& freq);

// Mean of both concepts' borrowed scores, or the single available one.
std::optional<double> borrowability_score(const ConceptPair& pair,
                                          const BorrowabilityInput& borrow);

struct IngestPaths {
    std::string wordlist;
    std::string association;
    std::string concept_forms;
    std::string frequency;
    std::string borrowability;
    std::string blocklist;  // optional; empty = no blocklist
};

struct IngestOptions {
    int min_colex = 5;
    int min_attested = 30;
};

struct IngestResult {
    TraitMatrix traits;
    PredictorTable predictors;  // associativity, zipf, borrowability (raw scale)
    std::size_t n_languages = 0;
    std::size_t n_pairs_initial = 0;
    std::size_t n_pairs_filtered = 0;  // after the colex/attestation/blocklist filter
    std::size_t n_pairs_scored = 0;    // after requiring all three predictors
};

// Wordlist to analysis-ready trait matrix and predictor table; pairs missing
// any predictor score are dropped per the completeness rule.
IngestResult run_ingest(const IngestPaths& paths, const IngestOptions& options = {});

}  // namespace phydra
