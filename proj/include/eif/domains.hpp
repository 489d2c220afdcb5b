#pragma once

#include "eif/samples.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace eif {

struct SyllableLexicon {
  std::vector<std::string> syllables;
  static const SyllableLexicon& standard();
};

struct SyntheticWord {
  std::string text;
  std::size_t syllables = 0;
  std::uint64_t seed = 0;
};

//! 2-5 distinct syllables; deterministic per seed.
SyntheticWord generate_word(const SyllableLexicon& lex, std::uint64_t seed);

//! Pronounceability check: 1-5 units of onset cluster, vowel nucleus and
//! optional coda. Generated words always use 2-5 lexicon syllables.
bool is_legal_word(std::string_view word);
bool is_legal_syllable(std::string_view syllable);

enum class DomainKind { belongs_to, chain_induces, transitivity, squares, unrelated_control };
std::string_view to_string(DomainKind k);
DomainKind domain_kind_from_string(std::string_view s);
inline constexpr DomainKind kPaperDomains[] = {DomainKind::belongs_to, DomainKind::chain_induces,
                                               DomainKind::transitivity, DomainKind::squares};

//! One entry of a domain list; multi-sentence items are joined with a space.
struct ItemTemplate {
  std::vector<std::string> sentences; // slots written {A}
  SampleRole role = SampleRole::evaluation;
  std::optional<Desideratum> label;
  std::optional<std::size_t> negates;
};

struct DomainTemplate {
  DomainKind kind;
  std::vector<std::string> slots;
  std::vector<ItemTemplate> items;
  static const DomainTemplate& get(DomainKind k);
  //! Throws when an item references an undeclared slot or an evaluation
  //! item carries a negation link to a missing index.
  void validate() const;
};

//! Replaces every {X} with bindings.at(X).
std::string expand(std::string_view pattern, const std::map<std::string, std::string>& bindings);

struct KnowledgeDomain {
  DomainKind kind;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> bindings;
  std::vector<TextSample> samples; // template order
  std::vector<TextSample> training() const;
  std::vector<TextSample> evaluation() const;
  std::vector<std::string> words() const;
};

//! `exclude` words (and any word containing or contained in one) are never bound.
KnowledgeDomain instantiate_domain(const DomainTemplate& t, std::uint64_t trial_seed,
                                   std::size_t trial = 0,
                                   std::span<const std::string> exclude = {});

//! n_trials domains whose word sets are pairwise disjoint.
std::vector<KnowledgeDomain> build_trial_set(const DomainTemplate& t, std::size_t n_trials,
                                             std::uint64_t master_seed,
                                             std::span<const std::string> exclude = {});

nlohmann::json to_json(const KnowledgeDomain& d);
KnowledgeDomain domain_from_json(const nlohmann::json& j);

struct CorpusOptions {
  std::size_t documents = 2000;
  std::size_t max_chars = 740; // document length cap, tokens incl. newlines
  double long_fraction = 0.25; // share of documents whose budget may reach max_chars
  std::uint64_t seed = 0;
};

struct LeakageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Multi-line documents built from every template with held-out words; lines
//! within a document reuse their bindings so repeated statements occur.
//! Throws LeakageError if any forbidden word occurs anywhere as a substring.
std::vector<TextSample> build_training_corpus(std::span<const std::string> forbidden_words,
                                              const CorpusOptions& opts,
                                              std::span<const std::string> filler = {});

//! Throws LeakageError naming the first offending word and document.
void check_no_leakage(std::span<const TextSample> corpus, std::span<const std::string> words);

} // namespace eif
