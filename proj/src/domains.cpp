#include "eif/domains.hpp"

#include "eif/hashing.hpp"
#include "eif/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <stdexcept>

namespace eif {

namespace {

const std::string kOnset = "(?:kl|kr|pl|pr|tr|sk|br|gr|fl|k|p|t|s|m|n|b|g|d|j|v)";
const std::string kNucleus = "(?:ar|or|ee|oy|om|a|e|i|o|u)";
const std::string kCoda = "(?:n|m|v)?";

const std::regex& syllable_re() {
  static const std::regex re("^" + kOnset + kNucleus + kCoda + "$");
  return re;
}

const std::regex& word_re() {
  static const std::regex re("^(?:" + kOnset + kNucleus + kCoda + "){1,5}$");
  return re;
}

} // namespace

bool is_legal_syllable(std::string_view s) {
  return std::regex_match(s.begin(), s.end(), syllable_re());
}

bool is_legal_word(std::string_view w) {
  return std::regex_match(w.begin(), w.end(), word_re());
}

const SyllableLexicon& SyllableLexicon::standard() {
  static const SyllableLexicon lex{{
      "ka",  "ke",  "ki",  "ko",   "ku",  "kla", "klar", "kle", "kro", "krom", "pa",  "pi",
      "pim", "po",  "pu",  "pla",  "pro", "ta",  "te",   "to",  "tra", "tri",  "sa",  "so",
      "ski", "sko", "sku", "ma",   "me",  "mi",  "mo",   "moy", "na",  "ne",   "no",  "ba",
      "bu",  "bom", "bo",  "bri",  "bra", "ga",  "gu",   "gro", "gree", "da",  "do",  "du",
      "fla", "flo", "ja",  "jo",   "jon", "va",  "vi",   "vo",  "dar", "tor",  "noy", "greev",
  }};
  return lex;
}

SyntheticWord generate_word(const SyllableLexicon& lex, std::uint64_t seed) {
  if (lex.syllables.size() < 5)
    throw std::invalid_argument("generate_word: lexicon needs at least 5 syllables");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> count(2, 5);
  const std::size_t k = count(rng);
  std::vector<std::size_t> idx(lex.syllables.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SyntheticWord w;
  w.syllables = k;
  w.seed = seed;
  for (std::size_t s = 0; s < k; ++s) {
    std::uniform_int_distribution<std::size_t> pick(s, idx.size() - 1);
    std::swap(idx[s], idx[pick(rng)]);
    w.text += lex.syllables[idx[s]];
  }
  return w;
}

// ---- templates ----------------------------------------------------------------

std::string_view to_string(DomainKind k) {
  switch (k) {
  case DomainKind::belongs_to: return "belongs_to";
  case DomainKind::chain_induces: return "chain_induces";
  case DomainKind::transitivity: return "transitivity";
  case DomainKind::squares: return "squares";
  case DomainKind::unrelated_control: return "unrelated_control";
  }
  return "?";
}

DomainKind domain_kind_from_string(std::string_view s) {
  for (auto k : {DomainKind::belongs_to, DomainKind::chain_induces, DomainKind::transitivity,
                 DomainKind::squares, DomainKind::unrelated_control})
    if (to_string(k) == s)
      return k;
  throw std::invalid_argument("unknown domain template '" + std::string(s) + "'");
}

namespace {

using D = Desideratum;
constexpr auto T = SampleRole::training;
constexpr auto E = SampleRole::evaluation;

ItemTemplate item(std::vector<std::string> s, SampleRole r, std::optional<D> l = {},
                  std::optional<std::size_t> neg = {}) {
  return {std::move(s), r, l, neg};
}

std::vector<DomainTemplate> make_templates() {
  std::vector<DomainTemplate> out;
  out.push_back({DomainKind::belongs_to,
                 {"A", "B", "C"},
                 {
                     item({"{A} belongs to the set of {C}."}, E, D::expected_implication),
                     item({"{A} belongs to the set of {B}."}, T),
                     item({"{B} is a set that contains {A}."}, E, D::expected_implication),
                     item({"{B} belongs to the set of {A}."}, E, D::forbidden_reversal),
                     item({"{A} does not belong to the set of {C}."}, E, D::negation, 0),
                     item({"{A} might belong to the set of {C}."}, E, D::hedge),
                     item({"{B} belongs to the set of {C}."}, T),
                     item({"{A} belongs to the set of {B} and {B} belongs to the set of {C}."}, T),
                     item({"{A} belongs to the set of {B}.", "{B} belongs to the set of {C}."}, T),
                     item({"Frogs and toads often hibernate in winter."}, E, D::out_of_domain),
                 }});
  const std::string cause = "Whenever {X} happens, it causes {Y} to happen.";
  auto arrow = [&](const char* x, const char* y) {
    std::map<std::string, std::string> b{{"X", std::string("{") + x + "}"},
                                         {"Y", std::string("{") + y + "}"}};
    return expand(cause, b);
  };
  out.push_back({DomainKind::chain_induces,
                 {"A", "B", "C", "D", "Z"},
                 {
                     item({arrow("A", "Z")}, E, D::expected_implication),
                     item({arrow("A", "B")}, T),
                     item({arrow("A", "B"), arrow("B", "Z")}, T),
                     item({arrow("A", "B"), arrow("B", "C"), arrow("C", "D"), arrow("D", "Z")}, T),
                     item({arrow("Z", "A")}, E, D::forbidden_reversal),
                 }});
  out.push_back({DomainKind::transitivity,
                 {"A", "B", "C", "X", "Y"},
                 {
                     item({"a {A} is a {B}", "all {B}s have a {C}"}, T),
                     item({"a {A} is a {B}"}, T),
                     item({"all {B}s have a {C}"}, T),
                     item({"one example of a {B} is a {A}"}, E, D::expected_implication),
                     item({"a {A} is not a {B}"}, E, D::negation, 1),
                     item({"a {A} has a {C}"}, E, D::expected_implication),
                     item({"{A}s have {C}s"}, E, D::expected_implication),
                     item({"a {A} does not have a {C}"}, E, D::negation, 5),
                     item({"{A}"}, E),
                     item({"{C}"}, E),
                     item({"{B}"}, E),
                     item({"a {X} is a {Y}"}, E, D::out_of_domain),
                 }});
  out.push_back(
      {DomainKind::squares,
       {"B"},
       {
           item({"SQUARE belongs to the set of {B}."}, T),
           item({"{B} belongs to the set of RECTANGLE."}, T),
           item({"SQUARE belongs to the set of {B} and {B} belongs to the set of RECTANGLE."}, T),
           item({"SQUARE belongs to the set of {B}.", "{B} belongs to the set of RECTANGLE."}, T),
           item({"{B} belongs to the set of SQUARE.", "{B} belongs to the set of RECTANGLE."}, E,
                D::forbidden_reversal),
           item({"RECTANGLE belongs to the set of SQUARE."}, E, D::forbidden_reversal),
       }});
  out.push_back({DomainKind::unrelated_control,
                 {"A", "B"},
                 {
                     item({"The {A} market opens early on Tuesdays."}, E, D::out_of_domain),
                     item({"Rain is expected over the hills tonight."}, E, D::out_of_domain),
                     item({"She painted the fence a pale shade of green."}, E, D::out_of_domain),
                     item({"{B} is the name of a small fishing village."}, E, D::out_of_domain),
                     item({"The library closes at noon on holidays."}, E, D::out_of_domain),
                     item({"Two cups of flour make a simple dough."}, E, D::out_of_domain),
                 }});
  for (const auto& t : out)
    t.validate();
  return out;
}

const std::vector<DomainTemplate>& all_templates() {
  static const std::vector<DomainTemplate> t = make_templates();
  return t;
}

// Lowercased literal text of every template with the slots removed.
const std::string& literal_text() {
  static const std::string text = [] {
    std::string s;
    for (const auto& t : all_templates())
      for (const auto& it : t.items)
        for (const auto& sentence : it.sentences) {
          for (char c : std::regex_replace(sentence, std::regex(R"(\{[A-Z]\})"), "|"))
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
          s += '|';
        }
    return s;
  }();
  return text;
}

bool overlaps(const std::string& a, const std::string& b) {
  return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

bool conflicts(const std::string& w, std::span<const std::string> taken) {
  if (literal_text().find(w) != std::string::npos)
    return true;
  return std::any_of(taken.begin(), taken.end(), [&](const auto& t) { return overlaps(w, t); });
}

} // namespace

const DomainTemplate& DomainTemplate::get(DomainKind k) {
  for (const auto& t : all_templates())
    if (t.kind == k)
      return t;
  throw std::invalid_argument("no template for domain kind");
}

void DomainTemplate::validate() const {
  const std::regex slot_re(R"(\{([^}]*)\})");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (it.sentences.empty())
      throw std::invalid_argument(std::string(to_string(kind)) + " item " + std::to_string(i) +
                                  " has no sentences");
    for (const auto& s : it.sentences)
      for (auto m = std::sregex_iterator(s.begin(), s.end(), slot_re); m != std::sregex_iterator();
           ++m)
        if (std::find(slots.begin(), slots.end(), (*m)[1].str()) == slots.end())
          throw std::invalid_argument(std::string(to_string(kind)) + " item " +
                                      std::to_string(i) + " uses undeclared slot {" +
                                      (*m)[1].str() + "}");
    if (it.negates && *it.negates >= items.size())
      throw std::invalid_argument(std::string(to_string(kind)) + " item " + std::to_string(i) +
                                  " negates missing item " + std::to_string(*it.negates));
    if (it.role == SampleRole::training && it.label)
      throw std::invalid_argument(std::string(to_string(kind)) + " item " + std::to_string(i) +
                                  ": training items carry no desideratum label");
  }
}

std::string expand(std::string_view pattern, const std::map<std::string, std::string>& bindings) {
  std::string out;
  for (std::size_t k = 0; k < pattern.size();) {
    if (pattern[k] == '{') {
      const auto close = pattern.find('}', k);
      if (close == std::string_view::npos)
        throw std::invalid_argument("expand: unterminated slot in '" + std::string(pattern) + "'");
      const std::string name(pattern.substr(k + 1, close - k - 1));
      const auto it = bindings.find(name);
      if (it == bindings.end())
        throw std::invalid_argument("expand: unbound slot {" + name + "}");
      out += it->second;
      k = close + 1;
    } else {
      out += pattern[k++];
    }
  }
  return out;
}

std::vector<TextSample> KnowledgeDomain::training() const {
  std::vector<TextSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [](const auto& s) { return s.role == SampleRole::training; });
  return out;
}

std::vector<TextSample> KnowledgeDomain::evaluation() const {
  std::vector<TextSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [](const auto& s) { return s.role == SampleRole::evaluation; });
  return out;
}

std::vector<std::string> KnowledgeDomain::words() const {
  std::vector<std::string> out;
  for (const auto& [slot, w] : bindings)
    out.push_back(w);
  return out;
}

namespace {

std::vector<TextSample> expand_items(const DomainTemplate& t,
                                     const std::map<std::string, std::string>& bindings,
                                     const std::string& id_prefix) {
  std::vector<TextSample> out;
  for (std::size_t i = 0; i < t.items.size(); ++i) {
    const auto& it = t.items[i];
    std::string text;
    for (const auto& s : it.sentences)
      text += (text.empty() ? "" : " ") + expand(s, bindings);
    TextSample s = make_text_sample(std::move(text), id_prefix + std::to_string(i));
    s.domain = std::string(to_string(t.kind));
    s.role = it.role;
    s.label = it.label;
    s.negates = it.negates;
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace

KnowledgeDomain instantiate_domain(const DomainTemplate& t, std::uint64_t trial_seed,
                                   std::size_t trial, std::span<const std::string> exclude) {
  constexpr std::size_t kMaxRetries = 1000;
  KnowledgeDomain d{t.kind, trial, trial_seed, {}, {}};
  std::vector<std::string> taken(exclude.begin(), exclude.end());
  for (const auto& slot : t.slots) {
    bool bound = false;
    for (std::size_t attempt = 0; attempt < kMaxRetries && !bound; ++attempt) {
      const auto w = generate_word(SyllableLexicon::standard(),
                                   substream_seed(trial_seed, slot + ":" + std::to_string(attempt)));
      if (conflicts(w.text, taken))
        continue;
      d.bindings[slot] = w.text;
      taken.push_back(w.text);
      bound = true;
    }
    if (!bound)
      throw std::runtime_error("instantiate_domain: could not bind slot {" + slot + "} after " +
                               std::to_string(kMaxRetries) + " attempts");
  }
  d.samples = expand_items(t, d.bindings,
                           std::string(to_string(t.kind)) + "/t" + std::to_string(trial) + "/");
  return d;
}

std::vector<KnowledgeDomain> build_trial_set(const DomainTemplate& t, std::size_t n_trials,
                                             std::uint64_t master_seed,
                                             std::span<const std::string> exclude) {
  if (n_trials == 0)
    throw std::invalid_argument("build_trial_set: n_trials must be >= 1");
  std::vector<std::string> taken(exclude.begin(), exclude.end());
  std::vector<KnowledgeDomain> out;
  for (std::size_t k = 0; k < n_trials; ++k) {
    const auto seed = substream_seed(master_seed, std::string(to_string(t.kind)) + ":trial:" +
                                                      std::to_string(k));
    out.push_back(instantiate_domain(t, seed, k, taken));
    for (const auto& w : out.back().words())
      taken.push_back(w);
  }
  return out;
}

nlohmann::json to_json(const KnowledgeDomain& d) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : d.samples)
    samples.push_back({{"id", s.id},
                       {"text", s.text},
                       {"role", to_string(s.role)},
                       {"label", s.label ? nlohmann::json(to_string(*s.label)) : nlohmann::json()},
                       {"negates", s.negates ? nlohmann::json(*s.negates) : nlohmann::json()}});
  return {{"template", to_string(d.kind)},
          {"trial", d.trial},
          {"seed", d.seed},
          {"bindings", d.bindings},
          {"samples", samples}};
}

KnowledgeDomain domain_from_json(const nlohmann::json& j) {
  KnowledgeDomain d;
  d.kind = domain_kind_from_string(j.at("template").get<std::string>());
  d.trial = j.at("trial").get<std::size_t>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
  for (const auto& js : j.at("samples")) {
    TextSample s = make_text_sample(js.at("text").get<std::string>(), js.at("id").get<std::string>());
    s.domain = std::string(to_string(d.kind));
    s.role = role_from_string(js.at("role").get<std::string>());
    if (!js.at("label").is_null())
      s.label = desideratum_from_string(js.at("label").get<std::string>());
    if (!js.at("negates").is_null())
      s.negates = js.at("negates").get<std::size_t>();
    d.samples.push_back(std::move(s));
  }
  return d;
}

// ---- base-training corpus -------------------------------------------------------

void check_no_leakage(std::span<const TextSample> corpus, std::span<const std::string> words) {
  for (const auto& doc : corpus)
    for (const auto& w : words)
      if (doc.text.find(w) != std::string::npos)
        throw LeakageError("corpus document '" + doc.id + "' contains trial word '" + w + "'");
}

std::vector<TextSample> build_training_corpus(std::span<const std::string> forbidden,
                                              const CorpusOptions& opts,
                                              std::span<const std::string> filler) {
  if (opts.documents == 0)
    throw std::invalid_argument("build_training_corpus: documents must be >= 1");
  std::mt19937_64 rng(substream_seed(opts.seed, "corpus"));

  // Held-out word pool: nothing overlapping a forbidden word.
  std::vector<std::string> pool;
  std::set<std::string> seen;
  for (std::uint64_t k = 0; pool.size() < 4000 && k < 200000; ++k) {
    auto w = generate_word(SyllableLexicon::standard(),
                           substream_seed(opts.seed, "corpus-word:" + std::to_string(k)))
                 .text;
    if (seen.count(w) || conflicts(w, forbidden))
      continue;
    seen.insert(w);
    pool.push_back(std::move(w));
  }
  if (pool.size() < 16)
    throw std::runtime_error("build_training_corpus: word pool exhausted");

  const auto& templates = all_templates();
  std::uniform_int_distribution<std::size_t> pick_template(0, templates.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_word(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> long_len(24, opts.max_chars);
  std::uniform_int_distribution<std::size_t> short_len(24, std::max<std::size_t>(24, opts.max_chars / 3));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<TextSample> corpus;
  for (std::size_t doc = 0; doc < opts.documents; ++doc) {
    const auto& t = templates[pick_template(rng)];
    std::map<std::string, std::string> b;
    std::vector<std::string> used;
    for (const auto& slot : t.slots) {
      std::string w;
      do
        w = pool[pick_word(rng)];
      while (std::any_of(used.begin(), used.end(), [&](const auto& x) { return overlaps(w, x); }));
      used.push_back(w);
      b[slot] = w;
    }
    std::vector<std::string> lines;
    for (const auto& it : t.items) {
      std::string text;
      for (const auto& s : it.sentences)
        text += (text.empty() ? "" : " ") + expand(s, b);
      lines.push_back(std::move(text));
    }
    if (!filler.empty())
      lines.insert(lines.end(), filler.begin(), filler.end());

    const std::size_t budget = u(rng) < opts.long_fraction ? long_len(rng) : short_len(rng);
    std::string text;
    std::vector<std::size_t> emitted;
    std::uniform_int_distribution<std::size_t> pick_line(0, lines.size() - 1);
    for (std::size_t guard = 0; guard < 64; ++guard) {
      std::size_t k = pick_line(rng);
      const double r = u(rng);
      if (!emitted.empty() && r < 0.25) {
        k = emitted.back();
      } else if (!emitted.empty() && r < 0.4) {
        std::uniform_int_distribution<std::size_t> back(0, emitted.size() - 1);
        k = emitted[back(rng)];
      }
      const std::size_t extra = lines[k].size() + (text.empty() ? 0 : 1);
      if (text.size() + extra > budget) {
        if (!text.empty())
          break;
        if (lines[k].size() > opts.max_chars)
          continue;
      }
      text += (text.empty() ? "" : "\n") + lines[k];
      emitted.push_back(k);
    }
    if (text.empty())
      continue;
    TextSample s = make_text_sample(std::move(text), "corpus/" + std::to_string(doc));
    s.domain = "corpus";
    s.role = SampleRole::training;
    corpus.push_back(std::move(s));
  }
  check_no_leakage(corpus, forbidden);
  return corpus;
}

} // namespace eif
