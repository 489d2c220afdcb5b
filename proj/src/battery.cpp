#include "eif/battery.hpp"

#include "eif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace eif {

std::string_view to_string(Verdict v) {
  switch (v) {
  case Verdict::satisfied: return "satisfied";
  case Verdict::violated: return "violated";
  case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::satisfied, Verdict::violated, Verdict::inconclusive})
    if (to_string(v) == s)
      return v;
  throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

Verdict decide(double statistic, double null_statistic, double dispersion, std::size_t trials) {
  if (trials < 3 || std::abs(statistic - null_statistic) < dispersion)
    return Verdict::inconclusive;
  return statistic > null_statistic ? Verdict::satisfied : Verdict::violated;
}

DesideratumResult aggregate(std::string desideratum, std::string domain, Condition c,
                            std::vector<double> per_trial, double null_statistic) {
  DesideratumResult r;
  r.desideratum = std::move(desideratum);
  r.domain = std::move(domain);
  r.condition = c;
  r.null_statistic = null_statistic;
  r.trials = per_trial.size();
  if (!per_trial.empty()) {
    const double n = static_cast<double>(per_trial.size());
    r.statistic = std::accumulate(per_trial.begin(), per_trial.end(), 0.0) / n;
    if (per_trial.size() > 1) {
      double ss = 0.0;
      for (double v : per_trial)
        ss += (v - r.statistic) * (v - r.statistic);
      r.dispersion = std::sqrt(ss / (n - 1.0));
    }
  }
  r.per_trial = std::move(per_trial);
  r.verdict = decide(r.statistic, r.null_statistic, r.dispersion, r.trials);
  return r;
}

namespace {

const std::string kExpected(to_string(Desideratum::expected_implication));
const std::string kReversal(to_string(Desideratum::forbidden_reversal));
const std::string kNegation(to_string(Desideratum::negation));
const std::string kOutOfDomain(to_string(Desideratum::out_of_domain));

using Index = std::vector<std::size_t>;

Index where(const EifMatrix& m, auto pred) {
  Index out;
  for (std::size_t k = 0; k < m.size(); ++k)
    if (pred(m.manifest[k]))
      out.push_back(k);
  return out;
}

Index premises(const EifMatrix& m) {
  return where(m, [](const SampleInfo& s) { return s.role == "training"; });
}

Index labelled(const EifMatrix& m, const std::string& label) {
  return where(m, [&](const SampleInfo& s) { return s.label == label; });
}

Index forbidden(const EifMatrix& m) {
  return where(m, [](const SampleInfo& s) { return s.label == kReversal || s.label == kNegation; });
}

// Mean of -M over measured off-diagonal (row, col) pairs; 0 when there are none.
double mean_facilitation(const EifMatrix& m, const Index& rows, const Index& cols) {
  double total = 0.0;
  std::size_t count = 0;
  for (auto i : rows)
    for (auto j : cols)
      if (i != j && m.measured(i, j)) {
        total -= m(i, j);
        ++count;
      }
  return count ? total / static_cast<double>(count) : 0.0;
}

void require(bool ok, const char* check, const char* what) {
  if (!ok)
    throw std::invalid_argument(std::string(check) + ": matrix manifest has no " + what);
}

} // namespace

bool has_label(const EifMatrix& m, Desideratum d) {
  return !labelled(m, std::string(to_string(d))).empty();
}

double transitivity_statistic(const EifMatrix& m) {
  const auto rows = premises(m), exp = labelled(m, kExpected), forb = forbidden(m);
  require(!rows.empty(), "transitivity", "premise rows");
  require(!exp.empty(), "transitivity", "expected-implication columns");
  require(!forb.empty(), "transitivity", "forbidden columns");
  return mean_facilitation(m, rows, exp) - mean_facilitation(m, rows, forb);
}

double ontology_statistic(const EifMatrix& m) {
  const auto rows = premises(m), forb = forbidden(m);
  auto consistent = labelled(m, kExpected);
  require(!rows.empty(), "ontology", "premise rows");
  require(!forb.empty(), "ontology", "forbidden columns");
  if (consistent.empty())
    consistent = rows;
  return mean_facilitation(m, rows, consistent) - mean_facilitation(m, rows, forb);
}

double control_column_mean(const EifMatrix& m) {
  return -mean_facilitation(m, premises(m), labelled(m, kOutOfDomain));
}

double causality_statistic(const EifMatrix& m) {
  const auto rows = premises(m), fwd = labelled(m, kExpected), rev = labelled(m, kReversal);
  require(!rows.empty(), "causality", "premise rows");
  require(!fwd.empty(), "causality", "forward-arrow columns");
  require(!rev.empty(), "causality", "reversed-arrow columns");
  return mean_facilitation(m, rows, fwd) - mean_facilitation(m, rows, rev);
}

double logical_implication_statistic(const EifMatrix& m) {
  const auto rows = premises(m);
  require(!rows.empty(), "logical_implication", "premise rows");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!m.manifest[k].negates)
      continue;
    const std::size_t f = *m.manifest[k].negates;
    Index r;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(r),
                 [&](std::size_t i) { return i != f && i != k; });
    total += mean_facilitation(m, r, {f}) - mean_facilitation(m, r, {k});
    ++pairs;
  }
  require(pairs > 0, "logical_implication", "negation pairs");
  return total / static_cast<double>(pairs);
}

std::vector<double> verbatim_vs_negation(const EifMatrix& m) {
  std::vector<double> out;
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m.manifest[k].negates) {
      const std::size_t f = *m.manifest[k].negates;
      if (m.measured(f, f) && m.measured(f, k))
        out.push_back(m(f, k) - m(f, f));
    }
  return out;
}

double semantics_statistic(const EifMatrix& m) {
  const std::size_t n = m.size();
  double same = 0.0, diff = 0.0;
  std::size_t ns = 0, nd = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.manifest[i].cls < 0)
      throw std::invalid_argument("semantics: sample '" + m.manifest[i].id + "' has no class");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !m.measured(i, j))
        continue;
      if (m.manifest[i].cls == m.manifest[j].cls) {
        same -= m(i, j);
        ++ns;
      } else {
        diff -= m(i, j);
        ++nd;
      }
    }
  }
  return (ns ? same / ns : 0.0) - (nd ? diff / nd : 0.0);
}

double sparsity_statistic(const EifMatrix& m) { return diffusivity_histogram(m).sparsity_fraction; }

double noise_statistic(std::span<const std::vector<double>> clean,
                       std::span<const std::vector<double>> noisy) {
  if (clean.size() != noisy.size())
    throw std::invalid_argument("noise_invariance: " + std::to_string(clean.size()) +
                                " clean rows vs " + std::to_string(noisy.size()) + " noisy rows");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < clean.size(); ++r) {
    if (clean[r].size() != noisy[r].size())
      throw std::invalid_argument("noise_invariance: row " + std::to_string(r) +
                                  " has mismatched lengths");
    for (std::size_t j = 0; j < clean[r].size(); ++j)
      if (clean[r][j] < 0.0) {
        total += noisy[r][j] - clean[r][j];
        ++count;
      }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double noise_statistic(const EifMatrix& m) {
  const auto cols = where(m, [](const SampleInfo& s) { return s.sigma == 0.0; });
  std::vector<std::vector<double>> clean, noisy;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.manifest[i].sigma == 0.0)
      continue;
    std::size_t c = m.size();
    for (auto k : cols)
      if (m.manifest[k].group == m.manifest[i].group)
        c = k;
    if (c == m.size())
      throw std::invalid_argument("noise_invariance: noisy row '" + m.manifest[i].id +
                                  "' has no clean counterpart");
    std::vector<double> rc, rn;
    for (auto j : cols) {
      rc.push_back(m(c, j));
      rn.push_back(m(i, j));
    }
    clean.push_back(std::move(rc));
    noisy.push_back(std::move(rn));
  }
  return noise_statistic(clean, noisy);
}

// ---- run_battery -----------------------------------------------------------------

const DesideratumResult* BatteryReport::find(std::string_view desideratum, std::string_view domain,
                                             Condition c) const {
  for (const auto& r : results)
    if (r.desideratum == desideratum && r.domain == domain && r.condition == c)
      return &r;
  return nullptr;
}

namespace {

using Group = std::vector<const EifMatrix*>;

std::vector<double> per_trial(const Group& g, double (*f)(const EifMatrix&)) {
  std::vector<double> out;
  for (const auto* m : g)
    out.push_back(f(*m));
  return out;
}

double mean_of(const Group& g, auto f) {
  double s = 0.0;
  for (const auto* m : g)
    s += f(*m);
  return g.empty() ? 0.0 : s / static_cast<double>(g.size());
}

bool all_classed(const EifMatrix& m) {
  return std::all_of(m.manifest.begin(), m.manifest.end(),
                     [](const SampleInfo& s) { return s.cls >= 0; });
}

bool any_noisy(const EifMatrix& m) {
  return std::any_of(m.manifest.begin(), m.manifest.end(),
                     [](const SampleInfo& s) { return s.sigma > 0.0; });
}

void battery_for_group(const std::string& domain, Condition c, const Group& g,
                       const BatteryOptions& opts, std::vector<DesideratumResult>& out) {
  const EifMatrix& first = *g.front();
  auto sp = aggregate("sparsity_selectivity", domain, c, per_trial(g, sparsity_statistic),
                      opts.sparsity_threshold);
  sp.details["negative_tail_fraction"] = mean_of(g, [](const EifMatrix& m) {
    return diffusivity_histogram(m).negative_tail_fraction;
  });
  sp.details["symmetry_score"] =
      mean_of(g, [](const EifMatrix& m) { return symmetry_score(m.values); });
  out.push_back(std::move(sp));

  const bool has_premises = !premises(first).empty();
  if (domain == "transitivity" && has_premises)
    out.push_back(aggregate("transitivity", domain, c, per_trial(g, transitivity_statistic), 0.0));
  if ((domain == "belongs_to" || domain == "squares") && has_premises) {
    auto r = aggregate("ontology", domain, c, per_trial(g, ontology_statistic), 0.0);
    if (has_label(first, Desideratum::out_of_domain))
      r.details["control_column_mean_eif"] = mean_of(g, control_column_mean);
    out.push_back(std::move(r));
  }
  if (domain == "chain_induces" && has_premises)
    out.push_back(aggregate("causality", domain, c, per_trial(g, causality_statistic), 0.0));
  if (has_premises && has_label(first, Desideratum::negation)) {
    auto r = aggregate("logical_implication", domain, c,
                       per_trial(g, logical_implication_statistic), 0.0);
    out.push_back(std::move(r));
  }
  if (c == Condition::prompted && has_label(first, Desideratum::negation)) {
    std::vector<double> trials;
    double positive = 0.0;
    for (const auto* m : g) {
      const auto v = verbatim_vs_negation(*m);
      const double mean =
          v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      trials.push_back(mean);
      positive += mean > 0.0;
    }
    auto r = aggregate("verbatim_over_negation", domain, c, std::move(trials), 0.0);
    r.details["trials_positive"] = positive;
    out.push_back(std::move(r));
  }
  if (all_classed(first) && first.size() > 0) {
    auto r = aggregate("semantics", domain, c, per_trial(g, semantics_statistic), 0.0);
    out.push_back(std::move(r));
  }
  if (any_noisy(first))
    out.push_back(aggregate("noise_invariance", domain, c,
                            per_trial(g, static_cast<double (*)(const EifMatrix&)>(noise_statistic)),
                            0.0));
}

} // namespace

BatteryReport run_battery(std::span<const EifMatrix> matrices, const BatteryOptions& opts) {
  if (matrices.empty())
    throw std::invalid_argument("run_battery: no matrices");
  std::set<std::string> archs;
  for (const auto& m : matrices)
    archs.insert(m.architecture);
  if (archs.size() > 1) {
    std::string list;
    for (const auto& a : archs)
      list += (list.empty() ? "" : ", ") + a;
    throw std::invalid_argument("run_battery: mixed architectures (" + list + ")");
  }

  std::map<std::pair<std::string, int>, Group> groups;
  for (const auto& m : matrices)
    groups[{m.domain, static_cast<int>(m.condition)}].push_back(&m);

  BatteryReport report;
  for (const auto& [key, g] : groups)
    battery_for_group(key.first, static_cast<Condition>(key.second), g, opts, report.results);

  // Fine-tuned vs prompted orderings per domain.
  struct Quantity {
    const char* desideratum;
    const char* detail; // nullptr: the statistic itself
    bool prompted_higher;
  };
  const Quantity quantities[] = {{"transitivity", nullptr, true},
                                 {"ontology", nullptr, true},
                                 {"causality", nullptr, true},
                                 {"sparsity_selectivity", nullptr, true},
                                 {"sparsity_selectivity", "negative_tail_fraction", true},
                                 {"sparsity_selectivity", "symmetry_score", false}};
  std::set<std::string> domains;
  for (const auto& [key, g] : groups)
    domains.insert(key.first);
  for (const auto& d : domains)
    for (const auto& q : quantities) {
      const auto* ft = report.find(q.desideratum, d, Condition::fine_tuned);
      const auto* pr = report.find(q.desideratum, d, Condition::prompted);
      if (!ft || !pr)
        continue;
      OrderingRecord o;
      o.domain = d;
      o.quantity = q.detail ? q.detail : q.desideratum;
      o.fine_tuned = q.detail ? ft->details.at(q.detail) : ft->statistic;
      o.prompted = q.detail ? pr->details.at(q.detail) : pr->statistic;
      o.expected = q.prompted_higher ? "prompted>fine_tuned" : "prompted<fine_tuned";
      o.reproduced = q.prompted_higher ? o.prompted > o.fine_tuned : o.prompted < o.fine_tuned;
      report.orderings.push_back(std::move(o));
    }

  std::set<std::string> checksums;
  std::set<double> etas;
  std::vector<std::uint64_t> seeds;
  for (const auto& m : matrices) {
    checksums.insert(m.base_checksum);
    if (m.condition == Condition::fine_tuned)
      etas.insert(m.eta);
    seeds.push_back(m.seed);
  }
  report.metadata = {{"architecture", *archs.begin()},
                     {"matrices", matrices.size()},
                     {"base_checksums", checksums},
                     {"etas", etas},
                     {"seeds", seeds},
                     {"sparsity_threshold", opts.sparsity_threshold}};
  return report;
}

nlohmann::json to_json(const BatteryReport& r) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& d : r.results)
    results.push_back({{"desideratum", d.desideratum},
                       {"domain", d.domain},
                       {"condition", to_string(d.condition)},
                       {"statistic", d.statistic},
                       {"null_statistic", d.null_statistic},
                       {"verdict", to_string(d.verdict)},
                       {"trials", d.trials},
                       {"dispersion", d.dispersion},
                       {"per_trial", d.per_trial},
                       {"details", d.details}});
  nlohmann::json orderings = nlohmann::json::array();
  for (const auto& o : r.orderings)
    orderings.push_back({{"domain", o.domain},
                         {"quantity", o.quantity},
                         {"fine_tuned", o.fine_tuned},
                         {"prompted", o.prompted},
                         {"expected", o.expected},
                         {"reproduced", o.reproduced}});
  return {{"results", results}, {"orderings", orderings}, {"metadata", r.metadata}};
}

BatteryReport battery_from_json(const nlohmann::json& j) {
  BatteryReport r;
  for (const auto& x : j.at("results")) {
    DesideratumResult d;
    d.desideratum = x.at("desideratum").get<std::string>();
    d.domain = x.at("domain").get<std::string>();
    d.condition = condition_from_string(x.at("condition").get<std::string>());
    d.statistic = x.at("statistic").get<double>();
    d.null_statistic = x.at("null_statistic").get<double>();
    d.verdict = verdict_from_string(x.at("verdict").get<std::string>());
    d.trials = x.at("trials").get<std::size_t>();
    d.dispersion = x.at("dispersion").get<double>();
    d.per_trial = x.at("per_trial").get<std::vector<double>>();
    d.details = x.at("details").get<std::map<std::string, double>>();
    r.results.push_back(std::move(d));
  }
  for (const auto& x : j.at("orderings"))
    r.orderings.push_back({x.at("domain").get<std::string>(), x.at("quantity").get<std::string>(),
                           x.at("fine_tuned").get<double>(), x.at("prompted").get<double>(),
                           x.at("expected").get<std::string>(), x.at("reproduced").get<bool>()});
  r.metadata = j.at("metadata");
  return r;
}

} // namespace eif
