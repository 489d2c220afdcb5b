#pragma once

#include "eif/eif.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace eif {

enum class Verdict { satisfied, violated, inconclusive };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct DesideratumResult {
  std::string desideratum; // semantics, sparsity_selectivity, noise_invariance, ...
  std::string domain;      // template name, or the architecture for image runs
  Condition condition = Condition::fine_tuned;
  double statistic = 0.0; // mean over trials
  double null_statistic = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::size_t trials = 0;
  double dispersion = 0.0; // sample standard deviation over trials
  std::vector<double> per_trial;
  std::map<std::string, double> details;
  friend bool operator==(const DesideratumResult&, const DesideratumResult&) = default;
};

//! inconclusive when trials < 3 or |statistic - null| < dispersion, otherwise
//! satisfied iff statistic > null.
Verdict decide(double statistic, double null_statistic, double dispersion, std::size_t trials);

//! Mean and dispersion over per-trial statistics, then `decide`.
DesideratumResult aggregate(std::string desideratum, std::string domain, Condition c,
                            std::vector<double> per_trial, double null_statistic);

// ---- per-matrix statistics (facilitation = -EIF) --------------------------------

//! Premise rows (role training): mean facilitation of expected-implication
//! columns minus mean facilitation of forbidden-reversal and negation columns.
double transitivity_statistic(const EifMatrix& m);
//! As transitivity; without expected-implication columns the consistent set
//! falls back to the other premise columns.
double ontology_statistic(const EifMatrix& m);
//! Mean EIF of out-of-domain columns under premise rows (0 if none).
double control_column_mean(const EifMatrix& m);
//! Premise rows: facilitation of the forward arrow minus the reversed arrow.
double causality_statistic(const EifMatrix& m);
//! Premise rows: facilitation of each negated statement minus its negation.
double logical_implication_statistic(const EifMatrix& m);
//! Same-class minus different-class mean facilitation, off-diagonal.
double semantics_statistic(const EifMatrix& m);
double sparsity_statistic(const EifMatrix& m);

//! Per (statement, negation) pair: facilitation of the statement minus that of
//! its negation, with the statement itself as the prompt/fine-tune row.
std::vector<double> verbatim_vs_negation(const EifMatrix& m);

//! Rows are aligned by index. Mean over facilitation entries (clean < 0) of
//! noisy - clean.
double noise_statistic(std::span<const std::vector<double>> clean_rows,
                       std::span<const std::vector<double>> noisy_rows);
//! Pairs every sigma > 0 row with the sigma = 0 row of the same group; only
//! sigma = 0 columns count.
double noise_statistic(const EifMatrix& m);

bool has_label(const EifMatrix& m, Desideratum d);

// ---- whole battery ----------------------------------------------------------------

struct OrderingRecord {
  std::string domain;
  std::string quantity;
  double fine_tuned = 0.0;
  double prompted = 0.0;
  std::string expected; // "prompted>fine_tuned" or "prompted<fine_tuned"
  bool reproduced = false;
};

struct BatteryOptions {
  double sparsity_threshold = 0.5;
};

struct BatteryReport {
  std::vector<DesideratumResult> results;
  std::vector<OrderingRecord> orderings;
  nlohmann::json metadata;
  const DesideratumResult* find(std::string_view desideratum, std::string_view domain,
                                Condition c) const;
};

//! Groups matrices by (domain, condition); trials are the matrices in a group.
//! Rejects batteries mixing architectures.
BatteryReport run_battery(std::span<const EifMatrix> matrices, const BatteryOptions& opts = {});

nlohmann::json to_json(const BatteryReport& r);
BatteryReport battery_from_json(const nlohmann::json& j);

} // namespace eif
