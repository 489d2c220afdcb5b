#include "eif/battery.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace eif;

namespace {

SampleInfo info(std::string id, std::string role, std::string label = {},
                std::optional<std::size_t> negates = {}) {
  return {std::move(id), std::move(role), std::move(label), negates, -1, 0.0, {}};
}

EifMatrix blank(std::vector<SampleInfo> manifest, std::string domain, Condition c) {
  EifMatrix m;
  const auto n = manifest.size();
  m.values = SquareMatrix(n);
  m.mask.assign(n * n, 1);
  m.manifest = std::move(manifest);
  m.domain = std::move(domain);
  m.condition = c;
  m.architecture = "tiny_lm";
  return m;
}

// premises 0,1; expected 2; reversal 3; negation 4 (of 2)
EifMatrix implication_matrix(double expected, double forbidden, const std::string& domain,
                             Condition c = Condition::fine_tuned) {
  auto m = blank({info("p0", "training"), info("p1", "training"),
                  info("e", "evaluation", "expected-implication"),
                  info("r", "evaluation", "forbidden-reversal"),
                  info("n", "evaluation", "negation", 2)},
                 domain, c);
  for (std::size_t i : {0u, 1u}) {
    m.values(i, 2) = expected;
    m.values(i, 3) = forbidden;
    m.values(i, 4) = forbidden;
  }
  return m;
}

EifMatrix classed(std::size_t per_class, double same, double diff) {
  std::vector<SampleInfo> man;
  for (std::size_t k = 0; k < 3 * per_class; ++k) {
    auto s = info("c" + std::to_string(k), "");
    s.cls = static_cast<int>(k / per_class);
    man.push_back(s);
  }
  auto m = blank(man, "cnn", Condition::fine_tuned);
  m.architecture = "cnn";
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      m.values(i, j) = man[i].cls == man[j].cls ? same : diff;
  return m;
}

} // namespace

TEST(Verdict, Rules) {
  EXPECT_EQ(decide(1.0, 0.0, 0.1, 2), Verdict::inconclusive);
  EXPECT_EQ(decide(1.0, 0.0, 0.1, 3), Verdict::satisfied);
  EXPECT_EQ(decide(-1.0, 0.0, 0.1, 3), Verdict::violated);
  EXPECT_EQ(decide(0.05, 0.0, 0.1, 10), Verdict::inconclusive);
}

TEST(Verdict, AggregateUsesSampleStd) {
  const auto r = aggregate("x", "d", Condition::fine_tuned, {1.0, 2.0, 3.0}, 0.0);
  EXPECT_DOUBLE_EQ(r.statistic, 2.0);
  EXPECT_DOUBLE_EQ(r.dispersion, 1.0);
  EXPECT_EQ(r.verdict, Verdict::satisfied);
}

TEST(Statistics, TransitivityPositiveControl) {
  const auto m = implication_matrix(-0.5, 0.0, "transitivity");
  EXPECT_DOUBLE_EQ(transitivity_statistic(m), 0.5);
  std::vector<EifMatrix> trials(10, m);
  const auto rep = run_battery(trials);
  const auto* r = rep.find("transitivity", "transitivity", Condition::fine_tuned);
  ASSERT_NE(r, nullptr);
  EXPECT_DOUBLE_EQ(r->statistic, 0.5);
  EXPECT_EQ(r->verdict, Verdict::satisfied);
}

TEST(Statistics, TransitivityNeedsLabels) {
  auto m = blank({info("a", "training"), info("b", "evaluation")}, "transitivity",
                 Condition::fine_tuned);
  EXPECT_THROW(transitivity_statistic(m), std::invalid_argument);
}

TEST(Statistics, OntologyContainmentAsymmetry) {
  const auto m = implication_matrix(-1.0, 0.2, "belongs_to");
  EXPECT_DOUBLE_EQ(ontology_statistic(m), 1.2);
  std::vector<EifMatrix> trials(5, m);
  EXPECT_EQ(run_battery(trials).find("ontology", "belongs_to", Condition::fine_tuned)->verdict,
            Verdict::satisfied);
}

TEST(Statistics, OntologyFallsBackToPremiseColumns) {
  auto m = blank({info("p0", "training"), info("p1", "training"),
                  info("r", "evaluation", "forbidden-reversal")},
                 "squares", Condition::fine_tuned);
  m.values(0, 1) = m.values(1, 0) = -0.4;
  m.values(0, 2) = m.values(1, 2) = 0.1;
  EXPECT_DOUBLE_EQ(ontology_statistic(m), 0.5);
}

TEST(Statistics, RelabelingInvariance) {
  auto m = implication_matrix(-0.7, -0.1, "belongs_to");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& v : m.values.values())
    v += g(rng);
  const std::vector<std::size_t> perm{3, 1, 4, 0, 2};
  const auto q = m.permuted(perm);
  EXPECT_EQ(q.manifest[2].negates, 4u); // "n" moved to slot 2, its statement "e" to slot 4
  EXPECT_NEAR(ontology_statistic(m), ontology_statistic(q), 1e-15);
  EXPECT_NEAR(transitivity_statistic(m), transitivity_statistic(q), 1e-15);
  EXPECT_NEAR(logical_implication_statistic(m), logical_implication_statistic(q), 1e-15);
}

TEST(Statistics, CausalityDirectional) {
  auto m = blank({info("fwd", "evaluation", "expected-implication"), info("p", "training"),
                  info("rev", "evaluation", "forbidden-reversal")},
                 "chain_induces", Condition::fine_tuned);
  m.values(1, 0) = -0.3;
  m.values(1, 2) = 0.0;
  EXPECT_DOUBLE_EQ(causality_statistic(m), 0.3);
  std::vector<EifMatrix> trials(4, m);
  EXPECT_EQ(run_battery(trials).find("causality", "chain_induces", Condition::fine_tuned)->verdict,
            Verdict::satisfied);
}

TEST(Statistics, ControlColumnMean) {
  auto m = blank({info("p", "training"), info("frog", "evaluation", "out-of-domain")}, "belongs_to",
                 Condition::fine_tuned);
  m.values(0, 1) = -0.02;
  EXPECT_DOUBLE_EQ(control_column_mean(m), -0.02);
}

TEST(Statistics, VerbatimVsNegation) {
  auto m = implication_matrix(0.0, 0.0, "belongs_to", Condition::prompted);
  m.values(2, 2) = -1.0; // the statement prompts itself
  m.values(2, 4) = -0.25;
  const auto v = verbatim_vs_negation(m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_DOUBLE_EQ(v[0], 0.75);
  m.mask[2 * 5 + 4] = 0;
  EXPECT_TRUE(verbatim_vs_negation(m).empty());
}

TEST(Statistics, SemanticsBlockDiagonal) {
  const auto m = classed(3, -1.0, 0.0);
  EXPECT_DOUBLE_EQ(semantics_statistic(m), 1.0);
  std::vector<EifMatrix> trials(3, m);
  EXPECT_EQ(run_battery(trials).find("semantics", "cnn", Condition::fine_tuned)->verdict,
            Verdict::satisfied);
}

TEST(Statistics, SemanticsShuffledLabelsNearZero) {
  auto m = classed(10, -1.0, 0.0);
  std::mt19937_64 rng(4);
  double total = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto q = m;
    std::vector<int> cls;
    for (const auto& s : q.manifest)
      cls.push_back(s.cls);
    std::shuffle(cls.begin(), cls.end(), rng);
    for (std::size_t k = 0; k < cls.size(); ++k)
      q.manifest[k].cls = cls[k];
    total += semantics_statistic(q);
  }
  EXPECT_LT(std::abs(total / 50.0), 0.1);
}

TEST(Statistics, SparsityExtremes) {
  auto zero = implication_matrix(0.0, 0.0, "transitivity");
  EXPECT_EQ(sparsity_statistic(zero), 1.0);
  std::vector<EifMatrix> z(3, zero);
  EXPECT_EQ(run_battery(z).find("sparsity_selectivity", "transitivity", Condition::fine_tuned)->verdict,
            Verdict::satisfied);
  auto flat = zero;
  for (auto& v : flat.values.values())
    v = 0.4;
  EXPECT_EQ(sparsity_statistic(flat), 0.0);
  std::vector<EifMatrix> f(3, flat);
  EXPECT_EQ(run_battery(f).find("sparsity_selectivity", "transitivity", Condition::fine_tuned)->verdict,
            Verdict::violated);
}

TEST(Noise, IdenticalRowsGiveExactlyZero) {
  const std::vector<std::vector<double>> rows{{-1.0, 0.5, -0.2}, {0.3, -0.7, 0.0}};
  EXPECT_EQ(noise_statistic(rows, rows), 0.0);
}

TEST(Noise, HalvedRowsShimIsSatisfied) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<double> per_trial;
  for (int t = 0; t < 3; ++t) {
    std::vector<std::vector<double>> clean(4, std::vector<double>(6)), noisy = clean;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t j = 0; j < 6; ++j) {
        clean[r][j] = g(rng);
        noisy[r][j] = 0.5 * clean[r][j];
      }
    per_trial.push_back(noise_statistic(clean, noisy));
  }
  EXPECT_EQ(aggregate("noise_invariance", "cnn", Condition::fine_tuned, per_trial, 0.0).verdict,
            Verdict::satisfied);
}

TEST(Noise, MatrixFormPairsByGroup) {
  std::vector<SampleInfo> man;
  for (int k = 0; k < 2; ++k) {
    auto c = info("d" + std::to_string(k), "");
    c.cls = k;
    c.group = c.id;
    man.push_back(c);
  }
  for (int k = 0; k < 2; ++k) {
    auto n = info("d" + std::to_string(k) + "@1.00", "");
    n.cls = k;
    n.sigma = 1.0;
    n.group = "d" + std::to_string(k);
    man.push_back(n);
  }
  auto m = blank(man, "cnn", Condition::fine_tuned);
  m.values(0, 0) = -1.0;
  m.values(0, 1) = -0.5;
  m.values(2, 0) = -0.5; // noisy d0 row: half the clean facilitation
  m.values(2, 1) = -0.25;
  m.values(1, 1) = -1.0;
  m.values(3, 1) = -1.0; // noisy d1 row equals clean
  // facilitation entries: (0,0) +0.5, (0,1) +0.25, (1,1) 0 -> mean 0.25
  EXPECT_DOUBLE_EQ(noise_statistic(m), 0.25);
  auto orphan = m;
  orphan.manifest[3].group = "nobody";
  EXPECT_THROW(noise_statistic(orphan), std::invalid_argument);
}

TEST(Battery, SingleTrialIsInconclusive) {
  const auto m = implication_matrix(-0.5, 0.0, "transitivity");
  const auto rep = run_battery(std::vector<EifMatrix>{m});
  for (const auto& r : rep.results)
    EXPECT_EQ(r.verdict, Verdict::inconclusive) << r.desideratum;
}

TEST(Battery, OrderingsAndRoundTrip) {
  std::vector<EifMatrix> ms;
  for (int t = 0; t < 3; ++t) {
    ms.push_back(implication_matrix(-0.01 * t, 0.0, "transitivity"));
    auto p = implication_matrix(-0.5 - 0.01 * t, 0.1, "transitivity", Condition::prompted);
    p.values(2, 2) = -1.0;
    ms.push_back(p);
  }
  const auto rep = run_battery(ms);
  bool found = false;
  for (const auto& o : rep.orderings)
    if (o.quantity == "transitivity") {
      found = true;
      EXPECT_TRUE(o.reproduced);
      EXPECT_EQ(o.expected, "prompted>fine_tuned");
    }
  EXPECT_TRUE(found);
  const auto* v = rep.find("verbatim_over_negation", "transitivity", Condition::prompted);
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->details.at("trials_positive"), 3.0);
  const auto j = to_json(rep);
  EXPECT_EQ(to_json(battery_from_json(j)), j);
}

TEST(Battery, RejectsMixedArchitectures) {
  auto a = implication_matrix(0, 0, "transitivity");
  auto b = a;
  b.architecture = "cnn";
  EXPECT_THROW(run_battery(std::vector<EifMatrix>{a, b}), std::invalid_argument);
}
