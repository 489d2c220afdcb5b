#include "eif/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace eif;

namespace {

std::vector<Sample> blobs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Sample> out;
  for (std::size_t k = 0; k < n; ++k) {
    VectorSample v;
    v.label = static_cast<int>(k % 3);
    v.features = {g(rng) + (v.label == 0), g(rng) + (v.label == 1), g(rng) + (v.label == 2), g(rng)};
    v.id = "v" + std::to_string(k);
    out.push_back(v);
  }
  return out;
}

LmConfig small_lm() {
  LmConfig c;
  c.layers = 1;
  c.heads = 2;
  c.d_model = 16;
  c.d_ff = 32;
  c.context = 64;
  return c;
}

} // namespace

TEST(TrainBase, ZeroEpochsIsNoOp) {
  const auto p = init_params(MlpConfig{}, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train_base(p, blobs(6, 1), cfg);
  EXPECT_EQ(r.params, p);
  EXPECT_TRUE(r.epoch_loss.empty());
}

TEST(TrainBase, OneSampleOneStepEqualsFineTune) {
  const auto p = init_params(MlpConfig{}, 2);
  const auto data = blobs(1, 2);
  TrainConfig cfg;
  cfg.eta = 0.05;
  const auto r = train_base(p, data, cfg);
  EXPECT_EQ(r.params, fine_tune_single(p, data[0], 0.05));
}

TEST(TrainBase, LossDecreases) {
  const auto data = blobs(60, 3);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  cfg.momentum = 0.9;
  const auto r = train_base(init_params(MlpConfig{}, 3), data, cfg);
  ASSERT_EQ(r.epoch_loss.size(), 20u);
  EXPECT_LT(r.epoch_loss.back(), 0.5 * r.epoch_loss.front());
}

TEST(TrainBase, DeterministicPerSeed) {
  const auto data = blobs(30, 4);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 77;
  const auto a = train_base(init_params(MlpConfig{}, 4), data, cfg);
  const auto b = train_base(init_params(MlpConfig{}, 4), data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(TrainBase, DivergenceNamesEpochAndStep) {
  auto data = blobs(4, 5);
  std::get<VectorSample>(data[2]).features[0] = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.shuffle = false;
  cfg.batch_size = 1;
  try {
    train_base(init_params(MlpConfig{}, 5), data, cfg);
    FAIL() << "expected divergence";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step 2"), std::string::npos) << msg;
  }
}

TEST(TrainBase, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.eta = -1;
  EXPECT_THROW(train_base(init_params(MlpConfig{}, 1), blobs(3, 1), cfg), std::invalid_argument);
  cfg.eta = 0.1;
  cfg.batch_size = 0;
  EXPECT_THROW(train_base(init_params(MlpConfig{}, 1), blobs(3, 1), cfg), std::invalid_argument);
}

TEST(FineTune, ZeroEtaIsBitIdentical) {
  const auto p = init_params(CnnConfig{}, 1);
  ImageSample img;
  img.pixels.assign(kImagePixels, 0.25);
  img.label = 4;
  EXPECT_EQ(fine_tune_single(p, img, 0.0), p);
}

TEST(FineTune, LinearModelClosedForm) {
  // One input, two classes, no bias: logits = x * [w0, w1].
  MlpConfig c;
  c.inputs = 1;
  c.hidden = 0;
  c.outputs = 2;
  c.bias = false;
  auto p = init_params(c, 1);
  p[0][0] = 0.3;
  p[0][1] = -0.2;
  VectorSample s;
  s.features = {2.0};
  s.label = 1;
  const double eta = 0.1, x = 2.0;
  const double z0 = x * 0.3, z1 = x * -0.2;
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  const double p1 = 1.0 - p0;
  const auto q = fine_tune_single(p, s, eta);
  EXPECT_NEAR(q[0][0], 0.3 - eta * x * p0, 1e-15);
  EXPECT_NEAR(q[0][1], -0.2 - eta * x * (p1 - 1.0), 1e-15);
}

TEST(FineTune, SmallStepLowersOwnLoss) {
  const auto p = init_params(MlpConfig{}, 9);
  for (const auto& s : blobs(6, 9)) {
    const auto q = fine_tune_single(p, s, 1e-3);
    EXPECT_LT(sample_loss(q, s), sample_loss(p, s));
  }
}

TEST(FineTune, DoesNotMutateBase) {
  const auto p = init_params(MlpConfig{}, 10);
  const auto copy = p;
  (void)fine_tune_single(p, blobs(1, 10)[0], 0.5);
  EXPECT_EQ(p, copy);
}

TEST(Sweep, VanishingGridHasNoPlateau) {
  const auto p = init_params(CnnConfig{}, 1);
  std::vector<Sample> probes;
  for (int k = 0; k < 3; ++k) {
    ImageSample img;
    img.pixels.assign(kImagePixels, 0.1 * (k + 1));
    img.label = k;
    img.id = "p" + std::to_string(k);
    probes.push_back(img);
  }
  const std::vector<double> grid{1e-30, 1e-30 * 1.0000001, 1e-30 * 1.0000002};
  SweepOptions so;
  so.repeats = 1;
  const auto r = lr_sweep(p, probes, grid, so);
  EXPECT_TRUE(r.no_plateau());
  for (const auto& pt : r.points) {
    EXPECT_TRUE(pt.sub_signal);
    EXPECT_FALSE(pt.selected);
    EXPECT_LT(pt.mean_abs_eif, 1e-20);
  }
}

TEST(Sweep, SmallStepResponseIsMonotoneOnToyLm) {
  const auto p = init_params(small_lm(), 2);
  std::vector<Sample> probes{make_text_sample("a klar is a pim"), make_text_sample("all pims have a jon"),
                             make_text_sample("a klar has a jon")};
  const std::vector<double> grid{1e-9, 1e-6, 1e-1};
  SweepOptions so;
  so.repeats = 2;
  const auto r = lr_sweep(p, probes, grid, so);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_LE(r.points[0].mean_abs_eif, r.points[1].mean_abs_eif);
}

TEST(Sweep, SelectsFirstQualifyingPointAndWritesCsv) {
  const auto p = init_params(MlpConfig{}, 3);
  const auto probes = blobs(6, 3);
  const std::vector<double> grid{1e-9, 1e-7, 1e-5, 1e-3};
  const auto r = lr_sweep(p, probes, grid);
  ASSERT_TRUE(r.selected_eta.has_value());
  // The floor is 10x the smallest-eta response, which a 100x larger step clears.
  EXPECT_DOUBLE_EQ(*r.selected_eta, 1e-7);
  EXPECT_TRUE(r.points[0].sub_signal);
  const auto csv = sweep_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "eta,mean_abs_eif,cv,selected");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Sweep, RejectsBadGrid) {
  const auto p = init_params(MlpConfig{}, 1);
  const auto probes = blobs(3, 1);
  EXPECT_THROW(lr_sweep(p, probes, std::vector<double>{1e-3, 1e-4, 1e-2}), std::invalid_argument);
  EXPECT_THROW(lr_sweep(p, probes, std::vector<double>{1e-3, 1e-2}), std::invalid_argument);
}
