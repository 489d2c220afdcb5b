#include "eif/gradcheck.hpp"
#include "eif/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace eif;

namespace {

ImageSample random_image(std::uint64_t seed, int label = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageSample s;
  s.pixels.resize(kImagePixels);
  for (auto& p : s.pixels)
    p = u(rng);
  s.label = label;
  s.id = "img" + std::to_string(seed);
  return s;
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

// Loss as a function of parameter tensor k alone.
TensorProgram loss_in_tensor(const ModelParams& params, std::size_t k, const Sample& s) {
  return [&params, k, &s](Tape& t, Var x) {
    auto p = bind_params(t, params, false);
    p[k] = x;
    const Sample* one[] = {&s};
    return batch_loss(t, params, p, one);
  };
}

} // namespace

TEST(Cnn, LayoutAndCount) {
  const auto layout = parameter_layout(CnnConfig{});
  ASSERT_EQ(layout.size(), 8u);
  EXPECT_EQ(layout[4].shape, (Shape{32 * 5 * 5, 128}));
  // conv1 160, conv2 4640, fc1 102528, fc2 1290
  EXPECT_EQ(parameter_count(CnnConfig{}), 160u + 4640u + 102528u + 1290u);
}

TEST(Cnn, ZeroFinalLayerGivesUniformSoftmax) {
  auto p = init_params(CnnConfig{}, 1);
  for (auto& v : p.get("fc2.weight").data())
    v = 0.0;
  const auto img = random_image(5);
  const auto logits = cnn_forward(p, img);
  double z = 0.0;
  for (double l : logits)
    z += std::exp(l);
  for (double l : logits)
    EXPECT_NEAR(std::exp(l) / z, 0.1, 1e-15);
  EXPECT_NEAR(classifier_loss(p, img), std::log(10.0), 1e-12);
}

TEST(Cnn, SameInputSameLogitsBitForBit) {
  const auto p = init_params(CnnConfig{}, 2);
  const auto img = random_image(9);
  EXPECT_EQ(cnn_forward(p, img), cnn_forward(p, img));
}

TEST(Cnn, LossMatchesRecomputationFromLogits) {
  const auto p = init_params(CnnConfig{}, 3);
  const auto img = random_image(11, 7);
  const auto logits = cnn_forward(p, img);
  double mx = logits[0];
  for (double l : logits)
    mx = std::max(mx, l);
  double z = 0.0;
  for (double l : logits)
    z += std::exp(l - mx);
  EXPECT_NEAR(classifier_loss(p, img), -(logits[7] - mx - std::log(z)), 1e-12);
}

TEST(Cnn, RejectsWrongPixelCount) {
  const auto p = init_params(CnnConfig{}, 1);
  auto img = random_image(1);
  img.pixels.resize(10);
  EXPECT_THROW(classifier_loss(p, img), std::invalid_argument);
}

TEST(Cnn, FullModelGradientMatchesFiniteDifferences) {
  const auto p = init_params(CnnConfig{}, 4);
  const Sample s = random_image(21, 2);
  for (std::size_t k = 0; k < p.size(); ++k) {
    FdOptions o;
    o.max_coords = 12;
    o.seed = k;
    EXPECT_LT(finite_difference_check(loss_in_tensor(p, k, s), p[k], 1e-4, o), 1e-4)
        << p.tensors()[k].name;
  }
}

TEST(Lm, UntrainedUniformModelHasLossLnV) {
  auto p = init_params(small_lm(), 1);
  for (auto& v : p.get("head.weight").data())
    v = 0.0;
  const auto s = make_text_sample("a klarbu is a pimjon");
  EXPECT_NEAR(lm_sequence_loss(p, s), std::log(97.0), 1e-12);
}

TEST(Lm, SingleTargetTokenLossIsNegLogProb) {
  const auto p = init_params(small_lm(), 2);
  TextSample s;
  s.context = CharTokenizer::encode("ab");
  s.target = CharTokenizer::encode("c");
  Tape t;
  auto pv = bind_params(t, p, false);
  std::vector<int> input{CharTokenizer::bos};
  input.insert(input.end(), s.context.begin(), s.context.end());
  auto logits = lm_logits(t, p, pv, input).value();
  const std::size_t V = 97, row = 2;
  double mx = -1e300, z = 0.0;
  for (std::size_t v = 0; v < V; ++v)
    mx = std::max(mx, logits[row * V + v]);
  for (std::size_t v = 0; v < V; ++v)
    z += std::exp(logits[row * V + v] - mx);
  const double logp = logits[row * V + s.target[0]] - mx - std::log(z);
  EXPECT_NEAR(lm_sequence_loss(p, s), -logp, 1e-12);
}

TEST(Lm, ConcatenationChainRule) {
  const auto p = init_params(small_lm(), 3);
  const std::string a = "kro pim", b = " jon gree";
  const auto ab = make_text_sample(a + b);
  const auto la = make_text_sample(a);
  TextSample lb;
  lb.context = CharTokenizer::encode(a);
  lb.target = CharTokenizer::encode(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  EXPECT_NEAR(lm_sequence_loss(p, ab),
              (na * lm_sequence_loss(p, la) + nb * lm_sequence_loss(p, lb)) / (na + nb), 1e-12);
}

TEST(Lm, CausalPrefixInvariance) {
  // Appending tokens must not change the logits of earlier positions.
  const auto p = init_params(small_lm(), 5);
  Tape t1, t2;
  auto p1 = bind_params(t1, p, false), p2 = bind_params(t2, p, false);
  const std::vector<int> shortin{0, 10, 20, 30}, longin{0, 10, 20, 30, 40, 50};
  const auto a = lm_logits(t1, p, p1, shortin).value();
  const auto b = lm_logits(t2, p, p2, longin).value();
  for (std::size_t k = 0; k < a.numel(); ++k)
    EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(Lm, OverflowingContextThrows) {
  const auto p = init_params(small_lm(), 1);
  EXPECT_THROW(lm_sequence_loss(p, make_text_sample(std::string(80, 'x'))), std::invalid_argument);
}

TEST(Lm, FullModelGradientMatchesFiniteDifferences) {
  const auto p = init_params(small_lm(), 6);
  TextSample ts;
  ts.context = CharTokenizer::encode("ab ");
  ts.target = CharTokenizer::encode("klar\nbu");
  const Sample s = ts;
  for (std::size_t k = 0; k < p.size(); ++k) {
    FdOptions o;
    o.max_coords = 8;
    o.seed = k;
    EXPECT_LT(finite_difference_check(loss_in_tensor(p, k, s), p[k], 1e-5, o), 1e-4)
        << p.tensors()[k].name;
  }
}

TEST(Tokenizer, RoundTripAndRejects) {
  const std::string text = "All {x}s have a y.\nNext!";
  const auto ids = CharTokenizer::encode(text);
  EXPECT_EQ(CharTokenizer::decode(ids), text);
  EXPECT_EQ(CharTokenizer::encode("\n")[0], CharTokenizer::newline);
  EXPECT_THROW(CharTokenizer::encode("caf\xc3\xa9"), std::invalid_argument);
  EXPECT_THROW(CharTokenizer::encode("tab\there"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto p = init_params(small_lm(), 8);
  const auto bytes = serialize_checkpoint(p);
  const auto q = deserialize_checkpoint(bytes);
  EXPECT_EQ(p, q);
  EXPECT_EQ(p.checksum(), q.checksum());
  const auto path = std::filesystem::temp_directory_path() / "eif_models_test.ckpt";
  save_checkpoint(p, path.string());
  EXPECT_EQ(load_checkpoint(path.string()), p);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto p = init_params(MlpConfig{}, 1);
  auto bytes = serialize_checkpoint(p);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), std::exception);
  bytes[bytes.size() - 3] ^= 0x5a;
  EXPECT_THROW(deserialize_checkpoint(bytes), std::exception);
  EXPECT_THROW(deserialize_checkpoint("not a checkpoint"), std::exception);
}

TEST(Params, LayoutIsValidated) {
  auto p = init_params(MlpConfig{}, 1);
  auto tensors = p.tensors();
  tensors[0].value = Tensor({1, 1});
  EXPECT_THROW(ModelParams(p.config(), tensors), std::invalid_argument);
  EXPECT_THROW(p.get("nope"), std::exception);
}

TEST(Params, InitIsSeedDeterministic) {
  EXPECT_EQ(init_params(CnnConfig{}, 5), init_params(CnnConfig{}, 5));
  EXPECT_NE(init_params(CnnConfig{}, 5).checksum(), init_params(CnnConfig{}, 6).checksum());
}

TEST(Params, SampleKindMustFitArchitecture) {
  const auto p = init_params(CnnConfig{}, 1);
  EXPECT_THROW(check_sample_fits(p, Sample{make_text_sample("hi")}), std::invalid_argument);
  EXPECT_NO_THROW(check_sample_fits(p, Sample{random_image(1)}));
}
