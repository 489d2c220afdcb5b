#include "eif/image_data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace eif;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

// Two images: all zeros and all 255; labels 7 and 2.
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> fixture() {
  std::vector<std::uint8_t> img, lab;
  for (auto v : {0x803u, 2u, 28u, 28u}) {
    auto b = be32(v);
    img.insert(img.end(), b.begin(), b.end());
  }
  img.insert(img.end(), 784, 0);
  img.insert(img.end(), 784, 255);
  for (auto v : {0x801u, 2u}) {
    auto b = be32(v);
    lab.insert(lab.end(), b.begin(), b.end());
  }
  lab.push_back(7);
  lab.push_back(2);
  return {img, lab};
}

IdxError::Kind parse_kind(const std::vector<std::uint8_t>& img, const std::vector<std::uint8_t>& lab) {
  try {
    parse_idx(img, lab);
  } catch (const IdxError& e) {
    return e.kind;
  }
  ADD_FAILURE() << "no IdxError";
  return IdxError::Kind::io;
}

} // namespace

TEST(Idx, FixturePixelsExact) {
  const auto [img, lab] = fixture();
  const auto d = parse_idx(img, lab, "fixture");
  ASSERT_EQ(d.size(), 2u);
  const auto a = d.sample(0, ImageSource::mnist);
  const auto b = d.sample(1, ImageSource::mnist);
  EXPECT_EQ(a.label, 7);
  EXPECT_EQ(b.label, 2);
  for (std::size_t k = 0; k < kImagePixels; ++k) {
    EXPECT_EQ(a.pixels[k], 0.0);
    EXPECT_EQ(b.pixels[k], 1.0);
  }
  EXPECT_EQ(a.id, "mnist/0");
}

TEST(Idx, EncodeRoundTrip) {
  const auto [img, lab] = fixture();
  const auto d = parse_idx(img, lab);
  EXPECT_EQ(encode_idx_images(d), img);
  EXPECT_EQ(encode_idx_labels(d), lab);
}

TEST(Idx, DistinctErrors) {
  const auto [img, lab] = fixture();
  EXPECT_EQ(parse_kind({}, lab), IdxError::Kind::truncated);
  auto bad = img;
  bad[3] = 0x04;
  EXPECT_EQ(parse_kind(bad, lab), IdxError::Kind::bad_magic);
  auto shortimg = img;
  shortimg.resize(img.size() - 10);
  EXPECT_EQ(parse_kind(shortimg, lab), IdxError::Kind::truncated);
  auto longimg = img;
  longimg.push_back(1);
  EXPECT_EQ(parse_kind(longimg, lab), IdxError::Kind::truncated);
  auto onelab = lab;
  onelab[7] = 1;
  onelab.pop_back();
  EXPECT_EQ(parse_kind(img, onelab), IdxError::Kind::count_mismatch);
  auto dims = img;
  dims[11] = 27;
  EXPECT_EQ(parse_kind(dims, lab), IdxError::Kind::bad_dims);
}

TEST(Idx, FilesAndLayout) {
  const auto dir = std::filesystem::temp_directory_path() / "eif_idx_test";
  std::filesystem::create_directories(dir);
  const auto [img, lab] = fixture();
  const auto d = parse_idx(img, lab);
  const auto l = idx_layout(dir);
  write_idx(d, l.train_images, l.train_labels);
  const auto e = load_idx(l.train_images, l.train_labels);
  EXPECT_EQ(e.images, d.images);
  EXPECT_EQ(e.labels, d.labels);
  EXPECT_EQ(e.checksum, d.checksum);
  try {
    load_idx(dir / "missing", l.train_labels);
    FAIL();
  } catch (const IdxError& err) {
    EXPECT_EQ(err.kind, IdxError::Kind::io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Noise, ZeroSigmaIsIdentity) {
  const auto d = synthetic_digits(3, 1);
  const auto s = d.sample(0, ImageSource::mnist);
  const auto n = add_gaussian_noise(s, {0.0, 5});
  EXPECT_EQ(n.pixels, s.pixels);
  EXPECT_EQ(n.source, ImageSource::mnist_noisy);
}

TEST(Noise, UnitSigmaStatistics) {
  ImageSample s;
  s.pixels.assign(kImagePixels, 0.5);
  const auto n = add_gaussian_noise(s, {1.0, 42});
  double mean = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < kImagePixels; ++k)
    mean += n.pixels[k] - 0.5;
  mean /= kImagePixels;
  for (std::size_t k = 0; k < kImagePixels; ++k)
    sq += (n.pixels[k] - 0.5 - mean) * (n.pixels[k] - 0.5 - mean);
  const double sd = std::sqrt(sq / (kImagePixels - 1));
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(784.0));
  EXPECT_GE(sd, 0.85);
  EXPECT_LE(sd, 1.15);
  EXPECT_EQ(add_gaussian_noise(s, {1.0, 42}).pixels, n.pixels);
  EXPECT_THROW(add_gaussian_noise(s, {-1.0, 1}), std::invalid_argument);
}

TEST(CrossDomain, Counts) {
  const auto mnist = synthetic_digits(200, 3);
  const std::vector<NoiseSpec> clean{{0.0, 1}};
  EXPECT_EQ(build_cross_domain_set(mnist, 1, clean, 1).size(), 10u);
  const std::vector<NoiseSpec> three{{0.0, 1}, {0.5, 1}, {1.0, 1}};
  const auto set = build_cross_domain_set(mnist, 5, three, 1);
  ASSERT_EQ(set.size(), 150u);
  std::set<std::string> ids;
  for (const auto& s : set)
    ids.insert(s.id);
  EXPECT_EQ(ids.size(), 150u);
  // noise-major: the first 50 are clean, and the groups repeat per level
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_EQ(set[k].sigma, 0.0);
    EXPECT_EQ(set[k + 50].sigma, 0.5);
    EXPECT_EQ(set[k + 50].group, set[k].group);
    EXPECT_EQ(set[k + 100].label, set[k].label);
  }
}

TEST(CrossDomain, DigitKeepsClassIndex) {
  const auto mnist = synthetic_digits(100, 4);
  const std::vector<NoiseSpec> clean{{0.0, 1}};
  const auto set = build_cross_domain_set(mnist, 1, clean, 2);
  for (const auto& s : set)
    EXPECT_EQ(s.label, mnist.labels[std::stoul(s.id.substr(s.id.find('/') + 1))]);
  std::set<int> labels;
  for (const auto& s : set)
    labels.insert(s.label);
  EXPECT_EQ(labels.size(), 10u);
}

TEST(CrossDomain, InsufficientSamplesThrows) {
  const auto mnist = synthetic_digits(15, 4);
  const std::vector<NoiseSpec> clean{{0.0, 1}};
  EXPECT_THROW(build_cross_domain_set(mnist, 2, clean, 1), std::exception);
}

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = synthetic_fashion(50, 9), b = synthetic_fashion(50, 9);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.checksum, b.checksum);
  EXPECT_NE(synthetic_fashion(50, 10).checksum, a.checksum);
  for (std::size_t k = 0; k < 50; ++k)
    EXPECT_EQ(a.labels[k], k % 10);
  const auto s = take_samples(a, 10, 5, ImageSource::fashion);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[0].label, 0);
  EXPECT_THROW(take_samples(a, 48, 5, ImageSource::fashion), std::exception);
}
