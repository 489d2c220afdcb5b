#pragma once

#include "eif/samples.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eif {

struct IdxError : std::runtime_error {
  enum class Kind { io, bad_magic, truncated, count_mismatch, bad_dims };
  Kind kind;
  IdxError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

struct IdxDataset {
  std::vector<std::uint8_t> images; // count * 784 bytes
  std::vector<std::uint8_t> labels;
  std::string source;
  std::string checksum; // sha256 over images then labels
  std::size_t size() const { return labels.size(); }
  ImageSample sample(std::size_t k, ImageSource src, std::string id = {}) const;
};

IdxDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                     std::span<const std::uint8_t> label_bytes, std::string source = {});
IdxDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

std::vector<std::uint8_t> encode_idx_images(const IdxDataset& d);
std::vector<std::uint8_t> encode_idx_labels(const IdxDataset& d);
void write_idx(const IdxDataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels);

//! The four canonical file names inside a dataset directory.
struct IdxLayout {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
IdxLayout idx_layout(const std::filesystem::path& dir);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

//! Adds iid N(0, sigma^2) per pixel. Not clamped.
ImageSample add_gaussian_noise(const ImageSample& image, const NoiseSpec& spec);

//! per_digit images of each digit 0..9 (chosen by seed), each replicated at
//! every noise level; the list is noise-major. Label d keeps class index d.
std::vector<ImageSample> build_cross_domain_set(const IdxDataset& mnist, std::size_t per_digit,
                                                std::span<const NoiseSpec> noise_levels,
                                                std::uint64_t seed);

//! Samples [offset, offset + count) in file order.
std::vector<ImageSample> take_samples(const IdxDataset& d, std::size_t offset, std::size_t count,
                                      ImageSource src);

// ---- procedural stand-ins used when the real files are absent -----------------

//! Ten stroke-drawn digit classes with random affine jitter and stroke width.
IdxDataset synthetic_digits(std::size_t count, std::uint64_t seed);
//! Ten garment-silhouette classes in the fashion class order.
IdxDataset synthetic_fashion(std::size_t count, std::uint64_t seed);

} // namespace eif
