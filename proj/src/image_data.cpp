#include "eif/image_data.hpp"

#include "eif/hashing.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

namespace eif {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw IdxError(IdxError::Kind::io, "cannot open '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string dataset_checksum(const IdxDataset& d) {
  std::string bytes(d.images.begin(), d.images.end());
  bytes.append(d.labels.begin(), d.labels.end());
  return sha256_hex(bytes);
}

} // namespace

ImageSample IdxDataset::sample(std::size_t k, ImageSource src, std::string id) const {
  if (k >= size())
    throw std::out_of_range("IdxDataset::sample: index " + std::to_string(k) + " of " +
                            std::to_string(size()));
  ImageSample s;
  s.pixels.resize(kImagePixels);
  const std::uint8_t* px = images.data() + k * kImagePixels;
  for (std::size_t p = 0; p < kImagePixels; ++p)
    s.pixels[p] = px[p] / 255.0;
  s.label = labels[k];
  s.source = src;
  s.id = id.empty() ? std::string(to_string(src)) + "/" + std::to_string(k) : std::move(id);
  s.group = s.id;
  return s;
}

IdxDataset parse_idx(std::span<const std::uint8_t> ib, std::span<const std::uint8_t> lb,
                     std::string source) {
  using K = IdxError::Kind;
  if (ib.size() < 16)
    throw IdxError(K::truncated, "image file truncated: " + std::to_string(ib.size()) +
                                     " bytes, header needs 16");
  if (lb.size() < 8)
    throw IdxError(K::truncated, "label file truncated: " + std::to_string(lb.size()) +
                                     " bytes, header needs 8");
  if (read_be32(ib, 0) != kImageMagic)
    throw IdxError(K::bad_magic, "image file has magic " + hex32(read_be32(ib, 0)) +
                                     ", expected " + hex32(kImageMagic));
  if (read_be32(lb, 0) != kLabelMagic)
    throw IdxError(K::bad_magic, "label file has magic " + hex32(read_be32(lb, 0)) +
                                     ", expected " + hex32(kLabelMagic));
  const std::size_t n = read_be32(ib, 4), rows = read_be32(ib, 8), cols = read_be32(ib, 12);
  if (rows != kImageSide || cols != kImageSide)
    throw IdxError(K::bad_dims, "images are " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + ", expected 28x28");
  const std::size_t nl = read_be32(lb, 4);
  if (n != nl)
    throw IdxError(K::count_mismatch, "image count " + std::to_string(n) +
                                          " != label count " + std::to_string(nl));
  if (ib.size() != 16 + n * kImagePixels)
    throw IdxError(K::truncated, "image file holds " + std::to_string(ib.size() - 16) +
                                     " pixel bytes, header promises " +
                                     std::to_string(n * kImagePixels));
  if (lb.size() != 8 + n)
    throw IdxError(K::truncated, "label file holds " + std::to_string(lb.size() - 8) +
                                     " labels, header promises " + std::to_string(n));
  IdxDataset d;
  d.images.assign(ib.begin() + 16, ib.end());
  d.labels.assign(lb.begin() + 8, lb.end());
  for (std::size_t k = 0; k < n; ++k)
    if (d.labels[k] > 9)
      throw IdxError(K::bad_dims, "label " + std::to_string(d.labels[k]) + " at index " +
                                      std::to_string(k) + " outside 0..9");
  d.source = std::move(source);
  d.checksum = dataset_checksum(d);
  return d;
}

IdxDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  return parse_idx(ib, lb, images.string());
}

std::vector<std::uint8_t> encode_idx_images(const IdxDataset& d) {
  std::vector<std::uint8_t> out;
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  put_be32(out, kImageSide);
  put_be32(out, kImageSide);
  out.insert(out.end(), d.images.begin(), d.images.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const IdxDataset& d) {
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  out.insert(out.end(), d.labels.begin(), d.labels.end());
  return out;
}

void write_idx(const IdxDataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  auto dump = [](const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw IdxError(IdxError::Kind::io, "cannot write '" + p.string() + "'");
  };
  dump(images, encode_idx_images(d));
  dump(labels, encode_idx_labels(d));
}

IdxLayout idx_layout(const std::filesystem::path& dir) {
  return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
          dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

ImageSample add_gaussian_noise(const ImageSample& image, const NoiseSpec& spec) {
  if (spec.sigma < 0.0)
    throw std::invalid_argument("add_gaussian_noise: negative sigma");
  ImageSample out = image;
  out.source = ImageSource::mnist_noisy;
  out.sigma = spec.sigma;
  if (out.group.empty())
    out.group = image.id;
  if (spec.sigma == 0.0)
    return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  for (auto& p : out.pixels)
    p += noise(rng);
  return out;
}

std::vector<ImageSample> build_cross_domain_set(const IdxDataset& mnist, std::size_t per_digit,
                                                std::span<const NoiseSpec> noise_levels,
                                                std::uint64_t seed) {
  if (per_digit == 0)
    throw std::invalid_argument("build_cross_domain_set: per_digit must be >= 1");
  if (noise_levels.empty())
    throw std::invalid_argument("build_cross_domain_set: no noise levels");
  std::vector<std::size_t> order(mnist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> chosen;
  for (int digit = 0; digit < 10; ++digit) {
    std::size_t found = 0;
    for (std::size_t k : order) {
      if (found == per_digit)
        break;
      if (mnist.labels[k] == digit) {
        chosen.push_back(k);
        ++found;
      }
    }
    if (found < per_digit)
      throw std::invalid_argument("build_cross_domain_set: digit " + std::to_string(digit) +
                                  " has " + std::to_string(found) + " samples, need " +
                                  std::to_string(per_digit));
  }

  std::vector<ImageSample> out;
  for (const auto& level : noise_levels)
    for (std::size_t k : chosen) {
      const ImageSample clean = mnist.sample(k, ImageSource::mnist);
      NoiseSpec spec{level.sigma, substream_seed(level.seed, clean.id)};
      ImageSample s = add_gaussian_noise(clean, spec);
      s.id = clean.id + "@" + std::to_string(level.sigma).substr(0, 4);
      out.push_back(std::move(s));
    }
  return out;
}

std::vector<ImageSample> take_samples(const IdxDataset& d, std::size_t offset, std::size_t count,
                                      ImageSource src) {
  if (offset + count > d.size())
    throw std::out_of_range("take_samples: [" + std::to_string(offset) + ", " +
                            std::to_string(offset + count) + ") exceeds " +
                            std::to_string(d.size()) + " images");
  std::vector<ImageSample> out;
  out.reserve(count);
  for (std::size_t k = offset; k < offset + count; ++k)
    out.push_back(d.sample(k, src));
  return out;
}

} // namespace eif
