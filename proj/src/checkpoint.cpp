// Checkpoint container, all integers and reals little-endian:
//
//   magic "EIFCKPT\0" | u32 version | u32 len + architecture tag
//   | u32 len + hyperparameters as "key=value\n" lines | u32 tensor count
//   | per tensor: u32 name len, name, u32 rank, u64 extents, f64 values
//   | sha256 hex of everything before it

#include "eif/models.hpp"

#include "eif/hashing.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eif {

namespace {

constexpr char kMagic[8] = {'E', 'I', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T> void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_str(std::string& out, std::string_view s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <class T> T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(le<std::uint32_t>())); }
  bool done() const { return pos_ == b_.size(); }

private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n)
      throw std::runtime_error("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

} // namespace

std::string serialize_checkpoint(const ModelParams& params) {
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_str(out, to_string(params.architecture()));
  std::string kv;
  for (const auto& [k, v] : config_to_kv(params.config()))
    kv += k + "=" + v + "\n";
  put_str(out, kv);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params.tensors()) {
    put_str(out, t.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto e : t.value.shape())
      put_le<std::uint64_t>(out, e);
    for (double v : t.value.data())
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out + sha256_hex(out);
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  constexpr std::size_t kDigest = 64;
  if (bytes.size() < sizeof kMagic + kDigest)
    throw std::runtime_error("checkpoint: truncated");
  const auto body = bytes.substr(0, bytes.size() - kDigest);
  if (sha256_hex(body) != bytes.substr(body.size()))
    throw std::runtime_error("checkpoint: checksum mismatch (corrupt or truncated file)");
  bytes = body;
  Reader r(bytes);
  r.bytes(sizeof kMagic);
  const auto version = r.le<std::uint32_t>();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto arch = architecture_from_string(r.str());
  std::map<std::string, std::string> kv;
  {
    std::istringstream lines(r.str());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("checkpoint: malformed hyperparameter line '" + line + "'");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  const auto cfg = config_from_kv(arch, kv);
  const auto count = r.le<std::uint32_t>();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    const auto rank = r.le<std::uint32_t>();
    Shape shape(rank);
    for (auto& e : shape)
      e = static_cast<std::size_t>(r.le<std::uint64_t>());
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data)
      v = std::bit_cast<double>(r.le<std::uint64_t>());
    t.value = Tensor(std::move(shape), std::move(data));
    tensors.push_back(std::move(t));
  }
  if (!r.done())
    throw std::runtime_error("checkpoint: trailing bytes after last tensor");
  return ModelParams(cfg, std::move(tensors));
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("checkpoint: cannot write " + path);
  const auto bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

} // namespace eif
