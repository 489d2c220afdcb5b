#include "eif/models.hpp"

#include "eif/hashing.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace eif {

// ---- samples ------------------------------------------------------------------

std::string_view to_string(ImageSource s) {
  switch (s) {
  case ImageSource::fashion: return "fashion";
  case ImageSource::mnist: return "mnist";
  case ImageSource::mnist_noisy: return "mnist_noisy";
  }
  return "?";
}

std::string_view to_string(SampleRole r) {
  return r == SampleRole::training ? "training" : "evaluation";
}

std::string_view to_string(Desideratum d) {
  switch (d) {
  case Desideratum::expected_implication: return "expected-implication";
  case Desideratum::forbidden_reversal: return "forbidden-reversal";
  case Desideratum::negation: return "negation";
  case Desideratum::hedge: return "hedge";
  case Desideratum::out_of_domain: return "out-of-domain";
  }
  return "?";
}

Desideratum desideratum_from_string(std::string_view s) {
  for (auto d : {Desideratum::expected_implication, Desideratum::forbidden_reversal,
                 Desideratum::negation, Desideratum::hedge, Desideratum::out_of_domain})
    if (to_string(d) == s)
      return d;
  throw std::invalid_argument("unknown desideratum label '" + std::string(s) + "'");
}

SampleRole role_from_string(std::string_view s) {
  if (s == "training")
    return SampleRole::training;
  if (s == "evaluation")
    return SampleRole::evaluation;
  throw std::invalid_argument("unknown sample role '" + std::string(s) + "'");
}

const std::string& sample_id(const Sample& s) {
  return std::visit([](const auto& v) -> const std::string& { return v.id; }, s);
}

TextSample make_text_sample(std::string text, std::string id) {
  TextSample s;
  s.target = CharTokenizer::encode(text);
  s.text = std::move(text);
  s.id = std::move(id);
  return s;
}

// ---- configuration ------------------------------------------------------------

std::string_view to_string(Architecture a) {
  switch (a) {
  case Architecture::cnn: return "cnn";
  case Architecture::tiny_lm: return "tiny_lm";
  case Architecture::mlp: return "mlp";
  }
  return "?";
}

Architecture architecture_from_string(std::string_view s) {
  if (s == "cnn")
    return Architecture::cnn;
  if (s == "tiny_lm")
    return Architecture::tiny_lm;
  if (s == "mlp")
    return Architecture::mlp;
  throw std::invalid_argument("unknown architecture '" + std::string(s) + "'");
}

Architecture architecture_of(const ModelConfig& cfg) {
  return static_cast<Architecture>(cfg.index());
}

std::map<std::string, std::string> config_to_kv(const ModelConfig& cfg) {
  std::map<std::string, std::string> kv;
  auto put = [&](const char* k, std::size_t v) { kv[k] = std::to_string(v); };
  if (auto* c = std::get_if<CnnConfig>(&cfg)) {
    put("conv1", c->conv1);
    put("conv2", c->conv2);
    put("hidden", c->hidden);
    put("classes", c->classes);
  } else if (auto* l = std::get_if<LmConfig>(&cfg)) {
    put("vocab", l->vocab);
    put("layers", l->layers);
    put("heads", l->heads);
    put("d_model", l->d_model);
    put("d_ff", l->d_ff);
    put("context", l->context);
  } else {
    const auto& m = std::get<MlpConfig>(cfg);
    put("inputs", m.inputs);
    put("hidden", m.hidden);
    put("outputs", m.outputs);
    put("bias", m.bias ? 1 : 0);
  }
  return kv;
}

ModelConfig config_from_kv(Architecture arch, const std::map<std::string, std::string>& kv) {
  auto get = [&](const char* k) -> std::size_t {
    auto it = kv.find(k);
    if (it == kv.end())
      throw std::invalid_argument(std::string("model config: missing key '") + k + "'");
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(it->second, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != it->second.size())
      throw std::invalid_argument(std::string("model config: bad value for '") + k + "': " +
                                  it->second);
    return static_cast<std::size_t>(v);
  };
  switch (arch) {
  case Architecture::cnn:
    return CnnConfig{get("conv1"), get("conv2"), get("hidden"), get("classes")};
  case Architecture::tiny_lm:
    return LmConfig{get("vocab"), get("layers"), get("heads"), get("d_model"), get("d_ff"),
                    get("context")};
  case Architecture::mlp:
    return MlpConfig{get("inputs"), get("hidden"), get("outputs"), get("bias") != 0};
  }
  throw std::invalid_argument("model config: bad architecture");
}

namespace {

constexpr std::size_t kLmPerLayer = 16;

// Flattened extent after the two conv/pool stages of the CNN.
std::size_t cnn_flat(const CnnConfig& c) {
  std::size_t side = kImageSide;
  side = (side - 2) / 2;
  side = (side - 2) / 2;
  return c.conv2 * side * side;
}

} // namespace

std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
  using I = ParamSpec::Init;
  std::vector<ParamSpec> out;
  if (auto* c = std::get_if<CnnConfig>(&cfg)) {
    out.push_back({"conv1.weight", {c->conv1, 1, 3, 3}, I::normal});
    out.push_back({"conv1.bias", {c->conv1}, I::zeros});
    out.push_back({"conv2.weight", {c->conv2, c->conv1, 3, 3}, I::normal});
    out.push_back({"conv2.bias", {c->conv2}, I::zeros});
    out.push_back({"fc1.weight", {cnn_flat(*c), c->hidden}, I::normal});
    out.push_back({"fc1.bias", {c->hidden}, I::zeros});
    out.push_back({"fc2.weight", {c->hidden, c->classes}, I::normal});
    out.push_back({"fc2.bias", {c->classes}, I::zeros});
  } else if (auto* l = std::get_if<LmConfig>(&cfg)) {
    if (l->heads == 0 || l->d_model % l->heads != 0)
      throw std::invalid_argument("tiny_lm: d_model must be divisible by heads");
    const auto D = l->d_model, F = l->d_ff;
    out.push_back({"tok_emb", {l->vocab, D}, I::normal});
    out.push_back({"pos_emb", {l->context, D}, I::normal});
    for (std::size_t i = 0; i < l->layers; ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      out.push_back({p + "ln1.gain", {D}, I::ones});
      out.push_back({p + "ln1.bias", {D}, I::zeros});
      for (const char* w : {"q", "k", "v", "o"}) {
        out.push_back({p + "attn.w" + w, {D, D}, I::normal});
        out.push_back({p + "attn.b" + w, {D}, I::zeros});
      }
      out.push_back({p + "ln2.gain", {D}, I::ones});
      out.push_back({p + "ln2.bias", {D}, I::zeros});
      out.push_back({p + "mlp.w1", {D, F}, I::normal});
      out.push_back({p + "mlp.b1", {F}, I::zeros});
      out.push_back({p + "mlp.w2", {F, D}, I::normal});
      out.push_back({p + "mlp.b2", {D}, I::zeros});
    }
    out.push_back({"ln_f.gain", {D}, I::ones});
    out.push_back({"ln_f.bias", {D}, I::zeros});
    out.push_back({"head.weight", {D, l->vocab}, I::normal});
    out.push_back({"head.bias", {l->vocab}, I::zeros});
  } else {
    const auto& m = std::get<MlpConfig>(cfg);
    if (m.hidden == 0) {
      out.push_back({"fc.weight", {m.inputs, m.outputs}, I::normal});
      if (m.bias)
        out.push_back({"fc.bias", {m.outputs}, I::zeros});
    } else {
      out.push_back({"fc1.weight", {m.inputs, m.hidden}, I::normal});
      if (m.bias)
        out.push_back({"fc1.bias", {m.hidden}, I::zeros});
      out.push_back({"fc2.weight", {m.hidden, m.outputs}, I::normal});
      if (m.bias)
        out.push_back({"fc2.bias", {m.outputs}, I::zeros});
    }
  }
  return out;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : parameter_layout(cfg))
    n += shape_numel(s.shape);
  return n;
}

ModelParams::ModelParams(ModelConfig cfg, std::vector<NamedTensor> tensors)
    : config_(std::move(cfg)), tensors_(std::move(tensors)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != tensors_.size())
    throw std::invalid_argument("ModelParams: expected " + std::to_string(layout.size()) +
                                " tensors, got " + std::to_string(tensors_.size()));
  std::set<std::string> seen;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!seen.insert(tensors_[i].name).second)
      throw std::invalid_argument("ModelParams: duplicate tensor name " + tensors_[i].name);
    if (tensors_[i].name != layout[i].name || tensors_[i].value.shape() != layout[i].shape)
      throw std::invalid_argument("ModelParams: tensor " + std::to_string(i) + " is " +
                                  tensors_[i].name + shape_str(tensors_[i].value.shape()) +
                                  ", expected " + layout[i].name + shape_str(layout[i].shape));
  }
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name)
      return t.value;
  throw std::out_of_range("ModelParams: no tensor named " + std::string(name));
}

Tensor& ModelParams::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_)
    n += t.value.numel();
  return n;
}

std::string ModelParams::checksum() const { return sha256_hex(serialize_checkpoint(*this)); }

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool relu_net = std::holds_alternative<CnnConfig>(cfg);
  std::vector<NamedTensor> tensors;
  for (const auto& spec : parameter_layout(cfg)) {
    Tensor t(spec.shape, spec.init == ParamSpec::Init::ones ? 1.0 : 0.0);
    // He scaling for the ReLU classifier; 0.02 elsewhere.
    double sd = 0.02;
    if (relu_net && spec.init == ParamSpec::Init::normal) {
      const std::size_t fan_in = spec.shape.size() == 4
                                     ? spec.shape[1] * spec.shape[2] * spec.shape[3]
                                     : spec.shape[0];
      sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    }
    std::normal_distribution<double> normal(0.0, sd);
    if (spec.init == ParamSpec::Init::normal)
      for (auto& v : t.data())
        v = normal(rng);
    tensors.push_back({spec.name, std::move(t)});
  }
  return ModelParams(cfg, std::move(tensors));
}

// ---- forward ------------------------------------------------------------------

std::vector<Var> bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& t : params.tensors())
    vars.push_back(tape.leaf(t.value, requires_grad));
  return vars;
}

Var cnn_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const ImageSample* const> batch) {
  if (params.architecture() != Architecture::cnn)
    throw std::invalid_argument("cnn_logits: model architecture is " +
                                std::string(to_string(params.architecture())));
  const auto& cfg = std::get<CnnConfig>(params.config());
  const std::size_t N = batch.size();
  Tensor x(Shape{N, 1, kImageSide, kImageSide});
  for (std::size_t n = 0; n < N; ++n) {
    if (batch[n]->pixels.size() != kImagePixels)
      throw std::invalid_argument("cnn_logits: image has " +
                                  std::to_string(batch[n]->pixels.size()) + " pixels");
    std::copy(batch[n]->pixels.begin(), batch[n]->pixels.end(), x.ptr() + n * kImagePixels);
  }
  Var h = tape.constant(std::move(x));
  h = ad::maxpool2d(ad::relu(ad::conv2d(h, p[0], &p[1])), 2);
  h = ad::maxpool2d(ad::relu(ad::conv2d(h, p[2], &p[3])), 2);
  h = ad::reshape(h, Shape{N, cnn_flat(cfg)});
  h = ad::relu(ad::add(ad::matmul(h, p[4]), p[5]));
  return ad::add(ad::matmul(h, p[6]), p[7]);
}

Var mlp_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const VectorSample* const> batch) {
  if (params.architecture() != Architecture::mlp)
    throw std::invalid_argument("mlp_logits: model architecture is " +
                                std::string(to_string(params.architecture())));
  const auto& cfg = std::get<MlpConfig>(params.config());
  const std::size_t N = batch.size();
  Tensor x(Shape{N, cfg.inputs});
  for (std::size_t n = 0; n < N; ++n) {
    if (batch[n]->features.size() != cfg.inputs)
      throw std::invalid_argument("mlp_logits: sample has " +
                                  std::to_string(batch[n]->features.size()) +
                                  " features, model expects " + std::to_string(cfg.inputs));
    std::copy(batch[n]->features.begin(), batch[n]->features.end(), x.ptr() + n * cfg.inputs);
  }
  Var h = tape.constant(std::move(x));
  std::size_t i = 0;
  auto dense = [&](Var in) {
    Var out = ad::matmul(in, p[i++]);
    if (cfg.bias)
      out = ad::add(out, p[i++]);
    return out;
  };
  if (cfg.hidden == 0)
    return dense(h);
  h = ad::tanh(dense(h));
  return dense(h);
}

Var lm_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
              std::span<const int> input_ids) {
  if (params.architecture() != Architecture::tiny_lm)
    throw std::invalid_argument("lm_logits: model architecture is " +
                                std::string(to_string(params.architecture())));
  const auto& cfg = std::get<LmConfig>(params.config());
  const std::size_t T = input_ids.size();
  if (T == 0 || T > cfg.context)
    throw std::invalid_argument("lm_logits: sequence of " + std::to_string(T) +
                                " tokens does not fit context window of " +
                                std::to_string(cfg.context));
  std::vector<int> positions(T);
  std::iota(positions.begin(), positions.end(), 0);
  Var x = ad::add(ad::embedding(p[0], input_ids), ad::embedding(p[1], positions));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const Var* w = p.data() + 2 + l * kLmPerLayer;
    Var h = ad::layer_norm(x, w[0], w[1]);
    Var q = ad::add(ad::matmul(h, w[2]), w[3]);
    Var k = ad::add(ad::matmul(h, w[4]), w[5]);
    Var v = ad::add(ad::matmul(h, w[6]), w[7]);
    Var a = ad::attention(q, k, v, cfg.heads, true);
    x = ad::add(x, ad::add(ad::matmul(a, w[8]), w[9]));
    h = ad::layer_norm(x, w[10], w[11]);
    h = ad::relu(ad::add(ad::matmul(h, w[12]), w[13]));
    x = ad::add(x, ad::add(ad::matmul(h, w[14]), w[15]));
  }
  const Var* f = p.data() + 2 + cfg.layers * kLmPerLayer;
  x = ad::layer_norm(x, f[0], f[1]);
  (void)tape;
  return ad::add(ad::matmul(x, f[2]), f[3]);
}

namespace {

Var text_loss(Tape& tape, const ModelParams& params, std::span<const Var> p,
              const TextSample& s) {
  const auto& cfg = std::get<LmConfig>(params.config());
  if (s.target.empty())
    throw std::invalid_argument("lm loss: sample '" + s.id + "' has no target tokens");
  const std::size_t len = s.context.size() + s.target.size();
  if (len > cfg.context)
    throw std::invalid_argument("lm loss: sample '" + s.id + "' needs " + std::to_string(len) +
                                " positions, context window is " + std::to_string(cfg.context));
  std::vector<int> input;
  input.reserve(len);
  input.push_back(CharTokenizer::bos);
  input.insert(input.end(), s.context.begin(), s.context.end());
  input.insert(input.end(), s.target.begin(), s.target.end() - 1);
  for (int id : input)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab)
      throw std::invalid_argument("lm loss: token id " + std::to_string(id) +
                                  " outside vocabulary");
  std::vector<std::size_t> rows(s.target.size());
  std::iota(rows.begin(), rows.end(), s.context.size());
  Var logits = lm_logits(tape, params, p, input);
  return ad::cross_entropy(logits, s.target, rows);
}

} // namespace

void check_sample_fits(const ModelParams& params, const Sample& sample) {
  const auto arch = params.architecture();
  const bool ok = (arch == Architecture::cnn && std::holds_alternative<ImageSample>(sample)) ||
                  (arch == Architecture::tiny_lm && std::holds_alternative<TextSample>(sample)) ||
                  (arch == Architecture::mlp && std::holds_alternative<VectorSample>(sample));
  if (!ok)
    throw std::invalid_argument("sample '" + sample_id(sample) + "' does not match a " +
                                std::string(to_string(arch)) + " model");
}

Var batch_loss(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const Sample* const> batch) {
  if (batch.empty())
    throw std::invalid_argument("batch_loss: empty batch");
  for (const auto* s : batch)
    check_sample_fits(params, *s);
  switch (params.architecture()) {
  case Architecture::cnn: {
    std::vector<const ImageSample*> imgs;
    std::vector<int> labels;
    for (const auto* s : batch) {
      imgs.push_back(&std::get<ImageSample>(*s));
      labels.push_back(imgs.back()->label);
    }
    return ad::cross_entropy(cnn_logits(tape, params, p, imgs), labels);
  }
  case Architecture::mlp: {
    std::vector<const VectorSample*> vs;
    std::vector<int> labels;
    for (const auto* s : batch) {
      vs.push_back(&std::get<VectorSample>(*s));
      labels.push_back(vs.back()->label);
    }
    return ad::cross_entropy(mlp_logits(tape, params, p, vs), labels);
  }
  case Architecture::tiny_lm: {
    Var total = text_loss(tape, params, p, std::get<TextSample>(*batch[0]));
    for (std::size_t i = 1; i < batch.size(); ++i)
      total = ad::add(total, text_loss(tape, params, p, std::get<TextSample>(*batch[i])));
    return batch.size() == 1 ? total : ad::scale(total, 1.0 / static_cast<double>(batch.size()));
  }
  }
  throw std::logic_error("batch_loss: unknown architecture");
}

std::vector<double> cnn_forward(const ModelParams& params, const ImageSample& image) {
  Tape tape;
  auto p = bind_params(tape, params, false);
  const ImageSample* one[] = {&image};
  const auto& v = cnn_logits(tape, params, p, one).value();
  return {v.data().begin(), v.data().end()};
}

double classifier_loss(const ModelParams& params, const ImageSample& image) {
  return sample_loss(params, Sample(image));
}

double lm_sequence_loss(const ModelParams& params, const TextSample& sample) {
  if (params.architecture() != Architecture::tiny_lm)
    throw std::invalid_argument("lm_sequence_loss: model architecture is " +
                                std::string(to_string(params.architecture())));
  Tape tape;
  auto p = bind_params(tape, params, false);
  return text_loss(tape, params, p, sample).value().item();
}

double sample_loss(const ModelParams& params, const Sample& sample) {
  if (auto* t = std::get_if<TextSample>(&sample))
    return lm_sequence_loss(params, *t);
  Tape tape;
  auto p = bind_params(tape, params, false);
  const Sample* one[] = {&sample};
  return batch_loss(tape, params, p, one).value().item();
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const Sample* const> batch) {
  Tape tape;
  auto p = bind_params(tape, params, true);
  Var loss = batch_loss(tape, params, p, batch);
  tape.backward(loss);
  LossAndGrad out;
  out.loss = loss.value().item();
  out.grads.reserve(p.size());
  for (auto v : p)
    out.grads.push_back(tape.grad(v));
  return out;
}

LossAndGrad loss_and_grad(const ModelParams& params, const Sample& sample) {
  const Sample* one[] = {&sample};
  return loss_and_grad(params, one);
}

} // namespace eif
