#pragma once

// The CNN classifier, the tiny character-level transformer LM, and a small
// MLP/linear model used for kernel and Taylor-expansion checks.

#include "eif/autodiff.hpp"
#include "eif/samples.hpp"
#include "eif/tokenizer.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eif {

enum class Architecture { cnn, tiny_lm, mlp };

std::string_view to_string(Architecture a);
Architecture architecture_from_string(std::string_view s);

//! conv(1->c1,3x3) relu pool2 conv(c1->c2,3x3) relu pool2 dense(->hidden) relu dense(->classes)
struct CnnConfig {
  std::size_t conv1 = 16;
  std::size_t conv2 = 32;
  std::size_t hidden = 128;
  std::size_t classes = 10;
  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

//! Pre-norm decoder-only transformer with learned positional embeddings.
struct LmConfig {
  std::size_t vocab = CharTokenizer::vocab_size;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 512;
  std::size_t context = 768;
  friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

//! inputs -> tanh(hidden) -> outputs; hidden == 0 gives a linear model.
struct MlpConfig {
  std::size_t inputs = 4;
  std::size_t hidden = 16;
  std::size_t outputs = 3;
  bool bias = true;
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

using ModelConfig = std::variant<CnnConfig, LmConfig, MlpConfig>;

Architecture architecture_of(const ModelConfig& cfg);

//! Hyperparameters as ordered key/value text (checkpoint header form).
std::map<std::string, std::string> config_to_kv(const ModelConfig& cfg);
ModelConfig config_from_kv(Architecture arch, const std::map<std::string, std::string>& kv);

struct ParamSpec {
  std::string name;
  Shape shape;
  enum class Init { normal, zeros, ones } init = Init::normal;
};

//! Ordered parameter names and shapes implied by the hyperparameters alone.
std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg);
std::size_t parameter_count(const ModelConfig& cfg);

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

class ModelParams {
public:
  //! Validates names and shapes against parameter_layout(cfg).
  ModelParams(ModelConfig cfg, std::vector<NamedTensor> tensors);

  Architecture architecture() const { return architecture_of(config_); }
  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  const Tensor& operator[](std::size_t i) const { return tensors_[i].value; }
  Tensor& operator[](std::size_t i) { return tensors_[i].value; }
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  std::size_t parameter_count() const;

  //! SHA-256 (hex) of the checkpoint serialization.
  std::string checksum() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
  ModelConfig config_;
  std::vector<NamedTensor> tensors_;
};

//! He-normal weights for the CNN, normal(0, 0.02) otherwise; zero biases, unit
//! layer-norm gains; fixed by seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// ---- forward passes on a tape ----------------------------------------------

std::vector<Var> bind_params(Tape& tape, const ModelParams& params, bool requires_grad);

//! Logits: CNN/MLP [N, classes] for a batch; LM [T, vocab] for one sequence.
Var cnn_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const ImageSample* const> batch);
Var mlp_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const VectorSample* const> batch);
Var lm_logits(Tape& tape, const ModelParams& params, std::span<const Var> p,
              std::span<const int> input_ids);

//! Mean per-sample loss over a homogeneous batch matching the architecture.
Var batch_loss(Tape& tape, const ModelParams& params, std::span<const Var> p,
               std::span<const Sample* const> batch);

// ---- gradient-free evaluation -----------------------------------------------

std::vector<double> cnn_forward(const ModelParams& params, const ImageSample& image);
double classifier_loss(const ModelParams& params, const ImageSample& image);
//! -(1/N) sum log P(t_i | context, t_<i) over the N target tokens.
double lm_sequence_loss(const ModelParams& params, const TextSample& sample);
double sample_loss(const ModelParams& params, const Sample& sample);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads; // aligned with params.tensors()
};

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const Sample* const> batch);
LossAndGrad loss_and_grad(const ModelParams& params, const Sample& sample);

//! Throws std::invalid_argument unless the sample kind fits the architecture.
void check_sample_fits(const ModelParams& params, const Sample& sample);

// ---- checkpoint file ---------------------------------------------------------

std::string serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

} // namespace eif
