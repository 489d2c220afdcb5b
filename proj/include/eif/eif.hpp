#pragma once

// Pairwise empirical influence: M[i][j] = L_{after one SGD step on i}(j) - L_base(j).
// Negative entries mean fine-tuning on i made j more likely (facilitation).

#include "eif/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eif {

enum class Condition { fine_tuned, prompted };

std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view s);

//! Row-major n x n reals.
class SquareMatrix {
public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), v_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }
  SquareMatrix transposed() const;

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

//! Per-sample manifest entry carried alongside a matrix.
struct SampleInfo {
  std::string id;
  std::string role;  // "training" / "evaluation"; empty for images
  std::string label; // desideratum label; empty when none
  std::optional<std::size_t> negates;
  int cls = -1;      // class label for image/vector samples
  double sigma = 0.0;
  std::string group; // underlying clean sample for noisy images
  friend bool operator==(const SampleInfo&, const SampleInfo&) = default;
};

SampleInfo describe(const Sample& s);

struct EifMatrix {
  SquareMatrix values;
  std::vector<std::uint8_t> mask; // 1 = measured, 0 = missing (never imputed)
  std::vector<SampleInfo> manifest;
  Condition condition = Condition::fine_tuned;
  double eta = 0.0;
  std::string architecture;
  std::string base_checksum;
  std::string domain;
  std::uint64_t seed = 0;
  std::string separator; // prompt separator, prompted condition only

  std::size_t size() const { return values.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
  bool measured(std::size_t i, std::size_t j) const { return mask[i * size() + j] != 0; }
  std::size_t missing_count() const;

  //! Same matrix with rows, columns and manifest reordered: new k = old perm[k].
  EifMatrix permuted(std::span<const std::size_t> perm) const;
};

struct EngineOptions {
  std::size_t workers = 1;
  //! Test hook applied to every evaluated loss (baseline included).
  std::function<double(double)> loss_shim;
};

//! One fine-tune per row on a clone of `base`, evaluated on every sample.
//! Throws std::runtime_error naming (i, j) if any loss is non-finite.
EifMatrix compute_eif_matrix(const ModelParams& base, std::span<const Sample> samples, double eta,
                             const EngineOptions& opts = {});

struct PromptOptions {
  std::string separator = "\n";
  std::size_t workers = 1;
};

//! M[i][j] = L(j | text_i + separator) - L(j | no context). Pairs that do not
//! fit the context window are masked out. An empty text_i contributes no
//! context at all.
EifMatrix compute_prompted_eif(const ModelParams& base, std::span<const TextSample> samples,
                               const PromptOptions& opts = {});

//! -eta <grad L(i), grad L(j)> at the base parameters; exactly symmetric.
SquareMatrix first_order_eif_estimate(const ModelParams& base, std::span<const Sample> samples,
                                      double eta, std::size_t workers = 1);

using ModelFactory = std::function<ModelParams(std::uint64_t seed)>;

//! Ensemble mean over initializations seed, seed+1, ... of
//! sum_k <grad f_k(x), grad f_k(x')> (trace over output logits).
double ntk_kernel(const ModelFactory& factory, const Sample& x, const Sample& x_prime,
                  std::size_t ensemble_size, std::uint64_t seed = 0);

//! Runs `job(i)` for i in [0, n) over `workers` threads; rethrows the
//! exception of the lowest failing index.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

} // namespace eif
