#pragma once

#include "eif/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eif {

struct TrainConfig {
  double eta = 0.01;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double momentum = 0.0; // heavy-ball; 0 gives plain SGD
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss; // mean minibatch loss per epoch
};

//! Called after every optimizer step.
using TrainProgress = std::function<void(std::size_t epoch, std::size_t step, double loss)>;

//! Minibatch SGD (optionally with momentum). Throws std::runtime_error naming
//! the epoch and step when a loss or gradient becomes non-finite.
TrainResult train_base(ModelParams params, std::span<const Sample> data, const TrainConfig& cfg,
                       const TrainProgress& progress = {});

//! Exactly one vanilla SGD step on one sample: params - eta * grad L(sample).
ModelParams fine_tune_single(const ModelParams& base, const Sample& sample, double eta);

// ---- learning-rate sweep -------------------------------------------------------

struct SweepOptions {
  std::size_t repeats = 3;
  //! Signal floor = signal_factor x mean |EIF| at the smallest grid value,
  //! unless `signal_floor` is given explicitly.
  double signal_factor = 10.0;
  std::optional<double> signal_floor;
  double cv_max = 0.5;
  //! Repeats r >= 1 perturb every base weight by N(0, (jitter * std(tensor))^2).
  double jitter = 1e-3;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct SweepPoint {
  double eta = 0.0;
  double mean_abs_eif = 0.0;
  double cv = 0.0;
  bool sub_signal = false;
  bool selected = false;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double signal_floor = 0.0;
  std::optional<double> selected_eta;
  bool no_plateau() const { return !selected_eta.has_value(); }
};

SweepResult lr_sweep(const ModelParams& base, std::span<const Sample> probes,
                     std::span<const double> eta_grid, const SweepOptions& opts = {});

//! Columns: eta, mean_abs_eif, cv, selected.
std::string sweep_csv(const SweepResult& result);

} // namespace eif
