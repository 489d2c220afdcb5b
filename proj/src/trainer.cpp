#include "eif/trainer.hpp"

#include "eif/eif.hpp"
#include "eif/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace eif {

namespace {

bool grads_finite(const std::vector<Tensor>& grads) {
  return std::all_of(grads.begin(), grads.end(), [](const Tensor& g) { return g.all_finite(); });
}

} // namespace

TrainResult train_base(ModelParams params, std::span<const Sample> data, const TrainConfig& cfg,
                       const TrainProgress& progress) {
  if (!(cfg.eta > 0.0))
    throw std::invalid_argument("train_base: learning rate must be positive");
  if (cfg.batch_size == 0)
    throw std::invalid_argument("train_base: batch size must be positive");
  TrainResult result{std::move(params), {}};
  if (cfg.epochs == 0)
    return result;
  if (data.empty())
    throw std::invalid_argument("train_base: empty dataset");
  for (const auto& s : data)
    check_sample_fits(result.params, s);

  ModelParams& p = result.params;
  std::vector<Tensor> velocity;
  if (cfg.momentum != 0.0)
    for (const auto& t : p.tensors())
      velocity.emplace_back(t.value.shape(), 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle)
      std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(&data[order[k]]);
      const auto lg = loss_and_grad(p, batch);
      if (!std::isfinite(lg.loss) || !grads_finite(lg.grads))
        throw std::runtime_error("train_base: non-finite loss/gradient at epoch " +
                                 std::to_string(epoch) + ", step " + std::to_string(step));
      for (std::size_t t = 0; t < p.size(); ++t) {
        auto w = p[t].data();
        const auto g = lg.grads[t].data();
        if (cfg.momentum != 0.0) {
          auto v = velocity[t].data();
          for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = cfg.momentum * v[k] + g[k];
            w[k] -= cfg.eta * v[k];
          }
        } else {
          for (std::size_t k = 0; k < w.size(); ++k)
            w[k] -= cfg.eta * g[k];
        }
      }
      epoch_total += lg.loss;
      ++batches;
      if (progress)
        progress(epoch, step, lg.loss);
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
  }
  return result;
}

ModelParams fine_tune_single(const ModelParams& base, const Sample& sample, double eta) {
  const auto lg = loss_and_grad(base, sample);
  if (!grads_finite(lg.grads))
    throw std::runtime_error("fine_tune_single: non-finite gradient for sample '" +
                             sample_id(sample) + "'");
  ModelParams out = base;
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto w = out[t].data();
    const auto g = lg.grads[t].data();
    for (std::size_t k = 0; k < w.size(); ++k)
      w[k] -= eta * g[k];
  }
  return out;
}

namespace {

ModelParams jittered(const ModelParams& base, double jitter, std::uint64_t seed) {
  ModelParams out = base;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto w = out[t].data();
    const double n = static_cast<double>(w.size());
    const double mu = std::accumulate(w.begin(), w.end(), 0.0) / n;
    double var = 0.0;
    for (double v : w)
      var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / n);
    if (sd == 0.0)
      continue;
    for (auto& v : w)
      v += jitter * sd * normal(rng);
  }
  return out;
}

} // namespace

SweepResult lr_sweep(const ModelParams& base, std::span<const Sample> probes,
                     std::span<const double> eta_grid, const SweepOptions& opts) {
  if (eta_grid.size() < 3)
    throw std::invalid_argument("lr_sweep: need at least 3 grid values");
  for (std::size_t k = 1; k < eta_grid.size(); ++k)
    if (!(eta_grid[k] > eta_grid[k - 1]))
      throw std::invalid_argument("lr_sweep: grid must be strictly increasing");
  if (opts.repeats == 0)
    throw std::invalid_argument("lr_sweep: repeats must be >= 1");

  std::vector<ModelParams> bases;
  bases.push_back(base);
  for (std::size_t r = 1; r < opts.repeats; ++r)
    bases.push_back(jittered(base, opts.jitter, opts.seed + r));

  SweepResult result;
  EngineOptions eng;
  eng.workers = opts.workers;
  for (double eta : eta_grid) {
    std::vector<EifMatrix> runs;
    for (const auto& b : bases)
      runs.push_back(compute_eif_matrix(b, probes, eta, eng));
    const std::size_t cells = runs[0].values.values().size();
    const double R = static_cast<double>(runs.size());
    double abs_total = 0.0, sd_total = 0.0, mean_abs_total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      double mu = 0.0;
      for (const auto& m : runs) {
        mu += m.values.values()[c];
        abs_total += std::abs(m.values.values()[c]);
      }
      mu /= R;
      double var = 0.0;
      for (const auto& m : runs)
        var += (m.values.values()[c] - mu) * (m.values.values()[c] - mu);
      sd_total += std::sqrt(var / R);
      mean_abs_total += std::abs(mu);
    }
    SweepPoint pt;
    pt.eta = eta;
    pt.mean_abs_eif = abs_total / (R * static_cast<double>(cells));
    pt.cv = mean_abs_total > 0.0 ? sd_total / mean_abs_total : 0.0;
    result.points.push_back(pt);
  }

  result.signal_floor = opts.signal_floor.value_or(opts.signal_factor * result.points[0].mean_abs_eif);
  for (auto& pt : result.points) {
    pt.sub_signal = !(pt.mean_abs_eif > result.signal_floor);
    if (!result.selected_eta && !pt.sub_signal && pt.cv < opts.cv_max) {
      pt.selected = true;
      result.selected_eta = pt.eta;
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "eta,mean_abs_eif,cv,selected\n";
  for (const auto& p : result.points)
    out += format_real(p.eta) + "," + format_real(p.mean_abs_eif) + "," + format_real(p.cv) + "," +
           (p.selected ? "1" : "0") + "\n";
  return out;
}

} // namespace eif
