#include "eif/eif.hpp"

#include "eif/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace eif {

std::string_view to_string(Condition c) {
  return c == Condition::fine_tuned ? "fine_tuned" : "prompted";
}

Condition condition_from_string(std::string_view s) {
  if (s == "fine_tuned")
    return Condition::fine_tuned;
  if (s == "prompted")
    return Condition::prompted;
  throw std::invalid_argument("unknown condition '" + std::string(s) + "'");
}

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> values)
    : n_(n), v_(std::move(values)) {
  if (v_.size() != n * n)
    throw std::invalid_argument("SquareMatrix: " + std::to_string(v_.size()) +
                                " values for n = " + std::to_string(n));
}

SquareMatrix SquareMatrix::transposed() const {
  SquareMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      t(j, i) = (*this)(i, j);
  return t;
}

std::size_t EifMatrix::missing_count() const {
  std::size_t n = 0;
  for (auto m : mask)
    n += m == 0;
  return n;
}

EifMatrix EifMatrix::permuted(std::span<const std::size_t> perm) const {
  const std::size_t n = size();
  if (perm.size() != n)
    throw std::invalid_argument("EifMatrix::permuted: permutation size mismatch");
  EifMatrix out = *this;
  std::vector<std::size_t> inverse(n);
  for (std::size_t k = 0; k < n; ++k)
    inverse.at(perm[k]) = k;
  for (std::size_t a = 0; a < n; ++a) {
    out.manifest[a] = manifest[perm[a]];
    if (out.manifest[a].negates)
      out.manifest[a].negates = inverse[*out.manifest[a].negates];
    for (std::size_t b = 0; b < n; ++b) {
      out.values(a, b) = values(perm[a], perm[b]);
      out.mask[a * n + b] = mask[perm[a] * n + perm[b]];
    }
  }
  return out;
}

SampleInfo describe(const Sample& s) {
  SampleInfo info;
  info.id = sample_id(s);
  if (auto* img = std::get_if<ImageSample>(&s)) {
    info.cls = img->label;
    info.sigma = img->sigma;
    info.group = img->group.empty() ? img->id : img->group;
  } else if (auto* t = std::get_if<TextSample>(&s)) {
    info.role = std::string(to_string(t->role));
    if (t->label)
      info.label = std::string(to_string(*t->label));
    info.negates = t->negates;
  } else {
    info.cls = std::get<VectorSample>(s).label;
  }
  return info;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      job(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i)
      run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++)
          run(i);
      });
    for (auto& t : pool)
      t.join();
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

namespace {

EifMatrix empty_matrix(const ModelParams& base, std::size_t n, Condition c) {
  EifMatrix m;
  m.values = SquareMatrix(n);
  m.mask.assign(n * n, 1);
  m.condition = c;
  m.architecture = std::string(to_string(base.architecture()));
  m.base_checksum = base.checksum();
  return m;
}

[[noreturn]] void non_finite(std::size_t i, std::size_t j, double v) {
  throw std::runtime_error("EIF matrix rejected: non-finite loss " + std::to_string(v) +
                           " at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
}

} // namespace

EifMatrix compute_eif_matrix(const ModelParams& base, std::span<const Sample> samples, double eta,
                             const EngineOptions& opts) {
  const std::size_t n = samples.size();
  if (n < 2)
    throw std::invalid_argument("compute_eif_matrix: need at least 2 samples, got " +
                                std::to_string(n));
  for (const auto& s : samples)
    check_sample_fits(base, s);
  auto eval = [&](const ModelParams& p, const Sample& s) {
    const double l = sample_loss(p, s);
    return opts.loss_shim ? opts.loss_shim(l) : l;
  };

  EifMatrix m = empty_matrix(base, n, Condition::fine_tuned);
  m.eta = eta;
  for (const auto& s : samples)
    m.manifest.push_back(describe(s));

  std::vector<double> baseline(n);
  parallel_for(n, opts.workers, [&](std::size_t j) {
    baseline[j] = eval(base, samples[j]);
    if (!std::isfinite(baseline[j]))
      non_finite(j, j, baseline[j]);
  });
  parallel_for(n, opts.workers, [&](std::size_t i) {
    const ModelParams tuned = fine_tune_single(base, samples[i], eta);
    for (std::size_t j = 0; j < n; ++j) {
      const double l = eval(tuned, samples[j]);
      if (!std::isfinite(l))
        non_finite(i, j, l);
      m.values(i, j) = l - baseline[j];
    }
  });
  return m;
}

EifMatrix compute_prompted_eif(const ModelParams& base, std::span<const TextSample> samples,
                               const PromptOptions& opts) {
  if (base.architecture() != Architecture::tiny_lm)
    throw std::invalid_argument("compute_prompted_eif: needs a language model");
  const std::size_t n = samples.size();
  if (n < 2)
    throw std::invalid_argument("compute_prompted_eif: need at least 2 samples");
  const auto window = std::get<LmConfig>(base.config()).context;
  const auto sep = CharTokenizer::encode(opts.separator);

  EifMatrix m = empty_matrix(base, n, Condition::prompted);
  m.separator = opts.separator;
  for (const auto& s : samples)
    m.manifest.push_back(describe(Sample(s)));

  std::vector<double> baseline(n);
  parallel_for(n, opts.workers, [&](std::size_t j) {
    baseline[j] = lm_sequence_loss(base, samples[j]);
    if (!std::isfinite(baseline[j]))
      non_finite(j, j, baseline[j]);
  });
  parallel_for(n, opts.workers, [&](std::size_t i) {
    std::vector<int> prompt;
    if (!samples[i].text.empty()) {
      prompt = CharTokenizer::encode(samples[i].text);
      prompt.insert(prompt.end(), sep.begin(), sep.end());
    }
    for (std::size_t j = 0; j < n; ++j) {
      TextSample probe = samples[j];
      probe.context.insert(probe.context.begin(), prompt.begin(), prompt.end());
      if (probe.context.size() + probe.target.size() > window) {
        m.mask[i * n + j] = 0;
        m.values(i, j) = 0.0;
        continue;
      }
      const double l = lm_sequence_loss(base, probe);
      if (!std::isfinite(l))
        non_finite(i, j, l);
      m.values(i, j) = l - baseline[j];
    }
  });
  return m;
}

namespace {

double dot(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double* x = a[t].ptr();
    const double* y = b[t].ptr();
    for (std::size_t k = 0, n = a[t].numel(); k < n; ++k)
      s += x[k] * y[k];
  }
  return s;
}

} // namespace

SquareMatrix first_order_eif_estimate(const ModelParams& base, std::span<const Sample> samples,
                                      double eta, std::size_t workers) {
  const std::size_t n = samples.size();
  if (n < 2)
    throw std::invalid_argument("first_order_eif_estimate: need at least 2 samples");
  std::vector<std::vector<Tensor>> grads(n);
  parallel_for(n, workers, [&](std::size_t i) {
    grads[i] = loss_and_grad(base, samples[i]).grads;
  });
  SquareMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = -eta * dot(grads[i], grads[j]);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

namespace {

// Gradient of each output logit of a single sample.
std::vector<std::vector<Tensor>> logit_gradients(const ModelParams& params, const Sample& s) {
  check_sample_fits(params, s);
  std::vector<std::vector<Tensor>> out;
  for (std::size_t k = 0;; ++k) {
    Tape tape;
    auto p = bind_params(tape, params, true);
    Var logits;
    if (auto* img = std::get_if<ImageSample>(&s)) {
      const ImageSample* one[] = {img};
      logits = cnn_logits(tape, params, p, one);
    } else if (auto* v = std::get_if<VectorSample>(&s)) {
      const VectorSample* one[] = {v};
      logits = mlp_logits(tape, params, p, one);
    } else {
      throw std::invalid_argument("ntk_kernel: language models are not supported");
    }
    tape.backward(ad::select(logits, k));
    std::vector<Tensor> g;
    for (auto var : p)
      g.push_back(tape.grad(var));
    out.push_back(std::move(g));
    if (k + 1 == logits.value().numel())
      break;
  }
  return out;
}

} // namespace

double ntk_kernel(const ModelFactory& factory, const Sample& x, const Sample& x_prime,
                  std::size_t ensemble_size, std::uint64_t seed) {
  if (ensemble_size == 0)
    throw std::invalid_argument("ntk_kernel: ensemble_size must be >= 1");
  double total = 0.0;
  for (std::size_t e = 0; e < ensemble_size; ++e) {
    const ModelParams params = factory(seed + e);
    const auto ga = logit_gradients(params, x);
    const auto gb = logit_gradients(params, x_prime);
    double k = 0.0;
    for (std::size_t o = 0; o < ga.size(); ++o)
      k += dot(ga[o], gb[o]);
    total += k;
  }
  return total / static_cast<double>(ensemble_size);
}

} // namespace eif
