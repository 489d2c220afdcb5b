#include "eif/experiment.hpp"

#include "eif/battery.hpp"
#include "eif/domains.hpp"
#include "eif/hashing.hpp"
#include "eif/image_data.hpp"
#include "eif/report.hpp"
#include "eif/text_format.hpp"
#include "eif/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace eif {

namespace {

constexpr ExperimentKind kKinds[] = {ExperimentKind::cnn_eif,     ExperimentKind::lm_eif,
                                     ExperimentKind::prompted_eif, ExperimentKind::lr_sweep,
                                     ExperimentKind::battery,     ExperimentKind::gen_domains,
                                     ExperimentKind::train_base};

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (const auto& s : v)
    out += (out.empty() ? "" : std::string(sep)) + s;
  return out;
}

} // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::cnn_eif: return "cnn_eif";
  case ExperimentKind::lm_eif: return "lm_eif";
  case ExperimentKind::prompted_eif: return "prompted_eif";
  case ExperimentKind::lr_sweep: return "lr_sweep";
  case ExperimentKind::battery: return "battery";
  case ExperimentKind::gen_domains: return "gen_domains";
  case ExperimentKind::train_base: return "train_base";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : kKinds)
    if (to_string(k) == s)
      return k;
  throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

ConfigError::ConfigError(std::vector<std::string> p)
    : std::invalid_argument("invalid configuration:\n  " + join(p, "\n  ")), problems(std::move(p)) {}

std::string default_output_dir() {
  if (const char* env = std::getenv("EIF_OUTPUT_DIR"); env && *env)
    return env;
  return "eif-out";
}

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> p;
  auto need_dir = [&](const std::string& key, const std::string& dir) {
    if (dir.empty())
      return;
    if (!fs::is_directory(dir)) {
      p.push_back(key + ": directory '" + dir + "' does not exist");
      return;
    }
    const auto l = idx_layout(dir);
    for (const auto& f : {l.train_images, l.train_labels, l.test_images, l.test_labels})
      if (!fs::exists(f))
        p.push_back(key + ": missing '" + f.string() + "'");
  };
  if (workers == 0)
    p.push_back("workers: must be >= 1");
  if (trials == 0)
    p.push_back("trials: must be >= 1");
  if (architecture != "cnn" && architecture != "tiny_lm")
    p.push_back("architecture: '" + architecture + "' is not cnn or tiny_lm");
  if (!base_checkpoint.empty() && !fs::is_regular_file(base_checkpoint))
    p.push_back("base_checkpoint: file '" + base_checkpoint + "' does not exist");
  if (epochs && *epochs == 0)
    p.push_back("epochs: must be >= 1");
  if (base_eta && !(*base_eta > 0.0))
    p.push_back("base_eta: must be positive");
  if (batch_size && *batch_size == 0)
    p.push_back("batch_size: must be >= 1");
  need_dir("fashion_dir", fashion_dir);
  need_dir("mnist_dir", mnist_dir);
  if (train_images == 0 || test_images == 0)
    p.push_back("train_images/test_images: must be >= 1");
  if (per_digit == 0)
    p.push_back("per_digit: must be >= 1");
  if (noise_levels.empty())
    p.push_back("noise_levels: need at least one level");
  for (double s : noise_levels)
    if (!(s >= 0.0) || !std::isfinite(s))
      p.push_back("noise_levels: " + format_real(s) + " is not a non-negative number");
  for (const auto& d : domains)
    try {
      domain_kind_from_string(d);
    } catch (const std::invalid_argument&) {
      p.push_back("domains: unknown template '" + d + "'");
    }
  const bool text = kind == ExperimentKind::lm_eif || kind == ExperimentKind::prompted_eif ||
                    kind == ExperimentKind::gen_domains;
  if (text && domains.empty())
    p.push_back("domains: need at least one template");
  if (corpus_documents == 0)
    p.push_back("corpus_documents: must be >= 1");
  if (eta && (!(*eta >= 0.0) || !std::isfinite(*eta)))
    p.push_back("eta: must be a finite non-negative number");
  if (kind == ExperimentKind::lr_sweep) {
    if (eta_grid.size() < 3)
      p.push_back("eta_grid: need at least 3 values");
    for (std::size_t k = 0; k < eta_grid.size(); ++k) {
      if (!(eta_grid[k] > 0.0))
        p.push_back("eta_grid[" + std::to_string(k) + "]: must be positive");
      if (k > 0 && !(eta_grid[k] > eta_grid[k - 1]))
        p.push_back("eta_grid[" + std::to_string(k) + "]: grid must be strictly increasing");
    }
    if (sweep_repeats == 0)
      p.push_back("sweep_repeats: must be >= 1");
    if (architecture == "tiny_lm" && domains.empty())
      p.push_back("domains: the sweep probes need a template");
  }
  if (kind == ExperimentKind::battery) {
    if (matrices.empty())
      p.push_back("matrices: battery needs at least one matrix file or directory");
    for (const auto& m : matrices)
      if (!fs::exists(m))
        p.push_back("matrices: '" + m + "' does not exist");
  }
  return p;
}

json to_json(const ExperimentConfig& c) {
  json j = {{"kind", to_string(c.kind)},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"workers", c.workers},
            {"architecture", c.architecture},
            {"base_checkpoint", c.base_checkpoint},
            {"fashion_dir", c.fashion_dir},
            {"mnist_dir", c.mnist_dir},
            {"train_images", c.train_images},
            {"test_images", c.test_images},
            {"per_digit", c.per_digit},
            {"noise_levels", c.noise_levels},
            {"domains", c.domains},
            {"trials", c.trials},
            {"corpus_documents", c.corpus_documents},
            {"eta_grid", c.eta_grid},
            {"sweep_repeats", c.sweep_repeats},
            {"matrices", c.matrices}};
  j["epochs"] = c.epochs ? json(*c.epochs) : json();
  j["base_eta"] = c.base_eta ? json(*c.base_eta) : json();
  j["batch_size"] = c.batch_size ? json(*c.batch_size) : json();
  j["eta"] = c.eta ? json(*c.eta) : json();
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  if (!j.is_object())
    throw ConfigError({"config: top level must be a JSON object"});
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "kind")
        c.kind = experiment_kind_from_string(v.get<std::string>());
      else if (key == "seed")
        c.seed = v.get<std::uint64_t>();
      else if (key == "output_dir")
        c.output_dir = v.get<std::string>();
      else if (key == "workers")
        c.workers = v.get<std::size_t>();
      else if (key == "architecture")
        c.architecture = v.get<std::string>();
      else if (key == "base_checkpoint")
        c.base_checkpoint = v.get<std::string>();
      else if (key == "epochs")
        c.epochs = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
      else if (key == "base_eta")
        c.base_eta = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (key == "batch_size")
        c.batch_size = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
      else if (key == "fashion_dir")
        c.fashion_dir = v.get<std::string>();
      else if (key == "mnist_dir")
        c.mnist_dir = v.get<std::string>();
      else if (key == "train_images")
        c.train_images = v.get<std::size_t>();
      else if (key == "test_images")
        c.test_images = v.get<std::size_t>();
      else if (key == "per_digit")
        c.per_digit = v.get<std::size_t>();
      else if (key == "noise_levels")
        c.noise_levels = v.get<std::vector<double>>();
      else if (key == "domains")
        c.domains = v.get<std::vector<std::string>>();
      else if (key == "trials")
        c.trials = v.get<std::size_t>();
      else if (key == "corpus_documents")
        c.corpus_documents = v.get<std::size_t>();
      else if (key == "eta")
        c.eta = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (key == "eta_grid")
        c.eta_grid = v.get<std::vector<double>>();
      else if (key == "sweep_repeats")
        c.sweep_repeats = v.get<std::size_t>();
      else if (key == "matrices")
        c.matrices = v.get<std::vector<std::string>>();
      else
        problems.push_back(key + ": unknown key");
    } catch (const std::exception& e) {
      problems.push_back(key + ": " + e.what());
    }
  }
  if (!problems.empty())
    throw ConfigError(std::move(problems));
  return c;
}

json to_json(const RunManifest& m) {
  auto records = [](const std::vector<ArtifactRecord>& v) {
    json a = json::array();
    for (const auto& r : v)
      a.push_back({{"path", r.path}, {"sha256", r.sha256}});
    return a;
  };
  return {{"config", m.config},
          {"version", m.version},
          {"inputs", records(m.inputs)},
          {"outputs", records(m.outputs)},
          {"timings_s", m.timings}};
}

std::vector<std::string> verify_manifest(const std::string& output_dir) {
  const json m = load_json(fs::path(output_dir) / "manifest.json");
  std::vector<std::string> bad;
  for (const auto& r : m.at("outputs")) {
    const auto path = r.at("path").get<std::string>();
    const fs::path full = fs::path(output_dir) / path;
    if (!fs::exists(full) || sha256_file(full.string()) != r.at("sha256").get<std::string>())
      bad.push_back(path);
  }
  return bad;
}

// ---- pipelines ------------------------------------------------------------------

namespace {

class Run {
public:
  Run(ExperimentConfig cfg, const LogFn& log) : cfg_(std::move(cfg)), log_(log) {
    out_ = cfg_.output_dir;
    fs::create_directories(out_);
    manifest_.config = to_json(cfg_);
    manifest_.version = EIF_VERSION;
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  std::uint64_t seed(std::string_view name) const { return substream_seed(cfg_.seed, name); }

  void say(const std::string& msg) const {
    if (log_)
      log_(msg);
  }

  void write(const std::string& rel, std::string_view content) {
    write_file_atomic(out_ / rel, content);
    manifest_.outputs.push_back({rel, sha256_hex(content)});
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  void input(const std::string& path) {
    manifest_.inputs.push_back({path, sha256_file(path)});
  }

  template <class F>
  auto timed(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      manifest_.timings[stage] += seconds_since(t0);
    } else {
      auto r = f();
      manifest_.timings[stage] += seconds_since(t0);
      return r;
    }
  }

  RunManifest finish() {
    write_file_atomic(out_ / "manifest.json", to_json(manifest_).dump(2) + "\n");
    return manifest_;
  }

private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  ExperimentConfig cfg_;
  LogFn log_;
  fs::path out_;
  RunManifest manifest_;
};

struct ImageSplit {
  std::vector<ImageSample> train, test;
};

ImageSplit fashion_split(Run& run) {
  const auto& c = run.cfg();
  if (c.fashion_dir.empty()) {
    const auto d = synthetic_fashion(c.train_images + c.test_images, run.seed("fashion_data"));
    return {take_samples(d, 0, c.train_images, ImageSource::fashion),
            take_samples(d, c.train_images, c.test_images, ImageSource::fashion)};
  }
  const auto l = idx_layout(c.fashion_dir);
  for (const auto& f : {l.train_images, l.train_labels, l.test_images, l.test_labels})
    run.input(f.string());
  const auto tr = load_idx(l.train_images, l.train_labels);
  const auto te = load_idx(l.test_images, l.test_labels);
  return {take_samples(tr, 0, std::min(c.train_images, tr.size()), ImageSource::fashion),
          take_samples(te, 0, std::min(c.test_images, te.size()), ImageSource::fashion)};
}

IdxDataset mnist_pool(Run& run) {
  const auto& c = run.cfg();
  if (c.mnist_dir.empty())
    return synthetic_digits(std::max<std::size_t>(200, 20 * c.per_digit), run.seed("mnist_data"));
  const auto l = idx_layout(c.mnist_dir);
  run.input(l.train_images.string());
  run.input(l.train_labels.string());
  return load_idx(l.train_images, l.train_labels);
}

std::vector<KnowledgeDomain> trial_domains(const ExperimentConfig& c, DomainKind k) {
  return build_trial_set(DomainTemplate::get(k), c.trials, substream_seed(c.seed, "trials"));
}

// Every word any template binds in this configuration's trials.
std::vector<std::string> all_trial_words(const ExperimentConfig& c) {
  std::vector<std::string> words;
  for (auto k : {DomainKind::belongs_to, DomainKind::chain_induces, DomainKind::transitivity,
                 DomainKind::squares, DomainKind::unrelated_control})
    for (const auto& d : trial_domains(c, k))
      for (const auto& w : d.words())
        words.push_back(w);
  return words;
}

std::string curve_csv(const std::vector<double>& loss) {
  std::string s = "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e)
    s += std::to_string(e) + "," + format_real(loss[e]) + "\n";
  return s;
}

ModelParams train_cnn(Run& run) {
  const auto& c = run.cfg();
  const auto split = run.timed("load_images", [&] { return fashion_split(run); });
  std::vector<Sample> data(split.train.begin(), split.train.end());
  TrainConfig tc;
  tc.eta = c.base_eta.value_or(0.03);
  tc.momentum = 0.9;
  tc.batch_size = c.batch_size.value_or(64);
  tc.epochs = c.epochs.value_or(5);
  tc.seed = run.seed("base_train");
  run.say("training cnn on " + std::to_string(data.size()) + " images");
  auto result = run.timed("train_base", [&] {
    return train_base(init_params(CnnConfig{}, run.seed("init")), data, tc,
                      [&](std::size_t e, std::size_t step, double loss) {
                        if (step % 50 == 0)
                          run.say("epoch " + std::to_string(e) + " step " + std::to_string(step) +
                                  " loss " + format_real(loss));
                      });
  });
  std::size_t correct = 0;
  for (const auto& s : split.test) {
    const auto logits = cnn_forward(result.params, s);
    correct += std::max_element(logits.begin(), logits.end()) - logits.begin() == s.label;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(split.test.size());
  run.say("held-out accuracy " + format_real(acc));
  run.write("base.ckpt", serialize_checkpoint(result.params));
  run.write("train_curve.csv", curve_csv(result.epoch_loss));
  run.write_json("train_summary.json",
                 {{"architecture", "cnn"},
                  {"data", c.fashion_dir.empty() ? "procedural stand-in" : c.fashion_dir},
                  {"train_images", split.train.size()},
                  {"test_images", split.test.size()},
                  {"epochs", tc.epochs},
                  {"eta", tc.eta},
                  {"momentum", tc.momentum},
                  {"batch_size", tc.batch_size},
                  {"final_loss", result.epoch_loss.back()},
                  {"test_accuracy", acc},
                  {"parameters", result.params.parameter_count()},
                  {"checksum", result.params.checksum()}});
  return result.params;
}

ModelParams train_lm(Run& run) {
  const auto& c = run.cfg();
  const auto words = all_trial_words(c);
  CorpusOptions co;
  co.documents = c.corpus_documents;
  co.seed = run.seed("corpus");
  const auto corpus = run.timed("corpus", [&] { return build_training_corpus(words, co); });
  CorpusOptions ho = co;
  ho.documents = 200;
  ho.seed = run.seed("heldout");
  const auto heldout = build_training_corpus(words, ho);
  std::vector<Sample> data(corpus.begin(), corpus.end());
  TrainConfig tc;
  tc.eta = c.base_eta.value_or(0.05);
  tc.momentum = 0.9;
  tc.batch_size = c.batch_size.value_or(8);
  tc.epochs = c.epochs.value_or(1);
  tc.seed = run.seed("base_train");
  run.say("training tiny_lm on " + std::to_string(corpus.size()) + " documents");
  auto result = run.timed("train_base", [&] {
    return train_base(init_params(LmConfig{}, run.seed("init")), data, tc,
                      [&](std::size_t e, std::size_t step, double loss) {
                        if (step % 50 == 0)
                          run.say("epoch " + std::to_string(e) + " step " + std::to_string(step) +
                                  " loss " + format_real(loss));
                      });
  });
  std::vector<double> losses(heldout.size());
  parallel_for(heldout.size(), c.workers,
               [&](std::size_t k) { losses[k] = lm_sequence_loss(result.params, heldout[k]); });
  double mean = 0.0;
  for (double l : losses)
    mean += l;
  mean /= static_cast<double>(losses.size());
  const double uniform = std::log(static_cast<double>(CharTokenizer::vocab_size));
  run.say("held-out per-token loss " + format_real(mean) + " (uniform " + format_real(uniform) + ")");
  std::size_t tokens = 0;
  for (const auto& d : corpus)
    tokens += d.target.size();
  run.write("base.ckpt", serialize_checkpoint(result.params));
  run.write("train_curve.csv", curve_csv(result.epoch_loss));
  run.write_json("train_summary.json", {{"architecture", "tiny_lm"},
                                        {"seed", c.seed},
                                        {"documents", corpus.size()},
                                        {"tokens", tokens},
                                        {"excluded_words", words.size()},
                                        {"epochs", tc.epochs},
                                        {"eta", tc.eta},
                                        {"momentum", tc.momentum},
                                        {"batch_size", tc.batch_size},
                                        {"final_loss", result.epoch_loss.back()},
                                        {"heldout_loss", mean},
                                        {"uniform_loss", uniform},
                                        {"parameters", result.params.parameter_count()},
                                        {"checksum", result.params.checksum()}});
  return result.params;
}

ModelParams base_model(Run& run, Architecture arch) {
  const auto& c = run.cfg();
  if (c.base_checkpoint.empty())
    return arch == Architecture::cnn ? train_cnn(run) : train_lm(run);
  run.input(c.base_checkpoint);
  auto p = load_checkpoint(c.base_checkpoint);
  if (p.architecture() != arch)
    throw std::invalid_argument("base_checkpoint '" + c.base_checkpoint + "' holds a " +
                                std::string(to_string(p.architecture())) + " model, expected " +
                                std::string(to_string(arch)));
  // Trial words were held out of the LM corpus under the training seed.
  const auto summary = fs::path(c.base_checkpoint).parent_path() / "train_summary.json";
  if (arch == Architecture::tiny_lm && fs::exists(summary)) {
    const auto j = load_json(summary);
    if (j.contains("seed") && j.at("seed").get<std::uint64_t>() != c.seed)
      throw std::invalid_argument("base_checkpoint was trained with seed " + j.at("seed").dump() +
                                  " but this run uses seed " + std::to_string(c.seed) +
                                  "; its corpus may contain this run's trial words");
  }
  return p;
}

void emit_matrix(Run& run, const std::string& stem, const EifMatrix& m, bool figures) {
  run.write(stem + ".csv", matrix_csv(m));
  run.write_json(stem + ".json", to_json(m));
  run.write_json(stem + ".metrics.json", matrix_metrics(m, {}, run.seed("metrics")));
  if (figures) {
    run.write(stem + ".heatmap.svg", render_heatmap_svg(m, stem));
    run.write(stem + ".histogram.svg", render_histogram_svg(diffusivity_histogram(m), stem));
  }
}

void emit_battery(Run& run, const std::vector<EifMatrix>& ms, const std::string& rel) {
  const auto report = run.timed("battery", [&] { return run_battery(ms); });
  run.write_json(rel, to_json(report));
}

std::vector<NoiseSpec> noise_specs(Run& run) {
  std::vector<NoiseSpec> out;
  for (double s : run.cfg().noise_levels)
    out.push_back({s, run.seed("noise")});
  return out;
}

void cnn_eif(Run& run) {
  const auto base = base_model(run, Architecture::cnn);
  const auto pool = run.timed("load_images", [&] { return mnist_pool(run); });
  const auto specs = noise_specs(run);
  const auto set = build_cross_domain_set(pool, run.cfg().per_digit, specs, run.seed("fine_tune"));
  std::vector<Sample> samples(set.begin(), set.end());
  EngineOptions eo;
  eo.workers = run.cfg().workers;
  const double eta = run.cfg().eta.value_or(1e-3);
  run.say("cnn EIF matrix over " + std::to_string(samples.size()) + " samples, eta " +
          format_real(eta));
  auto m = run.timed("eif", [&] { return compute_eif_matrix(base, samples, eta, eo); });
  m.domain = "cross_domain";
  m.seed = run.cfg().seed;
  emit_matrix(run, "cnn_eif", m, true);
  emit_battery(run, {m}, "battery.json");
}

void text_eif(Run& run, Condition cond) {
  const auto& c = run.cfg();
  const auto base = base_model(run, Architecture::tiny_lm);
  const double eta = c.eta.value_or(1e-4);
  std::vector<EifMatrix> all;
  for (const auto& name : c.domains) {
    const auto kind = domain_kind_from_string(name);
    for (const auto& d : trial_domains(c, kind)) {
      EifMatrix m;
      if (cond == Condition::fine_tuned) {
        std::vector<Sample> s(d.samples.begin(), d.samples.end());
        EngineOptions eo;
        eo.workers = c.workers;
        m = run.timed("eif", [&] { return compute_eif_matrix(base, s, eta, eo); });
      } else {
        PromptOptions po;
        po.workers = c.workers;
        m = run.timed("eif", [&] { return compute_prompted_eif(base, d.samples, po); });
      }
      m.domain = name;
      m.seed = d.seed;
      const std::string stem = std::string(to_string(cond)) + "/" + name + "_t" +
                               std::to_string(d.trial);
      run.say(stem + ": " + std::to_string(m.size()) + " samples, " +
              std::to_string(m.missing_count()) + " masked");
      emit_matrix(run, stem, m, d.trial == 0);
      all.push_back(std::move(m));
    }
  }
  emit_battery(run, all, std::string(to_string(cond)) + "/battery.json");
}

void gen_domains(Run& run) {
  for (const auto& name : run.cfg().domains)
    for (const auto& d : trial_domains(run.cfg(), domain_kind_from_string(name)))
      run.write_json("domains/" + name + "/trial_" + std::to_string(d.trial) + ".json", to_json(d));
}

void lr_sweep_run(Run& run) {
  const auto& c = run.cfg();
  const Architecture arch = c.architecture == "tiny_lm" ? Architecture::tiny_lm : Architecture::cnn;
  const auto base = base_model(run, arch);
  std::vector<Sample> probes;
  if (arch == Architecture::tiny_lm) {
    const auto d = trial_domains(c, domain_kind_from_string(c.domains.front())).front();
    probes.assign(d.samples.begin(), d.samples.end());
  } else {
    const auto pool = mnist_pool(run);
    const std::vector<NoiseSpec> clean{{0.0, run.seed("noise")}};
    const auto set = build_cross_domain_set(pool, 1, clean, run.seed("fine_tune"));
    probes.assign(set.begin(), set.end());
  }
  SweepOptions so;
  so.repeats = c.sweep_repeats;
  so.seed = run.seed("sweep");
  so.workers = c.workers;
  const auto r = run.timed("sweep", [&] { return lr_sweep(base, probes, c.eta_grid, so); });
  run.write("sweep.csv", sweep_csv(r));
  json points = json::array();
  for (const auto& p : r.points)
    points.push_back({{"eta", p.eta},
                      {"mean_abs_eif", p.mean_abs_eif},
                      {"cv", p.cv},
                      {"sub_signal", p.sub_signal},
                      {"selected", p.selected}});
  run.write_json("sweep.json", {{"points", points},
                                {"signal_floor", r.signal_floor},
                                {"selected_eta", r.selected_eta ? json(*r.selected_eta) : json()},
                                {"no_plateau", r.no_plateau()},
                                {"probes", probes.size()},
                                {"base_checksum", base.checksum()}});
}

void battery_run(Run& run) {
  std::vector<std::string> files;
  for (const auto& m : run.cfg().matrices) {
    if (fs::is_directory(m)) {
      std::vector<std::string> found;
      for (const auto& e : fs::recursive_directory_iterator(m)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && e.path().extension() == ".json" &&
            name.find(".metrics.") == std::string::npos && name != "battery.json" &&
            name != "manifest.json" && name != "train_summary.json" && name != "sweep.json")
          found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(m);
    }
  }
  std::vector<EifMatrix> ms;
  for (const auto& f : files) {
    run.input(f);
    ms.push_back(load_matrix(f));
  }
  emit_battery(run, ms, "battery.json");
}

} // namespace

RunManifest run(ExperimentConfig config, const LogFn& log) {
  if (config.output_dir.empty())
    config.output_dir = default_output_dir();
  if (auto p = config.problems(); !p.empty())
    throw ConfigError(std::move(p));
  Run r(std::move(config), log);
  switch (r.cfg().kind) {
  case ExperimentKind::train_base:
    if (r.cfg().architecture == "cnn")
      train_cnn(r);
    else
      train_lm(r);
    break;
  case ExperimentKind::gen_domains: gen_domains(r); break;
  case ExperimentKind::cnn_eif: cnn_eif(r); break;
  case ExperimentKind::lm_eif: text_eif(r, Condition::fine_tuned); break;
  case ExperimentKind::prompted_eif: text_eif(r, Condition::prompted); break;
  case ExperimentKind::lr_sweep: lr_sweep_run(r); break;
  case ExperimentKind::battery: battery_run(r); break;
  }
  return r.finish();
}

} // namespace eif
