// eifctl: train base models, generate knowledge domains, compute EIF
// matrices, sweep learning rates, score batteries and render figures.

#include "eif/experiment.hpp"
#include "eif/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config_file;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t workers = 1;
  std::string arch;
  std::string base;
  std::size_t epochs = 0;
  double base_eta = 0.0;
  std::size_t batch = 0;
  std::string fashion;
  std::string mnist;
  std::size_t train_images = 0;
  std::size_t test_images = 0;
  std::size_t per_digit = 0;
  std::vector<double> noise;
  std::vector<std::string> domains;
  std::size_t trials = 0;
  std::size_t corpus_docs = 0;
  double eta = 0.0;
  std::vector<double> grid;
  std::size_t repeats = 0;
  std::vector<std::string> matrices;
  bool quiet = false;
};

// Options registered on one subcommand, keyed by the config field they set.
struct Bound {
  CLI::App* app;
  std::map<std::string, CLI::Option*> opts;
  bool set(const std::string& k) const {
    auto it = opts.find(k);
    return it != opts.end() && it->second->count() > 0;
  }
};

void common(Bound& b, Flags& f) {
  b.opts["config"] = b.app->add_option("-c,--config", f.config_file, "JSON config; flags override it")
                         ->check(CLI::ExistingFile);
  b.opts["seed"] = b.app->add_option("--seed", f.seed, "master seed");
  b.opts["out"] = b.app->add_option("-o,--out", f.out, "output directory (default $EIF_OUTPUT_DIR or ./eif-out)");
  b.opts["workers"] = b.app->add_option("-j,--workers", f.workers, "worker threads for EIF rows");
  b.app->add_flag("-q,--quiet", f.quiet, "no progress lines");
}

void model_flags(Bound& b, Flags& f) {
  b.opts["arch"] = b.app->add_option("--arch", f.arch, "cnn | tiny_lm");
  b.opts["base"] = b.app->add_option("--base", f.base, "base checkpoint; trained inline when absent");
  b.opts["epochs"] = b.app->add_option("--epochs", f.epochs, "base training epochs");
  b.opts["base_eta"] = b.app->add_option("--base-eta", f.base_eta, "base training learning rate");
  b.opts["batch"] = b.app->add_option("--batch", f.batch, "base training batch size");
  b.opts["fashion"] = b.app->add_option("--fashion", f.fashion, "FashionMNIST IDX directory");
  b.opts["train_images"] = b.app->add_option("--train-images", f.train_images);
  b.opts["test_images"] = b.app->add_option("--test-images", f.test_images);
  b.opts["corpus_docs"] = b.app->add_option("--corpus-docs", f.corpus_docs, "LM corpus documents");
}

void domain_flags(Bound& b, Flags& f) {
  b.opts["domains"] = b.app->add_option("--domains", f.domains, "template names")->delimiter(',');
  b.opts["trials"] = b.app->add_option("--trials", f.trials, "trials per template");
}

void image_flags(Bound& b, Flags& f) {
  b.opts["mnist"] = b.app->add_option("--mnist", f.mnist, "MNIST IDX directory");
  b.opts["per_digit"] = b.app->add_option("--per-digit", f.per_digit, "images per digit");
  b.opts["noise"] = b.app->add_option("--noise", f.noise, "noise sigmas")->delimiter(',');
}

eif::ExperimentConfig assemble(const Bound& b, const Flags& f, eif::ExperimentKind kind) {
  eif::ExperimentConfig c;
  if (b.set("config"))
    c = eif::config_from_json(eif::load_json(f.config_file));
  c.kind = kind;
  if (b.set("seed")) c.seed = f.seed;
  if (b.set("out")) c.output_dir = f.out;
  if (b.set("workers")) c.workers = f.workers;
  if (b.set("arch")) c.architecture = f.arch;
  if (b.set("base")) c.base_checkpoint = f.base;
  if (b.set("epochs")) c.epochs = f.epochs;
  if (b.set("base_eta")) c.base_eta = f.base_eta;
  if (b.set("batch")) c.batch_size = f.batch;
  if (b.set("fashion")) c.fashion_dir = f.fashion;
  if (b.set("mnist")) c.mnist_dir = f.mnist;
  if (b.set("train_images")) c.train_images = f.train_images;
  if (b.set("test_images")) c.test_images = f.test_images;
  if (b.set("per_digit")) c.per_digit = f.per_digit;
  if (b.set("noise")) c.noise_levels = f.noise;
  if (b.set("domains")) c.domains = f.domains;
  if (b.set("trials")) c.trials = f.trials;
  if (b.set("corpus_docs")) c.corpus_documents = f.corpus_docs;
  if (b.set("eta")) c.eta = f.eta;
  if (b.set("grid")) c.eta_grid = f.grid;
  if (b.set("repeats")) c.sweep_repeats = f.repeats;
  if (b.set("matrices")) c.matrices = f.matrices;
  if (kind == eif::ExperimentKind::lr_sweep && c.eta_grid.empty())
    for (double e = 1e-9; e < 2e-2; e *= 10)
      c.eta_grid.push_back(e);
  return c;
}

int render(const std::string& input, const std::string& output, const std::string& title) {
  const fs::path in(input);
  std::string svg;
  if (in.extension() == ".csv") {
    svg = eif::render_heatmap_svg(eif::load_matrix(in), title);
  } else {
    const auto j = eif::load_json(in);
    if (j.contains("histogram"))
      svg = eif::render_histogram_svg(eif::histogram_from_json(j.at("histogram")), title);
    else if (j.contains("counts"))
      svg = eif::render_histogram_svg(eif::histogram_from_json(j), title);
    else
      svg = eif::render_heatmap_svg(eif::matrix_from_json(j), title);
  }
  fs::path out = output.empty() ? fs::path(in).replace_extension(".svg") : fs::path(output);
  eif::write_file_atomic(out, svg);
  std::cout << out.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical influence functions for small networks"};
  app.require_subcommand(1);
  Flags f;

  using K = eif::ExperimentKind;
  std::vector<std::pair<Bound, K>> cmds;
  auto add = [&](const char* name, const char* help, K kind) -> Bound& {
    cmds.push_back({Bound{app.add_subcommand(name, help), {}}, kind});
    common(cmds.back().first, f);
    return cmds.back().first;
  };
  cmds.reserve(6);

  auto& train = add("train-base", "train a base model and save base.ckpt", K::train_base);
  model_flags(train, f);
  domain_flags(train, f);

  auto& gen = add("gen-domains", "write knowledge-domain trial files", K::gen_domains);
  domain_flags(gen, f);

  auto& eifc = add("eif", "fine-tuned EIF matrices (cnn: cross-domain images, tiny_lm: domains)",
                   K::cnn_eif);
  model_flags(eifc, f);
  image_flags(eifc, f);
  domain_flags(eifc, f);
  eifc.opts["eta"] = eifc.app->add_option("--eta", f.eta, "fine-tune learning rate");

  auto& prompted = add("prompted-eif", "in-context EIF matrices for the tiny LM", K::prompted_eif);
  model_flags(prompted, f);
  domain_flags(prompted, f);

  auto& sweep = add("sweep-lr", "learning-rate sweep for the fine-tune step", K::lr_sweep);
  model_flags(sweep, f);
  image_flags(sweep, f);
  domain_flags(sweep, f);
  sweep.opts["grid"] = sweep.app->add_option("--grid", f.grid, "eta grid")->delimiter(',');
  sweep.opts["repeats"] = sweep.app->add_option("--repeats", f.repeats, "jittered repeats per eta");

  auto& bat = add("battery", "score matrices against the desiderata", K::battery);
  bat.opts["matrices"] = bat.app->add_option("matrices", f.matrices, "matrix files or directories");

  std::string render_in, render_out, render_title;
  auto* rend = app.add_subcommand("render", "SVG heatmap of a matrix or histogram of a metrics file");
  rend->add_option("input", render_in, "matrix (.csv/.json) or metrics .json")
      ->required()
      ->check(CLI::ExistingFile);
  rend->add_option("-o,--out", render_out, "SVG path (default: input with .svg)");
  rend->add_option("--title", render_title);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rend->parsed())
      return render(render_in, render_out, render_title);
    for (auto& [b, kind] : cmds) {
      if (!b.app->parsed())
        continue;
      if (kind == K::train_base && !b.set("arch") && !b.set("config"))
        f.arch = "cnn";
      auto cfg = assemble(b, f, kind);
      if (b.app == prompted.app && !b.set("arch"))
        cfg.architecture = "tiny_lm";
      if (kind == K::cnn_eif && cfg.architecture == "tiny_lm")
        cfg.kind = K::lm_eif;
      eif::LogFn log;
      if (!f.quiet)
        log = [](std::string_view s) { std::cerr << s << "\n"; };
      const auto manifest = eif::run(cfg, log);
      for (const auto& o : manifest.outputs)
        std::cout << o.path << "  " << o.sha256 << "\n";
      return 0;
    }
  } catch (const eif::ConfigError& e) {
    std::cerr << "eifctl: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "eifctl: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
