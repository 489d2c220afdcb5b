#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace eif {

enum class ExperimentKind { cnn_eif, lm_eif, prompted_eif, lr_sweep, battery, gen_domains, train_base };
std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::gen_domains;
  std::uint64_t seed = 0; // master seed; modules draw named substreams
  std::string output_dir;
  std::size_t workers = 1;

  // models
  std::string architecture = "cnn"; // train_base: cnn | tiny_lm
  std::string base_checkpoint;      // eif / sweep; empty = train inline
  std::optional<std::size_t> epochs; // default 5 (cnn), 1 (tiny_lm)
  std::optional<double> base_eta; // default 0.03 (cnn), 0.05 (tiny_lm)
  std::optional<std::size_t> batch_size; // default 64 (cnn), 8 (tiny_lm)

  // images
  std::string fashion_dir; // empty = procedural stand-in
  std::string mnist_dir;
  std::size_t train_images = 10000;
  std::size_t test_images = 1000;
  std::size_t per_digit = 1;
  std::vector<double> noise_levels{0.0, 0.5, 1.0};

  // text
  std::vector<std::string> domains{"belongs_to", "chain_induces", "transitivity", "squares"};
  std::size_t trials = 10;
  std::size_t corpus_documents = 20000;

  // influence
  std::optional<double> eta;   // fine-tune step; default 1e-3 (cnn), 1e-4 (tiny_lm)
  std::vector<double> eta_grid; // lr_sweep
  std::size_t sweep_repeats = 3;
  std::vector<std::string> matrices; // battery inputs

  //! Every problem found, empty when valid.
  std::vector<std::string> problems() const;
};

struct ConfigError : std::invalid_argument {
  std::vector<std::string> problems;
  explicit ConfigError(std::vector<std::string> p);
};

nlohmann::json to_json(const ExperimentConfig& c);
//! Unknown keys are reported as problems; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct ArtifactRecord {
  std::string path; // relative to the output directory
  std::string sha256;
};

struct RunManifest {
  nlohmann::json config;
  std::string version;
  std::vector<ArtifactRecord> inputs;
  std::vector<ArtifactRecord> outputs;
  std::map<std::string, double> timings; // seconds per stage
};

nlohmann::json to_json(const RunManifest& m);

//! Recomputes every output checksum; returns the paths that disagree.
std::vector<std::string> verify_manifest(const std::string& output_dir);

using LogFn = std::function<void(std::string_view)>;

//! Validates, runs, writes artifacts and manifest.json under the output
//! directory (default: $EIF_OUTPUT_DIR, else ./eif-out).
RunManifest run(ExperimentConfig config, const LogFn& log = {});

std::string default_output_dir();

} // namespace eif
