#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "echopipe/augment.hpp"
#include "echopipe/evaluate.hpp"
#include "echopipe/explain.hpp"
#include "echopipe/network.hpp"
#include "echopipe/phantom.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/sampling.hpp"
#include "echopipe/train.hpp"

namespace echopipe {

using Json = nlohmann::ordered_json;

/// Everything needed to reproduce a run. The global seed feeds the phantom
/// generator and training; the model's input shape and class count follow from
/// the preprocess, clips and eval sections.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "echopipe_out";
  PhantomConfig phantom;
  PreprocessConfig preprocess;
  AugmentConfig augment;
  ClipConfig clips;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  GradCamConfig explain;

  /// Copies the derived fields (seeds, model input shape, class count) into place.
  void resolve();
  void validate() const;
};

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

Json to_json(const RunConfig& c);
/// Starts from defaults and overrides the keys present; unknown keys throw ConfigError.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& c, const std::filesystem::path& path);

/// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const Json& j);

}  // namespace echopipe
