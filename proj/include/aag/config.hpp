#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aag/augment.hpp"
#include "aag/loss.hpp"
#include "aag/model.hpp"
#include "aag/optim.hpp"

namespace aag {

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | cifar10
  std::string path;                // cifar10 directory
  int num_classes = 10;            // synthetic
  int per_class = 50;              // synthetic train instances per class
  int test_per_class = 10;         // synthetic held-out instances per class
  int image_size = 32;
  int subset = 0;                  // cap per split, 0 = all
  std::uint64_t seed = 0;          // synthetic generation seed, independent of the run seed

  void validate() const;
};

struct EvalConfig {
  int every_epochs = 10;
  int knn_k = 200;
  double knn_tau = 0.1;

  void validate() const;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  EncoderConfig encoder;
  BasicPolicy basic;
  AuxPolicy aux;
  LossKind loss = LossKind::GntXent;
  double tau = 0.1;
  ViewScheme view_scheme = ViewScheme::ThreeView;
  SgdConfig sgd;
  ScheduleConfig schedule;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  EvalConfig eval;

  void validate() const;
};

// Strict parse: unknown keys anywhere are a ConfigError. Sizes that follow
// from the dataset (encoder input, augmentation output) are derived, not
// keys. The augment.aux section may be omitted when view_scheme is not
// three_view.
ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Dataset argument of the eval subcommands: a .json file holds a dataset
// section (self-describing synthetic sets included); any other path is taken
// as a cifar10 directory.
DatasetConfig parse_dataset_json(const nlohmann::json& j);
DatasetConfig load_dataset_file(const std::string& path);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

std::vector<std::string> preset_names();

// Table-style ablation deltas on top of a parsed config.
void apply_preset(ExperimentConfig& cfg, const std::string& name);

}  // namespace aag
