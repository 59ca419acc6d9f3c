#pragma once

#include <string>
#include <utility>

#include "aag/config.hpp"
#include "aag/data.hpp"
#include "aag/eval.hpp"

namespace aag {

struct TrainResult {
  std::string metrics_path;
  std::string checkpoint_path;
  std::string eval_history_path;
  double final_knn_accuracy = 0.0;
  std::int64_t steps = 0;
};

// Materializes {train, test} splits for either dataset kind. A positive
// subset caps each split (front slice, deterministic).
std::pair<LabeledDataset, LabeledDataset> load_dataset_pair(const DatasetConfig& cfg);

// The three-view instance-discrimination loop: per batch, two basic views
// plus the scheme's third view, all encoded by the one shared encoder, then
// a GNT-Xent (or NT-Xent) step at the scheduled learning rate. Writes
// metrics.csv (one row per step), eval_history.csv, per-eval checkpoints,
// and a final checkpoint.ckpt under cfg.output_dir.
TrainResult train_experiment(const ExperimentConfig& cfg);

}  // namespace aag
