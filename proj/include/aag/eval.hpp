#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aag/data.hpp"
#include "aag/model.hpp"
#include "aag/ops.hpp"
#include "aag/optim.hpp"

namespace aag {

// Train-set embeddings under the deterministic eval transform (standardize
// only, no augmentation). Immutable once built; queries may run concurrently.
struct FeatureBank {
  MatX<float> features;          // m x d, rows unit-norm
  std::vector<int> labels;       // m entries
  int num_classes = 0;
  double tau = 0.1;

  std::int64_t size() const { return features.rows(); }
};

struct EvalResult {
  double top1_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::int64_t num_evaluated = 0;
};

nlohmann::json eval_result_to_json(const EvalResult& r);

// Frozen forward pass over a list of images, done in mini-batches.
// embeddings: n x embed_dim (unit rows). penultimate: n x penultimate_dim.
struct EncodedFeatures {
  MatX<float> embeddings;
  MatX<float> penultimate;
};
EncodedFeatures encode_features(const Encoder<float>& encoder, std::span<const Image> images,
                                const ChannelStats& stats, std::int64_t batch_size = 128);

FeatureBank build_feature_bank(const Encoder<float>& encoder, const LabeledDataset& train,
                               const ChannelStats& stats, double tau = 0.1,
                               std::int64_t batch_size = 128);

// Top-k cosine neighbors; class score is the sum of exp(s/tau) over the
// neighbors of that class. Ties go to the smallest class index.
int knn_predict(const FeatureBank& bank, const Eigen::Ref<const Eigen::RowVectorXf>& query, int k);

EvalResult knn_evaluate(const Encoder<float>& encoder, const LabeledDataset& train,
                        const LabeledDataset& test, const ChannelStats& stats, int k = 200,
                        double tau = 0.1, std::int64_t batch_size = 128);

// Single affine layer + softmax cross-entropy on frozen penultimate features.
// Adam under a cosine schedule; the encoder is never updated.
EvalResult linear_evaluate(const Encoder<float>& encoder, const LabeledDataset& train,
                           const LabeledDataset& test, const ChannelStats& stats,
                           const AdamConfig& adam = {}, int epochs = 50,
                           std::int64_t batch_size = 128, std::uint64_t seed = 0);

// Same training loop on caller-supplied feature matrices (test seam).
EvalResult linear_probe(const MatX<float>& train_features, const std::vector<int>& train_labels,
                        const MatX<float>& test_features, const std::vector<int>& test_labels,
                        int num_classes, const AdamConfig& adam = {}, int epochs = 50,
                        std::int64_t batch_size = 128, std::uint64_t seed = 0);

}  // namespace aag
