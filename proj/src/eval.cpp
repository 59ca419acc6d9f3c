#include "aag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aag/rng.hpp"

namespace aag {

nlohmann::json eval_result_to_json(const EvalResult& r) {
  return nlohmann::json{{"num_evaluated", r.num_evaluated},
                        {"per_class_accuracy", r.per_class_accuracy},
                        {"top1_accuracy", r.top1_accuracy}};
}

EncodedFeatures encode_features(const Encoder<float>& encoder, std::span<const Image> images,
                                const ChannelStats& stats, std::int64_t batch_size) {
  if (batch_size < 1) throw ValueError("encode_features batch_size must be >= 1");
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  EncodedFeatures out;
  out.embeddings.resize(n, encoder.config().embed_dim);
  out.penultimate.resize(n, encoder.config().penultimate_dim());
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const std::int64_t count = std::min(batch_size, n - start);
    auto input = to_input_tensor<float>(images.subspan(static_cast<std::size_t>(start),
                                                       static_cast<std::size_t>(count)),
                                        stats);
    auto enc = encoder.encode(input);
    out.embeddings.middleRows(start, count) = to_matrix(enc.embedding);
    out.penultimate.middleRows(start, count) = to_matrix(enc.penultimate);
  }
  return out;
}

FeatureBank build_feature_bank(const Encoder<float>& encoder, const LabeledDataset& train,
                               const ChannelStats& stats, double tau, std::int64_t batch_size) {
  if (train.size() == 0) throw ValueError("feature bank needs a non-empty train set");
  if (!(tau > 0)) throw ValueError("knn tau must be > 0");
  FeatureBank bank;
  bank.features = encode_features(encoder, train.images, stats, batch_size).embeddings;
  bank.labels = train.labels;
  bank.num_classes = train.num_classes;
  bank.tau = tau;
  return bank;
}

int knn_predict(const FeatureBank& bank, const Eigen::Ref<const Eigen::RowVectorXf>& query, int k) {
  const std::int64_t m = bank.size();
  if (m == 0) throw ValueError("knn_predict on an empty bank");
  if (k < 1 || k > m) throw ValueError("knn_predict k must be in [1, bank size]");
  if (query.size() != bank.features.cols()) {
    throw DimensionError("knn_predict query dimension mismatch");
  }

  Eigen::VectorXf sims = bank.features * query.transpose();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  // Equal similarities resolve by bank index so results are order-independent
  // only up to identical rows; the class-score tie rule below handles those.
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](std::int64_t a, std::int64_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });

  std::vector<double> score(static_cast<std::size_t>(bank.num_classes), 0.0);
  for (int i = 0; i < k; ++i) {
    const std::int64_t j = idx[static_cast<std::size_t>(i)];
    const int label = bank.labels[static_cast<std::size_t>(j)];
    if (label < 0 || label >= bank.num_classes) throw ValueError("bank label out of range");
    score[static_cast<std::size_t>(label)] += std::exp(static_cast<double>(sims[j]) / bank.tau);
  }
  int best = 0;
  for (int c = 1; c < bank.num_classes; ++c) {
    if (score[static_cast<std::size_t>(c)] > score[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

namespace {

EvalResult score_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                             int num_classes) {
  EvalResult r;
  r.num_evaluated = static_cast<std::int64_t>(truth.size());
  std::vector<std::int64_t> correct(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(num_classes), 0);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++total[static_cast<std::size_t>(truth[i])];
    if (predicted[i] == truth[i]) {
      ++hits;
      ++correct[static_cast<std::size_t>(truth[i])];
    }
  }
  r.top1_accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
  r.per_class_accuracy.resize(static_cast<std::size_t>(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (total[ci] > 0) {
      r.per_class_accuracy[ci] = static_cast<double>(correct[ci]) / static_cast<double>(total[ci]);
    }
  }
  return r;
}

}  // namespace

EvalResult knn_evaluate(const Encoder<float>& encoder, const LabeledDataset& train,
                        const LabeledDataset& test, const ChannelStats& stats, int k, double tau,
                        std::int64_t batch_size) {
  FeatureBank bank = build_feature_bank(encoder, train, stats, tau, batch_size);
  const int k_eff = static_cast<int>(std::min<std::int64_t>(k, bank.size()));
  MatX<float> queries = encode_features(encoder, test.images, stats, batch_size).embeddings;
  std::vector<int> predicted(static_cast<std::size_t>(queries.rows()));
  for (std::int64_t i = 0; i < queries.rows(); ++i) {
    predicted[static_cast<std::size_t>(i)] = knn_predict(bank, queries.row(i), k_eff);
  }
  return score_predictions(predicted, test.labels, train.num_classes);
}

EvalResult linear_probe(const MatX<float>& train_features, const std::vector<int>& train_labels,
                        const MatX<float>& test_features, const std::vector<int>& test_labels,
                        int num_classes, const AdamConfig& adam, int epochs,
                        std::int64_t batch_size, std::uint64_t seed) {
  adam.validate();
  if (epochs < 1) throw ValueError("linear_probe epochs must be >= 1");
  if (batch_size < 1) throw ValueError("linear_probe batch_size must be >= 1");
  const std::int64_t n = train_features.rows();
  const std::int64_t d = train_features.cols();
  if (n == 0 || static_cast<std::size_t>(n) != train_labels.size()) {
    throw DimensionError("linear_probe train features/labels mismatch");
  }
  if (test_features.cols() != d || static_cast<std::size_t>(test_features.rows()) != test_labels.size()) {
    throw DimensionError("linear_probe test features/labels mismatch");
  }
  for (int label : train_labels) {
    if (label < 0 || label >= num_classes) throw ValueError("linear_probe train label out of range");
  }

  MatX<float> w = MatX<float>::Zero(d, num_classes);
  Eigen::RowVectorXf b = Eigen::RowVectorXf::Zero(num_classes);
  std::vector<float> mw(static_cast<std::size_t>(w.size()), 0.0f), vw(mw.size(), 0.0f);
  std::vector<float> mb(static_cast<std::size_t>(num_classes), 0.0f), vb(mb.size(), 0.0f);
  std::int64_t step_count = 0;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const std::int64_t batches_per_epoch = (n + batch_size - 1) / batch_size;  // keep the last partial batch

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 0x6c696e6561726576ULL));
    rng.shuffle(order);
    for (std::int64_t bi = 0; bi < batches_per_epoch; ++bi) {
      const std::int64_t start = bi * batch_size;
      const std::int64_t count = std::min(batch_size, n - start);
      MatX<float> x(count, d);
      std::vector<int> y(static_cast<std::size_t>(count));
      for (std::int64_t r = 0; r < count; ++r) {
        const std::int64_t src = order[static_cast<std::size_t>(start + r)];
        x.row(r) = train_features.row(src);
        y[static_cast<std::size_t>(r)] = train_labels[static_cast<std::size_t>(src)];
      }

      MatX<float> logits = (x * w).rowwise() + b;
      MatX<float> probs = logits;
      for (std::int64_t r = 0; r < count; ++r) {
        const float row_max = logits.row(r).maxCoeff();
        probs.row(r) = (logits.row(r).array() - row_max).exp();
        probs.row(r) /= probs.row(r).sum();
      }
      for (std::int64_t r = 0; r < count; ++r) {
        probs(r, y[static_cast<std::size_t>(r)]) -= 1.0f;
      }
      probs /= static_cast<float>(count);
      MatX<float> gw = x.transpose() * probs;
      Eigen::RowVectorXf gb = probs.colwise().sum();

      const double t = epoch + static_cast<double>(bi) / static_cast<double>(batches_per_epoch);
      AdamConfig stepped = adam;
      stepped.lr = adam.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / epochs));
      ++step_count;
      adam_update<float>({w.data(), static_cast<std::size_t>(w.size())},
                         {gw.data(), static_cast<std::size_t>(gw.size())}, mw, vw, step_count,
                         stepped);
      adam_update<float>({b.data(), static_cast<std::size_t>(b.size())},
                         {gb.data(), static_cast<std::size_t>(gb.size())}, mb, vb, step_count,
                         stepped);
    }
  }

  std::vector<int> predicted(static_cast<std::size_t>(test_features.rows()));
  for (std::int64_t i = 0; i < test_features.rows(); ++i) {
    Eigen::RowVectorXf logits = test_features.row(i) * w + b;
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    predicted[static_cast<std::size_t>(i)] = best;
  }
  return score_predictions(predicted, test_labels, num_classes);
}

EvalResult linear_evaluate(const Encoder<float>& encoder, const LabeledDataset& train,
                           const LabeledDataset& test, const ChannelStats& stats,
                           const AdamConfig& adam, int epochs, std::int64_t batch_size,
                           std::uint64_t seed) {
  MatX<float> train_feats = encode_features(encoder, train.images, stats, batch_size).penultimate;
  MatX<float> test_feats = encode_features(encoder, test.images, stats, batch_size).penultimate;
  return linear_probe(train_feats, train.labels, test_feats, test.labels, train.num_classes, adam,
                      epochs, batch_size, seed);
}

}  // namespace aag
