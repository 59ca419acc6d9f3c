#include "aag/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aag/checkpoint.hpp"
#include "aag/metrics.hpp"

namespace aag {

namespace {

void truncate_split(LabeledDataset& ds, int subset) {
  if (subset <= 0 || static_cast<std::size_t>(subset) >= ds.size()) return;
  ds.images.resize(static_cast<std::size_t>(subset));
  ds.labels.resize(static_cast<std::size_t>(subset));
}

std::string checkpoint_name(int epoch_1based) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%04d.ckpt", epoch_1based);
  return buf;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> load_dataset_pair(const DatasetConfig& cfg) {
  cfg.validate();
  LabeledDataset train, test;
  if (cfg.kind == "synthetic") {
    SyntheticSpec train_spec{cfg.num_classes, cfg.per_class, cfg.image_size,
                             mix_seed(cfg.seed, 0x747261696eULL)};
    SyntheticSpec test_spec{cfg.num_classes, cfg.test_per_class, cfg.image_size,
                            mix_seed(cfg.seed, 0x74657374ULL)};
    train = generate_synthetic(train_spec);
    test = generate_synthetic(test_spec);
    train.split = "train";
    test.split = "test";
  } else {
    train = load_cifar10(cfg.path, "train");
    test = load_cifar10(cfg.path, "test");
  }
  truncate_split(train, cfg.subset);
  truncate_split(test, cfg.subset);
  return {std::move(train), std::move(test)};
}

TrainResult train_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  {
    std::ofstream f(out_dir / "config.json");
    if (!f) throw IoError("cannot write " + (out_dir / "config.json").string());
    f << config_to_json(cfg).dump(2) << "\n";
  }

  auto [train_set, test_set] = load_dataset_pair(cfg.dataset);
  const auto n_train = static_cast<std::int64_t>(train_set.size());
  if (n_train < cfg.batch_size) {
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds train set size " +
                      std::to_string(n_train));
  }
  const ChannelStats stats = compute_channel_stats(train_set.images);

  Encoder<float> encoder(cfg.encoder, cfg.seed);
  SgdOptimizer<float> opt(encoder.params(), cfg.sgd);

  TrainResult result;
  result.metrics_path = (out_dir / "metrics.csv").string();
  result.checkpoint_path = (out_dir / "checkpoint.ckpt").string();
  result.eval_history_path = (out_dir / "eval_history.csv").string();

  MetricsWriter metrics(result.metrics_path);
  std::ofstream eval_history(result.eval_history_path);
  if (!eval_history) throw IoError("cannot write " + result.eval_history_path);
  eval_history << "epoch,knn_top1\n";

  const float tau = static_cast<float>(cfg.tau);
  const bool wants_aux = cfg.view_scheme != ViewScheme::TwoBasic;
  std::int64_t global_step = 0;
  const auto run_start = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = batch_sampler(n_train, cfg.batch_size, epoch, cfg.seed);
    const auto steps_per_epoch = static_cast<std::int64_t>(batches.size());
    for (std::int64_t bi = 0; bi < steps_per_epoch; ++bi) {
      const auto& batch = batches[static_cast<std::size_t>(bi)];
      const double t = epoch + static_cast<double>(bi) / static_cast<double>(steps_per_epoch);
      const double lr = learning_rate(t, cfg.schedule, cfg.sgd);
      ++global_step;

      std::vector<Image> view_x, view_y, view_z;
      view_x.reserve(batch.size());
      view_y.reserve(batch.size());
      if (wants_aux) view_z.reserve(batch.size());
      for (std::int64_t idx : batch) {
        // Per-image stream keyed by (run seed, epoch, image id): batch
        // composition never shifts another image's augmentation draws.
        Rng view_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(idx)));
        ViewTriplet views = make_views(train_set.images[static_cast<std::size_t>(idx)], cfg.basic,
                                       cfg.aux, cfg.view_scheme, view_rng);
        view_x.push_back(std::move(views.core1));
        view_y.push_back(std::move(views.core2));
        if (wants_aux) view_z.push_back(std::move(views.aux));
      }

      encoder.zero_grads();
      Tape<float> tape;
      TapeScope<float> scope(tape);
      auto ex = encoder.encode(to_input_tensor<float>(view_x, stats));
      auto ey = encoder.encode(to_input_tensor<float>(view_y, stats));
      BatchEmbeddings<float> emb;
      emb.x = to_matrix(ex.embedding);
      emb.y = to_matrix(ey.embedding);
      EncodeResult<float> ez;
      if (wants_aux) {
        ez = encoder.encode(to_input_tensor<float>(view_z, stats));
        emb.z = to_matrix(ez.embedding);
      } else {
        emb.z.resize(0, emb.x.cols());
      }

      FullLossResult<float> loss = full_loss_backward(emb, tau, cfg.loss);
      if (!std::isfinite(loss.report.total)) {
        throw std::runtime_error("non-finite loss at step " + std::to_string(global_step));
      }

      std::vector<std::pair<Tensor<float>, std::span<const float>>> seeds;
      seeds.emplace_back(ex.embedding,
                         std::span<const float>(loss.dx.data(), static_cast<std::size_t>(loss.dx.size())));
      seeds.emplace_back(ey.embedding,
                         std::span<const float>(loss.dy.data(), static_cast<std::size_t>(loss.dy.size())));
      if (wants_aux) {
        seeds.emplace_back(ez.embedding,
                           std::span<const float>(loss.dz.data(), static_cast<std::size_t>(loss.dz.size())));
      }
      tape.backward_seeded(seeds);
      opt.step(static_cast<float>(lr));

      MetricsRow row;
      row.epoch = epoch;
      row.step = global_step;
      row.lr = lr;
      row.total = loss.report.total;
      row.l_xy = loss.report.l_xy;
      row.l_zx = loss.report.l_zx;
      row.l_zy = loss.report.l_zy;
      row.mean_pos_sim = loss.report.mean_pos_sim;
      row.mean_neg_sim = loss.report.mean_neg_sim;
      row.grad_pos = loss.report.grad_pos;
      row.grad_neg_sum = loss.report.grad_neg_sum;
      row.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
      metrics.write(row);
    }

    const bool last_epoch = epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.eval.every_epochs == 0 || last_epoch) {
      EvalResult eval = knn_evaluate(encoder, train_set, test_set, stats, cfg.eval.knn_k,
                                     cfg.eval.knn_tau);
      result.final_knn_accuracy = eval.top1_accuracy;
      eval_history << epoch << "," << format_double(eval.top1_accuracy) << "\n";
      eval_history.flush();
      std::printf("[eval] epoch %d knn_top1 %.4f (%lld test images)\n", epoch, eval.top1_accuracy,
                  static_cast<long long>(eval.num_evaluated));
      std::fflush(stdout);
      save_checkpoint((out_dir / checkpoint_name(epoch + 1)).string(), encoder, stats);
    }
  }

  save_checkpoint(result.checkpoint_path, encoder, stats);
  metrics.flush();
  result.steps = global_step;
  std::printf("[done] %lld steps, final knn_top1 %.4f, checkpoint %s\n",
              static_cast<long long>(global_step), result.final_knn_accuracy,
              result.checkpoint_path.c_str());
  std::fflush(stdout);
  return result;
}

}  // namespace aag
