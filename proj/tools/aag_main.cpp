#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aag/checkpoint.hpp"
#include "aag/config.hpp"
#include "aag/eval.hpp"
#include "aag/gradcheck.hpp"
#include "aag/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int run_train(const std::string& config_path, const std::string& preset, bool seed_set,
              std::uint64_t seed) {
  aag::ExperimentConfig cfg = aag::load_config_file(config_path);
  if (!preset.empty()) aag::apply_preset(cfg, preset);
  if (seed_set) cfg.seed = seed;
  aag::train_experiment(cfg);
  return kExitOk;
}

int run_knn_eval(const std::string& checkpoint_path, const std::string& dataset_path, int k,
                 double tau) {
  aag::LoadedCheckpoint ckpt = aag::load_checkpoint(checkpoint_path);
  auto [train, test] = aag::load_dataset_pair(aag::load_dataset_file(dataset_path));
  aag::EvalResult result = aag::knn_evaluate(ckpt.encoder, train, test, ckpt.stats, k, tau);
  std::printf("%s\n", aag::eval_result_to_json(result).dump(2).c_str());
  return kExitOk;
}

int run_linear_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                    int epochs) {
  aag::LoadedCheckpoint ckpt = aag::load_checkpoint(checkpoint_path);
  auto [train, test] = aag::load_dataset_pair(aag::load_dataset_file(dataset_path));
  aag::EvalResult result =
      aag::linear_evaluate(ckpt.encoder, train, test, ckpt.stats, aag::AdamConfig{}, epochs);
  std::printf("%s\n", aag::eval_result_to_json(result).dump(2).c_str());
  return kExitOk;
}

int run_gradcheck(const std::string& corrupt_op) {
  aag::GradcheckOptions options;
  options.corrupt_op = corrupt_op;
  const auto results = aag::run_gradcheck_suite(options);
  bool all_passed = true;
  for (const auto& r : results) {
    std::printf("%-38s max_rel_err %.3e tol %.3e %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                r.passed ? "PASS" : "FAIL");
    all_passed = all_passed && r.passed;
  }
  std::printf("gradcheck: %zu checks, %s\n", results.size(), all_passed ? "all passed" : "FAILED");
  return all_passed ? kExitOk : kExitRuntime;
}

int run_dump_aug(const std::string& config_path, int count, const std::string& out_dir) {
  if (count < 1) throw aag::ValueError("--count must be >= 1");
  aag::ExperimentConfig cfg = aag::load_config_file(config_path);
  auto [train, test] = aag::load_dataset_pair(cfg.dataset);
  if (train.size() == 0) throw aag::DataError("dataset is empty");
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  for (int i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i) % train.size();
    // Same stream keying as training epoch 0, so these are the exact views
    // the first epoch would consume.
    aag::Rng rng(aag::mix_seed(cfg.seed, 0, static_cast<std::uint64_t>(idx)));
    aag::ViewTriplet views =
        aag::make_views(train.images[idx], cfg.basic, cfg.aux, cfg.view_scheme, rng);
    const std::string stem = "img_" + std::to_string(i);
    aag::write_ppm((dir / (stem + "_orig.ppm")).string(), train.images[idx]);
    aag::write_ppm((dir / (stem + "_core1.ppm")).string(), views.core1);
    aag::write_ppm((dir / (stem + "_core2.ppm")).string(), views.core2);
    if (cfg.view_scheme != aag::ViewScheme::TwoBasic) {
      aag::write_ppm((dir / (stem + "_aux.ppm")).string(), views.aux);
    }
  }
  std::printf("wrote %d view sets to %s\n", count, out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised contrastive training with auxiliary augmentation"};
  app.require_subcommand(1);

  std::string config_path, preset, checkpoint_path, dataset_path, out_dir, corrupt_op;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int count = 8;
  int knn_k = 200;
  double knn_tau = 0.1;
  int linear_epochs = 50;

  auto* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--config", config_path, "Experiment config JSON")->required();
  train->add_option("--preset", preset, "Ablation preset to apply on top of the config");
  train->add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });

  auto* knn = app.add_subcommand("knn-eval", "Weighted kNN evaluation of a checkpoint");
  knn->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  knn->add_option("--dataset", dataset_path, "Dataset JSON file or cifar10 directory")->required();
  knn->add_option("--k", knn_k, "Neighbor count (capped at bank size)");
  knn->add_option("--tau", knn_tau, "kNN temperature");

  auto* linear = app.add_subcommand("linear-eval", "Linear probe on penultimate features");
  linear->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  linear->add_option("--dataset", dataset_path, "Dataset JSON file or cifar10 directory")
      ->required();
  linear->add_option("--epochs", linear_epochs, "Probe training epochs");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("--corrupt-op", corrupt_op, "Bias the named check (negative control)")
      ->group("");  // hidden

  auto* dump = app.add_subcommand("dump-aug", "Write augmented view triplets as PPM files");
  dump->add_option("--config", config_path, "Experiment config JSON")->required();
  dump->add_option("--count", count, "Number of view sets to write");
  dump->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(config_path, preset, seed_set, seed);
    if (knn->parsed()) return run_knn_eval(checkpoint_path, dataset_path, knn_k, knn_tau);
    if (linear->parsed()) return run_linear_eval(checkpoint_path, dataset_path, linear_epochs);
    if (gradcheck->parsed()) return run_gradcheck(corrupt_op);
    if (dump->parsed()) return run_dump_aug(config_path, count, out_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
