#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aag/checkpoint.hpp"
#include "aag/config.hpp"
#include "aag/error.hpp"
#include "aag/metrics.hpp"

using namespace aag;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{
      {"dataset", {{"kind", "synthetic"}, {"num_classes", 3}, {"per_class", 4}, {"image_size", 16}}},
      {"encoder", {{"widths", {4, 8}}, {"embed_dim", 8}}},
      {"epochs", 2},
      {"batch_size", 4},
      {"output_dir", "runs/test"},
  };
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("an empty config object parses to pure defaults") {
  ExperimentConfig cfg = parse_config_json(json::object());
  CHECK(cfg.dataset.kind == "synthetic");
  CHECK(cfg.encoder.architecture == "small_conv");
  CHECK(cfg.loss == LossKind::GntXent);
  CHECK(cfg.tau == doctest::Approx(0.1));
  CHECK(cfg.view_scheme == ViewScheme::ThreeView);
  CHECK(cfg.epochs == 100);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.sgd.base_lr == doctest::Approx(0.03));
  CHECK(cfg.eval.knn_k == 200);
}

TEST_CASE("derived sizes follow the dataset image size") {
  json j = minimal_config();
  ExperimentConfig cfg = parse_config_json(j);
  CHECK(cfg.encoder.input_size == 16);
  CHECK(cfg.basic.output_size == 16);
  CHECK(cfg.aux.output_size == 16);
  CHECK(cfg.schedule.total_epochs == 2);
  CHECK(cfg.schedule.batch_size == 4);
  // Default warmup 10 exceeds the 2-epoch run: clamped off.
  CHECK(cfg.schedule.warmup_epochs == 0);
}

TEST_CASE("unknown keys are rejected at every nesting level") {
  auto expect_rejected = [](json j, const std::string& fragment) {
    try {
      parse_config_json(j);
      FAIL_CHECK("config with key '", fragment, "' was accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };

  json j = minimal_config();
  j["typo_key"] = 1;
  expect_rejected(j, "typo_key");

  j = minimal_config();
  j["dataset"]["shuffle"] = true;
  expect_rejected(j, "dataset.shuffle");

  j = minimal_config();
  j["encoder"]["depth"] = 3;
  expect_rejected(j, "encoder.depth");

  j = minimal_config();
  j["augment"] = {{"basic", {{"crop_prob", 0.5}}}};
  expect_rejected(j, "augment.basic.crop_prob");

  j = minimal_config();
  j["augment"] = {{"aux", {{"strength", 2}}}};
  expect_rejected(j, "augment.aux.strength");

  j = minimal_config();
  j["augment"] = {{"extra_section", json::object()}};
  expect_rejected(j, "augment.extra_section");

  j = minimal_config();
  j["loss"] = {{"kind", "gnt_xent"}, {"temperature", 0.1}};
  expect_rejected(j, "loss.temperature");

  j = minimal_config();
  j["optimizer"] = {{"lr", 0.03}};
  expect_rejected(j, "optimizer.lr");

  j = minimal_config();
  j["schedule"] = {{"gamma", 0.1}};
  expect_rejected(j, "schedule.gamma");

  j = minimal_config();
  j["eval"] = {{"k", 100}};
  expect_rejected(j, "eval.k");
}

TEST_CASE("type errors name the offending key") {
  json j = minimal_config();
  j["epochs"] = "ten";
  try {
    parse_config_json(j);
    FAIL_CHECK("string epochs accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("epochs") != std::string::npos);
  }
}

TEST_CASE("enumerated fields reject unknown values") {
  json j = minimal_config();
  j["loss"] = {{"kind", "triplet"}};
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["schedule"] = {{"kind", "exponential"}};
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["view_scheme"] = "four_view";
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["dataset"]["kind"] = "imagenet";
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);
}

TEST_CASE("validation rejects unusable experiment settings") {
  json j = minimal_config();
  j["batch_size"] = 1;
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["epochs"] = 0;
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["loss"] = {{"tau", 0.0}};
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["dataset"] = {{"kind", "cifar10"}};  // no path
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["output_dir"] = "";
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);

  j = minimal_config();
  j["eval"] = {{"knn_k", 0}};
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);
}

TEST_CASE("config serialization round-trips through the parser") {
  json j = minimal_config();
  j["loss"] = {{"kind", "nt_xent"}, {"tau", 0.2}};
  j["view_scheme"] = "three_basic";
  j["optimizer"] = {{"base_lr", 0.05}, {"momentum", 0.8}};
  j["schedule"] = {{"kind", "step"}, {"lr_scaling", true}};
  j["augment"] = {{"basic", {{"jitter_strength", 0.3}, {"grayscale_prob", 0.1}}},
                  {"aux", {{"num_ops", 3}, {"magnitude", 15}, {"op_pool", {"rotate", "solarize"}}}}};
  j["seed"] = 99;
  ExperimentConfig cfg = parse_config_json(j);
  CHECK(cfg.loss == LossKind::NtXent);
  CHECK(cfg.tau == doctest::Approx(0.2));
  CHECK(cfg.aux.op_pool == std::vector<AuxOp>{AuxOp::Rotate, AuxOp::Solarize});

  ExperimentConfig back = parse_config_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("presets adjust one dial each and validate the result") {
  ExperimentConfig base = parse_config_json(minimal_config());

  ExperimentConfig cfg = base;
  apply_preset(cfg, "two_basic_views");
  CHECK(cfg.view_scheme == ViewScheme::TwoBasic);
  CHECK(cfg.loss == base.loss);

  cfg = base;
  apply_preset(cfg, "three_basic_views");
  CHECK(cfg.view_scheme == ViewScheme::ThreeBasic);

  cfg = base;
  apply_preset(cfg, "step_lr");
  CHECK(cfg.schedule.kind == ScheduleKind::Step);
  CHECK(cfg.view_scheme == base.view_scheme);

  cfg = base;
  apply_preset(cfg, "nt_xent_loss");
  CHECK(cfg.loss == LossKind::NtXent);

  cfg = base;
  cfg.aux.num_ops = 5;
  cfg.aux.magnitude = 25;
  apply_preset(cfg, "randaugment_aux");
  CHECK(cfg.view_scheme == ViewScheme::ThreeView);
  CHECK(cfg.aux.num_ops == 2);
  CHECK(cfg.aux.magnitude == 10);
  CHECK(cfg.aux.op_pool.size() == 14);
  CHECK(cfg.aux.auto_policies.empty());

  cfg = base;
  try {
    apply_preset(cfg, "cutmix");
    FAIL_CHECK("unknown preset accepted");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cutmix") != std::string::npos);
    for (const auto& name : preset_names()) {
      CHECK(msg.find(name) != std::string::npos);
    }
  }
}

TEST_CASE("config files load from disk with clear failure modes") {
  const auto path = temp_path("aag_config_ok.json");
  {
    std::ofstream f(path);
    f << minimal_config().dump(2);
  }
  ExperimentConfig cfg = load_config_file(path.string());
  CHECK(cfg.dataset.num_classes == 3);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), IoError);

  const auto bad = temp_path("aag_config_bad.json");
  {
    std::ofstream f(bad);
    f << "{ not json";
  }
  CHECK_THROWS_AS(load_config_file(bad.string()), ConfigError);
  std::filesystem::remove(bad);
}

TEST_CASE("dataset arguments accept json files or cifar directories") {
  const auto path = temp_path("aag_dataset.json");
  {
    std::ofstream f(path);
    f << R"({"kind": "synthetic", "num_classes": 4, "per_class": 6, "image_size": 16, "seed": 3})";
  }
  DatasetConfig d = load_dataset_file(path.string());
  CHECK(d.kind == "synthetic");
  CHECK(d.num_classes == 4);
  CHECK(d.seed == 3);
  std::filesystem::remove(path);

  DatasetConfig dir = load_dataset_file("/data/cifar10");
  CHECK(dir.kind == "cifar10");
  CHECK(dir.path == "/data/cifar10");

  // A full experiment config (as written into a run directory) is accepted
  // and contributes its dataset section, so eval commands can point straight
  // at runs/<name>/config.json.
  const auto full = temp_path("aag_run_config.json");
  {
    std::ofstream f(full);
    f << R"({"dataset": {"kind": "synthetic", "num_classes": 5, "per_class": 7, "image_size": 16},)"
      << R"( "epochs": 3, "batch_size": 4, "output_dir": "x"})";
  }
  DatasetConfig from_run = load_dataset_file(full.string());
  CHECK(from_run.kind == "synthetic");
  CHECK(from_run.num_classes == 5);
  CHECK(from_run.per_class == 7);
  std::filesystem::remove(full);

  const auto strict = temp_path("aag_dataset_bad.json");
  {
    std::ofstream f(strict);
    f << R"({"kind": "synthetic", "batch": 8})";
  }
  CHECK_THROWS_AS(load_dataset_file(strict.string()), ConfigError);
  std::filesystem::remove(strict);
}

TEST_CASE("doubles format with shortest round-trip text") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(1e-9) == "1e-09");
  const double v = 0.03 * 0.5 * (1.0 + std::cos(1.234));
  double back = 0;
  const std::string s = format_double(v);
  back = std::stod(s);
  CHECK(back == v);  // exact round-trip
}

TEST_CASE("metrics rows write and read back exactly") {
  const auto path = temp_path("aag_metrics.csv");
  {
    MetricsWriter w(path.string());
    MetricsRow r;
    r.epoch = 1;
    r.step = 17;
    r.lr = 0.03;
    r.total = 1.3862943611198906;
    r.l_xy = 1.0;
    r.l_zx = 0.2;
    r.l_zy = 0.18;
    r.mean_pos_sim = 0.91;
    r.mean_neg_sim = -0.02;
    r.grad_pos = -1.0;
    r.grad_neg_sum = 1.0;
    r.wall_time = 2.25;
    w.write(r);
    r.step = 18;
    r.total = 1.2;
    w.write(r);
    w.flush();
  }
  auto rows = read_metrics(path.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].epoch == 1);
  CHECK(rows[0].step == 17);
  CHECK(rows[0].total == 1.3862943611198906);  // exact through text
  CHECK(rows[0].grad_pos == -1.0);
  CHECK(rows[1].step == 18);
  std::filesystem::remove(path);
}

TEST_CASE("metrics reader rejects malformed files") {
  const auto path = temp_path("aag_metrics_bad.csv");
  {
    std::ofstream f(path);
    f << "epoch,loss\n1,2\n";
  }
  CHECK_THROWS_AS(read_metrics(path.string()), DataError);
  {
    std::ofstream f(path);
    f << kMetricsHeader << "\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_metrics(path.string()), DataError);
  {
    std::ofstream f(path);
    f << kMetricsHeader << "\n1,2,3,4,5,6,7,8,9,10,abc,12\n";
  }
  CHECK_THROWS_AS(read_metrics(path.string()), DataError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_metrics("/nonexistent/metrics.csv"), IoError);
}

TEST_CASE("checkpoints restore the encoder and stats bit-exactly") {
  EncoderConfig ecfg;
  ecfg.widths = {4, 6};
  ecfg.embed_dim = 8;
  ecfg.input_size = 16;
  ecfg.projection_head = true;
  ecfg.head_hidden = 5;
  Encoder<float> enc(ecfg, 77);
  ChannelStats stats;
  stats.mean = {0.4, 0.45, 0.5};
  stats.stddev = {0.2, 0.25, 0.3};

  const auto path = temp_path("aag_test.ckpt");
  save_checkpoint(path.string(), enc, stats);
  LoadedCheckpoint loaded = load_checkpoint(path.string());
  CHECK(loaded.encoder.config().architecture == "small_conv");
  CHECK(loaded.encoder.config().widths == std::vector<int>{4, 6});
  CHECK(loaded.encoder.config().projection_head);
  CHECK(loaded.stats.mean == stats.mean);
  CHECK(loaded.stats.stddev == stats.stddev);
  REQUIRE(loaded.encoder.named_params().size() == enc.named_params().size());
  for (std::size_t i = 0; i < enc.named_params().size(); ++i) {
    const auto& [name, p] = enc.named_params()[i];
    const auto& [lname, lp] = loaded.encoder.named_params()[i];
    CHECK(name == lname);
    REQUIRE(p.size() == lp.size());
    for (std::int64_t k = 0; k < p.size(); ++k) CHECK(p.data()[k] == lp.data()[k]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects corrupt containers") {
  const auto path = temp_path("aag_corrupt.ckpt");

  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACKPT" << std::string(8, '\0');
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);

  {
    std::ofstream f(path, std::ios::binary);
    f.write(kCheckpointMagic, 8);
    const char len[4] = {static_cast<char>(0xFF), static_cast<char>(0xFF), 0, 0};
    f.write(len, 4);  // header length far beyond the file
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);

  // Valid header, truncated payload.
  EncoderConfig ecfg;
  ecfg.widths = {4};
  ecfg.embed_dim = 4;
  ecfg.input_size = 8;
  Encoder<float> enc(ecfg, 1);
  save_checkpoint(path.string(), enc, ChannelStats{});
  const auto full_size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full_size - 16);
  CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path.string()), IoError);
}
