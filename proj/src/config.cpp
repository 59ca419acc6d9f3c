#include "aag/config.hpp"

#include <fstream>
#include <set>

#include "aag/data.hpp"

#include <json.hpp>

namespace aag {

namespace {

using nlohmann::json;

// Tracks which keys a section consumed so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be a json object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const std::string& key) {
    return has(key) ? &j_.at(key) : nullptr;
  }

  void finish() {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown key '" + name_ + "." + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::pair<double, double> read_range(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(name + " must be a [lo, hi] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  Section s(j, "dataset");
  s.read("kind", d.kind);
  s.read("path", d.path);
  s.read("num_classes", d.num_classes);
  s.read("per_class", d.per_class);
  s.read("test_per_class", d.test_per_class);
  s.read("image_size", d.image_size);
  s.read("subset", d.subset);
  s.read("seed", d.seed);
  s.finish();
  return d;
}

EncoderConfig parse_encoder(const json& j) {
  EncoderConfig e;
  Section s(j, "encoder");
  s.read("architecture", e.architecture);
  s.read("widths", e.widths);
  s.read("embed_dim", e.embed_dim);
  s.read("projection_head", e.projection_head);
  s.read("head_hidden", e.head_hidden);
  s.finish();
  return e;
}

BasicPolicy parse_basic(const json& j) {
  BasicPolicy b;
  Section s(j, "augment.basic");
  if (s.has("crop_scale_range")) b.crop_scale_range = read_range(j.at("crop_scale_range"), "augment.basic.crop_scale_range");
  s.read("jitter_strength", b.jitter_strength);
  s.read("grayscale_prob", b.grayscale_prob);
  s.read("flip_prob", b.flip_prob);
  s.read("blur_prob", b.blur_prob);
  if (s.has("blur_sigma_range")) b.blur_sigma_range = read_range(j.at("blur_sigma_range"), "augment.basic.blur_sigma_range");
  s.finish();
  return b;
}

AuxPolicy parse_aux(const json& j) {
  AuxPolicy a;
  Section s(j, "augment.aux");
  s.read("num_ops", a.num_ops);
  s.read("magnitude", a.magnitude);
  if (s.has("op_pool")) {
    std::vector<std::string> names = j.at("op_pool").get<std::vector<std::string>>();
    a.op_pool.clear();
    for (const auto& n : names) a.op_pool.push_back(parse_aux_op(n));
  }
  if (s.has("auto_policy_file")) {
    a.auto_policies = load_auto_policies(j.at("auto_policy_file").get<std::string>());
  }
  if (s.has("crop_scale_range")) a.crop_scale_range = read_range(j.at("crop_scale_range"), "augment.aux.crop_scale_range");
  s.finish();
  return a;
}

}  // namespace

void DatasetConfig::validate() const {
  if (kind != "synthetic" && kind != "cifar10") {
    throw ConfigError("dataset.kind must be 'synthetic' or 'cifar10', got '" + kind + "'");
  }
  if (kind == "cifar10" && path.empty()) throw ConfigError("dataset.path required for cifar10");
  if (kind == "synthetic") {
    SyntheticSpec spec{num_classes, per_class, image_size, 0};
    spec.validate();
    if (test_per_class < 1) throw ConfigError("dataset.test_per_class must be >= 1");
  }
  if (subset < 0) throw ConfigError("dataset.subset must be >= 0");
  if (image_size < 4) throw ConfigError("dataset.image_size must be >= 4");
}

void EvalConfig::validate() const {
  if (every_epochs < 1) throw ConfigError("eval.every_epochs must be >= 1");
  if (knn_k < 1) throw ConfigError("eval.knn_k must be >= 1");
  if (!(knn_tau > 0)) throw ConfigError("eval.knn_tau must be > 0");
}

void ExperimentConfig::validate() const {
  dataset.validate();
  encoder.validate();
  basic.validate();
  if (view_scheme == ViewScheme::ThreeView) aux.validate();
  if (!(tau > 0)) throw ConfigError("loss.tau must be > 0");
  sgd.validate();
  schedule.validate();
  eval.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
  if (encoder.input_size != dataset.image_size) {
    throw ConfigError("encoder input_size out of sync with dataset image_size");
  }
}

ExperimentConfig parse_config_json(const json& j) {
  ExperimentConfig cfg;
  Section root(j, "config");

  if (const json* d = root.sub("dataset")) cfg.dataset = parse_dataset(*d);
  if (const json* e = root.sub("encoder")) cfg.encoder = parse_encoder(*e);
  if (const json* a = root.sub("augment")) {
    Section s(*a, "augment");
    if (const json* b = s.sub("basic")) cfg.basic = parse_basic(*b);
    if (const json* x = s.sub("aux")) cfg.aux = parse_aux(*x);
    s.finish();
  }
  if (const json* l = root.sub("loss")) {
    Section s(*l, "loss");
    std::string kind = to_string(cfg.loss);
    s.read("kind", kind);
    if (kind == "gnt_xent") {
      cfg.loss = LossKind::GntXent;
    } else if (kind == "nt_xent") {
      cfg.loss = LossKind::NtXent;
    } else {
      throw ConfigError("loss.kind must be 'gnt_xent' or 'nt_xent', got '" + kind + "'");
    }
    s.read("tau", cfg.tau);
    s.finish();
  }
  if (root.has("view_scheme")) {
    cfg.view_scheme = parse_view_scheme(j.at("view_scheme").get<std::string>());
  }
  if (const json* o = root.sub("optimizer")) {
    Section s(*o, "optimizer");
    s.read("base_lr", cfg.sgd.base_lr);
    s.read("momentum", cfg.sgd.momentum);
    s.read("weight_decay", cfg.sgd.weight_decay);
    s.finish();
  }
  if (const json* sc = root.sub("schedule")) {
    Section s(*sc, "schedule");
    std::string kind = "cosine";
    s.read("kind", kind);
    if (kind == "cosine") {
      cfg.schedule.kind = ScheduleKind::Cosine;
    } else if (kind == "step") {
      cfg.schedule.kind = ScheduleKind::Step;
    } else {
      throw ConfigError("schedule.kind must be 'cosine' or 'step', got '" + kind + "'");
    }
    s.read("warmup_epochs", cfg.schedule.warmup_epochs);
    s.read("lr_scaling", cfg.schedule.lr_scaling);
    s.finish();
  }
  root.read("epochs", cfg.epochs);
  root.read("batch_size", cfg.batch_size);
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  if (const json* ev = root.sub("eval")) {
    Section s(*ev, "eval");
    s.read("every_epochs", cfg.eval.every_epochs);
    s.read("knn_k", cfg.eval.knn_k);
    s.read("knn_tau", cfg.eval.knn_tau);
    s.finish();
  }
  root.finish();

  // Derived sizes: one source of truth in the dataset section.
  cfg.encoder.input_size = cfg.dataset.image_size;
  cfg.basic.output_size = cfg.dataset.image_size;
  cfg.aux.output_size = cfg.dataset.image_size;
  cfg.schedule.total_epochs = cfg.epochs;
  cfg.schedule.batch_size = cfg.batch_size;
  if (cfg.schedule.warmup_epochs >= cfg.epochs) cfg.schedule.warmup_epochs = 0;

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config_json(j);
}

DatasetConfig parse_dataset_json(const json& j) {
  DatasetConfig d = parse_dataset(j);
  d.validate();
  return d;
}

DatasetConfig load_dataset_file(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open dataset file " + path);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    // A stored run config also works here: use its dataset section. A bare
    // dataset document can never carry a "dataset" key (unknown keys reject).
    if (j.is_object() && j.contains("dataset") && j.at("dataset").is_object()) {
      return parse_dataset_json(j.at("dataset"));
    }
    return parse_dataset_json(j);
  }
  DatasetConfig d;
  d.kind = "cifar10";
  d.path = path;
  d.validate();
  return d;
}

json config_to_json(const ExperimentConfig& cfg) {
  std::vector<std::string> pool_names;
  for (AuxOp op : cfg.aux.op_pool) pool_names.push_back(to_string(op));
  return json{
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"path", cfg.dataset.path},
        {"num_classes", cfg.dataset.num_classes},
        {"per_class", cfg.dataset.per_class},
        {"test_per_class", cfg.dataset.test_per_class},
        {"image_size", cfg.dataset.image_size},
        {"subset", cfg.dataset.subset},
        {"seed", cfg.dataset.seed}}},
      {"encoder",
       {{"architecture", cfg.encoder.architecture},
        {"widths", cfg.encoder.widths},
        {"embed_dim", cfg.encoder.embed_dim},
        {"projection_head", cfg.encoder.projection_head},
        {"head_hidden", cfg.encoder.head_hidden}}},
      {"augment",
       {{"basic",
         {{"crop_scale_range", {cfg.basic.crop_scale_range.first, cfg.basic.crop_scale_range.second}},
          {"jitter_strength", cfg.basic.jitter_strength},
          {"grayscale_prob", cfg.basic.grayscale_prob},
          {"flip_prob", cfg.basic.flip_prob},
          {"blur_prob", cfg.basic.blur_prob},
          {"blur_sigma_range", {cfg.basic.blur_sigma_range.first, cfg.basic.blur_sigma_range.second}}}},
        {"aux",
         {{"num_ops", cfg.aux.num_ops},
          {"magnitude", cfg.aux.magnitude},
          {"op_pool", pool_names},
          {"crop_scale_range", {cfg.aux.crop_scale_range.first, cfg.aux.crop_scale_range.second}}}}}},
      {"loss", {{"kind", to_string(cfg.loss)}, {"tau", cfg.tau}}},
      {"view_scheme", to_string(cfg.view_scheme)},
      {"optimizer",
       {{"base_lr", cfg.sgd.base_lr},
        {"momentum", cfg.sgd.momentum},
        {"weight_decay", cfg.sgd.weight_decay}}},
      {"schedule",
       {{"kind", cfg.schedule.kind == ScheduleKind::Cosine ? "cosine" : "step"},
        {"warmup_epochs", cfg.schedule.warmup_epochs},
        {"lr_scaling", cfg.schedule.lr_scaling}}},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"eval",
       {{"every_epochs", cfg.eval.every_epochs},
        {"knn_k", cfg.eval.knn_k},
        {"knn_tau", cfg.eval.knn_tau}}}};
}

std::vector<std::string> preset_names() {
  return {"two_basic_views", "three_basic_views", "step_lr", "nt_xent_loss", "randaugment_aux"};
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  if (name == "two_basic_views") {
    cfg.view_scheme = ViewScheme::TwoBasic;
  } else if (name == "three_basic_views") {
    cfg.view_scheme = ViewScheme::ThreeBasic;
  } else if (name == "step_lr") {
    cfg.schedule.kind = ScheduleKind::Step;
  } else if (name == "nt_xent_loss") {
    cfg.loss = LossKind::NtXent;
  } else if (name == "randaugment_aux") {
    cfg.view_scheme = ViewScheme::ThreeView;
    cfg.aux.auto_policies.clear();
    cfg.aux.op_pool = default_randaugment_pool();
    cfg.aux.num_ops = 2;
    cfg.aux.magnitude = 10;
  } else {
    std::string valid;
    for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
  }
  cfg.validate();
}

}  // namespace aag
