#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aag/error.hpp"
#include "aag/tensor.hpp"

namespace aag {

struct SgdConfig {
  double base_lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const {
    if (!(base_lr > 0)) throw ConfigError("sgd base_lr must be > 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("sgd momentum must be in [0,1)");
    if (weight_decay < 0) throw ConfigError("sgd weight_decay must be >= 0");
  }
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("adam lr must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
      throw ConfigError("adam betas must be in [0,1)");
    }
    if (!(epsilon > 0)) throw ConfigError("adam epsilon must be > 0");
  }
};

enum class ScheduleKind { Cosine, Step };

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Cosine;
  int total_epochs = 100;
  int warmup_epochs = 10;       // active only when batch_size > 256
  int batch_size = 128;
  bool lr_scaling = false;      // lr0 = base_lr * batch_size / 128

  void validate() const {
    if (total_epochs < 1) throw ConfigError("schedule total_epochs must be >= 1");
    if (warmup_epochs < 0) throw ConfigError("schedule warmup_epochs must be >= 0");
    if (warmup_epochs >= total_epochs) {
      throw ConfigError("schedule warmup_epochs must be < total_epochs");
    }
    if (batch_size < 1) throw ConfigError("schedule batch_size must be >= 1");
  }

  double effective_base_lr(double base_lr) const {
    return lr_scaling ? base_lr * (static_cast<double>(batch_size) / 128.0) : base_lr;
  }

  // Warmup is part of the large-batch protocol; small batches skip it.
  double active_warmup() const { return batch_size > 256 ? warmup_epochs : 0; }
};

// t is a fractional epoch in [0, total_epochs].
inline double cosine_lr(double t, const ScheduleConfig& cfg, const SgdConfig& sgd) {
  cfg.validate();
  if (t < 0 || t > cfg.total_epochs) throw ValueError("cosine_lr epoch out of range");
  const double lr0 = cfg.effective_base_lr(sgd.base_lr);
  const double w = cfg.active_warmup();
  if (t < w) return lr0 * (t / w);
  const double span = cfg.total_epochs - w;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - w) / span));
}

// Staircase: x0.1 at 60% and 80% of total epochs.
inline double step_lr(double t, const ScheduleConfig& cfg, const SgdConfig& sgd) {
  cfg.validate();
  if (t < 0 || t > cfg.total_epochs) throw ValueError("step_lr epoch out of range");
  const double lr0 = cfg.effective_base_lr(sgd.base_lr);
  const double w = cfg.active_warmup();
  if (t < w) return lr0 * (t / w);
  double lr = lr0;
  if (t >= 0.6 * cfg.total_epochs) lr *= 0.1;
  if (t >= 0.8 * cfg.total_epochs) lr *= 0.1;
  return lr;
}

inline double learning_rate(double t, const ScheduleConfig& cfg, const SgdConfig& sgd) {
  return cfg.kind == ScheduleKind::Cosine ? cosine_lr(t, cfg, sgd) : step_lr(t, cfg, sgd);
}

// Raw-buffer primitives; the stateful wrappers below manage velocity/moments.
template <class T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> velocity, T lr,
                const SgdConfig& cfg) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw DimensionError("sgd_update buffer sizes disagree");
  }
  const T mu = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(cfg.weight_decay);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i] + wd * param[i];
    velocity[i] = mu * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step_count, const AdamConfig& cfg) {
  if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size()) {
    throw DimensionError("adam_update buffer sizes disagree");
  }
  if (step_count < 1) throw ValueError("adam step_count must be >= 1");
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.epsilon);
  const T c1 = T(1) - std::pow(b1, static_cast<T>(step_count));
  const T c2 = T(1) - std::pow(b2, static_cast<T>(step_count));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
    v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <class T>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Tensor<T>> params, SgdConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : params_) {
      velocity_.emplace_back(p.size(), T(0));
    }
  }

  void step(T lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      sgd_update<T>({p.data_ptr(), static_cast<std::size_t>(p.size())},
                    {p.grad().data(), p.grad().size()},
                    {velocity_[i].data(), velocity_[i].size()}, lr, cfg_);
    }
  }

  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  SgdConfig cfg_;
};

template <class T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), T(0));
      v_.emplace_back(p.size(), T(0));
    }
  }

  // lr_scale rescales the configured lr (cosine schedule for linear eval).
  void step(T lr_scale = T(1)) {
    ++step_count_;
    AdamConfig cfg = cfg_;
    cfg.lr = cfg_.lr * static_cast<double>(lr_scale);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      adam_update<T>({p.data_ptr(), static_cast<std::size_t>(p.size())},
                     {p.grad().data(), p.grad().size()}, {m_[i].data(), m_[i].size()},
                     {v_[i].data(), v_[i].size()}, step_count_, cfg);
    }
  }

  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t step_count_ = 0;
  AdamConfig cfg_;
};

}  // namespace aag
