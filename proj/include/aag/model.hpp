#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aag/error.hpp"
#include "aag/ops.hpp"
#include "aag/rng.hpp"
#include "aag/tensor.hpp"

namespace aag {

struct EncoderConfig {
  std::string architecture = "small_conv";  // small_conv | mlp
  std::vector<int> widths = {16, 32, 64};
  int embed_dim = 128;
  bool projection_head = false;
  int head_hidden = 128;
  int input_size = 32;  // square input side in pixels

  void validate() const {
    if (architecture != "small_conv" && architecture != "mlp") {
      throw ConfigError("unknown encoder architecture '" + architecture + "'");
    }
    if (widths.empty()) throw ConfigError("encoder widths must be non-empty");
    for (int w : widths) {
      if (w < 1) throw ConfigError("encoder widths must be >= 1");
    }
    if (embed_dim < 2) throw ConfigError("encoder embed_dim must be >= 2");
    if (projection_head && head_hidden < 1) throw ConfigError("encoder head_hidden must be >= 1");
    if (input_size < 1) throw ConfigError("encoder input_size must be >= 1");
    if (architecture == "small_conv") {
      int s = input_size;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        if (s < 2) {
          throw ConfigError("encoder input_size " + std::to_string(input_size) +
                            " too small for " + std::to_string(widths.size()) + " pool stages");
        }
        s /= 2;
      }
    }
  }

  // Width of the features linear evaluation consumes.
  int penultimate_dim() const { return widths.back(); }
};

template <class T>
struct EncodeResult {
  Tensor<T> penultimate;  // pre-head features, not normalized
  Tensor<T> embedding;    // head output, rows L2-normalized
};

// Siamese encoder f. One parameter set encodes every view.
template <class T>
class Encoder {
 public:
  Encoder(EncoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x656e636f646572ULL));  // "encoder"
    if (cfg_.architecture == "small_conv") {
      int in_ch = 3;
      for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
        const int out_ch = cfg_.widths[i];
        add_param("stage" + std::to_string(i) + ".kernel",
                  he_normal(rng, {out_ch, in_ch, 3, 3}, in_ch * 9));
        add_param("stage" + std::to_string(i) + ".bias", Tensor<T>::zeros({out_ch}));
        in_ch = out_ch;
      }
      add_head(rng, cfg_.widths.back());
    } else {
      int in_dim = 3 * cfg_.input_size * cfg_.input_size;
      for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
        const int out_dim = cfg_.widths[i];
        add_param("fc" + std::to_string(i) + ".w", he_normal(rng, {in_dim, out_dim}, in_dim));
        add_param("fc" + std::to_string(i) + ".b", Tensor<T>::zeros({out_dim}));
        in_dim = out_dim;
      }
      add_head(rng, cfg_.widths.back());
    }
    for (auto& [name, p] : params_) p.set_requires_grad(true);
  }

  EncodeResult<T> encode(const Tensor<T>& batch) const {
    if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != cfg_.input_size ||
        batch.dim(3) != cfg_.input_size) {
      throw DimensionError("encoder expects batch [n,3," + std::to_string(cfg_.input_size) + "," +
                           std::to_string(cfg_.input_size) + "], got " + shape_str(batch.shape()));
    }
    Tensor<T> pen;
    if (cfg_.architecture == "small_conv") {
      Tensor<T> x = batch;
      for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
        x = conv2d(x, param("stage" + std::to_string(i) + ".kernel"), 1, 1);
        x = channel_bias_add(x, param("stage" + std::to_string(i) + ".bias"));
        x = relu(x);
        x = max_pool2x2(x);
      }
      pen = global_avg_pool(x);
    } else {
      Tensor<T> x = reshape(batch, {batch.dim(0), 3 * cfg_.input_size * cfg_.input_size});
      for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
        x = affine(x, param("fc" + std::to_string(i) + ".w"),
                   param("fc" + std::to_string(i) + ".b"));
        x = relu(x);
      }
      pen = x;
    }
    Tensor<T> head;
    if (cfg_.projection_head) {
      head = affine(pen, param("head1.w"), param("head1.b"));
      head = relu(head);
      head = affine(head, param("head2.w"), param("head2.b"));
    } else {
      head = affine(pen, param("head.w"), param("head.b"));
    }
    return {pen, l2_normalize_rows(head)};
  }

  const EncoderConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor<T>>>& named_params() { return params_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& named_params() const { return params_; }

  std::vector<Tensor<T>> params() const {
    std::vector<Tensor<T>> out;
    out.reserve(params_.size());
    for (const auto& [name, p] : params_) out.push_back(p);
    return out;
  }

  Tensor<T>& param(const std::string& name) {
    for (auto& [n, p] : params_) {
      if (n == name) return p;
    }
    throw ValueError("encoder has no parameter '" + name + "'");
  }

  const Tensor<T>& param(const std::string& name) const {
    for (const auto& [n, p] : params_) {
      if (n == name) return p;
    }
    throw ValueError("encoder has no parameter '" + name + "'");
  }

  void zero_grads() {
    for (auto& [n, p] : params_) p.zero_grad();
  }

  bool all_finite() const {
    for (const auto& [n, p] : params_) {
      for (T v : p.data()) {
        if (!std::isfinite(static_cast<double>(v))) return false;
      }
    }
    return true;
  }

 private:
  void add_param(std::string name, Tensor<T> t) { params_.emplace_back(std::move(name), std::move(t)); }

  void add_head(Rng& rng, int in_dim) {
    if (cfg_.projection_head) {
      add_param("head1.w", he_normal(rng, {in_dim, cfg_.head_hidden}, in_dim));
      add_param("head1.b", Tensor<T>::zeros({cfg_.head_hidden}));
      add_param("head2.w", he_normal(rng, {cfg_.head_hidden, cfg_.embed_dim}, cfg_.head_hidden));
      add_param("head2.b", Tensor<T>::zeros({cfg_.embed_dim}));
    } else {
      add_param("head.w", he_normal(rng, {in_dim, cfg_.embed_dim}, in_dim));
      add_param("head.b", Tensor<T>::zeros({cfg_.embed_dim}));
    }
  }

  static Tensor<T> he_normal(Rng& rng, std::vector<int> dims, int fan_in) {
    Shape shape(dims.begin(), dims.end());
    Tensor<T> t = Tensor<T>::zeros(shape);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      t.data_ptr()[i] = static_cast<T>(rng.normal() * scale);
    }
    return t;
  }

  EncoderConfig cfg_;
  std::vector<std::pair<std::string, Tensor<T>>> params_;
};

}  // namespace aag
