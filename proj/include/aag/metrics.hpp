#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "aag/error.hpp"

namespace aag {

// One logged training step. wall_time (seconds since run start) is the only
// column that is not a pure function of (config, seed); it stays last so
// determinism comparisons can strip it.
struct MetricsRow {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double lr = 0;
  double total = 0;
  double l_xy = 0;
  double l_zx = 0;
  double l_zy = 0;
  double mean_pos_sim = 0;
  double mean_neg_sim = 0;
  double grad_pos = 0;
  double grad_neg_sum = 0;
  double wall_time = 0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,step,lr,total,L_xy,L_zx,L_zy,mean_pos_sim,mean_neg_sim,grad_pos,grad_neg_sum,"
    "wall_time";

// Locale-independent shortest round-trip formatting.
std::string format_double(double v);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);
  void flush();

 private:
  std::ofstream file_;
  std::string path_;
};

std::vector<MetricsRow> read_metrics(const std::string& path);

}  // namespace aag
