#include "aag/metrics.hpp"

#include <charconv>
#include <sstream>

namespace aag {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

MetricsWriter::MetricsWriter(const std::string& path) : file_(path), path_(path) {
  if (!file_) throw IoError("cannot open " + path + " for writing");
  file_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricsRow& row) {
  file_ << row.epoch << ',' << row.step << ',' << format_double(row.lr) << ','
        << format_double(row.total) << ',' << format_double(row.l_xy) << ','
        << format_double(row.l_zx) << ',' << format_double(row.l_zy) << ','
        << format_double(row.mean_pos_sim) << ',' << format_double(row.mean_neg_sim) << ','
        << format_double(row.grad_pos) << ',' << format_double(row.grad_neg_sum) << ','
        << format_double(row.wall_time) << '\n';
  if (!file_) throw IoError("write failed on " + path_);
}

void MetricsWriter::flush() { file_.flush(); }

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + ": empty metrics file");
  if (line != kMetricsHeader) throw DataError(path + ": unexpected header '" + line + "'");
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view cell(line.data() + pos,
                                  (comma == std::string::npos ? line.size() : comma) - pos);
      double v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw DataError(path + ": bad cell '" + std::string(cell) + "' in row " +
                        std::to_string(rows.size() + 1));
      }
      fields.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 12) {
      throw DataError(path + ": row " + std::to_string(rows.size() + 1) + " has " +
                      std::to_string(fields.size()) + " columns, expected 12");
    }
    MetricsRow r;
    r.epoch = static_cast<std::int64_t>(fields[0]);
    r.step = static_cast<std::int64_t>(fields[1]);
    r.lr = fields[2];
    r.total = fields[3];
    r.l_xy = fields[4];
    r.l_zx = fields[5];
    r.l_zy = fields[6];
    r.mean_pos_sim = fields[7];
    r.mean_neg_sim = fields[8];
    r.grad_pos = fields[9];
    r.grad_neg_sum = fields[10];
    r.wall_time = fields[11];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aag
