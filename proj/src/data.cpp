#include "aag/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace aag {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open " + path);
  const auto size = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw IoError("short read from " + path);
  return bytes;
}

void append_records(LabeledDataset& ds, const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw IoError(path + ": size " + std::to_string(bytes.size()) +
                  " is not a positive multiple of " + std::to_string(kCifarRecordBytes) +
                  " (stray bytes start at offset " +
                  std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes) + ")");
  }
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecordBytes) {
    const int label = bytes[off];
    if (label > 9) {
      throw DataError(path + ": label byte " + std::to_string(label) + " out of range at offset " +
                      std::to_string(off));
    }
    ds.labels.push_back(label);
    ds.images.push_back(parse_cifar_pixels(bytes.data() + off + 1));
  }
}

}  // namespace

Image parse_cifar_pixels(const std::uint8_t* planes) {
  Image img = make_image(32, 32);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        img.set(x, y, c, planes[c * 1024 + y * 32 + x]);
      }
    }
  }
  return img;
}

std::array<std::uint8_t, kCifarRecordBytes> serialize_cifar_record(const Image& img, int label) {
  if (img.width != 32 || img.height != 32) {
    throw DimensionError("cifar records hold 32x32 images");
  }
  if (label < 0 || label > 9) throw ValueError("cifar label must be in [0,9]");
  std::array<std::uint8_t, kCifarRecordBytes> rec;
  rec[0] = static_cast<std::uint8_t>(label);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        rec[1 + c * 1024 + y * 32 + x] = img.at(x, y, c);
      }
    }
  }
  return rec;
}

LabeledDataset load_cifar10(const std::string& dir, const std::string& split) {
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.split = split;
  if (split == "train") {
    for (int i = 1; i <= 5; ++i) {
      append_records(ds, dir + "/data_batch_" + std::to_string(i) + ".bin");
    }
  } else if (split == "test") {
    append_records(ds, dir + "/test_batch.bin");
  } else {
    throw ValueError("cifar10 split must be 'train' or 'test', got '" + split + "'");
  }
  return ds;
}

void write_cifar_batches(const LabeledDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write_range = [&](const std::string& path, std::size_t lo, std::size_t hi) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    for (std::size_t i = lo; i < hi; ++i) {
      const auto rec = serialize_cifar_record(ds.images[i], ds.labels[i]);
      f.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
    if (!f) throw IoError("short write to " + path);
  };
  if (ds.split == "test") {
    write_range(dir + "/test_batch.bin", 0, ds.size());
    return;
  }
  const std::size_t per_file = (ds.size() + 4) / 5;
  for (int i = 0; i < 5; ++i) {
    const std::size_t lo = std::min(ds.size(), static_cast<std::size_t>(i) * per_file);
    const std::size_t hi = std::min(ds.size(), lo + per_file);
    write_range(dir + "/data_batch_" + std::to_string(i + 1) + ".bin", lo, hi);
  }
}

namespace {

void fill_hsv(Image& img, int x, int y, double h, double s, double v) {
  double r, g, b;
  hsv_to_rgb(h - std::floor(h), s, v, r, g, b);
  img.set(x, y, 0, static_cast<std::uint8_t>(std::clamp(std::lround(r * 255.0), 0L, 255L)));
  img.set(x, y, 1, static_cast<std::uint8_t>(std::clamp(std::lround(g * 255.0), 0L, 255L)));
  img.set(x, y, 2, static_cast<std::uint8_t>(std::clamp(std::lround(b * 255.0), 0L, 255L)));
}

}  // namespace

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  LabeledDataset ds;
  ds.num_classes = spec.num_classes;
  ds.split = "synthetic";
  const int s = spec.image_size;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const double base_hue = static_cast<double>(cls) / spec.num_classes;
    const int shape = cls % 5;  // disk, square, triangle, plus, ring
    for (int inst = 0; inst < spec.per_class; ++inst) {
      Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(cls),
                       static_cast<std::uint64_t>(inst)));
      const double hue = base_hue + rng.uniform(-0.03, 0.03);
      const double fg_val = rng.uniform(0.8, 1.0);
      const double bg_val = rng.uniform(0.15, 0.3);
      const double cx = s * (0.5 + rng.uniform(-0.1, 0.1));
      const double cy = s * (0.5 + rng.uniform(-0.1, 0.1));
      const double radius = s * rng.uniform(0.22, 0.3);

      Image img = make_image(s, s);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          fill_hsv(img, x, y, hue + 0.5, 0.25, bg_val + 0.02 * rng.uniform());
        }
      }
      auto inside = [&](double px, double py) {
        const double dx = px - cx, dy = py - cy;
        switch (shape) {
          case 0: return dx * dx + dy * dy <= radius * radius;
          case 1: return std::abs(dx) <= radius && std::abs(dy) <= radius;
          case 2:  // upward triangle
            return dy >= -radius && dy <= radius && std::abs(dx) <= (dy + radius) / 2.0;
          case 3:  // plus sign
            return (std::abs(dx) <= radius * 0.35 && std::abs(dy) <= radius) ||
                   (std::abs(dy) <= radius * 0.35 && std::abs(dx) <= radius);
          default: {  // ring
            const double d2 = dx * dx + dy * dy;
            return d2 <= radius * radius && d2 >= 0.36 * radius * radius;
          }
        }
      };
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if (inside(x + 0.5, y + 0.5)) fill_hsv(img, x, y, hue, 0.9, fg_val);
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

std::vector<std::vector<std::int64_t>> batch_sampler(std::int64_t n_items, std::int64_t batch_size,
                                                     std::int64_t epoch, std::uint64_t seed) {
  if (batch_size < 2) throw ValueError("batch_size must be >= 2");
  if (n_items < 0) throw ValueError("n_items must be >= 0");
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n_items));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 0x7368756666ULL));  // "shuff"
  rng.shuffle(perm);
  std::vector<std::vector<std::int64_t>> batches;
  for (std::int64_t lo = 0; lo + batch_size <= n_items; lo += batch_size) {
    batches.emplace_back(perm.begin() + lo, perm.begin() + lo + batch_size);
  }
  return batches;
}

ChannelStats compute_channel_stats(std::span<const Image> images) {
  if (images.empty()) throw ValueError("compute_channel_stats needs at least one image");
  std::array<double, 3> sum{0, 0, 0}, sum_sq{0, 0, 0};
  std::int64_t count = 0;
  for (const Image& img : images) {
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.pixels[i + static_cast<std::size_t>(c)] / 255.0;
        sum[static_cast<std::size_t>(c)] += v;
        sum_sq[static_cast<std::size_t>(c)] += v * v;
      }
    }
    count += static_cast<std::int64_t>(img.pixels.size() / 3);
  }
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[static_cast<std::size_t>(c)] / static_cast<double>(count);
    const double var =
        std::max(0.0, sum_sq[static_cast<std::size_t>(c)] / static_cast<double>(count) - mean * mean);
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.stddev[static_cast<std::size_t>(c)] = std::max(std::sqrt(var), 1e-8);
  }
  return stats;
}

}  // namespace aag
