#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aag/error.hpp"
#include "aag/image.hpp"
#include "aag/rng.hpp"
#include "aag/tensor.hpp"

namespace aag {

// Labels exist for evaluation only; the training loop receives bare images.
struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string split;

  std::size_t size() const { return images.size(); }
};

// Standard binary format: 3073-byte records, 1 label byte then 3x1024
// channel-planar pixels (R plane, G plane, B plane, each 32x32 row-major).
constexpr std::size_t kCifarRecordBytes = 3073;

LabeledDataset load_cifar10(const std::string& dir, const std::string& split);

std::array<std::uint8_t, kCifarRecordBytes> serialize_cifar_record(const Image& img, int label);
Image parse_cifar_pixels(const std::uint8_t* planes);

// Writes data_batch_1..5.bin (train) or test_batch.bin (test) under dir,
// spreading records evenly over the train files.
void write_cifar_batches(const LabeledDataset& ds, const std::string& dir);

struct SyntheticSpec {
  int num_classes = 10;
  int per_class = 50;
  int image_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 1 || per_class < 1) throw ConfigError("synthetic counts must be >= 1");
    if (image_size < 4) throw ConfigError("synthetic image_size must be >= 4");
  }
};

// Colored-shape generator: each class owns a base hue and one of five shape
// kinds; instances jitter position, size, hue, and background.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

// Seeded per-epoch permutation chunked into fixed-size batches; the final
// short batch is dropped.
std::vector<std::vector<std::int64_t>> batch_sampler(std::int64_t n_items, std::int64_t batch_size,
                                                     std::int64_t epoch, std::uint64_t seed);

struct ChannelStats {
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> stddev{1, 1, 1};
};

// Statistics of pixel values scaled to [0,1], over the given images.
ChannelStats compute_channel_stats(std::span<const Image> images);

// [n,3,h,w] tensor: pixel/255 standardized per channel.
template <class T>
Tensor<T> to_input_tensor(std::span<const Image> images, const ChannelStats& stats) {
  if (images.empty()) throw ValueError("to_input_tensor needs at least one image");
  const int w = images[0].width, h = images[0].height;
  Tensor<T> out = Tensor<T>::zeros({static_cast<std::int64_t>(images.size()), 3, h, w});
  T* p = out.data_ptr();
  for (const Image& img : images) {
    if (img.width != w || img.height != h) {
      throw DimensionError("to_input_tensor images must share a size");
    }
    for (int c = 0; c < 3; ++c) {
      const T mean = static_cast<T>(stats.mean[static_cast<std::size_t>(c)]);
      const T inv_std = static_cast<T>(1.0 / stats.stddev[static_cast<std::size_t>(c)]);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          *p++ = (static_cast<T>(img.at(x, y, c)) / T(255) - mean) * inv_std;
        }
      }
    }
  }
  return out;
}

}  // namespace aag
