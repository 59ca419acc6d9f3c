#include "aag/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace aag {

namespace {

constexpr int kMaxLevel = 30;

struct OpName {
  AuxOp op;
  const char* name;
};

constexpr OpName kOpNames[] = {
    {AuxOp::Rotate, "rotate"},           {AuxOp::ShearX, "shear-x"},
    {AuxOp::ShearY, "shear-y"},          {AuxOp::TranslateX, "translate-x"},
    {AuxOp::TranslateY, "translate-y"},  {AuxOp::AutoContrast, "autocontrast"},
    {AuxOp::Invert, "invert"},           {AuxOp::Equalize, "equalize"},
    {AuxOp::Solarize, "solarize"},       {AuxOp::Posterize, "posterize"},
    {AuxOp::Contrast, "contrast"},       {AuxOp::Brightness, "brightness"},
    {AuxOp::Color, "color"},             {AuxOp::Sharpness, "sharpness"},
    {AuxOp::Cutout, "cutout"},
};

double level_fraction(int magnitude) {
  if (magnitude < 0 || magnitude > kMaxLevel) {
    throw ValueError("aux op magnitude must be in [0, 30], got " + std::to_string(magnitude));
  }
  return static_cast<double>(magnitude) / kMaxLevel;
}

std::uint8_t clamp_u8(long v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
}

Image map_pixels(const Image& img, const std::array<std::uint8_t, 256> (&lut)[3]) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = lut[i % 3][out.pixels[i]];
  }
  return out;
}

Image per_channel_lut(const Image& img, const std::array<std::uint8_t, 256>& lut) {
  Image out = img;
  for (auto& p : out.pixels) p = lut[p];
  return out;
}

Image op_invert(const Image& img) {
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(255 - i);
  return per_channel_lut(img, lut);
}

Image op_solarize(const Image& img, int threshold) {
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) {
    lut[static_cast<std::size_t>(i)] =
        i >= threshold ? static_cast<std::uint8_t>(255 - i) : static_cast<std::uint8_t>(i);
  }
  return per_channel_lut(img, lut);
}

Image op_posterize(const Image& img, int bits) {
  const std::uint8_t mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i & mask);
  return per_channel_lut(img, lut);
}

Image op_autocontrast(const Image& img) {
  std::array<std::uint8_t, 256> lut[3];
  for (int c = 0; c < 3; ++c) {
    int lo = 255, hi = 0;
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3) {
      lo = std::min(lo, static_cast<int>(img.pixels[i]));
      hi = std::max(hi, static_cast<int>(img.pixels[i]));
    }
    for (int i = 0; i < 256; ++i) {
      lut[c][static_cast<std::size_t>(i)] =
          hi <= lo ? static_cast<std::uint8_t>(i)
                   : clamp_u8(std::lround((i - lo) * 255.0 / (hi - lo)));
    }
  }
  return map_pixels(img, lut);
}

// Histogram equalization with the integer lut construction used by the
// common imaging libraries: step = (pixels - last nonzero bin) / 255,
// lut[i] = (step/2 + cumulative) / step.
Image op_equalize(const Image& img) {
  std::array<std::uint8_t, 256> lut[3];
  for (int c = 0; c < 3; ++c) {
    long hist[256] = {};
    for (std::size_t i = static_cast<std::size_t>(c); i < img.pixels.size(); i += 3) {
      ++hist[img.pixels[i]];
    }
    long total = 0, last_nonzero = 0;
    for (int i = 0; i < 256; ++i) {
      total += hist[i];
      if (hist[i] > 0) last_nonzero = hist[i];
    }
    const long step = (total - last_nonzero) / 255;
    if (step == 0) {
      for (int i = 0; i < 256; ++i) lut[c][static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    } else {
      long n = step / 2;
      for (int i = 0; i < 256; ++i) {
        lut[c][static_cast<std::size_t>(i)] = clamp_u8(n / step);
        n += hist[i];
      }
    }
  }
  return map_pixels(img, lut);
}

// 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on interior pixels, the
// one-pixel border copied through; then blend original toward it.
Image op_sharpness(const Image& img, double factor) {
  Image smooth = img;
  if (img.width >= 3 && img.height >= 3) {
    for (int y = 1; y < img.height - 1; ++y) {
      for (int x = 1; x < img.width - 1; ++x) {
        for (int c = 0; c < 3; ++c) {
          double acc = 5.0 * img.at(x, y, c);
          acc += img.at(x - 1, y - 1, c) + img.at(x, y - 1, c) + img.at(x + 1, y - 1, c);
          acc += img.at(x - 1, y, c) + img.at(x + 1, y, c);
          acc += img.at(x - 1, y + 1, c) + img.at(x, y + 1, c) + img.at(x + 1, y + 1, c);
          smooth.set(x, y, c, clamp_u8(std::lround(acc / 13.0)));
        }
      }
    }
  }
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = smooth.pixels[i] + factor * (img.pixels[i] - smooth.pixels[i]);
    out.pixels[i] = clamp_u8(std::lround(v));
  }
  return out;
}

Image op_cutout(const Image& img, double side_fraction) {
  const int side = static_cast<int>(std::lround(side_fraction * std::min(img.width, img.height)));
  if (side <= 0) return img;
  Image out = img;
  const int x0 = std::max(0, (img.width - side) / 2);
  const int y0 = std::max(0, (img.height - side) / 2);
  const int x1 = std::min(img.width, x0 + side);
  const int y1 = std::min(img.height, y0 + side);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int c = 0; c < 3; ++c) out.set(x, y, c, 128);
    }
  }
  return out;
}

Image op_rotate(const Image& img, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  // Inverse map centered at the image middle.
  return affine_warp(img, {cs, sn, cx - cs * cx - sn * cy, -sn, cs, cy + sn * cx - cs * cy});
}

Image op_shear(const Image& img, double factor, bool horizontal) {
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  if (horizontal) {
    return affine_warp(img, {1.0, factor, -factor * cy, 0.0, 1.0, 0.0});
  }
  return affine_warp(img, {1.0, 0.0, 0.0, factor, 1.0, -factor * cx});
}

Image op_translate(const Image& img, double fraction, bool horizontal) {
  const double shift_x = horizontal ? fraction * img.width : 0.0;
  const double shift_y = horizontal ? 0.0 : fraction * img.height;
  return affine_warp(img, {1.0, 0.0, -shift_x, 0.0, 1.0, -shift_y});
}

}  // namespace

AuxOp parse_aux_op(const std::string& name) {
  for (const auto& e : kOpNames) {
    if (name == e.name) return e.op;
  }
  throw ConfigError("unknown augmentation op '" + name + "'");
}

const char* to_string(AuxOp op) {
  for (const auto& e : kOpNames) {
    if (e.op == op) return e.name;
  }
  throw ValueError("bad AuxOp value");
}

bool aux_op_signable(AuxOp op) {
  switch (op) {
    case AuxOp::Rotate:
    case AuxOp::ShearX:
    case AuxOp::ShearY:
    case AuxOp::TranslateX:
    case AuxOp::TranslateY:
    case AuxOp::Contrast:
    case AuxOp::Brightness:
    case AuxOp::Color:
    case AuxOp::Sharpness:
      return true;
    default:
      return false;
  }
}

std::vector<AuxOp> default_randaugment_pool() {
  std::vector<AuxOp> pool;
  for (const auto& e : kOpNames) {
    if (e.op != AuxOp::Invert) pool.push_back(e.op);
  }
  return pool;
}

void BasicPolicy::validate() const {
  if (!(crop_scale_range.first > 0) || crop_scale_range.first > crop_scale_range.second ||
      crop_scale_range.second > 1.0) {
    throw ConfigError("basic crop_scale_range must satisfy 0 < lo <= hi <= 1");
  }
  for (double p : {grayscale_prob, flip_prob, blur_prob}) {
    if (p < 0 || p > 1) throw ConfigError("basic policy probabilities must be in [0,1]");
  }
  if (jitter_strength < 0) throw ConfigError("basic jitter_strength must be >= 0");
  if (!(blur_sigma_range.first > 0) || blur_sigma_range.first > blur_sigma_range.second) {
    throw ConfigError("basic blur_sigma_range must satisfy 0 < lo <= hi");
  }
  if (output_size < 1) throw ConfigError("basic output_size must be >= 1");
}

void AuxPolicy::validate() const {
  if (num_ops < 1) throw ConfigError("aux num_ops must be >= 1");
  if (magnitude < 0 || magnitude > kMaxLevel) throw ConfigError("aux magnitude must be in [0, 30]");
  if (op_pool.empty() && auto_policies.empty()) {
    throw ConfigError("aux op_pool must be non-empty");
  }
  for (const auto& sp : auto_policies) {
    for (const auto& step : sp.steps) {
      if (step.probability < 0 || step.probability > 1) {
        throw ConfigError("auto policy probabilities must be in [0,1]");
      }
      if (step.magnitude < 0 || step.magnitude > kMaxLevel) {
        throw ConfigError("auto policy magnitudes must be in [0, 30]");
      }
    }
  }
  if (!(crop_scale_range.first > 0) || crop_scale_range.first > crop_scale_range.second ||
      crop_scale_range.second > 1.0) {
    throw ConfigError("aux crop_scale_range must satisfy 0 < lo <= hi <= 1");
  }
  if (output_size < 1) throw ConfigError("aux output_size must be >= 1");
}

ViewScheme parse_view_scheme(const std::string& name) {
  if (name == "three_view") return ViewScheme::ThreeView;
  if (name == "two_basic") return ViewScheme::TwoBasic;
  if (name == "three_basic") return ViewScheme::ThreeBasic;
  throw ConfigError("unknown view_scheme '" + name +
                    "' (expected three_view, two_basic, or three_basic)");
}

const char* to_string(ViewScheme scheme) {
  switch (scheme) {
    case ViewScheme::ThreeView: return "three_view";
    case ViewScheme::TwoBasic: return "two_basic";
    default: return "three_basic";
  }
}

Image random_resized_crop(const Image& img, std::pair<double, double> scale_range, int out_size,
                          Rng& rng) {
  const double area = static_cast<double>(img.width) * img.height;
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale_range.first, scale_range.second);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w >= 1 && h >= 1 && w <= img.width && h <= img.height) {
      const int x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.width - w + 1)));
      const int y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.height - h + 1)));
      return resize_bilinear(crop(img, x, y, w, h), out_size, out_size);
    }
  }
  return resize_bilinear(img, out_size, out_size);
}

Image basic_augment(const Image& img, const BasicPolicy& policy, Rng& rng) {
  policy.validate();
  Image out = random_resized_crop(img, policy.crop_scale_range, policy.output_size, rng);

  const double s = policy.jitter_strength;
  const double b = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  const double c = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  const double sat = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  const double hue = rng.uniform(-s / 4.0, s / 4.0);
  out = adjust_brightness(out, b);
  out = adjust_contrast(out, c);
  out = adjust_saturation(out, sat);
  out = adjust_hue(out, hue);

  if (rng.bernoulli(policy.grayscale_prob)) out = to_grayscale(out);
  if (rng.bernoulli(policy.flip_prob)) out = hflip(out);
  if (rng.bernoulli(policy.blur_prob)) {
    out = gaussian_blur(out, rng.uniform(policy.blur_sigma_range.first, policy.blur_sigma_range.second));
  }
  return out;
}

Image apply_aux_op_signed(AuxOp op, int magnitude, int sign, const Image& img) {
  if (sign != 1 && sign != -1) throw ValueError("aux op sign must be +1 or -1");
  const double t = level_fraction(magnitude) * sign;
  switch (op) {
    case AuxOp::Rotate: return op_rotate(img, 30.0 * t);
    case AuxOp::ShearX: return op_shear(img, 0.3 * t, true);
    case AuxOp::ShearY: return op_shear(img, 0.3 * t, false);
    case AuxOp::TranslateX: return op_translate(img, 0.3 * t, true);
    case AuxOp::TranslateY: return op_translate(img, 0.3 * t, false);
    case AuxOp::AutoContrast: return op_autocontrast(img);
    case AuxOp::Invert: return op_invert(img);
    case AuxOp::Equalize: return op_equalize(img);
    case AuxOp::Solarize:
      return op_solarize(img, static_cast<int>(std::lround(256.0 * (1.0 - level_fraction(magnitude)))));
    case AuxOp::Posterize:
      return op_posterize(img, 8 - static_cast<int>(std::lround(4.0 * level_fraction(magnitude))));
    case AuxOp::Contrast: return adjust_contrast(img, 1.0 + 0.9 * t);
    case AuxOp::Brightness: return adjust_brightness(img, 1.0 + 0.9 * t);
    case AuxOp::Color: return adjust_saturation(img, 1.0 + 0.9 * t);
    case AuxOp::Sharpness: return op_sharpness(img, 1.0 + 0.9 * t);
    case AuxOp::Cutout: return op_cutout(img, 0.5 * level_fraction(magnitude));
  }
  throw ValueError("bad AuxOp value");
}

Image apply_aux_op(AuxOp op, int magnitude, const Image& img) {
  return apply_aux_op_signed(op, magnitude, 1, img);
}

Image aux_augment(const Image& img, const AuxPolicy& policy, Rng& rng) {
  policy.validate();
  Image out = img;
  if (!policy.auto_policies.empty()) {
    const auto& sp = policy.auto_policies[rng.uniform_int(policy.auto_policies.size())];
    for (const auto& step : sp.steps) {
      if (!rng.bernoulli(step.probability)) continue;
      int sign = 1;
      if (aux_op_signable(step.op)) sign = rng.bernoulli(0.5) ? -1 : 1;
      out = apply_aux_op_signed(step.op, step.magnitude, sign, out);
    }
  } else {
    for (int k = 0; k < policy.num_ops; ++k) {
      const AuxOp op = policy.op_pool[rng.uniform_int(policy.op_pool.size())];
      int sign = 1;
      if (aux_op_signable(op)) sign = rng.bernoulli(0.5) ? -1 : 1;
      out = apply_aux_op_signed(op, policy.magnitude, sign, out);
    }
  }
  return random_resized_crop(out, policy.crop_scale_range, policy.output_size, rng);
}

ViewTriplet make_views(const Image& img, const BasicPolicy& basic, const AuxPolicy& aux,
                       ViewScheme scheme, Rng& rng) {
  Rng r1(rng.next_u64());
  Rng r2(rng.next_u64());
  Rng r3(rng.next_u64());
  ViewTriplet t;
  t.core1 = basic_augment(img, basic, r1);
  t.core2 = basic_augment(img, basic, r2);
  if (scheme == ViewScheme::ThreeView) {
    t.aux = aux_augment(img, aux, r3);
  } else if (scheme == ViewScheme::ThreeBasic) {
    t.aux = basic_augment(img, basic, r3);
  }
  return t;
}

ViewTriplet make_triplet(const Image& img, const BasicPolicy& basic, const AuxPolicy& aux,
                         Rng& rng) {
  return make_views(img, basic, aux, ViewScheme::ThreeView, rng);
}

std::vector<SubPolicy> load_auto_policies(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open auto policy file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError(path + ": top level must be an array of sub-policies");
  std::vector<SubPolicy> out;
  for (const auto& sp : j) {
    if (!sp.is_array() || sp.size() != 2) {
      throw ConfigError(path + ": each sub-policy must be an array of two steps");
    }
    SubPolicy policy;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& step = sp[i];
      if (!step.is_object() || !step.contains("op") || !step.contains("probability") ||
          !step.contains("magnitude")) {
        throw ConfigError(path + ": each step needs op, probability, magnitude");
      }
      for (const auto& [key, value] : step.items()) {
        if (key != "op" && key != "probability" && key != "magnitude") {
          throw ConfigError(path + ": unknown step key '" + key + "'");
        }
      }
      policy.steps[i].op = parse_aux_op(step["op"].get<std::string>());
      policy.steps[i].probability = step["probability"].get<double>();
      policy.steps[i].magnitude = step["magnitude"].get<int>();
    }
    out.push_back(policy);
  }
  if (out.empty()) throw ConfigError(path + ": policy list is empty");
  return out;
}

}  // namespace aag
