#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "aag/error.hpp"
#include "aag/image.hpp"
#include "aag/rng.hpp"

namespace aag {

enum class AuxOp {
  Rotate,
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  AutoContrast,
  Invert,
  Equalize,
  Solarize,
  Posterize,
  Contrast,
  Brightness,
  Color,
  Sharpness,
  Cutout,
};

AuxOp parse_aux_op(const std::string& name);
const char* to_string(AuxOp op);

// Ops whose effect has a direction; the sampler draws a sign for these.
bool aux_op_signable(AuxOp op);

// Default pool: every supported op except invert (too destructive for a
// default policy; it stays available by name).
std::vector<AuxOp> default_randaugment_pool();

struct BasicPolicy {
  std::pair<double, double> crop_scale_range{0.2, 1.0};
  double jitter_strength = 0.4;
  double grayscale_prob = 0.2;
  double flip_prob = 0.5;
  double blur_prob = 0.5;
  std::pair<double, double> blur_sigma_range{0.1, 2.0};
  int output_size = 32;

  void validate() const;
};

// One AutoAugment sub-policy: two (op, probability, magnitude) steps.
struct SubPolicy {
  struct Step {
    AuxOp op = AuxOp::Rotate;
    double probability = 0.0;
    int magnitude = 0;
  };
  std::array<Step, 2> steps;
};

struct AuxPolicy {
  int num_ops = 2;
  int magnitude = 10;  // level in [0, 30]
  std::vector<AuxOp> op_pool = default_randaugment_pool();
  std::vector<SubPolicy> auto_policies;  // non-empty switches to AutoAugment mode
  std::pair<double, double> crop_scale_range{0.2, 1.0};
  int output_size = 32;

  void validate() const;
};

struct ViewTriplet {
  Image core1, core2, aux;
};

enum class ViewScheme { ThreeView, TwoBasic, ThreeBasic };

ViewScheme parse_view_scheme(const std::string& name);
const char* to_string(ViewScheme scheme);

// Draws, in order: per attempt (up to 10) a scale fraction, a log-uniform
// aspect in [3/4, 4/3], and, if the rectangle fits, its two corner offsets.
// Falls back to the full frame when no attempt fits.
Image random_resized_crop(const Image& img, std::pair<double, double> scale_range, int out_size,
                          Rng& rng);

// The five-op pipeline, in order: random resized crop, color jitter
// (brightness, contrast, saturation, hue), random grayscale, random
// horizontal flip, random gaussian blur.
Image basic_augment(const Image& img, const BasicPolicy& policy, Rng& rng);

// RandAugment mode: num_ops pool draws (uniform with replacement), a sign
// draw for each signable op, then random resized crop. AutoAugment mode: one
// sub-policy draw, then per step a probability draw and a sign draw when the
// step applies and its op is signable, then the crop.
Image aux_augment(const Image& img, const AuxPolicy& policy, Rng& rng);

// Deterministic op application in the positive direction.
Image apply_aux_op(AuxOp op, int magnitude, const Image& img);
// sign must be +1 or -1; only signable ops are affected by it.
Image apply_aux_op_signed(AuxOp op, int magnitude, int sign, const Image& img);

// Derives three child streams from rng (three next_u64 draws, always all
// three so every scheme consumes identically), then builds the views the
// scheme asks for: core1/core2 via the basic policy; aux via the aux policy
// (ThreeView), a third basic draw (ThreeBasic), or nothing (TwoBasic).
ViewTriplet make_views(const Image& img, const BasicPolicy& basic, const AuxPolicy& aux,
                       ViewScheme scheme, Rng& rng);

ViewTriplet make_triplet(const Image& img, const BasicPolicy& basic, const AuxPolicy& aux,
                         Rng& rng);

// JSON file: array of sub-policies, each an array of exactly two
// {"op", "probability", "magnitude"} objects.
std::vector<SubPolicy> load_auto_policies(const std::string& path);

}  // namespace aag
