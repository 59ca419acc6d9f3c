#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aag/error.hpp"

namespace aag {

// 8-bit RGB raster, interleaved row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  bool valid() const {
    return width >= 1 && height >= 1 &&
           pixels.size() == static_cast<std::size_t>(width) * height * 3;
  }

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  void set(int x, int y, int c, std::uint8_t v) {
    pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] = v;
  }
};

Image make_image(int width, int height, std::uint8_t fill = 0);

// Bilinear resize; an unchanged size is an exact copy.
Image resize_bilinear(const Image& img, int out_w, int out_h);

// Axis-aligned crop; the rectangle must lie inside the image.
Image crop(const Image& img, int x, int y, int w, int h);

Image hflip(const Image& img);

// BT.601 luma replicated across channels.
Image to_grayscale(const Image& img);

Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
// delta in [-0.5, 0.5] turns of the hue circle.
Image adjust_hue(const Image& img, double delta);

// Odd kernel of size ceil(4*sigma) rounded up to odd, replicated border.
Image gaussian_blur(const Image& img, double sigma);

// Inverse-mapped affine warp: for each destination pixel (x, y) the source
// point is (c[0]x + c[1]y + c[2], c[3]x + c[4]y + c[5]); bilinear sample,
// fill for source points outside the frame.
Image affine_warp(const Image& img, const std::array<double, 6>& inv, std::uint8_t fill = 128);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// h, s, v and r, g, b all in [0, 1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace aag
