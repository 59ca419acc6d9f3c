#include "aag/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace aag {

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void check(const Image& img, const char* who) {
  if (!img.valid()) throw DimensionError(std::string(who) + ": invalid image");
}

}  // namespace

Image make_image(int width, int height, std::uint8_t fill) {
  if (width < 1 || height < 1) throw DimensionError("make_image: size must be >= 1");
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width) * height * 3, fill);
  return img;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  check(img, "resize_bilinear");
  if (out_w < 1 || out_h < 1) throw DimensionError("resize_bilinear: output size must be >= 1");
  if (out_w == img.width && out_h == img.height) return img;
  Image out = make_image(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.set(x, y, c, clamp_u8((1 - wy) * top + wy * bot));
      }
    }
  }
  return out;
}

Image crop(const Image& img, int x, int y, int w, int h) {
  check(img, "crop");
  if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > img.width || y + h > img.height) {
    throw DimensionError("crop rectangle outside image");
  }
  Image out = make_image(w, h);
  for (int yy = 0; yy < h; ++yy) {
    const std::uint8_t* src = &img.pixels[(static_cast<std::size_t>(y + yy) * img.width + x) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3,
              &out.pixels[static_cast<std::size_t>(yy) * w * 3]);
  }
  return out;
}

Image hflip(const Image& img) {
  check(img, "hflip");
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.set(x, y, c, img.at(img.width - 1 - x, y, c));
    }
  }
  return out;
}

Image to_grayscale(const Image& img) {
  check(img, "to_grayscale");
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t g = clamp_u8(luma(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)));
      for (int c = 0; c < 3; ++c) out.set(x, y, c, g);
    }
  }
  return out;
}

Image adjust_brightness(const Image& img, double factor) {
  check(img, "adjust_brightness");
  if (factor < 0) throw ValueError("brightness factor must be >= 0");
  Image out = make_image(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(factor * img.pixels[i]);
  }
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  check(img, "adjust_contrast");
  if (factor < 0) throw ValueError("contrast factor must be >= 0");
  double mean = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      mean += luma(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
    }
  }
  mean /= static_cast<double>(img.width) * img.height;
  Image out = make_image(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(mean + factor * (img.pixels[i] - mean));
  }
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  check(img, "adjust_saturation");
  if (factor < 0) throw ValueError("saturation factor must be >= 0");
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double g = luma(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
      for (int c = 0; c < 3; ++c) {
        out.set(x, y, c, clamp_u8(g + factor * (img.at(x, y, c) - g)));
      }
    }
  }
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  const double d = mx - mn;
  s = mx == 0 ? 0 : d / mx;
  if (d == 0) {
    h = 0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
  if (h < 0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

Image adjust_hue(const Image& img, double delta) {
  check(img, "adjust_hue");
  if (delta < -0.5 || delta > 0.5) throw ValueError("hue delta must be in [-0.5, 0.5]");
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double h, s, v, r, g, b;
      rgb_to_hsv(img.at(x, y, 0) / 255.0, img.at(x, y, 1) / 255.0, img.at(x, y, 2) / 255.0, h, s,
                 v);
      double nh = std::fmod(h + delta, 1.0);
      if (nh < 0) nh += 1.0;
      hsv_to_rgb(nh, s, v, r, g, b);
      out.set(x, y, 0, clamp_u8(r * 255.0));
      out.set(x, y, 1, clamp_u8(g * 255.0));
      out.set(x, y, 2, clamp_u8(b * 255.0));
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  check(img, "gaussian_blur");
  if (!(sigma > 0)) throw ValueError("blur sigma must be > 0");
  int ksize = static_cast<int>(std::ceil(4.0 * sigma));
  if (ksize % 2 == 0) ++ksize;
  if (ksize < 1) ksize = 1;
  const int r = ksize / 2;
  std::vector<double> kernel(static_cast<std::size_t>(ksize));
  double norm = 0;
  for (int i = -r; i <= r; ++i) {
    kernel[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + r)];
  }
  for (auto& k : kernel) k /= norm;

  // Horizontal then vertical pass, float intermediate, replicate border.
  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          const int xx = std::clamp(x + i, 0, img.width - 1);
          acc += kernel[static_cast<std::size_t>(i + r)] * img.at(xx, y, c);
        }
        tmp[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = acc;
      }
    }
  }
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          const int yy = std::clamp(y + i, 0, img.height - 1);
          acc += kernel[static_cast<std::size_t>(i + r)] *
                 tmp[(static_cast<std::size_t>(yy) * img.width + x) * 3 + c];
        }
        out.set(x, y, c, clamp_u8(acc));
      }
    }
  }
  return out;
}

Image affine_warp(const Image& img, const std::array<double, 6>& inv, std::uint8_t fill) {
  check(img, "affine_warp");
  Image out = make_image(img.width, img.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double sx = inv[0] * x + inv[1] * y + inv[2];
      const double sy = inv[3] * x + inv[4] * y + inv[5];
      if (sx < 0 || sy < 0 || sx > img.width - 1 || sy > img.height - 1) {
        for (int c = 0; c < 3; ++c) out.set(x, y, c, fill);
        continue;
      }
      const int x0 = std::min(static_cast<int>(std::floor(sx)), img.width - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), img.height - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double wx = sx - x0, wy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.set(x, y, c, clamp_u8((1 - wy) * top + wy * bot));
      }
    }
  }
  return out;
}

void write_ppm(const std::string& path, const Image& img) {
  check(img, "write_ppm");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw IoError("short write to " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw DataError(path + ": not a P6 ppm");
  auto next_int = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    for (;;) {
      const int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(ch)) {
        f.get();
      } else {
        break;
      }
    }
    int v = -1;
    f >> v;
    if (!f || v < 0) throw DataError(path + ": bad ppm header");
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw DataError(path + ": only maxval 255 supported");
  f.get();  // single whitespace after maxval
  Image img = make_image(w, h);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw IoError(path + ": truncated pixel data at offset " +
                  std::to_string(static_cast<long long>(f.gcount())));
  }
  return img;
}

}  // namespace aag
