#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "aag/augment.hpp"
#include "aag/error.hpp"
#include "aag/image.hpp"
#include "aag/rng.hpp"

using namespace aag;

namespace {

// Deterministic non-constant content so spatial ops have structure to move.
Image gradient_image(int w, int h) {
  Image img = make_image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, 0, static_cast<std::uint8_t>((x * 7 + y * 3) % 256));
      img.set(x, y, 1, static_cast<std::uint8_t>((x * 5 + y * 11) % 256));
      img.set(x, y, 2, static_cast<std::uint8_t>((x * 13 + y * 17) % 256));
    }
  }
  return img;
}

Image random_image(Rng& rng, int w, int h) {
  Image img = make_image(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("make_image fills and rejects degenerate sizes") {
  Image img = make_image(4, 3, 9);
  CHECK(img.valid());
  CHECK(img.pixels.size() == 4u * 3u * 3u);
  CHECK(img.at(3, 2, 2) == 9);
  CHECK_THROWS_AS(make_image(0, 3), DimensionError);
  CHECK_THROWS_AS(make_image(3, -1), DimensionError);
}

TEST_CASE("resize to the same size is an exact copy") {
  Image img = gradient_image(13, 7);
  Image out = resize_bilinear(img, 13, 7);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("resize of 2x2 to a single pixel averages all four corners") {
  Image img = make_image(2, 2);
  img.set(0, 0, 0, 10);
  img.set(1, 0, 0, 20);
  img.set(0, 1, 0, 30);
  img.set(1, 1, 0, 40);
  Image out = resize_bilinear(img, 1, 1);
  CHECK(out.at(0, 0, 0) == 25);
}

TEST_CASE("resize of a constant image stays constant at any size") {
  Image img = make_image(8, 8, 77);
  for (auto [w, h] : {std::pair{3, 5}, {16, 16}, {1, 1}, {32, 7}}) {
    Image out = resize_bilinear(img, w, h);
    CHECK(out.width == w);
    CHECK(out.height == h);
    for (auto p : out.pixels) CHECK(p == 77);
  }
  CHECK_THROWS_AS(resize_bilinear(img, 0, 4), DimensionError);
}

TEST_CASE("crop extracts the exact sub-rectangle and rejects overflow") {
  Image img = gradient_image(10, 8);
  Image out = crop(img, 2, 3, 4, 5);
  CHECK(out.width == 4);
  CHECK(out.height == 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == img.at(x + 2, y + 3, c));
    }
  }
  CHECK_THROWS_AS(crop(img, 7, 0, 4, 4), DimensionError);
  CHECK_THROWS_AS(crop(img, 0, 5, 4, 4), DimensionError);
  CHECK_THROWS_AS(crop(img, -1, 0, 4, 4), DimensionError);
  CHECK_THROWS_AS(crop(img, 0, 0, 0, 4), DimensionError);
}

TEST_CASE("horizontal flip is an involution and mirrors columns") {
  Image img = gradient_image(9, 4);
  Image flipped = hflip(img);
  CHECK(flipped.at(0, 0, 0) == img.at(8, 0, 0));
  CHECK(flipped.at(8, 2, 1) == img.at(0, 2, 1));
  CHECK(hflip(flipped).pixels == img.pixels);
}

TEST_CASE("grayscale replicates BT.601 luma across channels") {
  Image img = make_image(3, 1);
  img.set(0, 0, 0, 255);  // pure red
  img.set(1, 0, 1, 255);  // pure green
  img.set(2, 0, 2, 255);  // pure blue
  Image g = to_grayscale(img);
  CHECK(g.at(0, 0, 0) == 76);   // round(0.299 * 255)
  CHECK(g.at(1, 0, 0) == 150);  // round(0.587 * 255)
  CHECK(g.at(2, 0, 0) == 29);   // round(0.114 * 255)
  Rng rng(5);
  Image noisy = random_image(rng, 12, 9);
  Image gray = to_grayscale(noisy);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      CHECK(gray.at(x, y, 0) == gray.at(x, y, 1));
      CHECK(gray.at(x, y, 1) == gray.at(x, y, 2));
    }
  }
}

TEST_CASE("brightness scales pixels and clamps") {
  Image img = make_image(2, 1, 100);
  img.set(1, 0, 0, 200);
  Image half = adjust_brightness(img, 0.5);
  CHECK(half.at(0, 0, 0) == 50);
  CHECK(half.at(1, 0, 0) == 100);
  Image doubled = adjust_brightness(img, 2.0);
  CHECK(doubled.at(0, 0, 0) == 200);
  CHECK(doubled.at(1, 0, 0) == 255);  // clamped from 400
  CHECK(adjust_brightness(img, 1.0).pixels == img.pixels);
  CHECK_THROWS_AS(adjust_brightness(img, -0.1), ValueError);
}

TEST_CASE("contrast at factor zero collapses to the mean luma") {
  Image img = gradient_image(6, 6);
  Image flat = adjust_contrast(img, 0.0);
  const std::uint8_t v = flat.pixels[0];
  for (auto p : flat.pixels) CHECK(p == v);
  CHECK(adjust_contrast(img, 1.0).pixels == img.pixels);
  CHECK_THROWS_AS(adjust_contrast(img, -1.0), ValueError);
}

TEST_CASE("saturation at factor zero equals grayscale") {
  Rng rng(17);
  Image img = random_image(rng, 8, 8);
  CHECK(adjust_saturation(img, 0.0).pixels == to_grayscale(img).pixels);
  CHECK(adjust_saturation(img, 1.0).pixels == img.pixels);
  CHECK_THROWS_AS(adjust_saturation(img, -0.5), ValueError);
}

TEST_CASE("hue shift of zero is the identity and range is enforced") {
  Rng rng(23);
  Image img = random_image(rng, 8, 8);
  CHECK(adjust_hue(img, 0.0).pixels == img.pixels);
  CHECK_THROWS_AS(adjust_hue(img, 0.6), ValueError);
  CHECK_THROWS_AS(adjust_hue(img, -0.51), ValueError);
}

TEST_CASE("hue shift by a third turn cycles pure primaries") {
  Image img = make_image(1, 1);
  img.set(0, 0, 0, 255);  // red, hue 0
  Image shifted = adjust_hue(img, 1.0 / 3.0);
  CHECK(shifted.at(0, 0, 0) == 0);
  CHECK(shifted.at(0, 0, 1) == 255);  // red lands on green
  CHECK(shifted.at(0, 0, 2) == 0);
}

TEST_CASE("rgb to hsv round trip recovers the original color") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
    double h, s, v, r2, g2, b2;
    rgb_to_hsv(r, g, b, h, s, v);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    hsv_to_rgb(h, s, v, r2, g2, b2);
    CHECK(r2 == doctest::Approx(r).epsilon(1e-9));
    CHECK(g2 == doctest::Approx(g).epsilon(1e-9));
    CHECK(b2 == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("blur of a constant image is constant") {
  Image img = make_image(16, 16, 93);
  for (double sigma : {0.3, 1.0, 2.0}) {
    Image out = gaussian_blur(img, sigma);
    for (auto p : out.pixels) CHECK(p == 93);
  }
  CHECK_THROWS_AS(gaussian_blur(img, 0.0), ValueError);
  CHECK_THROWS_AS(gaussian_blur(img, -1.0), ValueError);
}

TEST_CASE("tiny blur sigma yields a one-tap kernel, the identity") {
  // ceil(4 * 0.1) = 1, already odd: the kernel is a single center tap.
  Image img = gradient_image(10, 10);
  CHECK(gaussian_blur(img, 0.1).pixels == img.pixels);
}

TEST_CASE("blur spreads an impulse over the expected kernel radius") {
  // sigma 1.0: ceil(4) = 4 rounds up to 5 taps, radius 2.
  Image img = make_image(11, 11, 0);
  img.set(5, 5, 0, 255);
  Image out = gaussian_blur(img, 1.0);
  CHECK(out.at(5, 5, 0) > 0);
  CHECK(out.at(7, 5, 0) > 0);   // radius 2 reached
  CHECK(out.at(8, 5, 0) == 0);  // radius 3 untouched
  CHECK(out.at(5, 8, 0) == 0);
}

TEST_CASE("affine warp with the identity map copies the image") {
  Image img = gradient_image(12, 9);
  Image out = affine_warp(img, {1, 0, 0, 0, 1, 0});
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("affine warp fills out-of-frame samples with mid-gray") {
  Image img = make_image(6, 6, 200);
  // Source point x+100 is always outside a 6-wide frame.
  Image out = affine_warp(img, {1, 0, 100, 0, 1, 0});
  for (auto p : out.pixels) CHECK(p == 128);
  Image custom = affine_warp(img, {1, 0, 100, 0, 1, 0}, 7);
  for (auto p : custom.pixels) CHECK(p == 7);
}

TEST_CASE("affine warp by an integer shift relocates pixels exactly") {
  Image img = gradient_image(8, 8);
  // Destination (x, y) samples source (x+2, y): content slides left by 2.
  Image out = affine_warp(img, {1, 0, 2, 0, 1, 0});
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == img.at(x + 2, y, c));
    }
  }
  for (int y = 0; y < 8; ++y) {
    CHECK(out.at(6, y, 0) == 128);
    CHECK(out.at(7, y, 0) == 128);
  }
}

TEST_CASE("ppm write and read round-trips bytes exactly") {
  Rng rng(41);
  Image img = random_image(rng, 17, 5);
  const auto path = temp_file("aag_test_roundtrip.ppm");
  write_ppm(path.string(), img);
  Image back = read_ppm(path.string());
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove(path);
}

TEST_CASE("ppm reader skips header comments") {
  const auto path = temp_file("aag_test_comment.ppm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n# a comment line\n2 1\n# another\n255\n";
    const char px[6] = {1, 2, 3, 4, 5, 6};
    f.write(px, 6);
  }
  Image img = read_ppm(path.string());
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.at(1, 0, 2) == 6);
  std::filesystem::remove(path);
}

TEST_CASE("ppm reader rejects bad magic, bad maxval, and truncation") {
  const auto bad_magic = temp_file("aag_test_magic.ppm");
  {
    std::ofstream f(bad_magic, std::ios::binary);
    f << "P5\n2 2\n255\n";
  }
  CHECK_THROWS_AS(read_ppm(bad_magic.string()), DataError);
  std::filesystem::remove(bad_magic);

  const auto bad_maxval = temp_file("aag_test_maxval.ppm");
  {
    std::ofstream f(bad_maxval, std::ios::binary);
    f << "P6\n2 2\n65535\n";
  }
  CHECK_THROWS_AS(read_ppm(bad_maxval.string()), DataError);
  std::filesystem::remove(bad_maxval);

  const auto truncated = temp_file("aag_test_trunc.ppm");
  {
    std::ofstream f(truncated, std::ios::binary);
    f << "P6\n2 2\n255\n";
    const char px[5] = {1, 2, 3, 4, 5};  // needs 12 bytes
    f.write(px, 5);
  }
  try {
    read_ppm(truncated.string());
    CHECK(false);
  } catch (const IoError& e) {
    // The message names how far the pixel read got.
    CHECK(std::string(e.what()).find("offset 5") != std::string::npos);
  }
  std::filesystem::remove(truncated);

  CHECK_THROWS_AS(read_ppm("/nonexistent/path/img.ppm"), IoError);
}

TEST_CASE("every augmentation op preserves image validity and size") {
  Rng rng(55);
  Image img = random_image(rng, 16, 16);
  for (AuxOp op :
       {AuxOp::Rotate, AuxOp::ShearX, AuxOp::ShearY, AuxOp::TranslateX, AuxOp::TranslateY,
        AuxOp::AutoContrast, AuxOp::Invert, AuxOp::Equalize, AuxOp::Solarize, AuxOp::Posterize,
        AuxOp::Contrast, AuxOp::Brightness, AuxOp::Color, AuxOp::Sharpness, AuxOp::Cutout}) {
    Image out = apply_aux_op(op, 15, img);
    INFO("op ", to_string(op));
    CHECK(out.valid());
    CHECK(out.width == img.width);
    CHECK(out.height == img.height);
  }
}
