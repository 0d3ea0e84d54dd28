// Copyright 2026 The Plasmo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "plasmo/image.hpp"
#include "plasmo/imgproc.hpp"
#include "fixtures.hpp"
#include "testkit.hpp"

using namespace plasmo;

namespace {

Image gray(int w, int h, std::uint8_t fill = 0) { return Image(w, h, 1, fill); }

Image smear(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img = testkit::background(96, 96, rng);
  testkit::draw_cell(img, 30, 34, 22, true, rng);
  testkit::draw_cell(img, 68, 60, 24, false, rng);
  return img;
}

double total_variation(const Image& img) {
  double tv = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        if (x + 1 < img.width) tv += std::abs(img.at(x + 1, y, c) - img.at(x, y, c));
        if (y + 1 < img.height) tv += std::abs(img.at(x, y + 1, c) - img.at(x, y, c));
      }
  return tv;
}

}  // namespace

TEST(ImageCodec, PngRoundTrip) {
  Image img(2, 2, 3);
  const std::uint8_t px[] = {1, 2, 3, 250, 128, 0, 17, 99, 200, 255, 255, 255};
  std::copy(std::begin(px), std::end(px), img.pixels.begin());
  EXPECT_EQ(decode_image(encode_png(img)), img);
  const Image g = gray(3, 1, 77);
  EXPECT_EQ(decode_image(encode_png(g)), g);
}

TEST(ImageCodec, TruncatedAndGarbageAreFormatErrors) {
  std::vector<std::uint8_t> bytes = encode_png(smear(1));
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(decode_image(bytes), FormatError);
  const std::vector<std::uint8_t> junk{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'};
  EXPECT_THROW(decode_image(junk), FormatError);
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>{}), FormatError);
}

TEST(ImageCodec, JpegHeaderDimensions) {
  std::mt19937_64 rng(4);
  const Image img = testkit::background(75, 75, rng);
  const Image back = decode_image(encode_jpeg(img));
  EXPECT_EQ(back.width, 75);
  EXPECT_EQ(back.height, 75);
  EXPECT_EQ(back.channels, 3);
}

TEST(Resize, SameSizeIsIdentity) {
  const Image img = smear(2);
  EXPECT_EQ(resize_bilinear(img, img.width, img.height), img);
}

TEST(Resize, ConstantStaysConstant) {
  const Image img(13, 7, 3, 141);
  for (auto [w, h] : {std::pair{1, 1}, {75, 75}, {5, 40}}) {
    const Image out = resize_bilinear(img, w, h);
    EXPECT_EQ(out.width, w);
    EXPECT_EQ(out.height, h);
    for (auto v : out.pixels) EXPECT_EQ(v, 141);
  }
}

TEST(Resize, TwoPixelRowMatchesFormula) {
  Image row = gray(2, 1);
  row.at(1, 0) = 200;
  const Image out = resize_bilinear(row, 4, 1);
  const double src[2] = {0, 200};
  for (int d = 0; d < 4; ++d) {
    double s = (d + 0.5) * 2.0 / 4.0 - 0.5;
    s = std::clamp(s, 0.0, 1.0);
    const int x0 = static_cast<int>(std::floor(s));
    const int x1 = std::min(x0 + 1, 1);
    const double expect = src[x0] + (src[x1] - src[x0]) * (s - x0);
    EXPECT_EQ(out.at(d, 0), static_cast<int>(std::lround(expect))) << d;
  }
  for (int d = 1; d < 4; ++d) EXPECT_GE(out.at(d, 0), out.at(d - 1, 0));
  EXPECT_LE(out.at(0, 0), 1);
  EXPECT_GE(out.at(3, 0), 199);
}

TEST(Resize, NonPositiveSizeThrows) {
  EXPECT_THROW(resize_bilinear(gray(4, 4), 0, 3), Error);
}

TEST(GaussianKernel, SumsToOneAndIsSymmetric) {
  EXPECT_DOUBLE_EQ(default_gaussian_sigma(7), 1.4);
  for (auto [size, sigma] : {std::pair{7, 1.4}, {3, 0.5}, {9, 2.7}}) {
    const auto k = gaussian_kernel(size, sigma);
    ASSERT_EQ(k.size(), static_cast<std::size_t>(size * size));
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        EXPECT_EQ(k[i * size + j], k[j * size + i]);
        EXPECT_EQ(k[i * size + j], k[(size - 1 - i) * size + j]);
      }
  }
}

TEST(GaussianKernel, MatchesDirectSummation) {
  const auto k = gaussian_kernel(7, 1.4);
  const auto ref = oracle::gaussian_2d(7, 1.4);
  double raw = 0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) raw += std::exp(-(x * x + y * y) / (2.0 * 1.4 * 1.4));
  EXPECT_NEAR(k[3 * 7 + 3], 1.0 / raw, 1e-15);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) EXPECT_NEAR(k[i * 7 + j], ref[i][j], 1e-15);
}

TEST(GaussianKernel, EvenSizeThrows) {
  EXPECT_THROW(gaussian_kernel(6, 1.0), ParameterError);
  EXPECT_THROW(gaussian_kernel(5, 0.0), ParameterError);
}

TEST(GaussianBlur, ConstantUnchangedAndDimsKept) {
  const Image img(20, 11, 3, 93);
  const Image out = gaussian_blur(img, PreprocessConfig{});
  EXPECT_EQ(out, img);
}

TEST(GaussianBlur, BrightPixelMatchesDirectConvolution) {
  Image img = gray(21, 21);
  img.at(10, 10) = 255;
  const Image out = gaussian_blur(img, 7, 1.4);
  const auto ref = oracle::gaussian_2d(7, 1.4);
  double sum = 0;
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x) {
      const int dx = x - 10, dy = y - 10;
      double expect = 0;
      if (std::abs(dx) <= 3 && std::abs(dy) <= 3) expect = 255.0 * ref[dy + 3][dx + 3];
      EXPECT_EQ(out.at(x, y), static_cast<int>(std::lround(expect))) << x << "," << y;
      sum += out.at(x, y);
    }
  EXPECT_LT(out.at(10, 10), 255);
  EXPECT_NEAR(sum, 255.0, 49 * 0.5);
}

TEST(GaussianBlur, SecondPassDoesNotRaiseTotalVariation) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const Image once = gaussian_blur(smear(seed), PreprocessConfig{});
    const Image twice = gaussian_blur(once, PreprocessConfig{});
    EXPECT_LE(total_variation(twice), total_variation(once)) << seed;
  }
}

TEST(Canny, ConstantImageHasNoEdges) {
  const Image e = canny(Image(30, 30, 3, 180), 80, 160);
  EXPECT_EQ(e.channels, 1);
  for (auto v : e.pixels) EXPECT_EQ(v, 0);
}

TEST(Canny, ThresholdOrderIsChecked) {
  EXPECT_THROW(canny(gray(8, 8), 160, 80), ParameterError);
  EXPECT_THROW(canny(gray(8, 8), 0, 80), ParameterError);
}

TEST(Canny, StepEdgeIsOnePixelColumn) {
  const Image img = testkit::step_edge_image();
  const Image e = canny(img, 80, 160);
  EXPECT_EQ(e, oracle::reference_canny(img, 80, 160));
  for (int y = 2; y < 28; ++y) {
    int count = 0, col = -1;
    for (int x = 2; x < 38; ++x)
      if (e.at(x, y)) ++count, col = x;
    EXPECT_EQ(count, 1) << "row " << y;
    EXPECT_TRUE(col == 16 || col == 17) << col;
  }
  for (auto v : e.pixels) EXPECT_TRUE(v == 0 || v == 255);
}

TEST(Canny, HysteresisKeepsConnectedWeakSegmentOnly) {
  const Image img = testkit::two_segment_image();
  const Image e = canny(img, 80, 160);
  EXPECT_EQ(e, oracle::reference_canny(img, 80, 160));
  const CannyTrace t = canny_trace(img, 80, 160);
  for (int x = 64; x < 96; ++x) {
    EXPECT_GE(t.magnitude[23 * 96 + x], 80.0f);
    EXPECT_LT(t.magnitude[23 * 96 + x], 160.0f);
    EXPECT_EQ(e.at(x, 23), 255) << x;
  }
  int weak_on_rectangle = 0;
  for (int y = 0; y < 18; ++y)
    for (int x = 25; x < 66; ++x) {
      EXPECT_EQ(e.at(x, y), 0) << x << "," << y;
      weak_on_rectangle += t.suppressed.at(x, y) ? 1 : 0;
    }
  EXPECT_GT(weak_on_rectangle, 0);
}

TEST(Canny, MatchesReferenceOnSmears) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const Image img = gaussian_blur(smear(seed), PreprocessConfig{});
    EXPECT_EQ(canny(img, 80, 160), oracle::reference_canny(img, 80, 160)) << seed;
    EXPECT_EQ(canny(img, 10, 30), oracle::reference_canny(img, 10, 30)) << seed;
  }
}

TEST(Canny, SuppressionIsThin) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Image img = gaussian_blur(smear(seed), PreprocessConfig{});
    const Image s = canny_trace(img, 10, 30).suppressed;
    for (int y = 1; y + 1 < s.height; ++y)
      for (int x = 1; x + 1 < s.width; ++x) {
        if (!s.at(x, y)) continue;
        const bool horiz = s.at(x - 1, y) && s.at(x + 1, y);
        const bool vert = s.at(x, y - 1) && s.at(x, y + 1);
        EXPECT_FALSE(horiz && vert) << x << "," << y;
      }
  }
}

TEST(InputTensor, ShapesPerMode) {
  const Image img = smear(3);
  PreprocessConfig cfg;
  EXPECT_EQ(build_input_tensor(img, cfg).shape(), (Shape{1, 4, 75, 75}));
  cfg.input_mode = InputMode::rgb;
  EXPECT_EQ(build_input_tensor(img, cfg).shape(), (Shape{1, 3, 75, 75}));
  cfg.input_mode = InputMode::edges;
  EXPECT_EQ(build_input_tensor(img, cfg).shape(), (Shape{1, 1, 75, 75}));
}

TEST(InputTensor, ValuesInUnitRange) {
  const Tensor t = build_input_tensor(smear(4), PreprocessConfig{});
  for (float v : t.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(InputTensor, RgbChannelsComeFromResizedImage) {
  const Image img = smear(5);
  const PreprocessConfig cfg;
  const Tensor t = build_input_tensor(img, cfg);
  const PreprocessedViews v = preprocess_views(img, cfg);
  for (int y = 0; y < 75; y += 7)
    for (int x = 0; x < 75; x += 5) {
      for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(t.at(0, c, y, x), v.resized.at(x, y, c) / 255.0f);
      EXPECT_FLOAT_EQ(t.at(0, 3, y, x), v.edges.at(x, y) / 255.0f);
    }
}

TEST(InputTensor, EdgesOfConstantImageAreZero) {
  PreprocessConfig cfg;
  cfg.input_mode = InputMode::edges;
  const Tensor t = build_input_tensor(Image(90, 60, 3, 200), cfg);
  for (float v : t.values()) EXPECT_EQ(v, 0.0f);
}

TEST(InputTensor, DeterministicFromBytes) {
  const std::vector<std::uint8_t> bytes = encode_png(smear(6));
  const Tensor a = build_input_tensor(bytes, PreprocessConfig{});
  const Tensor b = build_input_tensor(bytes, PreprocessConfig{});
  EXPECT_EQ(a, b);
}

TEST(PreprocessConfigTest, Validation) {
  PreprocessConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gaussian_kernel_size = 6;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.canny_low = 200;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_EQ(parse_input_mode(to_string(InputMode::edges)), InputMode::edges);
  EXPECT_THROW(parse_input_mode("xyz"), ParameterError);
}
