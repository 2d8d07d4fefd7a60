#include "abibench/digits.hpp"

#include <array>
#include <cmath>

namespace abibench::sim {

namespace {

// 5x7 bitmap font, row strings top to bottom
constexpr std::array<std::array<const char*, 7>, 10> kFont{{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

double font_bilinear(int digit, double u, double v) {
  // u along the 5 columns, v along the 7 rows, both in [0, 1]
  const double fx = u * 4.0;
  const double fy = v * 6.0;
  const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, 4);
  const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, 6);
  const int x1 = std::min(x0 + 1, 4);
  const int y1 = std::min(y0 + 1, 6);
  const double wx = fx - static_cast<double>(x0);
  const double wy = fy - static_cast<double>(y0);
  auto bit = [&](int y, int x) {
    return kFont[static_cast<std::size_t>(digit)][static_cast<std::size_t>(y)][x] == '1' ? 1.0
                                                                                         : 0.0;
  };
  const double top = (1.0 - wx) * bit(y0, x0) + wx * bit(y0, x1);
  const double bot = (1.0 - wx) * bit(y1, x0) + wx * bit(y1, x1);
  return (1.0 - wy) * top + wy * bot;
}

}  // namespace

Matrix render_digit(int digit, rng::RngStream& rng) {
  if (digit < 0 || digit > 9)
    throw ConfigError("render_digit: digit must be 0..9");
  const double height = rng.uniform(16.0, 21.0);
  const double width = height * (5.0 / 7.0) * rng.uniform(0.85, 1.15);
  const double cy = 13.5 + rng.uniform(-1.5, 1.5);
  const double cx = 13.5 + rng.uniform(-1.5, 1.5);
  const double shear = rng.uniform(-0.15, 0.15);
  const double intensity = rng.uniform(190.0, 255.0);

  Matrix img = Matrix::Zero(28, 28);
  for (Eigen::Index y = 0; y < 28; ++y) {
    for (Eigen::Index x = 0; x < 28; ++x) {
      const double dy = (static_cast<double>(y) - cy) / height + 0.5;
      const double dx = (static_cast<double>(x) - cx - shear * (static_cast<double>(y) - cy)) /
                            width +
                        0.5;
      if (dy < 0.0 || dy > 1.0 || dx < 0.0 || dx > 1.0) continue;
      img(y, x) = intensity * font_bilinear(digit, dx, dy);
    }
  }
  return img;
}

}  // namespace abibench::sim
