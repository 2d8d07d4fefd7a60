#include "abibench/camera.hpp"

#include <cmath>
#include <vector>

namespace abibench::sim {

namespace {

// reflect with edge duplication: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const Eigen::Index radius = static_cast<Eigen::Index>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (Eigen::Index i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

}  // namespace

Matrix gaussian_blur_grid(const Matrix& img, double sigma) {
  if (sigma <= 0.0)
    throw ConfigError("gaussian_blur_grid: sigma must be positive");
  const auto k = gaussian_kernel(sigma);
  const Eigen::Index radius = (static_cast<Eigen::Index>(k.size()) - 1) / 2;
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();

  Matrix tmp(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t)
        acc += k[static_cast<std::size_t>(t + radius)] * img(y, reflect_index(x + t, w));
      tmp(y, x) = acc;
    }
  }
  Matrix out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t)
        acc += k[static_cast<std::size_t>(t + radius)] * tmp(reflect_index(y + t, h), x);
      out(y, x) = acc;
    }
  }
  return out;
}

Matrix camera_forward(const Matrix& clean, Eigen::Index hw, double blur_sigma,
                      int quantization, rng::RngStream& rng) {
  if (clean.rows() != 1 || clean.cols() != hw * hw)
    throw ConfigError("camera_forward: expected a flat 1 x hw*hw image");
  if (quantization <= 0)
    throw ConfigError("camera_forward: quantization must be positive");
  const double q = static_cast<double>(quantization);
  Matrix grid(hw, hw);
  for (Eigen::Index y = 0; y < hw; ++y) {
    for (Eigen::Index x = 0; x < hw; ++x) {
      const double v = std::clamp(clean(0, y * hw + x), -1.0, 1.0);
      const double intensity = (v + 1.0) * 0.5 * q;
      const double noisy = static_cast<double>(rng.poisson(intensity)) / q;
      grid(y, x) = 2.0 * noisy - 1.0;
    }
  }
  grid = gaussian_blur_grid(grid, blur_sigma);
  Matrix out(1, hw * hw);
  for (Eigen::Index y = 0; y < hw; ++y)
    for (Eigen::Index x = 0; x < hw; ++x) out(0, y * hw + x) = grid(y, x);
  return out;
}

Matrix salt_pepper(const Matrix& img, double frac, rng::RngStream& rng) {
  if (frac < 0.0 || frac > 1.0)
    throw ConfigError("salt_pepper: frac must lie in [0, 1]");
  const Eigen::Index n = img.cols();
  const Eigen::Index count = static_cast<Eigen::Index>(std::lround(frac * static_cast<double>(n)));
  Matrix out = img;
  // partial Fisher-Yates over pixel indices: first `count` slots are distinct
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index j = rng.uniform_int(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    out(0, idx[static_cast<std::size_t>(i)]) = rng.bernoulli(0.5) ? 1.0 : -1.0;
  }
  return out;
}

Matrix blackout_rows(const Matrix& img, Eigen::Index hw, int rows, rng::RngStream& rng) {
  if (img.cols() != hw * hw)
    throw ConfigError("blackout_rows: expected a flat 1 x hw*hw image");
  if (rows < 0 || rows > hw)
    throw ConfigError("blackout_rows: row count out of range");
  Matrix out = img;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(hw));
  for (Eigen::Index i = 0; i < hw; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < rows; ++i) {
    const Eigen::Index j = rng.uniform_int(i, hw - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    out.block(0, idx[static_cast<std::size_t>(i)] * hw, 1, hw).setConstant(-1.0);
  }
  return out;
}

Matrix resize_bilinear(const Matrix& img, Eigen::Index out_h, Eigen::Index out_w) {
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  Matrix out(out_h, out_w);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (Eigen::Index oy = 0; oy < out_h; ++oy) {
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(fy));
    const double wy = fy - static_cast<double>(y0);
    const Eigen::Index ya = std::clamp<Eigen::Index>(y0, 0, h - 1);
    const Eigen::Index yb = std::clamp<Eigen::Index>(y0 + 1, 0, h - 1);
    for (Eigen::Index ox = 0; ox < out_w; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(fx));
      const double wx = fx - static_cast<double>(x0);
      const Eigen::Index xa = std::clamp<Eigen::Index>(x0, 0, w - 1);
      const Eigen::Index xb = std::clamp<Eigen::Index>(x0 + 1, 0, w - 1);
      const double top = (1.0 - wx) * img(ya, xa) + wx * img(ya, xb);
      const double bot = (1.0 - wx) * img(yb, xa) + wx * img(yb, xb);
      out(oy, ox) = (1.0 - wy) * top + wy * bot;
    }
  }
  return out;
}

Matrix downscale_antialias(const Matrix& img28) {
  if (img28.rows() != 28 || img28.cols() != 28)
    throw ConfigError("downscale_antialias: expected a 28x28 image");
  const double sigma_aa = (28.0 / 16.0 - 1.0) / 2.0;
  const Matrix filtered = gaussian_blur_grid(img28, sigma_aa);
  const Matrix small = resize_bilinear(filtered, 16, 16);
  Matrix out(1, 256);
  for (Eigen::Index y = 0; y < 16; ++y)
    for (Eigen::Index x = 0; x < 16; ++x)
      out(0, y * 16 + x) = 2.0 * small(y, x) / 255.0 - 1.0;
  return out;
}

}  // namespace abibench::sim
