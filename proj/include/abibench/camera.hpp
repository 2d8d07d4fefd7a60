#pragma once

#include "abibench/common.hpp"
#include "abibench/rng.hpp"

namespace abibench::sim {

// Separable Gaussian blur on an h x w grid, kernel radius ceil(4*sigma),
// reflect padding (edge pixel duplicated, scipy-style).
Matrix gaussian_blur_grid(const Matrix& img, double sigma);

// Noisy-camera observation model on a flat 1 x (hw*hw) image in [-1, 1]:
// clip, map to [0, 1], per-pixel Poisson at `quantization` levels, map back,
// then Gaussian blur.
Matrix camera_forward(const Matrix& clean, Eigen::Index hw, double blur_sigma,
                      int quantization, rng::RngStream& rng);

// Sets round(frac * n_pixels) distinct pixels to -1 or +1 (fair coin each).
Matrix salt_pepper(const Matrix& img, double frac, rng::RngStream& rng);

// Sets `rows` distinct image rows to -1.
Matrix blackout_rows(const Matrix& img, Eigen::Index hw, int rows, rng::RngStream& rng);

// Bilinear resize with pixel-center alignment; no pre-filter.
Matrix resize_bilinear(const Matrix& img, Eigen::Index out_h, Eigen::Index out_w);

// 28x28 grid with values in [0, 255] -> flat 1 x 256 in [-1, 1]: Gaussian
// pre-filter (sigma = (28/16 - 1)/2), bilinear resample to 16x16, then the
// affine map v -> 2 v / 255 - 1. Constant images map exactly.
Matrix downscale_antialias(const Matrix& img28);

}  // namespace abibench::sim
