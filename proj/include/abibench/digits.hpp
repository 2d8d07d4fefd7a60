#pragma once

#include "abibench/common.hpp"
#include "abibench/rng.hpp"

namespace abibench::sim {

// Procedural 28x28 grayscale glyph in [0, 255]: a 5x7 bitmap digit rendered
// with random size, position and intensity jitter. Stands in for handwritten
// digit corpora when no IDX files are configured.
Matrix render_digit(int digit, rng::RngStream& rng);

}  // namespace abibench::sim
