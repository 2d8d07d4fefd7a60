#pragma once

#include <string>
#include <vector>

#include "abibench/common.hpp"

namespace abibench::sim {

// IDX: big-endian magic (0x00000803 for u8 image cubes, 0x00000801 for u8
// label vectors), big-endian dimension sizes, then raw bytes.
struct IdxImages {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<Matrix> images;  // values 0..255
};

IdxImages load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

void save_idx_images(const std::string& path, const IdxImages& data);
void save_idx_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace abibench::sim
