#include "abibench/idx.hpp"

#include <cstdint>
#include <fstream>

namespace abibench::sim {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw DataError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open IDX file: " + path);
  const std::uint32_t magic = read_u32_be(in, path);
  if (magic != kImageMagic)
    throw DataError("bad IDX image magic in " + path + " (got 0x" +
                    std::to_string(magic) + ", want 2051)");
  const std::uint32_t count = read_u32_be(in, path);
  const std::uint32_t rows = read_u32_be(in, path);
  const std::uint32_t cols = read_u32_be(in, path);
  if (rows == 0 || cols == 0)
    throw DataError("zero-sized images in IDX file: " + path);

  IdxImages out;
  out.height = static_cast<Eigen::Index>(rows);
  out.width = static_cast<Eigen::Index>(cols);
  out.images.reserve(count);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in)
      throw DataError("truncated IDX image payload: " + path);
    Matrix img(out.height, out.width);
    for (Eigen::Index y = 0; y < out.height; ++y)
      for (Eigen::Index x = 0; x < out.width; ++x)
        img(y, x) = static_cast<double>(buf[static_cast<std::size_t>(y * out.width + x)]);
    out.images.push_back(std::move(img));
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open IDX file: " + path);
  const std::uint32_t magic = read_u32_be(in, path);
  if (magic != kLabelMagic)
    throw DataError("bad IDX label magic in " + path + " (got 0x" +
                    std::to_string(magic) + ", want 2049)");
  const std::uint32_t count = read_u32_be(in, path);
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    char c;
    in.read(&c, 1);
    if (!in)
      throw DataError("truncated IDX label payload: " + path);
    labels[i] = static_cast<unsigned char>(c);
  }
  return labels;
}

void save_idx_images(const std::string& path, const IdxImages& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write IDX file: " + path);
  write_u32_be(out, kImageMagic);
  write_u32_be(out, static_cast<std::uint32_t>(data.images.size()));
  write_u32_be(out, static_cast<std::uint32_t>(data.height));
  write_u32_be(out, static_cast<std::uint32_t>(data.width));
  for (const Matrix& img : data.images) {
    for (Eigen::Index y = 0; y < data.height; ++y) {
      for (Eigen::Index x = 0; x < data.width; ++x) {
        const double v = std::clamp(img(y, x), 0.0, 255.0);
        const unsigned char b = static_cast<unsigned char>(std::lround(v));
        out.write(reinterpret_cast<const char*>(&b), 1);
      }
    }
  }
}

void save_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write IDX file: " + path);
  write_u32_be(out, kLabelMagic);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

}  // namespace abibench::sim
