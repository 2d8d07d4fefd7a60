#include "abibench/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "abibench/common.hpp"

namespace abibench::harness {

namespace {

constexpr char kMagic[8] = {'A', 'B', 'I', 'C', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint truncated while reading header length");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ad::ParamStore& params,
                     const nlohmann::json& config, const std::string& config_hash) {
  nlohmann::json header;
  header["config"] = config;
  header["config_hash"] = config_hash;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, value] : params) {
    tensors.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}});
  }
  header["tensors"] = tensors;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  std::vector<double> row;
  for (const auto& [name, value] : params) {
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      row.assign(value.row(i).begin(), value.row(i).end());
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  }
  if (!out) throw DataError("failed writing checkpoint payload: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad checkpoint magic: " + path.string());
  }
  const std::uint32_t header_len = read_u32(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("checkpoint truncated in header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.contains("tensors") || !header["tensors"].is_array()) {
    throw DataError("checkpoint header missing tensor table");
  }

  Checkpoint ckpt;
  ckpt.config = header.value("config", nlohmann::json::object());
  ckpt.config_hash = header.value("config_hash", std::string());
  std::vector<double> row;
  for (const auto& entry : header["tensors"]) {
    const std::string name = entry.at("name").get<std::string>();
    const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw DataError("checkpoint tensor has negative shape: " + name);
    Matrix value(rows, cols);
    row.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
      if (!in) throw DataError("checkpoint truncated in tensor payload: " + name);
      for (Eigen::Index j = 0; j < cols; ++j) value(i, j) = row[static_cast<std::size_t>(j)];
    }
    ckpt.params.emplace(name, std::move(value));
  }
  return ckpt;
}

}  // namespace abibench::harness
