#include "cesynth/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cesynth {
namespace {

static_assert(sizeof(float) == 4);

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void write_tnsr(const std::filesystem::path& path, const Tensor<float>& tensor) {
  std::string out = "TNSR";
  put_u32(out, kTnsrVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const std::size_t header = out.size();
  out.resize(header + tensor.size() * 4);
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(tensor[i]);
    for (int b = 0; b < 4; ++b) out[header + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  write_file_atomic(path, out);
}

Tensor<float> read_tnsr(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string name = "'" + path.string() + "'";

  if (bytes.size() < 12) {
    throw DataError("tensor file " + name + " is truncated: header needs at least 12 bytes, found " +
                    std::to_string(bytes.size()));
  }
  if (std::memcmp(p, "TNSR", 4) != 0) throw DataError("tensor file " + name + " has bad magic (expected TNSR)");
  const std::uint32_t version = get_u32(p + 4);
  if (version != kTnsrVersion) {
    throw DataError("tensor file " + name + " has unsupported version " + std::to_string(version));
  }
  const std::uint32_t rank = get_u32(p + 8);
  const std::size_t header = 12 + 4 * static_cast<std::size_t>(rank);
  if (rank > 8) throw DataError("tensor file " + name + " has implausible rank " + std::to_string(rank));
  if (bytes.size() < header) {
    throw DataError("tensor file " + name + " is truncated: expected " + std::to_string(header) +
                    " header bytes, found " + std::to_string(bytes.size()));
  }
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(p + 12 + 4 * i);
  const std::size_t expected = header + shape_size(shape) * 4;
  if (bytes.size() != expected) {
    throw DataError("tensor file " + name + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(expected) + " for shape " + shape_str(shape));
  }
  Tensor<float> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get_u32(p + header + 4 * i));
  return t;
}

}  // namespace cesynth
