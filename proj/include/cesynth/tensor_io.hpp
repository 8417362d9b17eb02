#pragma once

#include <filesystem>

#include "cesynth/tensor.hpp"

namespace cesynth {

// TNSR container: "TNSR" magic, u32 version (1), u32 rank, u32 dims[rank],
// then float32 data in row-major order. All integers and floats little-endian.
inline constexpr std::uint32_t kTnsrVersion = 1;

void write_tnsr(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> read_tnsr(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace cesynth
