#pragma once

#include <filesystem>

#include "cesynth/tensor.hpp"

namespace cesynth {

/// 8-bit grayscale PNG of a 2-D volume, windowed to its own [min, max].
/// A constant image is written as all zeros.
void write_png(const std::filesystem::path& path, const Volume& image);

}  // namespace cesynth
