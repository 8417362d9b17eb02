#pragma once

#include <filesystem>
#include <vector>

#include "cesynth/phantom.hpp"

namespace cesynth {

struct Dataset {
  PhantomSpec spec;
  std::vector<CaseSample> cases;
};

/// Writes manifest.json plus one TNSR file per volume under `dir`.
/// Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a dataset written by write_dataset. Throws DataError on missing or
/// truncated files, a malformed manifest, or mismatched shapes within a case.
Dataset read_dataset(const std::filesystem::path& dir);

const CaseSample& find_case(const Dataset& dataset, const std::string& case_id);

}  // namespace cesynth
