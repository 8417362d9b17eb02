#include "cesynth/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "cesynth/json_io.hpp"
#include "cesynth/tensor_io.hpp"

namespace cesynth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kFormat = "cesynth-dataset";

std::string dwi_key(std::size_t i) { return "dwi_b" + std::to_string(static_cast<int>(kBValues[i])); }

template <class F>
void for_each_volume(CaseSample& c, F&& f) {
  for (std::size_t i = 0; i < c.dwi.size(); ++i) f(dwi_key(i), c.dwi[i]);
  f("t1", c.t1);
  f("ce", c.ce);
  f("mask", c.mask);
  f("adc_truth", c.adc_truth);
  f("lesion_mask", c.lesion_mask);
}

}  // namespace

fs::path write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json cases = json::array();
  for (const auto& original : dataset.cases) {
    original.validate();
    CaseSample c = original;
    fs::create_directories(dir / c.case_id);
    json files = json::object();
    for_each_volume(c, [&](const std::string& key, Volume& v) {
      const std::string rel = c.case_id + "/" + key + ".tnsr";
      write_tnsr(dir / rel, v);
      files[key] = rel;
    });
    cases.push_back({{"case_id", c.case_id}, {"shape", c.shape()}, {"n_lesions", c.n_lesions}, {"files", files}});
  }
  json manifest = {{"format", kFormat},
                   {"version", 1},
                   {"b_values", kBValues},
                   {"phantom_spec", to_json(dataset.spec)},
                   {"cases", cases}};
  const fs::path path = dir / kManifestName;
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw DataError("dataset manifest '" + path.string() + "' not found");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("dataset manifest '" + path.string() + "' is malformed: " + e.what());
  }

  Dataset out;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw DataError("'" + path.string() + "' is not a dataset manifest");
    }
    const auto bvals = manifest.at("b_values").get<std::vector<double>>();
    if (bvals.size() != kBValues.size() || !std::equal(bvals.begin(), bvals.end(), kBValues.begin())) {
      throw DataError("dataset manifest '" + path.string() + "' lists unsupported b-values");
    }
    out.spec = phantom_spec_from_json(manifest.at("phantom_spec"));
    for (const auto& entry : manifest.at("cases")) {
      CaseSample c;
      c.case_id = entry.at("case_id").get<std::string>();
      c.n_lesions = entry.at("n_lesions").get<std::size_t>();
      const auto& files = entry.at("files");
      for_each_volume(c, [&](const std::string& key, Volume& v) {
        if (!files.contains(key)) throw DataError("case " + c.case_id + " lists no file for " + key);
        v = read_tnsr(dir / files.at(key).get<std::string>());
      });
      c.validate();
      const auto shape = entry.at("shape").get<Shape>();
      if (shape != c.shape()) {
        throw DataError("case " + c.case_id + ": manifest shape " + shape_str(shape) + " does not match files " +
                        shape_str(c.shape()));
      }
      out.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError("dataset manifest '" + path.string() + "' is malformed: " + e.what());
  }
  return out;
}

const CaseSample& find_case(const Dataset& dataset, const std::string& case_id) {
  for (const auto& c : dataset.cases)
    if (c.case_id == case_id) return c;
  throw DataError("case '" + case_id + "' not found in dataset");
}

}  // namespace cesynth
