#include "cesynth/json_io.hpp"

#include <algorithm>
#include <string_view>

namespace cesynth {
using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw UsageError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw UsageError(std::string(what) + ": unknown key '" + key + "'");
  }
}

json to_json(const PhantomSpec& s) {
  auto range = [](const Range& r) { return json::array({r.lo, r.hi}); };
  return {{"image_size", s.image_size},
          {"min_lesions", s.min_lesions},
          {"max_lesions", s.max_lesions},
          {"lesion_radius", range(s.lesion_radius)},
          {"tissue_adc", range(s.tissue_adc)},
          {"lesion_adc", range(s.lesion_adc)},
          {"enhancement_gain", range(s.enhancement_gain)},
          {"noise_sigma", s.noise_sigma},
          {"seed", s.seed}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"image_size", "min_lesions", "max_lesions", "lesion_radius", "tissue_adc", "lesion_adc",
                       "enhancement_gain", "noise_sigma", "seed"},
                      "phantom spec");
  PhantomSpec s;
  auto range = [&](const char* key, Range& r) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw UsageError(std::string("phantom spec: ") + key + " must be [lo, hi]");
    r = {v[0], v[1]};
  };
  try {
    if (j.contains("image_size")) s.image_size = j.at("image_size").get<std::size_t>();
    if (j.contains("min_lesions")) s.min_lesions = j.at("min_lesions").get<std::size_t>();
    if (j.contains("max_lesions")) s.max_lesions = j.at("max_lesions").get<std::size_t>();
    range("lesion_radius", s.lesion_radius);
    range("tissue_adc", s.tissue_adc);
    range("lesion_adc", s.lesion_adc);
    range("enhancement_gain", s.enhancement_gain);
    if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("phantom spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace cesynth
