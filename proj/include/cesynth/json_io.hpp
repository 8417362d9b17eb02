#pragma once

#include <json.hpp>

#include "cesynth/phantom.hpp"

namespace cesynth {

nlohmann::json to_json(const PhantomSpec& spec);
/// Rejects unknown keys; missing keys keep their defaults.
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// Throws UsageError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what);

}  // namespace cesynth
