#include "cesynth/checkpoint.hpp"

#include <fstream>
#include <set>

#include "cesynth/tensor_io.hpp"

namespace cesynth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string blob_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%04zu.tnsr", index);
  return buf;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainConfig& config, std::size_t epoch,
                     const std::vector<const nn::ParameterRegistry<float>*>& registries) {
  fs::path tmp = dir;
  tmp += ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw DataError("cannot create checkpoint directory '" + tmp.string() + "': " + ec.message());

  json tensors = json::array();
  std::set<std::string> seen;
  std::size_t index = 0;
  auto put = [&](const std::string& name, const Tensor<float>& t) {
    if (!seen.insert(name).second) throw UsageError("checkpoint: duplicate tensor name '" + name + "'");
    std::string file = blob_name(index++);
    write_tnsr(tmp / file, t);
    tensors.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
  };
  for (const auto* reg : registries) {
    for (const auto& p : reg->params()) put(p.name, p.var->value);
    for (const auto& b : reg->buffers()) put(b.name, *b.tensor);
  }
  json manifest = {{"format", "cesynth-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"epoch", epoch},
                   {"config_hash", config_hash(config)},
                   {"config", to_json(config)},
                   {"tensors", tensors}};
  write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");

  fs::path old = dir;
  old += ".old";
  fs::remove_all(old, ec);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old, ec);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("checkpoint '" + dir.string() + "' not found (no manifest.json)");
  Checkpoint ck;
  try {
    json m = json::parse(in);
    if (m.at("format") != "cesynth-checkpoint") throw DataError("'" + manifest_path.string() + "' is not a checkpoint");
    if (m.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint '" + dir.string() + "' has unsupported version " + m.at("version").dump());
    }
    ck.epoch = m.at("epoch").get<std::size_t>();
    ck.config = train_config_from_json(m.at("config"));
    ck.config_hash = m.at("config_hash").get<std::string>();
    if (ck.config_hash != config_hash(ck.config)) {
      throw DataError("checkpoint '" + dir.string() + "': config hash does not match stored config");
    }
    for (const auto& t : m.at("tensors")) {
      auto name = t.at("name").get<std::string>();
      auto shape = t.at("shape").get<Shape>();
      Tensor<float> value = read_tnsr(dir / t.at("file").get<std::string>());
      if (value.shape() != shape) {
        throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(value.shape()) +
                        ", manifest says " + shape_str(shape));
      }
      ck.tensors.emplace(std::move(name), std::move(value));
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest '" + manifest_path.string() + "' is malformed: " + e.what());
  } catch (const UsageError& e) {
    throw DataError("checkpoint '" + dir.string() + "' holds an invalid config: " + e.what());
  }
  return ck;
}

void Checkpoint::load_into(const nn::ParameterRegistry<float>& reg) const {
  auto fetch = [&](const std::string& name, Tensor<float>& target) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint has no tensor '" + name + "'");
    if (it->second.shape() != target.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                      ", model expects " + shape_str(target.shape()));
    }
    target = it->second;
  };
  for (const auto& p : reg.params()) fetch(p.name, p.var->value);
  for (const auto& b : reg.buffers()) fetch(b.name, *b.tensor);
}

}  // namespace cesynth
