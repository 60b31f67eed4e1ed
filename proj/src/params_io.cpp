#include "ppgemo/params_io.hpp"

#include <map>

#include "ppgemo/error.hpp"

namespace ppgemo::nn {

using nlohmann::json;

json params_to_json(const std::vector<Parameter*>& params) {
  json tensors = json::array();
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name},
                       {"shape", p->value.shape()},
                       {"trainable", p->trainable},
                       {"values", p->value.values()}});
  }
  return {{"format", kParamsFormat}, {"version", kParamsVersion}, {"tensors", tensors}};
}

void params_from_json(const json& manifest, const std::vector<Parameter*>& params) {
  if (!manifest.is_object() || manifest.value("format", "") != kParamsFormat) {
    throw DataError("parameter manifest: missing or wrong 'format' (expected " + std::string(kParamsFormat) + ")");
  }
  if (manifest.value("version", 0) != kParamsVersion) {
    throw DataError("parameter manifest: unsupported version " + manifest.value("version", json()).dump());
  }
  std::map<std::string, const json*> by_name;
  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    if (!by_name.emplace(name, &t).second) throw DataError("parameter manifest: duplicate tensor '" + name + "'");
  }
  if (by_name.size() != params.size()) {
    throw DataError("parameter manifest: holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (auto* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw DataError("parameter manifest: missing tensor '" + p->name + "'");
    const json& t = *it->second;
    const auto shape = t.at("shape").get<Shape>();
    if (shape != p->value.shape()) {
      throw ShapeError("parameter manifest: tensor '" + p->name + "' expected " + shape_str(p->value.shape()) +
                       " got " + shape_str(shape));
    }
    p->value = Tensor(shape, t.at("values").get<std::vector<double>>());
    ++p->version;
  }
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values) {
  if (values.size() != params.size()) throw StateError("restore: snapshot does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    values[i].expect_shape(params[i]->value.shape(), "restore " + params[i]->name);
    params[i]->value = values[i];
    ++params[i]->version;
  }
}

}  // namespace ppgemo::nn
