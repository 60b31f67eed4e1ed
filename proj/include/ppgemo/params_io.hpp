#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "ppgemo/tensor.hpp"

namespace ppgemo::nn {

// Parameter manifest, format version 1:
//
//   {"format": "ppgemo.params", "version": 1,
//    "tensors": [{"name": "conv1.kernel", "shape": [64, 1, 8],
//                 "trainable": true, "values": [...row-major...]}, ...]}
//
// Values are written with shortest round-trip formatting, so a save/load
// cycle reproduces every double exactly.
inline constexpr const char* kParamsFormat = "ppgemo.params";
inline constexpr int kParamsVersion = 1;

nlohmann::json params_to_json(const std::vector<Parameter*>& params);

// Every parameter must be present with identical shape; unknown names in the
// manifest are an error too. Bumps each parameter's version.
void params_from_json(const nlohmann::json& manifest, const std::vector<Parameter*>& params);

// Value-only snapshot for restore-best and similar bookkeeping.
std::vector<Tensor> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values);

}  // namespace ppgemo::nn
