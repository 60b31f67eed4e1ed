#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ppgemo/layers.hpp"

namespace ppgemo::model {

using nn::Mode;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;

enum class Variant { cnn, cnn_lstm, cnn_tcn_lstm };

std::string to_string(Variant v);
// Throws ConfigError for unknown names.
Variant parse_variant(const std::string& name);
// Display name used in report tables.
std::string display_name(Variant v);

struct ConvStage {
  std::size_t filters = 8;
  std::size_t kernel = 64;
  std::size_t stride = 4;
};

struct ModelConfig {
  std::size_t input_len = 6000;
  ConvStage conv1{8, 64, 4};
  ConvStage conv2{16, 32, 2};
  std::size_t pool_size = 2;
  double dropout = 0.3;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;

  std::size_t tcn_filters = 8;
  std::size_t tcn_kernel = 32;
  std::vector<std::size_t> tcn_dilations{1, 2, 4, 8};
  double tcn_dropout = 0.3;
  bool tcn_skip = true;

  std::size_t lstm_units = 12;
  std::size_t output_classes = 2;
  Variant variant = Variant::cnn_tcn_lstm;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Stage name -> output shape, filled in forward order.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

// Trunk: conv1 -> pool -> bn -> dropout -> conv2 -> pool -> bn -> dropout.
// Heads:
//   cnn           trunk -> global max over time -> dense(softmax)
//   cnn_lstm      trunk -> lstm (last state) -> dense(softmax)
//   cnn_tcn_lstm  trunk -> [tcn (last step) | lstm (last state)] -> concat -> dense(softmax)
class Model {
 public:
  static Model build(const ModelConfig& config, std::uint64_t seed);

  // batch [B, input_len, 1] -> class probabilities [B, classes].
  Tensor forward(const Tensor& batch, Mode mode, Rng& rng, ShapeTrace* trace = nullptr);
  // Upstream gradient w.r.t. the probabilities; accumulates parameter grads.
  void backward(const Tensor& dprobs);

  // Inference on a copy, so the model itself is untouched; chunks large inputs.
  Tensor predict(const Tensor& batch, std::size_t chunk = 256) const;

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();
  std::size_t parameter_count(bool trainable_only = true);
  void zero_grad();

  // Marks batch-norm running statistics as usable for inference.
  void mark_running_stats_ready();
  bool running_stats_ready() const;

  const ModelConfig& config() const { return config_; }
  std::size_t head_input_width() const;

  // {"format": "ppgemo.model", "version": 1, "config": {...}, "params": <manifest>}
  nlohmann::json to_json();
  static Model from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& file);
  static Model load(const std::filesystem::path& file);

 private:
  Model() = default;
  Tensor trunk_forward(const Tensor& x, Mode mode, Rng& rng, ShapeTrace* trace);

  ModelConfig config_;
  nn::Conv1d conv1_;
  nn::MaxPool1d pool1_;
  nn::BatchNorm1d bn1_;
  nn::Dropout drop1_;
  nn::Conv1d conv2_;
  nn::MaxPool1d pool2_;
  nn::BatchNorm1d bn2_;
  nn::Dropout drop2_;
  std::optional<nn::Tcn> tcn_;
  std::optional<nn::Lstm> lstm_;
  std::optional<nn::GlobalMaxPool1d> global_pool_;
  nn::Dense head_;
};

}  // namespace ppgemo::model
