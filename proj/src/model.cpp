#include "ppgemo/model.hpp"

#include <fstream>

#include "ppgemo/error.hpp"
#include "ppgemo/params_io.hpp"

namespace ppgemo::model {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::cnn:
      return "cnn";
    case Variant::cnn_lstm:
      return "cnn_lstm";
    case Variant::cnn_tcn_lstm:
      return "cnn_tcn_lstm";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "cnn") return Variant::cnn;
  if (name == "cnn_lstm") return Variant::cnn_lstm;
  if (name == "cnn_tcn_lstm") return Variant::cnn_tcn_lstm;
  throw ConfigError("unknown model variant '" + name + "' (expected cnn, cnn_lstm or cnn_tcn_lstm)");
}

std::string display_name(Variant v) {
  switch (v) {
    case Variant::cnn:
      return "CNN";
    case Variant::cnn_lstm:
      return "CNN-LSTM";
    case Variant::cnn_tcn_lstm:
      return "CNN-TCN-LSTM";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw ConfigError(std::string("model.") + field + " must be positive");
  };
  positive(input_len, "input_len");
  positive(conv1.filters, "conv1_filters");
  positive(conv1.kernel, "conv1_kernel");
  positive(conv1.stride, "conv1_stride");
  positive(conv2.filters, "conv2_filters");
  positive(conv2.kernel, "conv2_kernel");
  positive(conv2.stride, "conv2_stride");
  positive(pool_size, "pool_size");
  positive(tcn_filters, "tcn_filters");
  positive(tcn_kernel, "tcn_kernel");
  positive(lstm_units, "lstm_units");
  if (output_classes != 2) throw ConfigError("model.output_classes must be 2 (binary targets)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (!(tcn_dropout >= 0.0 && tcn_dropout < 1.0)) throw ConfigError("model.tcn_dropout must lie in [0, 1)");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("model.bn_momentum must lie in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw ConfigError("model.bn_epsilon must be positive");
  if (tcn_dilations.empty()) throw ConfigError("model.tcn_dilations must be non-empty");
}

json to_json(const ModelConfig& c) {
  return {{"input_len", c.input_len},
          {"conv1", {{"filters", c.conv1.filters}, {"kernel", c.conv1.kernel}, {"stride", c.conv1.stride}}},
          {"conv2", {{"filters", c.conv2.filters}, {"kernel", c.conv2.kernel}, {"stride", c.conv2.stride}}},
          {"pool_size", c.pool_size},
          {"dropout", c.dropout},
          {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon},
          {"tcn",
           {{"filters", c.tcn_filters},
            {"kernel", c.tcn_kernel},
            {"dilations", c.tcn_dilations},
            {"dropout", c.tcn_dropout},
            {"skip", c.tcn_skip}}},
          {"lstm_units", c.lstm_units},
          {"output_classes", c.output_classes},
          {"variant", to_string(c.variant)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.input_len = j.at("input_len").get<std::size_t>();
  c.conv1 = {j.at("conv1").at("filters"), j.at("conv1").at("kernel"), j.at("conv1").at("stride")};
  c.conv2 = {j.at("conv2").at("filters"), j.at("conv2").at("kernel"), j.at("conv2").at("stride")};
  c.pool_size = j.at("pool_size");
  c.dropout = j.at("dropout");
  c.bn_momentum = j.at("bn_momentum");
  c.bn_epsilon = j.at("bn_epsilon");
  const json& t = j.at("tcn");
  c.tcn_filters = t.at("filters");
  c.tcn_kernel = t.at("kernel");
  c.tcn_dilations = t.at("dilations").get<std::vector<std::size_t>>();
  c.tcn_dropout = t.at("dropout");
  c.tcn_skip = t.at("skip");
  c.lstm_units = j.at("lstm_units");
  c.output_classes = j.at("output_classes");
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.validate();
  return c;
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  const auto& c = config;

  nn::Conv1dSpec s1;
  s1.in_channels = 1;
  s1.filters = c.conv1.filters;
  s1.kernel_size = c.conv1.kernel;
  s1.stride = c.conv1.stride;
  s1.padding = nn::Padding::same;
  s1.activation = nn::Activation::relu;
  m.conv1_ = nn::Conv1d("conv1", s1);
  m.conv1_.set_input_grad(false);
  m.pool1_ = nn::MaxPool1d("pool1", c.pool_size);
  m.bn1_ = nn::BatchNorm1d("bn1", c.conv1.filters, c.bn_momentum, c.bn_epsilon);
  m.drop1_ = nn::Dropout("drop1", c.dropout);

  nn::Conv1dSpec s2 = s1;
  s2.in_channels = c.conv1.filters;
  s2.filters = c.conv2.filters;
  s2.kernel_size = c.conv2.kernel;
  s2.stride = c.conv2.stride;
  m.conv2_ = nn::Conv1d("conv2", s2);
  m.pool2_ = nn::MaxPool1d("pool2", c.pool_size);
  m.bn2_ = nn::BatchNorm1d("bn2", c.conv2.filters, c.bn_momentum, c.bn_epsilon);
  m.drop2_ = nn::Dropout("drop2", c.dropout);

  if (c.variant == Variant::cnn_tcn_lstm) {
    nn::TcnSpec ts;
    ts.in_channels = c.conv2.filters;
    ts.filters = c.tcn_filters;
    ts.kernel_size = c.tcn_kernel;
    ts.dilations = c.tcn_dilations;
    ts.dropout_rate = c.tcn_dropout;
    ts.use_skip = c.tcn_skip;
    m.tcn_.emplace("tcn", ts);
  }
  if (c.variant == Variant::cnn_tcn_lstm || c.variant == Variant::cnn_lstm) {
    m.lstm_.emplace("lstm", c.conv2.filters, c.lstm_units);
  }
  if (c.variant == Variant::cnn) m.global_pool_.emplace("global_max_pool");
  m.head_ = nn::Dense("head", m.head_input_width(), c.output_classes, nn::Activation::softmax);

  Rng rng(derive_seed(seed, {0x6d6f64656cULL}));
  m.conv1_.init(rng);
  m.conv2_.init(rng);
  if (m.tcn_) m.tcn_->init(rng);
  if (m.lstm_) m.lstm_->init(rng);
  m.head_.init(rng);
  return m;
}

std::size_t Model::head_input_width() const {
  switch (config_.variant) {
    case Variant::cnn:
      return config_.conv2.filters;
    case Variant::cnn_lstm:
      return config_.lstm_units;
    case Variant::cnn_tcn_lstm:
      return config_.tcn_filters + config_.lstm_units;
  }
  return 0;
}

Tensor Model::trunk_forward(const Tensor& x, Mode mode, Rng& rng, ShapeTrace* trace) {
  auto note = [&](const std::string& stage, const Tensor& t) {
    if (trace) trace->emplace_back(stage, t.shape());
  };
  Tensor h = conv1_.forward(x, mode, rng);
  note("conv1", h);
  h = pool1_.forward(h, mode, rng);
  note("pool1", h);
  h = bn1_.forward(h, mode, rng);
  note("bn1", h);
  h = drop1_.forward(h, mode, rng);
  note("drop1", h);
  h = conv2_.forward(h, mode, rng);
  note("conv2", h);
  h = pool2_.forward(h, mode, rng);
  note("pool2", h);
  h = bn2_.forward(h, mode, rng);
  note("bn2", h);
  h = drop2_.forward(h, mode, rng);
  note("drop2", h);
  return h;
}

Tensor Model::forward(const Tensor& batch, Mode mode, Rng& rng, ShapeTrace* trace) {
  if (batch.rank() != 3 || batch.dim(1) != config_.input_len || batch.dim(2) != 1) {
    throw ShapeError("model input: expected (B," + std::to_string(config_.input_len) + ",1) got " +
                     nn::shape_str(batch.shape()));
  }
  if (trace) trace->emplace_back("input", batch.shape());
  const Tensor features = trunk_forward(batch, mode, rng, trace);

  Tensor head_in;
  switch (config_.variant) {
    case Variant::cnn:
      head_in = global_pool_->forward(features, mode, rng);
      if (trace) trace->emplace_back("global_max_pool", head_in.shape());
      break;
    case Variant::cnn_lstm:
      head_in = lstm_->forward(features, mode, rng);
      if (trace) trace->emplace_back("lstm", head_in.shape());
      break;
    case Variant::cnn_tcn_lstm: {
      const Tensor t = tcn_->forward(features, mode, rng);
      if (trace) trace->emplace_back("tcn", t.shape());
      const Tensor l = lstm_->forward(features, mode, rng);
      if (trace) trace->emplace_back("lstm", l.shape());
      const std::size_t bsz = batch.dim(0);
      const std::size_t wt = t.dim(1);
      const std::size_t wl = l.dim(1);
      head_in = Tensor({bsz, wt + wl});
      for (std::size_t b = 0; b < bsz; ++b) {
        for (std::size_t i = 0; i < wt; ++i) head_in.at(b, i) = t.at(b, i);
        for (std::size_t i = 0; i < wl; ++i) head_in.at(b, wt + i) = l.at(b, i);
      }
      if (trace) trace->emplace_back("concat", head_in.shape());
      break;
    }
  }
  Tensor probs = head_.forward(head_in, mode, rng);
  if (trace) trace->emplace_back("output", probs.shape());
  return probs;
}

void Model::backward(const Tensor& dprobs) {
  const Tensor d_head_in = head_.backward(dprobs);
  Tensor d_features;
  switch (config_.variant) {
    case Variant::cnn:
      d_features = global_pool_->backward(d_head_in);
      break;
    case Variant::cnn_lstm:
      d_features = lstm_->backward(d_head_in);
      break;
    case Variant::cnn_tcn_lstm: {
      const std::size_t bsz = d_head_in.dim(0);
      const std::size_t wt = config_.tcn_filters;
      const std::size_t wl = config_.lstm_units;
      Tensor dt({bsz, wt});
      Tensor dl({bsz, wl});
      for (std::size_t b = 0; b < bsz; ++b) {
        for (std::size_t i = 0; i < wt; ++i) dt.at(b, i) = d_head_in.at(b, i);
        for (std::size_t i = 0; i < wl; ++i) dl.at(b, i) = d_head_in.at(b, wt + i);
      }
      d_features = tcn_->backward(dt);
      const Tensor d_lstm = lstm_->backward(dl);
      for (std::size_t i = 0; i < d_features.size(); ++i) d_features[i] += d_lstm[i];
      break;
    }
  }
  Tensor d = drop2_.backward(d_features);
  d = bn2_.backward(d);
  d = pool2_.backward(d);
  d = conv2_.backward(d);
  d = drop1_.backward(d);
  d = bn1_.backward(d);
  d = pool1_.backward(d);
  conv1_.backward(d);
}

Tensor Model::predict(const Tensor& batch, std::size_t chunk) const {
  if (batch.rank() != 3) {
    throw ShapeError("model input: expected (B," + std::to_string(config_.input_len) + ",1) got " +
                     nn::shape_str(batch.shape()));
  }
  Model work = *this;
  Rng unused(0);
  const std::size_t n = batch.dim(0);
  const std::size_t row = batch.size() / n;
  const std::size_t classes = config_.output_classes;
  Tensor out({n, classes});
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    std::vector<double> part(batch.values().begin() + static_cast<std::ptrdiff_t>(start * row),
                             batch.values().begin() + static_cast<std::ptrdiff_t>((start + len) * row));
    const Tensor probs = work.forward(Tensor({len, batch.dim(1), batch.dim(2)}, std::move(part)), Mode::infer, unused);
    std::copy(probs.ptr(), probs.ptr() + probs.size(), out.ptr() + start * classes);
  }
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  auto add = [&](nn::Layer& l) {
    for (auto* p : l.parameters()) out.push_back(p);
  };
  add(conv1_);
  add(bn1_);
  add(conv2_);
  add(bn2_);
  if (tcn_) add(*tcn_);
  if (lstm_) add(*lstm_);
  add(head_);
  return out;
}

std::vector<Parameter*> Model::trainable_parameters() {
  std::vector<Parameter*> out;
  for (auto* p : parameters()) {
    if (p->trainable) out.push_back(p);
  }
  return out;
}

std::size_t Model::parameter_count(bool trainable_only) {
  std::size_t n = 0;
  for (auto* p : parameters()) {
    if (!trainable_only || p->trainable) n += p->value.size();
  }
  return n;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

void Model::mark_running_stats_ready() {
  bn1_.mark_running_stats_ready();
  bn2_.mark_running_stats_ready();
}

bool Model::running_stats_ready() const {
  return bn1_.running_stats_ready() && bn2_.running_stats_ready();
}

json Model::to_json() {
  return {{"format", "ppgemo.model"},
          {"version", 1},
          {"config", model::to_json(config_)},
          {"params", nn::params_to_json(parameters())}};
}

Model Model::from_json(const json& j) {
  if (j.value("format", "") != "ppgemo.model") throw DataError("model file: missing or wrong 'format'");
  if (j.value("version", 0) != 1) throw DataError("model file: unsupported version");
  Model m = build(model_config_from_json(j.at("config")), 0);
  nn::params_from_json(j.at("params"), m.parameters());
  m.mark_running_stats_ready();
  return m;
}

void Model::save(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write model file " + file.string());
  out << to_json().dump() << "\n";
}

Model Model::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read model file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace ppgemo::model
