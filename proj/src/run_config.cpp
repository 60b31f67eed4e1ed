#include "ppgemo/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "ppgemo/dataset.hpp"
#include "ppgemo/error.hpp"

namespace ppgemo::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const std::string t = trim(value);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Entry {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Entry number(const char* key, T RunConfig::*outer) {
  return {key, [outer](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return data::format_double(c.*outer);
            else return std::to_string(c.*outer);
          },
          [outer](RunConfig& c, const std::string& k, const std::string& v) { c.*outer = parse_number<T>(k, v); }};
}

template <typename Member, typename T>
Entry nested(const char* key, Member RunConfig::*outer, T Member::*inner) {
  return {key,
          [outer, inner](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*outer).*inner ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return data::format_double((c.*outer).*inner);
            else return std::to_string((c.*outer).*inner);
          },
          [outer, inner](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*inner = parse_bool(k, v);
            else (c.*outer).*inner = parse_number<T>(k, v);
          }};
}

Entry conv_stage(const char* key, model::ConvStage model::ModelConfig::*stage, std::size_t model::ConvStage::*field) {
  return {key, [stage, field](const RunConfig& c) { return std::to_string((c.model.*stage).*field); },
          [stage, field](RunConfig& c, const std::string& k, const std::string& v) {
            (c.model.*stage).*field = parse_number<std::size_t>(k, v);
          }};
}

const std::vector<Entry>& entries() {
  using model::ModelConfig;
  using train::TrainConfig;
  static const std::vector<Entry> table = {
      {"dataset", [](const RunConfig& c) { return c.dataset; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = trim(v); }},
      {"out", [](const RunConfig& c) { return c.out; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.out = trim(v); }},
      {"variant",
       [](const RunConfig& c) {
         std::vector<std::string> names;
         for (auto v : c.variants) names.push_back(model::to_string(v));
         return join(names);
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<model::Variant> out;
         for (const auto& name : split_list(v)) {
           if (name == "all") {
             out = {model::Variant::cnn, model::Variant::cnn_lstm, model::Variant::cnn_tcn_lstm};
           } else {
             out.push_back(model::parse_variant(name));
           }
         }
         if (out.empty()) throw ConfigError("config key '" + k + "': empty list");
         c.variants = out;
       }},
      {"target",
       [](const RunConfig& c) {
         std::vector<std::string> names;
         for (auto t : c.targets) names.push_back(train::to_string(t));
         return join(names);
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<train::Target> out;
         for (const auto& name : split_list(v)) {
           if (name == "both") {
             out = {train::Target::valence, train::Target::arousal};
           } else {
             out.push_back(train::parse_target(name));
           }
         }
         if (out.empty()) throw ConfigError("config key '" + k + "': empty list");
         c.targets = out;
       }},
      number("seed", &RunConfig::seed),
      number("jobs", &RunConfig::jobs),
      {"aggregation", [](const RunConfig& c) { return eval::to_string(c.aggregation); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.aggregation = eval::parse_aggregation(trim(v)); }},
      {"fs_hz", [](const RunConfig& c) { return data::format_double(c.filter.fs_hz); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.filter.fs_hz = c.segmenter.fs_hz = parse_number<double>(k, v);
       }},
      nested("filter.order", &RunConfig::filter, &dsp::FilterSpec::order),
      nested("filter.low_hz", &RunConfig::filter, &dsp::FilterSpec::low_hz),
      nested("filter.high_hz", &RunConfig::filter, &dsp::FilterSpec::high_hz),
      nested("segment.window_s", &RunConfig::segmenter, &dsp::SegmenterSpec::window_s),
      nested("segment.overlap_s", &RunConfig::segmenter, &dsp::SegmenterSpec::overlap_s),
      conv_stage("model.conv1.filters", &ModelConfig::conv1, &model::ConvStage::filters),
      conv_stage("model.conv1.kernel", &ModelConfig::conv1, &model::ConvStage::kernel),
      conv_stage("model.conv1.stride", &ModelConfig::conv1, &model::ConvStage::stride),
      conv_stage("model.conv2.filters", &ModelConfig::conv2, &model::ConvStage::filters),
      conv_stage("model.conv2.kernel", &ModelConfig::conv2, &model::ConvStage::kernel),
      conv_stage("model.conv2.stride", &ModelConfig::conv2, &model::ConvStage::stride),
      nested("model.pool_size", &RunConfig::model, &ModelConfig::pool_size),
      nested("model.dropout", &RunConfig::model, &ModelConfig::dropout),
      nested("model.bn_momentum", &RunConfig::model, &ModelConfig::bn_momentum),
      nested("model.bn_epsilon", &RunConfig::model, &ModelConfig::bn_epsilon),
      nested("model.tcn.filters", &RunConfig::model, &ModelConfig::tcn_filters),
      nested("model.tcn.kernel", &RunConfig::model, &ModelConfig::tcn_kernel),
      {"model.tcn.dilations",
       [](const RunConfig& c) {
         std::vector<std::string> items;
         for (auto d : c.model.tcn_dilations) items.push_back(std::to_string(d));
         return join(items);
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<std::size_t> out;
         for (const auto& item : split_list(v)) out.push_back(parse_number<std::size_t>(k, item));
         if (out.empty()) throw ConfigError("config key '" + k + "': empty list");
         c.model.tcn_dilations = out;
       }},
      nested("model.tcn.dropout", &RunConfig::model, &ModelConfig::tcn_dropout),
      nested("model.tcn.skip", &RunConfig::model, &ModelConfig::tcn_skip),
      nested("model.lstm_units", &RunConfig::model, &ModelConfig::lstm_units),
      nested("train.batch_size", &RunConfig::train, &TrainConfig::batch_size),
      nested("train.max_epochs", &RunConfig::train, &TrainConfig::max_epochs),
      nested("train.patience", &RunConfig::train, &TrainConfig::patience),
      nested("train.learning_rate", &RunConfig::train, &TrainConfig::learning_rate),
      nested("train.beta1", &RunConfig::train, &TrainConfig::adam_beta1),
      nested("train.beta2", &RunConfig::train, &TrainConfig::adam_beta2),
      nested("train.eps", &RunConfig::train, &TrainConfig::adam_eps),
      nested("train.val_fraction", &RunConfig::train, &TrainConfig::val_fraction_subjects),
      {"train.class_weights",
       [](const RunConfig& c) {
         return std::string(c.train.class_weight_mode == train::ClassWeightMode::per_fold ? "per_fold" : "per_batch");
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const std::string t = trim(v);
         if (t == "per_fold") c.train.class_weight_mode = train::ClassWeightMode::per_fold;
         else if (t == "per_batch") c.train.class_weight_mode = train::ClassWeightMode::per_batch;
         else throw ConfigError("config key '" + k + "': expected per_fold or per_batch, got '" + v + "'");
       }},
  };
  return table;
}

}  // namespace

train::TrainConfig RunConfig::effective_train() const {
  train::TrainConfig t = train;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  filter.validate();
  segmenter.validate();
  if (filter.fs_hz != segmenter.fs_hz) throw ConfigError("config: filter and segmenter sampling rates differ");
  model.validate();
  if (model.input_len != segmenter.window_samples()) {
    throw ConfigError("config: model input length " + std::to_string(model.input_len) +
                      " differs from the segment window of " + std::to_string(segmenter.window_samples()) + " samples");
  }
  effective_train().validate();
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (variants.empty()) throw ConfigError("config: no variant selected");
  if (targets.empty()) throw ConfigError("config: no target selected");
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key == e.key) {
      e.set(config, key, value);
      // The model consumes whole windows.
      const auto w = std::llround(config.segmenter.window_s * config.segmenter.fs_hz);
      if (w > 0) config.model.input_len = static_cast<std::size_t>(w);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    try {
      set_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_file(RunConfig& config, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(config, ss.str(), file.string());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

}  // namespace ppgemo::cli
