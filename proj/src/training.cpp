#include "ppgemo/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ppgemo/error.hpp"
#include "ppgemo/params_io.hpp"

namespace ppgemo::train {

using nlohmann::json;

std::string to_string(Target t) { return t == Target::valence ? "valence" : "arousal"; }

Target parse_target(const std::string& name) {
  if (name == "valence") return Target::valence;
  if (name == "arousal") return Target::arousal;
  throw ConfigError("unknown target '" + name + "' (expected valence or arousal)");
}

int label_of(const dsp::Segment& s, Target t) { return t == Target::valence ? s.valence : s.arousal; }

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (patience >= max_epochs) throw ConfigError("train.patience must be smaller than train.max_epochs");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(val_fraction_subjects > 0.0 && val_fraction_subjects < 1.0)) {
    throw ConfigError("train.val_fraction_subjects must lie in (0, 1)");
  }
}

ClassWeights compute_class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> counts{0, 0};
  for (const int y : labels) {
    if (y != 0 && y != 1) throw DataError("class weights: label " + std::to_string(y) + " is not binary");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < 2; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw DataError("class weights: class " + std::to_string(c) + " is absent from the training labels");
    }
  }
  const double n = static_cast<double>(labels.size());
  ClassWeights w;
  for (std::size_t c = 0; c < 2; ++c) w.w[c] = n / (2.0 * static_cast<double>(counts[c]));
  return w;
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("one_hot: label " + std::to_string(y) + " out of range");
    }
    t.at(i, static_cast<std::size_t>(y)) = 1.0;
  }
  return t;
}

LossResult weighted_cce(const Tensor& probs, const Tensor& onehot, const ClassWeights& weights) {
  probs.expect_rank(2, "weighted_cce probs");
  onehot.expect_shape(probs.shape(), "weighted_cce onehot");
  if (probs.dim(1) != 2) throw ShapeError("weighted_cce: expected 2 classes got " + nn::shape_str(probs.shape()));
  const std::size_t batch = probs.dim(0);
  const double inv_b = 1.0 / static_cast<double>(batch);
  LossResult r;
  r.grad = Tensor(probs.shape());
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double y = onehot.at(i, c);
      if (y == 0.0) continue;
      const double p = probs.at(i, c);
      const double pc = std::clamp(p, kProbFloor, 1.0);
      r.loss -= weights.w[c] * y * std::log(pc) * inv_b;
      if (p > kProbFloor && p <= 1.0) r.grad.at(i, c) = -weights.w[c] * y / pc * inv_b;
    }
  }
  return r;
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw StateError("adam: optimizer state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    ++p.version;
  }
}

bool EarlyStopping::update(int epoch, double value) {
  if (value > best_) {
    best_ = value;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    out += json{{"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"train_accuracy", e.train_accuracy},
                {"val_accuracy", e.val_accuracy}}
               .dump();
    out += "\n";
  }
  out += json{{"summary", true},
              {"best_epoch", best_epoch},
              {"stop_epoch", stop_epoch},
              {"stopped_early", stopped_early},
              {"class_weights", class_weights.w}}
             .dump();
  out += "\n";
  return out;
}

Tensor make_batch(std::span<const dsp::Segment> segments, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("make_batch: empty batch");
  const std::size_t w = segments[indices[0]].samples.size();
  Tensor x({indices.size(), w, 1});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = segments[indices[i]].samples;
    if (s.size() != w) throw ShapeError("make_batch: segments of different lengths in one batch");
    std::copy(s.begin(), s.end(), x.ptr() + i * w);
  }
  return x;
}

Tensor make_batch(std::span<const dsp::Segment> segments) {
  std::vector<std::size_t> idx(segments.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(segments, idx);
}

int predicted_class(const Tensor& probs, std::size_t row) {
  return probs.at(row, 1) > probs.at(row, 0) ? 1 : 0;
}

double evaluate_accuracy(const model::Model& m, std::span<const dsp::Segment> segments, Target target) {
  if (segments.empty()) throw DataError("evaluate_accuracy: no segments");
  const Tensor probs = m.predict(make_batch(segments));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (predicted_class(probs, i) == label_of(segments[i], target)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(segments.size());
}

TrainLog train(model::Model& m, std::span<const dsp::Segment> fit, std::span<const dsp::Segment> val,
               const TrainConfig& config) {
  config.validate();
  if (fit.empty()) throw DataError("train: empty training set");
  if (val.empty()) throw DataError("train: empty validation set");
  {
    std::set<std::string> fit_subjects;
    for (const auto& s : fit) fit_subjects.insert(s.subject_id);
    for (const auto& s : val) {
      if (fit_subjects.count(s.subject_id)) {
        throw DataError("train: subject " + s.subject_id + " appears in both training and validation sets");
      }
    }
  }

  std::vector<int> labels(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) labels[i] = label_of(fit[i], config.target);

  TrainLog log;
  log.class_weights = compute_class_weights(labels);

  const AdamConfig adam{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps};
  AdamState adam_state;
  EarlyStopping stopper(config.patience);
  auto params = m.parameters();
  std::vector<nn::Tensor> best = nn::snapshot(params);

  std::vector<std::size_t> order(fit.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch)}));
    shuffle_in_place(order, rng);

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<int> batch_labels(len);
      for (std::size_t i = 0; i < len; ++i) batch_labels[i] = labels[idx[i]];

      ClassWeights weights = log.class_weights;
      if (config.class_weight_mode == ClassWeightMode::per_batch) {
        const auto ones = static_cast<std::size_t>(std::count(batch_labels.begin(), batch_labels.end(), 1));
        const std::array<std::size_t, 2> counts{len - ones, ones};
        for (std::size_t c = 0; c < 2; ++c) {
          weights.w[c] = counts[c] ? static_cast<double>(len) / (2.0 * static_cast<double>(counts[c])) : 0.0;
        }
      }

      const Tensor x = make_batch(fit, idx);
      m.zero_grad();
      const Tensor probs = m.forward(x, nn::Mode::train, rng);
      const LossResult loss = weighted_cce(probs, one_hot(batch_labels), weights);
      m.backward(loss.grad);
      adam_step(params, adam_state, adam);

      loss_sum += loss.loss * static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) {
        if (predicted_class(probs, i) == batch_labels[i]) ++hits;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(fit.size());
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(fit.size());
    rec.val_accuracy = evaluate_accuracy(m, val, config.target);
    log.epochs.push_back(rec);
    log.stop_epoch = epoch;

    if (stopper.update(epoch, rec.val_accuracy)) best = nn::snapshot(params);
    if (stopper.should_stop()) {
      log.stopped_early = true;
      break;
    }
  }

  log.best_epoch = stopper.best_epoch();
  nn::restore(params, best);
  return log;
}

std::pair<std::vector<std::string>, std::vector<std::string>> make_validation_split(
    std::vector<std::string> subjects, double val_fraction, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) {
    throw DataError("validation split: need at least 2 training subjects, got " + std::to_string(subjects.size()));
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("validation split: fraction must lie in (0, 1)");
  const double raw = std::ceil(val_fraction * static_cast<double>(subjects.size()) - 1e-9);
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(raw));
  n_val = std::min(n_val, subjects.size() - 1);

  Rng rng(derive_seed(seed, {0x76616c73706c6974ULL}));
  shuffle_in_place(subjects, rng);
  std::vector<std::string> val(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> fit(subjects.begin() + static_cast<std::ptrdiff_t>(n_val), subjects.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());
  return {fit, val};
}

std::vector<dsp::Segment> select_subjects(std::span<const dsp::Segment> segments,
                                          const std::vector<std::string>& subjects) {
  const std::set<std::string> wanted(subjects.begin(), subjects.end());
  std::vector<dsp::Segment> out;
  for (const auto& s : segments) {
    if (wanted.count(s.subject_id)) out.push_back(s);
  }
  return out;
}

}  // namespace ppgemo::train
