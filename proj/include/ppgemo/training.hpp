#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ppgemo/model.hpp"
#include "ppgemo/signal.hpp"

namespace ppgemo::train {

using nn::Parameter;
using nn::Tensor;

enum class Target { valence, arousal };

std::string to_string(Target t);
Target parse_target(const std::string& name);
int label_of(const dsp::Segment& s, Target t);

enum class ClassWeightMode { per_fold, per_batch };

struct TrainConfig {
  std::size_t batch_size = 512;
  int max_epochs = 350;
  int patience = 80;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction_subjects = 0.2;
  std::uint64_t seed = 42;
  Target target = Target::valence;
  ClassWeightMode class_weight_mode = ClassWeightMode::per_fold;

  void validate() const;
};

struct ClassWeights {
  std::array<double, 2> w{1.0, 1.0};
};

// w_c = N / (2 * n_c). DataError when a class is absent.
ClassWeights compute_class_weights(std::span<const int> labels);

Tensor one_hot(std::span<const int> labels, std::size_t classes = 2);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d probs
};

inline constexpr double kProbFloor = 1e-12;

// (1/B) * sum_i -w_{y_i} ln p_{i, y_i}, probabilities clamped to [1e-12, 1].
LossResult weighted_cce(const Tensor& probs, const Tensor& onehot, const ClassWeights& weights);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// Bias-corrected Adam on every trainable parameter, using p->grad.
void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& config);

// Tracks the best validation accuracy. Only a strictly greater value counts
// as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when `value` improved on the best so far.
  bool update(int epoch, double value);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int since_best_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // running accuracy over train-mode batches
  double val_accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stop_epoch = 0;
  bool stopped_early = false;
  ClassWeights class_weights;

  // One JSON object per epoch followed by a summary line.
  std::string to_jsonl() const;
};

// Batch tensor [n, W, 1] from the segments at `indices`.
Tensor make_batch(std::span<const dsp::Segment> segments, std::span<const std::size_t> indices);
Tensor make_batch(std::span<const dsp::Segment> segments);

// Argmax with ties resolved to class 0.
int predicted_class(const Tensor& probs, std::size_t row);

double evaluate_accuracy(const model::Model& m, std::span<const dsp::Segment> segments, Target target);

// Mini-batch training with restore-best early stopping on validation accuracy.
// Leaves `m` holding the best-epoch parameters.
TrainLog train(model::Model& m, std::span<const dsp::Segment> fit, std::span<const dsp::Segment> val,
               const TrainConfig& config);

// Subject-grouped split: ceil(fraction * n) (at least 1) validation subjects,
// chosen by a seeded shuffle of the sorted subject list.
std::pair<std::vector<std::string>, std::vector<std::string>> make_validation_split(
    std::vector<std::string> subjects, double val_fraction, std::uint64_t seed);

std::vector<dsp::Segment> select_subjects(std::span<const dsp::Segment> segments,
                                          const std::vector<std::string>& subjects);

}  // namespace ppgemo::train
