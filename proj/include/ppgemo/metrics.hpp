#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgemo/model.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/training.hpp"

namespace ppgemo::eval {

struct Fold {
  std::vector<std::string> train_subjects;
  std::string test_subject;
};

// One fold per distinct subject, in first-appearance order. Repeated ids in
// the input are collapsed. DataError with fewer than 2 distinct subjects.
std::vector<Fold> loso_folds(const std::vector<std::string>& subject_ids);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// One-vs-rest counts for `class_id`. ShapeError on length mismatch.
Confusion confusion(std::span<const int> preds, std::span<const int> labels, int class_id);

double accuracy(std::span<const int> preds, std::span<const int> labels);
// 2PR/(P+R), 0 when P+R = 0.
double f1_per_class(std::span<const int> preds, std::span<const int> labels, int class_id);
// sum_c support_c / N * F1_c
double weighted_f1(std::span<const int> preds, std::span<const int> labels);
double macro_f1(std::span<const int> preds, std::span<const int> labels);

// Mann-Whitney estimate of P(score_pos > score_neg) with ties counted 1/2.
// MetricUndefinedError when only one class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct FoldMetrics {
  std::string test_subject;
  std::size_t n_items = 0;
  double accuracy = 0.0;
  double f1_class0 = 0.0;
  double f1_class1 = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;  // empty when the test labels are single-class

  bool operator==(const FoldMetrics&) const = default;
};

// segment: every window is one item. trial_vote: windows of a trial are
// pooled; the score is the mean class-1 probability and the prediction is the
// majority vote of window predictions (ties to class 0).
enum class Aggregation { segment, trial_vote };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& name);

FoldMetrics evaluate_predictions(const std::string& test_subject, std::span<const double> scores,
                                 std::span<const int> preds, std::span<const int> labels);

// probs [n, 2] aligned with `segments`, all from one subject.
FoldMetrics evaluate_probabilities(const nn::Tensor& probs, std::span<const dsp::Segment> segments,
                                   train::Target target, Aggregation aggregation = Aggregation::segment);

FoldMetrics evaluate_fold(const model::Model& m, std::span<const dsp::Segment> test_segments,
                          train::Target target, Aggregation aggregation = Aggregation::segment);

}  // namespace ppgemo::eval
