#include "ppgemo/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ppgemo/error.hpp"

namespace ppgemo::eval {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": predictions have " + std::to_string(a) + " items, labels " +
                     std::to_string(b));
  }
}

}  // namespace

std::vector<Fold> loso_folds(const std::vector<std::string>& subject_ids) {
  std::vector<std::string> subjects;
  std::set<std::string> seen;
  for (const auto& s : subject_ids) {
    if (seen.insert(s).second) subjects.push_back(s);
  }
  if (subjects.size() < 2) {
    throw DataError("loso_folds: need at least 2 distinct subjects, got " + std::to_string(subjects.size()));
  }
  std::vector<Fold> folds;
  folds.reserve(subjects.size());
  std::set<std::string> tested;
  for (const auto& test : subjects) {
    if (!tested.insert(test).second) throw std::logic_error("loso_folds: duplicate test subject " + test);
    Fold f;
    f.test_subject = test;
    for (const auto& s : subjects) {
      if (s != test) f.train_subjects.push_back(s);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

Confusion confusion(std::span<const int> preds, std::span<const int> labels, int class_id) {
  check_lengths(preds.size(), labels.size(), "confusion");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == class_id;
    const bool t = labels[i] == class_id;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size(), "accuracy");
  if (preds.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double f1_per_class(std::span<const int> preds, std::span<const int> labels, int class_id) {
  const Confusion c = confusion(preds, labels, class_id);
  // 2PR/(P+R) == 2TP/(2TP+FP+FN); zero when there are no true positives.
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

double weighted_f1(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size(), "weighted_f1");
  if (labels.empty()) throw DataError("weighted_f1: empty input");
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    const auto support = std::count(labels.begin(), labels.end(), c);
    if (support > 0) total += static_cast<double>(support) * f1_per_class(preds, labels, c);
  }
  return total / static_cast<double>(labels.size());
}

double macro_f1(std::span<const int> preds, std::span<const int> labels) {
  return 0.5 * (f1_per_class(preds, labels, 0) + f1_per_class(preds, labels, 1));
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "auc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, kept integral so the result is exact.
  std::size_t pos = 0, neg = 0, twice_u = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_u += group_pos * (2 * neg_below + group_neg);
    neg_below += group_neg;
    pos += group_pos;
    neg += group_neg;
    i = j;
  }
  if (pos == 0 || neg == 0) {
    throw MetricUndefinedError("auc: labels contain a single class (" + std::to_string(pos) + " positive, " +
                               std::to_string(neg) + " negative)");
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::string to_string(Aggregation a) { return a == Aggregation::segment ? "segment" : "trial_vote"; }

Aggregation parse_aggregation(const std::string& name) {
  if (name == "segment") return Aggregation::segment;
  if (name == "trial_vote") return Aggregation::trial_vote;
  throw ConfigError("unknown aggregation '" + name + "' (expected segment or trial_vote)");
}

FoldMetrics evaluate_predictions(const std::string& test_subject, std::span<const double> scores,
                                 std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size(), "evaluate_predictions");
  check_lengths(scores.size(), labels.size(), "evaluate_predictions");
  FoldMetrics m;
  m.test_subject = test_subject;
  m.n_items = labels.size();
  m.accuracy = accuracy(preds, labels);
  m.f1_class0 = f1_per_class(preds, labels, 0);
  m.f1_class1 = f1_per_class(preds, labels, 1);
  m.weighted_f1 = weighted_f1(preds, labels);
  m.macro_f1 = 0.5 * (m.f1_class0 + m.f1_class1);
  try {
    m.auc = auc(scores, labels);
  } catch (const MetricUndefinedError&) {
    m.auc.reset();
  }
  return m;
}

FoldMetrics evaluate_probabilities(const nn::Tensor& probs, std::span<const dsp::Segment> segments,
                                   train::Target target, Aggregation aggregation) {
  if (segments.empty()) throw DataError("evaluate_fold: empty test set");
  probs.expect_shape({segments.size(), 2}, "evaluate_fold probabilities");
  const std::string& subject = segments.front().subject_id;
  for (const auto& s : segments) {
    if (s.subject_id != subject) {
      throw DataError("evaluate_fold: test segments span subjects " + subject + " and " + s.subject_id);
    }
  }

  std::vector<double> scores;
  std::vector<int> preds, labels;
  if (aggregation == Aggregation::segment) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      scores.push_back(probs.at(i, 1));
      preds.push_back(train::predicted_class(probs, i));
      labels.push_back(train::label_of(segments[i], target));
    }
  } else {
    struct Acc {
      double score_sum = 0.0;
      std::size_t n = 0, votes1 = 0;
      int label = 0;
    };
    std::map<int, Acc> trials;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      Acc& a = trials[segments[i].trial_id];
      a.score_sum += probs.at(i, 1);
      a.votes1 += train::predicted_class(probs, i) == 1;
      ++a.n;
      a.label = train::label_of(segments[i], target);
    }
    for (const auto& [trial, a] : trials) {
      scores.push_back(a.score_sum / static_cast<double>(a.n));
      preds.push_back(2 * a.votes1 > a.n ? 1 : 0);
      labels.push_back(a.label);
    }
  }
  return evaluate_predictions(subject, scores, preds, labels);
}

FoldMetrics evaluate_fold(const model::Model& m, std::span<const dsp::Segment> test_segments,
                          train::Target target, Aggregation aggregation) {
  if (test_segments.empty()) throw DataError("evaluate_fold: empty test set");
  return evaluate_probabilities(m.predict(train::make_batch(test_segments)), test_segments, target, aggregation);
}

}  // namespace ppgemo::eval
