#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppgemo/metrics.hpp"
#include "ppgemo/model.hpp"
#include "ppgemo/report.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/training.hpp"

namespace ppgemo::eval {

struct LosoConfig {
  model::ModelConfig model;
  train::TrainConfig train;  // `seed` is the run seed; `target` is overridden per task
  Aggregation aggregation = Aggregation::segment;
  std::size_t jobs = 1;
};

struct FoldOutcome {
  std::size_t fold_index = 0;
  train::Target target = train::Target::valence;
  std::uint64_t fold_seed = 0;
  std::vector<std::string> fit_subjects;
  std::vector<std::string> val_subjects;
  std::string test_subject;
  FoldMetrics metrics;
  train::TrainLog log;
  // Accuracy of the restored (best-epoch) model on its own fit set.
  double fit_accuracy = 0.0;
};

struct LosoResult {
  EvalReport report;
  std::vector<FoldOutcome> folds;  // ordered by (target, fold index)
};

// Seed for one (fold, target) task, independent of scheduling.
std::uint64_t fold_seed(std::uint64_t run_seed, std::size_t fold_index, train::Target target);

using FoldCallback = std::function<void(const FoldOutcome&)>;

// Runs every (target, fold) task on up to `config.jobs` threads. Each fold
// carves a subject-grouped validation split out of its training subjects.
// `on_fold` is invoked under a lock as tasks finish.
LosoResult run_loso(std::span<const dsp::Segment> segments, model::Variant variant,
                    const std::vector<train::Target>& targets, const LosoConfig& config,
                    const FoldCallback& on_fold = {});

nlohmann::json to_json(const FoldOutcome& f);

}  // namespace ppgemo::eval
