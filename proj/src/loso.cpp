#include "ppgemo/loso.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "ppgemo/error.hpp"
#include "ppgemo/random.hpp"

namespace ppgemo::eval {

std::uint64_t fold_seed(std::uint64_t run_seed, std::size_t fold_index, train::Target target) {
  return derive_seed(run_seed, {static_cast<std::uint64_t>(fold_index), target == train::Target::valence ? 0u : 1u});
}

namespace {

FoldOutcome run_task(std::span<const dsp::Segment> segments, const Fold& fold, std::size_t fold_index,
                     train::Target target, const LosoConfig& config) {
  FoldOutcome out;
  out.fold_index = fold_index;
  out.target = target;
  out.test_subject = fold.test_subject;
  out.fold_seed = fold_seed(config.train.seed, fold_index, target);

  auto [fit_subjects, val_subjects] = train::make_validation_split(
      fold.train_subjects, config.train.val_fraction_subjects, derive_seed(out.fold_seed, {1}));
  out.fit_subjects = fit_subjects;
  out.val_subjects = val_subjects;

  const auto fit = train::select_subjects(segments, fit_subjects);
  const auto val = train::select_subjects(segments, val_subjects);
  const auto test = train::select_subjects(segments, {fold.test_subject});
  if (fit.empty() || val.empty() || test.empty()) {
    throw DataError("fold " + std::to_string(fold_index) + " (test " + fold.test_subject +
                    "): a fit, validation or test partition has no segments");
  }

  model::ModelConfig mc = config.model;
  auto m = model::Model::build(mc, derive_seed(out.fold_seed, {2}));

  train::TrainConfig tc = config.train;
  tc.target = target;
  tc.seed = derive_seed(out.fold_seed, {3});
  out.log = train::train(m, fit, val, tc);
  out.fit_accuracy = train::evaluate_accuracy(m, fit, target);
  out.metrics = evaluate_fold(m, test, target, config.aggregation);
  return out;
}

}  // namespace

LosoResult run_loso(std::span<const dsp::Segment> segments, model::Variant variant,
                    const std::vector<train::Target>& targets, const LosoConfig& config,
                    const FoldCallback& on_fold) {
  if (segments.empty()) throw DataError("loso: no segments");
  if (targets.empty()) throw ConfigError("loso: no targets requested");
  if (config.jobs == 0) throw ConfigError("loso: jobs must be >= 1");
  config.train.validate();
  LosoConfig cfg = config;
  cfg.model.variant = variant;
  cfg.model.validate();

  std::vector<std::string> ids;
  for (const auto& s : segments) ids.push_back(s.subject_id);
  const auto folds = loso_folds(ids);

  struct Task {
    train::Target target;
    std::size_t fold;
  };
  std::vector<Task> tasks;
  for (const auto t : targets) {
    for (std::size_t f = 0; f < folds.size(); ++f) tasks.push_back({t, f});
  }

  std::vector<FoldOutcome> outcomes(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        outcomes[i] = run_task(segments, folds[tasks[i].fold], tasks[i].fold, tasks[i].target, cfg);
        if (on_fold) {
          std::lock_guard lock(callback_mutex);
          on_fold(outcomes[i]);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::min(cfg.jobs, tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::pair<train::Target, std::vector<FoldMetrics>>> per_target;
  for (const auto t : targets) {
    std::vector<FoldMetrics> rows;
    for (const auto& o : outcomes) {
      if (o.target == t) rows.push_back(o.metrics);
    }
    per_target.emplace_back(t, std::move(rows));
  }

  LosoResult result;
  result.report = aggregate(model::to_string(variant), std::move(per_target), cfg.aggregation);
  result.folds = std::move(outcomes);
  return result;
}

nlohmann::json to_json(const FoldOutcome& f) {
  return nlohmann::json{{"fold_index", f.fold_index},
                        {"target", train::to_string(f.target)},
                        {"fold_seed", f.fold_seed},
                        {"test_subject", f.test_subject},
                        {"fit_subjects", f.fit_subjects},
                        {"val_subjects", f.val_subjects},
                        {"metrics", to_json(f.metrics)},
                        {"fit_accuracy", f.fit_accuracy},
                        {"best_epoch", f.log.best_epoch},
                        {"stop_epoch", f.log.stop_epoch},
                        {"stopped_early", f.log.stopped_early},
                        {"class_weights", f.log.class_weights.w}};
}

}  // namespace ppgemo::eval
