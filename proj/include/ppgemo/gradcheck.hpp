#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppgemo/tensor.hpp"

namespace ppgemo::nn {

struct GradCheckOptions {
  int cases = 20;           // random configurations per layer kind
  double step = 1e-5;       // central-difference step
  double tolerance = 1e-4;  // max relative error
  std::uint64_t seed = 2024;
};

struct GradCheckResult {
  std::string layer;
  int cases = 0;
  double max_rel_error = 0.0;
  std::string worst_case;  // description of the configuration with the largest error
  bool passed = false;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// A differentiable function of one input tensor and a parameter list. The
// scalar under test is sum(probe_weights * forward(x)); `forward` must be
// deterministic (re-seed any dropout RNG inside it) so the mask stays frozen.
struct GradProbe {
  std::function<Tensor(const Tensor&)> forward;
  std::function<Tensor(const Tensor&)> backward;
  std::vector<Parameter*> params;
};

// Max relative error between backward() and central differences over every
// input element and every trainable parameter element.
double check_probe(const GradProbe& probe, const Tensor& x, const Tensor& probe_weights, double step);

// Runs every layer kind (conv same/causal, maxpool, batchnorm-train,
// dropout with frozen mask, lstm, tcn, dense+softmax+weighted CCE).
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace ppgemo::nn
