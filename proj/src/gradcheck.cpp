#include "ppgemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppgemo/layers.hpp"
#include "ppgemo/random.hpp"
#include "ppgemo/training.hpp"

namespace ppgemo::nn {

namespace {

double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

void randomize_params(Layer& layer, Rng& rng) {
  for (auto* p : layer.parameters()) {
    if (!p->trainable) continue;
    for (double& v : p->value.data()) v = uniform(rng, -0.8, 0.8);
    ++p->version;
  }
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

struct CaseOutcome {
  double err = 0.0;
  std::string desc;
};

template <typename MakeCase>
GradCheckResult run_cases(const std::string& layer, const GradCheckOptions& opt, std::uint64_t tag,
                          MakeCase make_case) {
  GradCheckResult r;
  r.layer = layer;
  for (int c = 0; c < opt.cases; ++c) {
    Rng rng(derive_seed(opt.seed, {tag, static_cast<std::uint64_t>(c)}));
    const CaseOutcome out = make_case(rng, opt.step);
    ++r.cases;
    if (out.err > r.max_rel_error || r.worst_case.empty()) {
      r.max_rel_error = std::max(r.max_rel_error, out.err);
      if (out.err >= r.max_rel_error) r.worst_case = out.desc;
    }
  }
  r.passed = r.max_rel_error < opt.tolerance;
  return r;
}

// Layer probe: forward re-seeds the RNG on every call so dropout masks stay
// frozen across the perturbed evaluations.
GradProbe layer_probe(Layer& layer, Mode mode, std::uint64_t mask_seed) {
  GradProbe p;
  p.forward = [&layer, mode, mask_seed](const Tensor& x) {
    Rng rng(mask_seed);
    return layer.forward(x, mode, rng);
  };
  p.backward = [&layer](const Tensor& dy) { return layer.backward(dy); };
  p.params = layer.parameters();
  return p;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

double check_probe(const GradProbe& probe, const Tensor& x, const Tensor& probe_weights, double step) {
  for (auto* p : probe.params) p->zero_grad();
  const Tensor y = probe.forward(x);
  y.expect_shape(probe_weights.shape(), "gradcheck probe weights");
  const Tensor dx = probe.backward(probe_weights);

  double worst = 0.0;
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + step;
    const double lp = weighted_sum(probe.forward(xp), probe_weights);
    xp[i] = orig - step;
    const double lm = weighted_sum(probe.forward(xp), probe_weights);
    xp[i] = orig;
    worst = std::max(worst, relative_error(dx[i], (lp - lm) / (2.0 * step)));
  }
  for (auto* p : probe.params) {
    if (!p->trainable) continue;
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      ++p->version;
      const double lp = weighted_sum(probe.forward(x), probe_weights);
      p->value[i] = orig - step;
      ++p->version;
      const double lm = weighted_sum(probe.forward(x), probe_weights);
      p->value[i] = orig;
      ++p->version;
      worst = std::max(worst, relative_error(analytic[i], (lp - lm) / (2.0 * step)));
    }
  }
  return worst;
}

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opt) {
  std::vector<GradCheckResult> results;

  for (const Padding pad : {Padding::same, Padding::causal}) {
    const bool same = pad == Padding::same;
    results.push_back(run_cases(same ? "conv1d_same" : "conv1d_causal", opt, same ? 1 : 2, [&](Rng& rng, double h) {
      Conv1dSpec s;
      s.in_channels = pick(rng, 1, 4);
      s.filters = pick(rng, 1, 4);
      s.kernel_size = pick(rng, 1, 7);
      s.stride = same ? pick(rng, 1, 4) : 1;
      s.dilation = same ? 1 : pick(rng, 1, 4);
      s.padding = pad;
      s.activation = uniform01(rng) < 0.5 ? Activation::relu : Activation::none;
      const Shape in{pick(rng, 1, 3), pick(rng, 5, 40), s.in_channels};
      Conv1d conv("conv", s);
      randomize_params(conv, rng);
      const Tensor x = random_tensor(in, rng);
      const Tensor w = random_tensor({in[0], conv.output_length(in[1]), s.filters}, rng);
      std::ostringstream d;
      d << "in " << shape_str(in) << " k" << s.kernel_size << " s" << s.stride << " d" << s.dilation
        << (s.activation == Activation::relu ? " relu" : "");
      return CaseOutcome{check_probe(layer_probe(conv, Mode::train, 0), x, w, h), d.str()};
    }));
  }

  results.push_back(run_cases("maxpool1d", opt, 3, [&](Rng& rng, double h) {
    const std::size_t pool = pick(rng, 1, 4);
    const Shape in{pick(rng, 1, 3), pick(rng, pool, 40), pick(rng, 1, 4)};
    MaxPool1d mp("pool", pool);
    const Tensor x = random_tensor(in, rng);
    const Tensor w = random_tensor({in[0], mp.output_length(in[1]), in[2]}, rng);
    return CaseOutcome{check_probe(layer_probe(mp, Mode::train, 0), x, w, h),
                       "in " + shape_str(in) + " pool " + std::to_string(pool)};
  }));

  results.push_back(run_cases("batchnorm_train", opt, 4, [&](Rng& rng, double h) {
    const Shape in{pick(rng, 1, 3), pick(rng, 2, 40), pick(rng, 1, 4)};
    BatchNorm1d bn("bn", in[2]);
    randomize_params(bn, rng);
    const Tensor x = random_tensor(in, rng, -2.0, 2.0);
    const Tensor w = random_tensor(in, rng);
    return CaseOutcome{check_probe(layer_probe(bn, Mode::train, 0), x, w, h), "in " + shape_str(in)};
  }));

  results.push_back(run_cases("dropout_frozen_mask", opt, 5, [&](Rng& rng, double h) {
    const double rate = uniform(rng, 0.0, 0.6);
    const Shape in{pick(rng, 1, 3), pick(rng, 1, 40), pick(rng, 1, 4)};
    Dropout drop("drop", rate);
    const Tensor x = random_tensor(in, rng);
    const Tensor w = random_tensor(in, rng);
    return CaseOutcome{check_probe(layer_probe(drop, Mode::train, rng()), x, w, h), "in " + shape_str(in)};
  }));

  results.push_back(run_cases("lstm", opt, 6, [&](Rng& rng, double h) {
    const Shape in{pick(rng, 1, 3), pick(rng, 1, 40), pick(rng, 1, 4)};
    const std::size_t units = pick(rng, 1, 4);
    Lstm lstm("lstm", in[2], units);
    randomize_params(lstm, rng);
    const Tensor x = random_tensor(in, rng);
    const Tensor w = random_tensor({in[0], units}, rng);
    return CaseOutcome{check_probe(layer_probe(lstm, Mode::train, 0), x, w, h),
                       "in " + shape_str(in) + " units " + std::to_string(units)};
  }));

  results.push_back(run_cases("tcn", opt, 7, [&](Rng& rng, double h) {
    TcnSpec s;
    s.in_channels = pick(rng, 1, 4);
    s.filters = pick(rng, 1, 4);
    s.kernel_size = pick(rng, 2, 4);
    const std::size_t blocks = pick(rng, 1, 3);
    s.dilations.clear();
    for (std::size_t b = 0; b < blocks; ++b) s.dilations.push_back(std::size_t{1} << b);
    s.dropout_rate = 0.3;
    s.use_skip = uniform01(rng) < 0.7;
    const Shape in{pick(rng, 1, 3), pick(rng, 5, 40), s.in_channels};
    Tcn tcn("tcn", s);
    randomize_params(tcn, rng);
    const Tensor x = random_tensor(in, rng);
    const Tensor w = random_tensor({in[0], s.filters}, rng);
    std::ostringstream d;
    d << "in " << shape_str(in) << " f" << s.filters << " k" << s.kernel_size << " blocks " << blocks
      << (s.use_skip ? " skip" : "");
    return CaseOutcome{check_probe(layer_probe(tcn, Mode::train, rng()), x, w, h), d.str()};
  }));

  results.push_back(run_cases("dense_softmax_weighted_cce", opt, 8, [&](Rng& rng, double h) {
    const std::size_t batch = pick(rng, 1, 3);
    const std::size_t feats = pick(rng, 1, 6);
    Dense dense("dense", feats, 2, Activation::softmax);
    randomize_params(dense, rng);
    std::vector<int> labels(batch);
    for (auto& y : labels) y = static_cast<int>(uniform_index(rng, 2));
    train::ClassWeights cw;
    cw.w = {uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0)};
    const Tensor onehot = train::one_hot(labels);

    const Tensor x = random_tensor({batch, feats}, rng, -2.0, 2.0);

    // Scalar loss wrapped as a [1, 1] tensor so the generic probe applies.
    GradProbe q;
    q.forward = [&](const Tensor& in) {
      Rng unused(0);
      const Tensor probs = dense.forward(in, Mode::train, unused);
      return Tensor({1, 1}, std::vector<double>{train::weighted_cce(probs, onehot, cw).loss});
    };
    q.backward = [&](const Tensor& dl) {
      Rng unused(0);
      const Tensor probs = dense.forward(x, Mode::train, unused);
      train::LossResult lr = train::weighted_cce(probs, onehot, cw);
      for (double& g : lr.grad.data()) g *= dl[0];
      return dense.backward(lr.grad);
    };
    q.params = dense.parameters();
    return CaseOutcome{check_probe(q, x, Tensor({1, 1}, 1.0), h),
                       "batch " + std::to_string(batch) + " features " + std::to_string(feats)};
  }));

  return results;
}

}  // namespace ppgemo::nn
