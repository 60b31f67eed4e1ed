#include <cmath>

#include "ppgemo/error.hpp"
#include "ppgemo/layers.hpp"

namespace ppgemo::nn {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Lstm::Lstm(std::string name, std::size_t in_features, std::size_t units)
    : name_(std::move(name)), in_(in_features), units_(units) {
  if (in_ == 0 || units_ == 0) throw ConfigError(name_ + ": lstm sizes must be positive");
  kernel_ = Parameter(name_ + ".kernel", Tensor({in_, 4 * units_}));
  recurrent_ = Parameter(name_ + ".recurrent_kernel", Tensor({units_, 4 * units_}));
  bias_ = Parameter(name_ + ".bias", Tensor({4 * units_}));
}

void Lstm::init(Rng& rng) {
  glorot_uniform(kernel_.value, in_, 4 * units_, rng);
  glorot_uniform(recurrent_.value, units_, 4 * units_, rng);
  bias_.value.fill(0.0);
  for (std::size_t u = 0; u < units_; ++u) bias_.value[units_ + u] = 1.0;  // forget gate
  ++kernel_.version;
  ++recurrent_.version;
  ++bias_.version;
}

Tensor Lstm::forward(const Tensor& x, Mode, Rng&) {
  x.expect_rank(3, name_);
  if (x.dim(2) != in_) {
    throw ShapeError(name_ + ": expected " + std::to_string(in_) + " input features got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t u = units_;
  const std::size_t g4 = 4 * u;
  batch_ = batch;
  steps_ = steps;
  gates_.assign(batch * steps * g4, 0.0);
  cells_.assign(batch * steps * u, 0.0);
  hiddens_.assign(batch * steps * u, 0.0);

  const double* w = kernel_.value.ptr();
  const double* r = recurrent_.value.ptr();
  const double* bias = bias_.value.ptr();
  std::vector<double> z(g4);
  Tensor y({batch, u});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double* xt = x.ptr() + (b * steps + t) * in_;
      const double* hprev = t ? hiddens_.data() + (b * steps + t - 1) * u : nullptr;
      const double* cprev = t ? cells_.data() + (b * steps + t - 1) * u : nullptr;
      std::copy(bias, bias + g4, z.begin());
      for (std::size_t i = 0; i < in_; ++i) {
        const double xv = xt[i];
        const double* wrow = w + i * g4;
        for (std::size_t j = 0; j < g4; ++j) z[j] += xv * wrow[j];
      }
      if (hprev) {
        for (std::size_t i = 0; i < u; ++i) {
          const double hv = hprev[i];
          const double* rrow = r + i * g4;
          for (std::size_t j = 0; j < g4; ++j) z[j] += hv * rrow[j];
        }
      }
      double* gt = gates_.data() + (b * steps + t) * g4;
      double* ct = cells_.data() + (b * steps + t) * u;
      double* ht = hiddens_.data() + (b * steps + t) * u;
      for (std::size_t j = 0; j < u; ++j) {
        const double ig = sigmoid(z[j]);
        const double fg = sigmoid(z[u + j]);
        const double cg = std::tanh(z[2 * u + j]);
        const double og = sigmoid(z[3 * u + j]);
        gt[j] = ig;
        gt[u + j] = fg;
        gt[2 * u + j] = cg;
        gt[3 * u + j] = og;
        ct[j] = fg * (cprev ? cprev[j] : 0.0) + ig * cg;
        ht[j] = og * std::tanh(ct[j]);
      }
    }
    const double* hlast = hiddens_.data() + (b * steps + steps - 1) * u;
    std::copy(hlast, hlast + u, y.ptr() + b * u);
  }
  input_ = x;
  tape_.record(const_parameters(), y.shape());
  return y;
}

Tensor Lstm::backward(const Tensor& dy) {
  tape_.check(const_parameters(), dy, name_);
  const std::size_t u = units_;
  const std::size_t g4 = 4 * u;
  const std::size_t steps = steps_;
  const double* w = kernel_.value.ptr();
  const double* r = recurrent_.value.ptr();
  double* gw = kernel_.grad.ptr();
  double* gr = recurrent_.grad.ptr();
  double* gb = bias_.grad.ptr();

  Tensor dx(input_.shape());
  std::vector<double> dh(u), dc(u), dz(g4), dh_prev(u);
  for (std::size_t b = 0; b < batch_; ++b) {
    std::copy(dy.ptr() + b * u, dy.ptr() + (b + 1) * u, dh.begin());
    std::fill(dc.begin(), dc.end(), 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      const double* gt = gates_.data() + (b * steps + t) * g4;
      const double* ct = cells_.data() + (b * steps + t) * u;
      const double* cprev = t ? cells_.data() + (b * steps + t - 1) * u : nullptr;
      const double* hprev = t ? hiddens_.data() + (b * steps + t - 1) * u : nullptr;
      for (std::size_t j = 0; j < u; ++j) {
        const double ig = gt[j];
        const double fg = gt[u + j];
        const double cg = gt[2 * u + j];
        const double og = gt[3 * u + j];
        const double tc = std::tanh(ct[j]);
        const double d_o = dh[j] * tc;
        const double d_c = dc[j] + dh[j] * og * (1.0 - tc * tc);
        dz[j] = d_c * cg * ig * (1.0 - ig);
        dz[u + j] = d_c * (cprev ? cprev[j] : 0.0) * fg * (1.0 - fg);
        dz[2 * u + j] = d_c * ig * (1.0 - cg * cg);
        dz[3 * u + j] = d_o * og * (1.0 - og);
        dc[j] = d_c * fg;
      }
      for (std::size_t j = 0; j < g4; ++j) gb[j] += dz[j];
      const double* xt = input_.ptr() + (b * steps + t) * in_;
      double* dxt = dx.ptr() + (b * steps + t) * in_;
      for (std::size_t i = 0; i < in_; ++i) {
        const double xv = xt[i];
        const double* wrow = w + i * g4;
        double* gwrow = gw + i * g4;
        double acc = 0.0;
        for (std::size_t j = 0; j < g4; ++j) {
          gwrow[j] += xv * dz[j];
          acc += wrow[j] * dz[j];
        }
        dxt[i] = acc;
      }
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      if (hprev) {
        for (std::size_t i = 0; i < u; ++i) {
          const double hv = hprev[i];
          const double* rrow = r + i * g4;
          double* grrow = gr + i * g4;
          double acc = 0.0;
          for (std::size_t j = 0; j < g4; ++j) {
            grrow[j] += hv * dz[j];
            acc += rrow[j] * dz[j];
          }
          dh_prev[i] = acc;
        }
      }
      dh.swap(dh_prev);
    }
  }
  return dx;
}

}  // namespace ppgemo::nn
