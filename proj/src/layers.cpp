#include "ppgemo/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ppgemo/error.hpp"

namespace ppgemo::nn {

void Tape::record(const std::vector<const Parameter*>& params, const Shape& out_shape) {
  versions_.clear();
  for (const auto* p : params) versions_.push_back(p->version);
  out_shape_ = out_shape;
  recorded_ = true;
}

void Tape::check(const std::vector<const Parameter*>& params, const Tensor& dy,
                 const std::string& layer) const {
  if (!recorded_) throw StateError(layer + ": backward called before forward");
  if (params.size() != versions_.size()) {
    throw StateError(layer + ": parameter set changed since forward");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->version != versions_[i]) {
      throw StateError(layer + ": parameter '" + params[i]->name + "' was updated after the recorded forward");
    }
  }
  dy.expect_shape(out_shape_, layer + " backward");
}

std::vector<const Parameter*> Layer::const_parameters() {
  std::vector<const Parameter*> out;
  for (auto* p : parameters()) out.push_back(p);
  return out;
}

void Layer::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = uniform(rng, -limit, limit);
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, Conv1dSpec spec) : name_(std::move(name)), spec_(spec) {
  if (spec_.in_channels == 0 || spec_.filters == 0 || spec_.kernel_size == 0 || spec_.stride == 0 ||
      spec_.dilation == 0) {
    throw ConfigError(name_ + ": conv sizes must be positive");
  }
  if (spec_.padding == Padding::causal && spec_.stride != 1) {
    throw ConfigError(name_ + ": causal padding requires stride 1");
  }
  if (spec_.activation == Activation::softmax) {
    throw ConfigError(name_ + ": conv activation must be relu or none");
  }
  kernel_ = Parameter(name_ + ".kernel", Tensor({spec_.kernel_size, spec_.in_channels, spec_.filters}));
  bias_ = Parameter(name_ + ".bias", Tensor({spec_.filters}));
}

void Conv1d::init(Rng& rng) {
  glorot_uniform(kernel_.value, spec_.kernel_size * spec_.in_channels, spec_.kernel_size * spec_.filters, rng);
  bias_.value.fill(0.0);
  ++kernel_.version;
  ++bias_.version;
}

std::size_t Conv1d::output_length(std::size_t time) const {
  if (spec_.padding == Padding::causal) return time;
  return (time + spec_.stride - 1) / spec_.stride;
}

std::size_t Conv1d::left_padding(std::size_t time) const {
  const std::size_t span = (spec_.kernel_size - 1) * spec_.dilation + 1;
  if (spec_.padding == Padding::causal) return span - 1;
  const std::size_t out = output_length(time);
  const std::size_t needed = (out - 1) * spec_.stride + span;
  const std::size_t pad = needed > time ? needed - time : 0;
  return pad / 2;
}

Tensor Conv1d::forward(const Tensor& x, Mode, Rng&) {
  x.expect_rank(3, name_);
  if (x.dim(2) != spec_.in_channels) {
    throw ShapeError(name_ + ": expected " + std::to_string(spec_.in_channels) + " input channels got " +
                     shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t time = x.dim(1);
  const std::size_t cin = spec_.in_channels;
  const std::size_t f = spec_.filters;
  const std::size_t k = spec_.kernel_size;
  const auto d = static_cast<std::ptrdiff_t>(spec_.dilation);
  const std::size_t tout = output_length(time);
  const auto pad = static_cast<std::ptrdiff_t>(left_padding(time));
  const auto t_len = static_cast<std::ptrdiff_t>(time);

  Tensor y({batch, tout, f});
  const double* w = kernel_.value.ptr();
  const double* bias = bias_.value.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.ptr() + b * time * cin;
    double* yb = y.ptr() + b * tout * f;
    for (std::size_t t = 0; t < tout; ++t) {
      double* yrow = yb + t * f;
      std::copy(bias, bias + f, yrow);
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t * spec_.stride) - pad;
      const std::ptrdiff_t k_lo = base >= 0 ? 0 : (-base + d - 1) / d;
      const std::ptrdiff_t k_hi =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k), base < t_len ? (t_len - 1 - base) / d + 1 : 0);
      for (std::ptrdiff_t kk = k_lo; kk < k_hi; ++kk) {
        const double* xrow = xb + (base + kk * d) * static_cast<std::ptrdiff_t>(cin);
        const double* wk = w + static_cast<std::size_t>(kk) * cin * f;
        for (std::size_t c = 0; c < cin; ++c) {
          const double xv = xrow[c];
          const double* wrow = wk + c * f;
          for (std::size_t o = 0; o < f; ++o) yrow[o] += xv * wrow[o];
        }
      }
      if (spec_.activation == Activation::relu) {
        for (std::size_t o = 0; o < f; ++o) yrow[o] = std::max(yrow[o], 0.0);
      }
    }
  }
  input_ = x;
  output_ = y;
  tape_.record(const_parameters(), y.shape());
  return y;
}

Tensor Conv1d::backward(const Tensor& dy_in) {
  tape_.check(const_parameters(), dy_in, name_);
  const std::size_t batch = input_.dim(0);
  const std::size_t time = input_.dim(1);
  const std::size_t cin = spec_.in_channels;
  const std::size_t f = spec_.filters;
  const std::size_t k = spec_.kernel_size;
  const auto d = static_cast<std::ptrdiff_t>(spec_.dilation);
  const std::size_t tout = output_length(time);
  const auto pad = static_cast<std::ptrdiff_t>(left_padding(time));
  const auto t_len = static_cast<std::ptrdiff_t>(time);

  Tensor dy = dy_in;
  if (spec_.activation == Activation::relu) {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(output_[i] > 0.0)) dy[i] = 0.0;
    }
  }

  Tensor dx(input_.shape());
  const double* w = kernel_.value.ptr();
  double* dw = kernel_.grad.ptr();
  double* db = bias_.grad.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = input_.ptr() + b * time * cin;
    double* dxb = dx.ptr() + b * time * cin;
    const double* dyb = dy.ptr() + b * tout * f;
    for (std::size_t t = 0; t < tout; ++t) {
      const double* dyrow = dyb + t * f;
      for (std::size_t o = 0; o < f; ++o) db[o] += dyrow[o];
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t * spec_.stride) - pad;
      const std::ptrdiff_t k_lo = base >= 0 ? 0 : (-base + d - 1) / d;
      const std::ptrdiff_t k_hi =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k), base < t_len ? (t_len - 1 - base) / d + 1 : 0);
      for (std::ptrdiff_t kk = k_lo; kk < k_hi; ++kk) {
        const std::ptrdiff_t idx = (base + kk * d) * static_cast<std::ptrdiff_t>(cin);
        const double* xrow = xb + idx;
        double* dxrow = dxb + idx;
        const std::size_t koff = static_cast<std::size_t>(kk) * cin * f;
        for (std::size_t c = 0; c < cin; ++c) {
          const double xv = xrow[c];
          const double* wrow = w + koff + c * f;
          double* dwrow = dw + koff + c * f;
          for (std::size_t o = 0; o < f; ++o) dwrow[o] += xv * dyrow[o];
          if (input_grad_) {
            double acc = 0.0;
            for (std::size_t o = 0; o < f; ++o) acc += wrow[o] * dyrow[o];
            dxrow[c] += acc;
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool1d

MaxPool1d::MaxPool1d(std::string name, std::size_t pool_size, std::size_t stride)
    : name_(std::move(name)), pool_(pool_size), stride_(stride == 0 ? pool_size : stride) {
  if (pool_ == 0) throw ConfigError(name_ + ": pool_size must be >= 1");
}

std::size_t MaxPool1d::output_length(std::size_t time) const {
  if (time < pool_) {
    throw ShapeError(name_ + ": time length " + std::to_string(time) + " shorter than pool size " +
                     std::to_string(pool_));
  }
  return (time - pool_) / stride_ + 1;
}

Tensor MaxPool1d::forward(const Tensor& x, Mode, Rng&) {
  x.expect_rank(3, name_);
  const std::size_t batch = x.dim(0);
  const std::size_t time = x.dim(1);
  const std::size_t ch = x.dim(2);
  const std::size_t tout = output_length(time);
  Tensor y({batch, tout, ch});
  argmax_.assign(y.size(), 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < tout; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t best = (b * time + t * stride_) * ch + c;
        for (std::size_t p = 1; p < pool_; ++p) {
          const std::size_t idx = (b * time + t * stride_ + p) * ch + c;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t out = (b * tout + t) * ch + c;
        y[out] = x[best];
        argmax_[out] = best;
      }
    }
  }
  in_shape_ = x.shape();
  tape_.record({}, y.shape());
  return y;
}

Tensor MaxPool1d::backward(const Tensor& dy) {
  tape_.check({}, dy, name_);
  Tensor dx(in_shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

// ---------------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(std::string name, std::size_t channels, double momentum, double epsilon)
    : name_(std::move(name)), channels_(channels), momentum_(momentum), epsilon_(epsilon) {
  if (channels_ == 0) throw ConfigError(name_ + ": channels must be positive");
  if (!(momentum_ >= 0.0 && momentum_ < 1.0)) throw ConfigError(name_ + ": momentum must lie in [0, 1)");
  if (!(epsilon_ > 0.0)) throw ConfigError(name_ + ": epsilon must be positive");
  gamma_ = Parameter(name_ + ".gamma", Tensor({channels_}, 1.0));
  beta_ = Parameter(name_ + ".beta", Tensor({channels_}, 0.0));
  running_mean_ = Parameter(name_ + ".running_mean", Tensor({channels_}, 0.0), false);
  running_var_ = Parameter(name_ + ".running_var", Tensor({channels_}, 1.0), false);
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode, Rng&) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError(name_ + ": expected [batch, time, channels] or [batch, channels] got " + shape_str(x.shape()));
  }
  if (x.shape().back() != channels_) {
    throw ShapeError(name_ + ": expected " + std::to_string(channels_) + " channels got " + shape_str(x.shape()));
  }
  const std::size_t rows = x.size() / channels_;
  const std::size_t ch = channels_;
  Tensor y(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(ch, 0.0);

  if (mode == Mode::train) {
    std::vector<double> mean(ch, 0.0);
    std::vector<double> var(ch, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) mean[c] += x[r * ch + c];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const double dv = x[r * ch + c] - mean[c];
        var[c] += dv * dv;
      }
    }
    for (auto& v : var) v /= static_cast<double>(rows);
    // Zero-debiased EMA: after t updates the running value is the
    // momentum-weighted mean of the t batch statistics seen so far.
    ++updates_;
    const double alpha = (1.0 - momentum_) / (1.0 - std::pow(momentum_, static_cast<double>(updates_)));
    for (std::size_t c = 0; c < ch; ++c) {
      inv_std_[c] = 1.0 / std::sqrt(var[c] + epsilon_);
      running_mean_.value[c] = (1.0 - alpha) * running_mean_.value[c] + alpha * mean[c];
      running_var_.value[c] = (1.0 - alpha) * running_var_.value[c] + alpha * var[c];
    }
    ++running_mean_.version;
    ++running_var_.version;
    stats_ready_ = true;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        xhat_[i] = (x[i] - mean[c]) * inv_std_[c];
        y[i] = gamma_.value[c] * xhat_[i] + beta_.value[c];
      }
    }
  } else {
    if (!stats_ready_) {
      throw StateError(name_ + ": inference requested before running statistics were computed or loaded");
    }
    for (std::size_t c = 0; c < ch; ++c) inv_std_[c] = 1.0 / std::sqrt(running_var_.value[c] + epsilon_);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        xhat_[i] = (x[i] - running_mean_.value[c]) * inv_std_[c];
        y[i] = gamma_.value[c] * xhat_[i] + beta_.value[c];
      }
    }
  }
  last_mode_ = mode;
  // Running stats are excluded from the version check: the train forward
  // itself advances them.
  tape_.record({&gamma_, &beta_}, y.shape());
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  tape_.check({&gamma_, &beta_}, dy, name_);
  const std::size_t ch = channels_;
  const std::size_t rows = dy.size() / ch;
  Tensor dx(dy.shape());
  std::vector<double> sum_dy(ch, 0.0);
  std::vector<double> sum_dy_xhat(ch, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t i = r * ch + c;
      sum_dy[c] += dy[i];
      sum_dy_xhat[c] += dy[i] * xhat_[i];
    }
  }
  for (std::size_t c = 0; c < ch; ++c) {
    gamma_.grad[c] += sum_dy_xhat[c];
    beta_.grad[c] += sum_dy[c];
  }
  if (last_mode_ == Mode::train) {
    const double n = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        dx[i] = gamma_.value[c] * inv_std_[c] / n * (n * dy[i] - sum_dy[c] - xhat_[i] * sum_dy_xhat[c]);
      }
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        dx[i] = dy[i] * gamma_.value[c] * inv_std_[c];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(std::string name, double rate) : name_(std::move(name)), rate_(rate) {
  if (!(rate_ >= 0.0 && rate_ < 1.0)) throw ConfigError(name_ + ": dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  tape_.record({}, x.shape());
  if (mode == Mode::infer || rate_ == 0.0) {
    mask_.clear();
    return x;
  }
  const double scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.size());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = uniform01(rng) < rate_ ? 0.0 : scale;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  tape_.check({}, dy, name_);
  if (mask_.empty()) return dy;
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------- GlobalMaxPool1d

Tensor GlobalMaxPool1d::forward(const Tensor& x, Mode, Rng&) {
  x.expect_rank(3, name_);
  const std::size_t batch = x.dim(0);
  const std::size_t time = x.dim(1);
  const std::size_t ch = x.dim(2);
  Tensor y({batch, ch});
  argmax_.assign(batch * ch, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best = b * time * ch + c;
      for (std::size_t t = 1; t < time; ++t) {
        const std::size_t idx = (b * time + t) * ch + c;
        if (x[idx] > x[best]) best = idx;
      }
      y[b * ch + c] = x[best];
      argmax_[b * ch + c] = best;
    }
  }
  in_shape_ = x.shape();
  tape_.record({}, y.shape());
  return y;
}

Tensor GlobalMaxPool1d::backward(const Tensor& dy) {
  tape_.check({}, dy, name_);
  Tensor dx(in_shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in_features, std::size_t units, Activation activation)
    : name_(std::move(name)), in_(in_features), units_(units), activation_(activation) {
  if (in_ == 0 || units_ == 0) throw ConfigError(name_ + ": dense sizes must be positive");
  if (activation_ == Activation::relu) throw ConfigError(name_ + ": dense activation must be softmax or none");
  kernel_ = Parameter(name_ + ".kernel", Tensor({in_, units_}));
  bias_ = Parameter(name_ + ".bias", Tensor({units_}));
}

void Dense::init(Rng& rng) {
  glorot_uniform(kernel_.value, in_, units_, rng);
  bias_.value.fill(0.0);
  ++kernel_.version;
  ++bias_.version;
}

Tensor Dense::forward(const Tensor& x, Mode, Rng&) {
  x.expect_rank(2, name_);
  if (x.dim(1) != in_) {
    throw ShapeError(name_ + ": expected " + std::to_string(in_) + " features got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  Tensor y({batch, units_});
  for (std::size_t b = 0; b < batch; ++b) {
    double* yrow = y.ptr() + b * units_;
    for (std::size_t u = 0; u < units_; ++u) yrow[u] = bias_.value[u];
    for (std::size_t i = 0; i < in_; ++i) {
      const double xv = x.at(b, i);
      const double* wrow = kernel_.value.ptr() + i * units_;
      for (std::size_t u = 0; u < units_; ++u) yrow[u] += xv * wrow[u];
    }
    if (activation_ == Activation::softmax) {
      const double mx = *std::max_element(yrow, yrow + units_);
      double sum = 0.0;
      for (std::size_t u = 0; u < units_; ++u) {
        yrow[u] = std::exp(yrow[u] - mx);
        sum += yrow[u];
      }
      for (std::size_t u = 0; u < units_; ++u) yrow[u] /= sum;
    }
  }
  input_ = x;
  output_ = y;
  tape_.record(const_parameters(), y.shape());
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  tape_.check(const_parameters(), dy, name_);
  const std::size_t batch = input_.dim(0);
  Tensor dz = dy;
  if (activation_ == Activation::softmax) {
    // dz_j = p_j * (dy_j - sum_k p_k dy_k)
    for (std::size_t b = 0; b < batch; ++b) {
      double dot = 0.0;
      for (std::size_t u = 0; u < units_; ++u) dot += output_.at(b, u) * dy.at(b, u);
      for (std::size_t u = 0; u < units_; ++u) dz.at(b, u) = output_.at(b, u) * (dy.at(b, u) - dot);
    }
  }
  Tensor dx({batch, in_});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* dzrow = dz.ptr() + b * units_;
    for (std::size_t u = 0; u < units_; ++u) bias_.grad[u] += dzrow[u];
    for (std::size_t i = 0; i < in_; ++i) {
      const double xv = input_.at(b, i);
      const double* wrow = kernel_.value.ptr() + i * units_;
      double* gw = kernel_.grad.ptr() + i * units_;
      double acc = 0.0;
      for (std::size_t u = 0; u < units_; ++u) {
        gw[u] += xv * dzrow[u];
        acc += wrow[u] * dzrow[u];
      }
      dx.at(b, i) = acc;
    }
  }
  return dx;
}

}  // namespace ppgemo::nn
