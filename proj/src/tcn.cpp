#include <algorithm>

#include "ppgemo/error.hpp"
#include "ppgemo/layers.hpp"

namespace ppgemo::nn {

std::size_t TcnSpec::receptive_field() const {
  std::size_t sum = 0;
  for (const auto d : dilations) sum += d;
  return 1 + 2 * (kernel_size - 1) * sum;
}

Tcn::Tcn(std::string name, TcnSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
  if (spec_.dilations.empty()) throw ConfigError(name_ + ": dilations must be non-empty");
  for (std::size_t i = 0; i < spec_.dilations.size(); ++i) {
    if (spec_.dilations[i] == 0) throw ConfigError(name_ + ": dilations must be positive");
    if (i > 0 && spec_.dilations[i] <= spec_.dilations[i - 1]) {
      throw ConfigError(name_ + ": dilations must be strictly ascending");
    }
  }
  std::size_t in_ch = spec_.in_channels;
  for (std::size_t i = 0; i < spec_.dilations.size(); ++i) {
    const std::string prefix = name_ + ".block" + std::to_string(i);
    Block blk;
    Conv1dSpec cs;
    cs.in_channels = in_ch;
    cs.filters = spec_.filters;
    cs.kernel_size = spec_.kernel_size;
    cs.dilation = spec_.dilations[i];
    cs.padding = Padding::causal;
    cs.activation = Activation::relu;
    blk.conv_a = Conv1d(prefix + ".conv_a", cs);
    cs.in_channels = spec_.filters;
    blk.conv_b = Conv1d(prefix + ".conv_b", cs);
    blk.drop_a = Dropout(prefix + ".drop_a", spec_.dropout_rate);
    blk.drop_b = Dropout(prefix + ".drop_b", spec_.dropout_rate);
    if (in_ch != spec_.filters) {
      Conv1dSpec ps;
      ps.in_channels = in_ch;
      ps.filters = spec_.filters;
      ps.kernel_size = 1;
      ps.padding = Padding::causal;
      ps.activation = Activation::none;
      blk.has_projection = true;
      blk.projection = Conv1d(prefix + ".projection", ps);
    }
    blocks_.push_back(std::move(blk));
    in_ch = spec_.filters;
  }
}

void Tcn::init(Rng& rng) {
  for (auto& blk : blocks_) {
    blk.conv_a.init(rng);
    blk.conv_b.init(rng);
    if (blk.has_projection) blk.projection.init(rng);
  }
}

std::vector<Parameter*> Tcn::parameters() {
  std::vector<Parameter*> out;
  for (auto& blk : blocks_) {
    for (auto* p : blk.conv_a.parameters()) out.push_back(p);
    for (auto* p : blk.conv_b.parameters()) out.push_back(p);
    if (blk.has_projection) {
      for (auto* p : blk.projection.parameters()) out.push_back(p);
    }
  }
  return out;
}

Tensor Tcn::forward_sequence(const Tensor& x, Mode mode, Rng& rng) {
  x.expect_rank(3, name_);
  if (x.dim(2) != spec_.in_channels) {
    throw ShapeError(name_ + ": expected " + std::to_string(spec_.in_channels) + " input channels got " +
                     shape_str(x.shape()));
  }
  const Shape out_shape{x.dim(0), x.dim(1), spec_.filters};
  Tensor skip_sum;
  if (spec_.use_skip) skip_sum = Tensor(out_shape);

  Tensor in = x;
  for (auto& blk : blocks_) {
    Tensor branch = blk.conv_a.forward(in, mode, rng);
    branch = blk.drop_a.forward(branch, mode, rng);
    branch = blk.conv_b.forward(branch, mode, rng);
    branch = blk.drop_b.forward(branch, mode, rng);
    Tensor out = blk.has_projection ? blk.projection.forward(in, mode, rng) : in;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i] + branch[i], 0.0);
    if (spec_.use_skip) {
      for (std::size_t i = 0; i < skip_sum.size(); ++i) skip_sum[i] += branch[i];
    }
    blk.residual_out = out;
    in = std::move(out);
  }

  if (spec_.use_skip) {
    for (double& v : skip_sum.data()) v = std::max(v, 0.0);
    output_ = std::move(skip_sum);
  } else {
    output_ = std::move(in);
  }
  seq_len_ = x.dim(1);
  tape_.record(const_parameters(), output_.shape());
  return output_;
}

Tensor Tcn::backward_sequence(const Tensor& dy) {
  tape_.check(const_parameters(), dy, name_);
  Tensor dskip;
  Tensor d_next(dy.shape());
  if (spec_.use_skip) {
    dskip = dy;
    for (std::size_t i = 0; i < dskip.size(); ++i) {
      if (!(output_[i] > 0.0)) dskip[i] = 0.0;
    }
  } else {
    d_next = dy;
  }

  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    Block& blk = blocks_[bi];
    Tensor d_pre = d_next;
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      if (!(blk.residual_out[i] > 0.0)) d_pre[i] = 0.0;
    }
    Tensor d_branch = d_pre;
    if (spec_.use_skip) {
      for (std::size_t i = 0; i < d_branch.size(); ++i) d_branch[i] += dskip[i];
    }
    d_branch = blk.drop_b.backward(d_branch);
    d_branch = blk.conv_b.backward(d_branch);
    d_branch = blk.drop_a.backward(d_branch);
    Tensor d_in = blk.conv_a.backward(d_branch);
    const Tensor d_res = blk.has_projection ? blk.projection.backward(d_pre) : d_pre;
    for (std::size_t i = 0; i < d_in.size(); ++i) d_in[i] += d_res[i];
    d_next = std::move(d_in);
  }
  return d_next;
}

Tensor Tcn::forward(const Tensor& x, Mode mode, Rng& rng) {
  const Tensor seq = forward_sequence(x, mode, rng);
  const std::size_t batch = seq.dim(0);
  const std::size_t time = seq.dim(1);
  const std::size_t f = spec_.filters;
  Tensor y({batch, f});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* last = seq.ptr() + (b * time + time - 1) * f;
    std::copy(last, last + f, y.ptr() + b * f);
  }
  tape_.record(const_parameters(), y.shape());
  return y;
}

Tensor Tcn::backward(const Tensor& dy) {
  tape_.check(const_parameters(), dy, name_);
  const std::size_t batch = dy.dim(0);
  const std::size_t f = spec_.filters;
  Tensor dseq({batch, seq_len_, f});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(dy.ptr() + b * f, dy.ptr() + (b + 1) * f, dseq.ptr() + (b * seq_len_ + seq_len_ - 1) * f);
  }
  tape_.record(const_parameters(), dseq.shape());
  return backward_sequence(dseq);
}

}  // namespace ppgemo::nn
