#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ppgemo/random.hpp"
#include "ppgemo/tensor.hpp"

namespace ppgemo::nn {

enum class Padding { same, causal };
enum class Activation { none, relu, softmax };

// Forward-pass record consulted by backward(): which parameter versions the
// forward used and which output shape it produced.
class Tape {
 public:
  void record(const std::vector<const Parameter*>& params, const Shape& out_shape);
  // StateError when nothing was recorded or a parameter changed since; ShapeError
  // when the upstream gradient does not match the recorded output.
  void check(const std::vector<const Parameter*>& params, const Tensor& dy,
             const std::string& layer) const;
  bool recorded() const { return recorded_; }

 private:
  bool recorded_ = false;
  std::vector<std::uint64_t> versions_;
  Shape out_shape_;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual const std::string& name() const = 0;

  std::vector<const Parameter*> const_parameters();
  void zero_grad();
};

// Glorot/Xavier uniform: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct Conv1dSpec {
  std::size_t in_channels = 1;
  std::size_t filters = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  Padding padding = Padding::same;
  Activation activation = Activation::none;
};

// Input [batch, time, in_channels] -> [batch, time_out, filters].
// Kernel layout [kernel_size, in_channels, filters].
class Conv1d : public Layer {
 public:
  Conv1d() = default;
  Conv1d(std::string name, Conv1dSpec spec);

  void init(Rng& rng);
  std::size_t output_length(std::size_t time) const;
  std::size_t left_padding(std::size_t time) const;

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
  const std::string& name() const override { return name_; }
  const Conv1dSpec& spec() const { return spec_; }

  Parameter& kernel() { return kernel_; }
  Parameter& bias() { return bias_; }

  // When off, backward() skips the input gradient and returns zeros (first
  // layer of a network).
  void set_input_grad(bool on) { input_grad_ = on; }

 private:
  std::string name_;
  Conv1dSpec spec_;
  bool input_grad_ = true;
  Parameter kernel_;
  Parameter bias_;
  Tape tape_;
  Tensor input_;
  Tensor output_;
};

// Non-overlapping by default (stride == pool_size); trailing remainder dropped.
class MaxPool1d : public Layer {
 public:
  MaxPool1d() = default;
  MaxPool1d(std::string name, std::size_t pool_size, std::size_t stride = 0);

  std::size_t output_length(std::size_t time) const;
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  std::size_t pool_ = 2;
  std::size_t stride_ = 2;
  Tape tape_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

// Per-channel normalisation over batch and time. Running statistics are a
// zero-debiased exponential moving average: update t applies
// running += a_t * (batch_stat - running), a_t = (1 - momentum) / (1 - momentum^t),
// so the first update copies the batch statistic and a_t tends to 1 - momentum.
class BatchNorm1d : public Layer {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(std::string name, std::size_t channels, double momentum = 0.99, double epsilon = 1e-3);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }
  const std::string& name() const override { return name_; }

  // Infer mode refuses to run until running stats were updated by a train
  // pass or restored from storage.
  bool running_stats_ready() const { return stats_ready_; }
  void mark_running_stats_ready() { stats_ready_ = true; }
  std::uint64_t update_count() const { return updates_; }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Parameter& running_mean() { return running_mean_; }
  Parameter& running_var() { return running_var_; }

 private:
  std::string name_;
  std::size_t channels_ = 0;
  double momentum_ = 0.99;
  double epsilon_ = 1e-3;
  Parameter gamma_;
  Parameter beta_;
  Parameter running_mean_;
  Parameter running_var_;
  bool stats_ready_ = false;
  std::uint64_t updates_ = 0;

  Tape tape_;
  Mode last_mode_ = Mode::train;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

// Inverted dropout: survivors scaled by 1/(1-rate) in train mode, identity in
// infer mode.
class Dropout : public Layer {
 public:
  Dropout() = default;
  Dropout(std::string name, double rate);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  const std::string& name() const override { return name_; }
  double rate() const { return rate_; }

 private:
  std::string name_;
  double rate_ = 0.0;
  Tape tape_;
  std::vector<double> mask_;  // empty when the last forward was identity
};

// [batch, time, channels] -> [batch, channels]
class GlobalMaxPool1d : public Layer {
 public:
  GlobalMaxPool1d() = default;
  explicit GlobalMaxPool1d(std::string name) : name_(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  Tape tape_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

// [batch, features] -> [batch, units]; softmax uses max subtraction.
class Dense : public Layer {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in_features, std::size_t units, Activation activation);

  void init(Rng& rng);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
  const std::string& name() const override { return name_; }

  Parameter& kernel() { return kernel_; }
  Parameter& bias() { return bias_; }

 private:
  std::string name_;
  std::size_t in_ = 0;
  std::size_t units_ = 0;
  Activation activation_ = Activation::none;
  Parameter kernel_;
  Parameter bias_;
  Tape tape_;
  Tensor input_;
  Tensor output_;
};

// Single-layer LSTM returning the last hidden state. Gate order in the packed
// weights is (input, forget, candidate, output); h0 = c0 = 0.
class Lstm : public Layer {
 public:
  Lstm() = default;
  Lstm(std::string name, std::size_t in_features, std::size_t units);

  void init(Rng& rng);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override { return {&kernel_, &recurrent_, &bias_}; }
  const std::string& name() const override { return name_; }
  std::size_t units() const { return units_; }

  Parameter& kernel() { return kernel_; }
  Parameter& recurrent() { return recurrent_; }
  Parameter& bias() { return bias_; }

 private:
  std::string name_;
  std::size_t in_ = 0;
  std::size_t units_ = 0;
  Parameter kernel_;     // [in, 4u]
  Parameter recurrent_;  // [u, 4u]
  Parameter bias_;       // [4u]
  Tape tape_;
  Tensor input_;
  // Per (batch, step): activated gates [4u], cell state and hidden state.
  std::vector<double> gates_;
  std::vector<double> cells_;
  std::vector<double> hiddens_;
  std::size_t steps_ = 0;
  std::size_t batch_ = 0;
};

struct TcnSpec {
  std::size_t in_channels = 1;
  std::size_t filters = 8;
  std::size_t kernel_size = 32;
  std::vector<std::size_t> dilations{1, 2, 4, 8};
  double dropout_rate = 0.3;
  bool use_skip = true;

  // 1 + 2 * (kernel - 1) * sum(dilations)
  std::size_t receptive_field() const;
};

// Residual stack of dilated causal convolutions. Each block runs
// conv -> relu -> dropout twice; the block input (projected by a width-1
// convolution when the channel count differs) is added and relu'd to form the
// next block's input. With skips, the blocks' convolution outputs are summed
// and relu'd. forward() returns the last time step [batch, filters].
class Tcn : public Layer {
 public:
  Tcn() = default;
  Tcn(std::string name, TcnSpec spec);

  void init(Rng& rng);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& dy) override;

  // Full [batch, time, filters] output before last-step selection.
  Tensor forward_sequence(const Tensor& x, Mode mode, Rng& rng);
  Tensor backward_sequence(const Tensor& dy);

  std::vector<Parameter*> parameters() override;
  const std::string& name() const override { return name_; }
  const TcnSpec& spec() const { return spec_; }

 private:
  struct Block {
    Conv1d conv_a;
    Dropout drop_a;
    Conv1d conv_b;
    Dropout drop_b;
    bool has_projection = false;
    Conv1d projection;
    Tensor residual_out;  // relu(res + branch), cached for backward
  };

  std::string name_;
  TcnSpec spec_;
  std::vector<Block> blocks_;
  Tape tape_;
  Tensor output_;  // post-activation sequence output
  std::size_t seq_len_ = 0;
};

}  // namespace ppgemo::nn
