#include "ppgemo/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "ppgemo/error.hpp"

namespace ppgemo::nn {

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (const auto d : shape_) {
    if (d == 0) throw ShapeError("Tensor: zero-sized dimension in " + shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (const double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::expect_shape(const Shape& expected, const std::string& context) const {
  if (shape_ != expected) {
    throw ShapeError(context + ": expected " + shape_str(expected) + " got " + shape_str(shape_));
  }
}

void Tensor::expect_rank(std::size_t r, const std::string& context) const {
  if (shape_.size() != r) {
    throw ShapeError(context + ": expected rank " + std::to_string(r) + " got " + shape_str(shape_));
  }
}

}  // namespace ppgemo::nn
