#include "pomapf/tensor.hpp"

namespace pomapf::ad {

std::size_t Tensor::numel_of(const std::vector<int>& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("Tensor: non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void Tensor::add_scaled(const Tensor& x, double a) {
  if (!same_shape(x)) throw DimensionError("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
}

void Tensor::lerp(const Tensor& x, double a) {
  if (!same_shape(x)) throw DimensionError("lerp: shape mismatch");
  for (std::size_t i = 0; i < v_.size(); ++i)
    v_[i] = (1.0 - a) * v_[i] + a * x.v_[i];
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace pomapf::ad
