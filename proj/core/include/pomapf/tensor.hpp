#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pomapf/errors.hpp"

namespace pomapf::ad {

// Dense row-major tensor of doubles. No views, no broadcasting; every op
// that needs a different shape makes a copy. Sizes in this project are tiny.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    v_.assign(numel_of(shape_), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    v_.assign(numel_of(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != numel_of(shape_))
      throw DimensionError("Tensor: value count does not match shape");
  }

  static Tensor scalar(double x) { return Tensor({1}, {x}); }
  static Tensor row(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[i]; }
  std::size_t numel() const { return v_.size(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double& at(int i) { return v_[i]; }
  double& at(int i, int j) { return v_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double& at(int i, int j, int k) {
    return v_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double at(int i) const { return v_[i]; }
  double at(int i, int j) const {
    return v_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double at(int i, int j, int k) const {
    return v_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double x) { v_.assign(v_.size(), x); }

  // In-place axpy: this += a * x. Used by optimizers and target tracking.
  void add_scaled(const Tensor& x, double a);
  // this = (1 - a) * this + a * x, elementwise.
  void lerp(const Tensor& x, double a);

  std::string shape_str() const;

  static std::size_t numel_of(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

}  // namespace pomapf::ad
