#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pomapf/rng.hpp"
#include "pomapf/tape.hpp"
#include "pomapf/tensor.hpp"

namespace pomapf::ad {

// Named parameter tensors in registration order. Iteration always follows
// that order so optimizer updates are reproducible.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return values_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t total_coords() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> values_;
};

// Accumulated gradients keyed like the store they came from.
class GradBuffer {
 public:
  void accumulate(const std::vector<std::pair<std::string, Tensor>>& grads,
                  double weight = 1.0);
  void accumulate(const GradBuffer& other, double weight = 1.0);
  void scale_all(double c);
  bool has(const std::string& name) const { return grads_.count(name) > 0; }
  const Tensor& at(const std::string& name) const;
  bool empty() const { return grads_.empty(); }

 private:
  std::unordered_map<std::string, Tensor> grads_;
};

// Lifts store parameters onto a tape, once per name.
class Lift {
 public:
  Lift(Tape& tape, const ParamStore& store, bool trainable)
      : tape_(&tape), store_(&store), trainable_(trainable) {}
  Var operator()(const std::string& name);

 private:
  Tape* tape_;
  const ParamStore* store_;
  bool trainable_;
  std::unordered_map<std::string, Var> cache_;
};

// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng);

// Adaptive moment estimation with bias correction.
class Adam {
 public:
  explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, const GradBuffer& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::unordered_map<std::string, std::pair<Tensor, Tensor>> moments_;
};

// target <- (1 - tau) * target + tau * online, elementwise over all entries.
void soft_update(ParamStore& target, const ParamStore& online, double tau);

// Versioned binary container of (name, shape, raw values); round-trips
// bit-exactly.
void save_checkpoint(const ParamStore& params, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace pomapf::ad
