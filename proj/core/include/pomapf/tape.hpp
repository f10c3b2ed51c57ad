#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pomapf/tensor.hpp"

namespace pomapf::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  const Tensor& val() const;
  const Tensor& grad() const;
};

// Define-by-run reverse-mode tape. Nodes are recorded in execution order,
// which is already topological, so backward() is a single reverse sweep.
// Intermediate gradients are reset per backward pass; leaf gradients
// accumulate across passes.
class Tape {
 public:
  struct Node {
    Tensor val;
    Tensor grad;                     // sized lazily at first backward
    std::function<void(Tape&)> back; // empty for leaves
    bool requires_grad = false;
    std::string param_name;          // nonempty only for named parameters
  };

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, {});
  }
  Var param(const std::string& name, const Tensor& value) {
    return push(value, true, name);
  }

  // Propagates d(loss)/d(node) into every node below `loss`.
  void backward(Var loss);

  // Gradients of all named parameters; duplicate names accumulate.
  std::vector<std::pair<std::string, Tensor>> named_grads() const;

  const Node& node(int i) const { return nodes_[i]; }
  Node& node(int i) { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var push(Tensor value, bool requires_grad, std::string param_name);
  Tensor& grad_of(int i);

 private:
  std::vector<Node> nodes_;
};

// --- primitives ---------------------------------------------------------

Var add(Var a, Var b);                   // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                   // elementwise
Var scale(Var a, double c);
Var add_bias(Var m, Var bias);           // {n,d} + {1,d}, broadcast over rows
Var matmul(Var a, Var b);                // {n,k} x {k,m}
Var transpose(Var a);                    // {n,m} -> {m,n}
Var slice_cols(Var a, int start, int len);
Var concat_cols(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& rows);  // k x {1,d} -> {k,d}
Var row(Var m, int r);                   // -> {1,d}
Var pick(Var a, int flat_index);         // -> {1}
Var flatten_row(Var a);                  // -> {1, numel}
Var conv2d(Var input, Var weight, Var bias, int pad);  // stride 1, zero pad
Var relu(Var a);
Var sigmoid(Var a);
Var tanh_act(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// Rows softmax over unmasked keys only; masked columns get exactly zero
// probability and receive exactly zero gradient.
Var masked_softmax_rows(Var a, const std::vector<char>& key_mask);
Var sum_all(Var a);                      // -> {1}
Var mean_all(Var a);                     // -> {1}

// --- composites ---------------------------------------------------------

// Gated recurrent unit cell. x {1,din}, h {1,H}; gate weights are fused
// column blocks [reset | update | candidate].
struct GruParams {
  Var w_ih;  // {din, 3H}
  Var b_ih;  // {1, 3H}
  Var w_hh;  // {H, 3H}
  Var b_hh;  // {1, 3H}
};
Var gru_cell(Var x, Var h, const GruParams& p);

// Multi-head attention. query {nq,d}, keys/values {nk,d}; key_mask has nk
// entries, false entries are excluded from attention entirely.
struct MhaParams {
  Var wq, wk, wv, wo;  // each {d, d}
};
Var multi_head_attention(Var query, Var keys_values,
                         const std::vector<char>& key_mask,
                         const MhaParams& p, int heads);

}  // namespace pomapf::ad
