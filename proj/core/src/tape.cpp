#include "pomapf/tape.hpp"

#include <cmath>

namespace pomapf::ad {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

bool is_matrix(const Tensor& t) { return t.ndim() == 2; }

}  // namespace

const Tensor& Var::val() const { return tape->node(idx).val; }
const Tensor& Var::grad() const { return tape->node(idx).grad; }

Var Tape::push(Tensor value, bool requires_grad, std::string param_name) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  n.param_name = std::move(param_name);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_of(int i) {
  Node& n = nodes_[i];
  if (n.grad.numel() == 0) n.grad = Tensor(n.val.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss from another tape");
  if (loss.val().numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        loss.val().shape_str());
  // Reset intermediates; leaves keep accumulating across calls.
  for (Node& n : nodes_)
    if (n.back && n.grad.numel() > 0) n.grad.fill(0.0);
  grad_of(loss.idx)[0] += 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.requires_grad && n.grad.numel() > 0) n.back(*this);
  }
}

std::vector<std::pair<std::string, Tensor>> Tape::named_grads() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const Node& n : nodes_) {
    if (n.param_name.empty()) continue;
    bool merged = false;
    for (auto& [name, g] : out)
      if (name == n.param_name) {
        if (n.grad.numel() > 0) g.add_scaled(n.grad, 1.0);
        merged = true;
        break;
      }
    if (!merged)
      out.emplace_back(n.param_name,
                       n.grad.numel() > 0 ? n.grad : Tensor(n.val.shape()));
  }
  return out;
}

namespace {

Var unary(Var a, Tensor out, std::function<void(Tape&, int, int)> back) {
  Tape& t = *a.tape;
  Var r = t.push(std::move(out), t.node(a.idx).requires_grad, {});
  if (t.node(r.idx).requires_grad) {
    const int ai = a.idx, ri = r.idx;
    t.node(r.idx).back = [ai, ri, back](Tape& tp) { back(tp, ai, ri); };
  }
  return r;
}

Var binary(Var a, Var b, Tensor out,
           std::function<void(Tape&, int, int, int)> back) {
  require(a.tape == b.tape, "op: operands live on different tapes");
  Tape& t = *a.tape;
  const bool rg = t.node(a.idx).requires_grad || t.node(b.idx).requires_grad;
  Var r = t.push(std::move(out), rg, {});
  if (rg) {
    const int ai = a.idx, bi = b.idx, ri = r.idx;
    t.node(r.idx).back = [ai, bi, ri, back](Tape& tp) { back(tp, ai, bi, ri); };
  }
  return r;
}

}  // namespace

Var add(Var a, Var b) {
  require(a.val().same_shape(b.val()), "add: shape mismatch " +
                                           a.val().shape_str() + " vs " +
                                           b.val().shape_str());
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return binary(a, b, std::move(out), [](Tape& t, int ai, int bi, int ri) {
    const Tensor& g = t.node(ri).grad;
    if (t.node(ai).requires_grad) t.grad_of(ai).add_scaled(g, 1.0);
    if (t.node(bi).requires_grad) t.grad_of(bi).add_scaled(g, 1.0);
  });
}

Var sub(Var a, Var b) {
  require(a.val().same_shape(b.val()), "sub: shape mismatch");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return binary(a, b, std::move(out), [](Tape& t, int ai, int bi, int ri) {
    const Tensor& g = t.node(ri).grad;
    if (t.node(ai).requires_grad) t.grad_of(ai).add_scaled(g, 1.0);
    if (t.node(bi).requires_grad) t.grad_of(bi).add_scaled(g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require(a.val().same_shape(b.val()), "mul: shape mismatch");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return binary(a, b, std::move(out), [](Tape& t, int ai, int bi, int ri) {
    const Tensor& g = t.node(ri).grad;
    const Tensor& av = t.node(ai).val;
    const Tensor& bv2 = t.node(bi).val;
    if (t.node(ai).requires_grad) {
      Tensor& ga = t.grad_of(ai);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.node(bi).requires_grad) {
      Tensor& gb = t.grad_of(bi);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return unary(a, std::move(out), [c](Tape& t, int ai, int ri) {
    t.grad_of(ai).add_scaled(t.node(ri).grad, c);
  });
}

Var add_bias(Var m, Var bias) {
  require(is_matrix(m.val()) && is_matrix(bias.val()) &&
              bias.val().dim(0) == 1 && bias.val().dim(1) == m.val().dim(1),
          "add_bias: need {n,d} plus {1,d}");
  Tensor out = m.val();
  const int n = out.dim(0), d = out.dim(1);
  const Tensor& bv = bias.val();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) += bv[j];
  return binary(m, bias, std::move(out), [](Tape& t, int mi, int bi, int ri) {
    const Tensor& g = t.node(ri).grad;
    const int n = g.dim(0), d = g.dim(1);
    if (t.node(mi).requires_grad) t.grad_of(mi).add_scaled(g, 1.0);
    if (t.node(bi).requires_grad) {
      Tensor& gb = t.grad_of(bi);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gb[j] += g.at(i, j);
    }
  });
}

Var matmul(Var a, Var b) {
  require(is_matrix(a.val()) && is_matrix(b.val()) &&
              a.val().dim(1) == b.val().dim(0),
          "matmul: incompatible shapes " + a.val().shape_str() + " x " +
              b.val().shape_str());
  const int n = a.val().dim(0), k = a.val().dim(1), m = b.val().dim(1);
  Tensor out({n, m});
  {
    const double* A = a.val().data();
    const double* B = b.val().data();
    double* C = out.data();
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* Bp = B + p * m;
        double* Ci = C + i * m;
        for (int j = 0; j < m; ++j) Ci[j] += aip * Bp[j];
      }
  }
  return binary(a, b, std::move(out), [n, k, m](Tape& t, int ai, int bi, int ri) {
    const double* G = t.node(ri).grad.data();
    const double* A = t.node(ai).val.data();
    const double* B = t.node(bi).val.data();
    if (t.node(ai).requires_grad) {
      double* GA = t.grad_of(ai).data();  // GA += G * B^T
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          const double* Gi = G + i * m;
          const double* Bp = B + p * m;
          double s = 0.0;
          for (int j = 0; j < m; ++j) s += Gi[j] * Bp[j];
          GA[i * k + p] += s;
        }
    }
    if (t.node(bi).requires_grad) {
      double* GB = t.grad_of(bi).data();  // GB += A^T * G
      for (int i = 0; i < n; ++i) {
        const double* Gi = G + i * m;
        for (int p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* GBp = GB + p * m;
          for (int j = 0; j < m; ++j) GBp[j] += aip * Gi[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  require(is_matrix(a.val()), "transpose: need a matrix");
  const int n = a.val().dim(0), m = a.val().dim(1);
  Tensor out({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.at(j, i) = a.val().at(i, j);
  return unary(a, std::move(out), [n, m](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    Tensor& ga = t.grad_of(ai);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) ga.at(i, j) += g.at(j, i);
  });
}

Var slice_cols(Var a, int start, int len) {
  require(is_matrix(a.val()) && start >= 0 && len >= 1 &&
              start + len <= a.val().dim(1),
          "slice_cols: range out of bounds");
  const int n = a.val().dim(0);
  Tensor out({n, len});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < len; ++j) out.at(i, j) = a.val().at(i, start + j);
  return unary(a, std::move(out), [n, start, len](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    Tensor& ga = t.grad_of(ai);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < len; ++j) ga.at(i, start + j) += g.at(i, j);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  Tape& t = *parts[0].tape;
  const int n = parts[0].val().dim(0);
  int total = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require(is_matrix(p.val()) && p.val().dim(0) == n,
            "concat_cols: row count mismatch");
    total += p.val().dim(1);
    rg = rg || t.node(p.idx).requires_grad;
  }
  Tensor out({n, total});
  int off = 0;
  for (const Var& p : parts) {
    const int d = p.val().dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out.at(i, off + j) = p.val().at(i, j);
    off += d;
  }
  std::vector<int> idxs;
  for (const Var& p : parts) idxs.push_back(p.idx);
  Var r = t.push(std::move(out), rg, {});
  if (rg) {
    const int ri = r.idx;
    t.node(ri).back = [idxs, n, ri](Tape& tp) {
      const Tensor& g = tp.node(ri).grad;
      int off2 = 0;
      for (int pi : idxs) {
        const int d = tp.node(pi).val.dim(1);
        if (tp.node(pi).requires_grad) {
          Tensor& gp = tp.grad_of(pi);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gp.at(i, j) += g.at(i, off2 + j);
        }
        off2 += d;
      }
    };
  }
  return r;
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows: empty input");
  Tape& t = *rows[0].tape;
  const int d = static_cast<int>(rows[0].val().numel());
  bool rg = false;
  for (const Var& r : rows) {
    require(static_cast<int>(r.val().numel()) == d, "stack_rows: width mismatch");
    rg = rg || t.node(r.idx).requires_grad;
  }
  const int k = static_cast<int>(rows.size());
  Tensor out({k, d});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = rows[i].val()[j];
  std::vector<int> idxs;
  for (const Var& r : rows) idxs.push_back(r.idx);
  Var r = t.push(std::move(out), rg, {});
  if (rg) {
    const int ri = r.idx;
    t.node(ri).back = [idxs, d, ri](Tape& tp) {
      const Tensor& g = tp.node(ri).grad;
      for (int i = 0; i < static_cast<int>(idxs.size()); ++i)
        if (tp.node(idxs[i]).requires_grad) {
          Tensor& gr = tp.grad_of(idxs[i]);
          for (int j = 0; j < d; ++j) gr[j] += g.at(i, j);
        }
    };
  }
  return r;
}

Var row(Var m, int r) {
  require(is_matrix(m.val()) && r >= 0 && r < m.val().dim(0),
          "row: index out of range");
  const int d = m.val().dim(1);
  Tensor out({1, d});
  for (int j = 0; j < d; ++j) out.at(0, j) = m.val().at(r, j);
  return unary(m, std::move(out), [r, d](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    Tensor& ga = t.grad_of(ai);
    for (int j = 0; j < d; ++j) ga.at(r, j) += g.at(0, j);
  });
}

Var pick(Var a, int flat_index) {
  require(flat_index >= 0 && flat_index < static_cast<int>(a.val().numel()),
          "pick: index out of range");
  Tensor out({1}, {a.val()[flat_index]});
  return unary(a, std::move(out), [flat_index](Tape& t, int ai, int ri) {
    t.grad_of(ai)[flat_index] += t.node(ri).grad[0];
  });
}

Var flatten_row(Var a) {
  const int n = static_cast<int>(a.val().numel());
  Tensor out({1, n}, a.val().values());
  return unary(a, std::move(out), [](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

Var conv2d(Var input, Var weight, Var bias, int pad) {
  const Tensor& x = input.val();
  const Tensor& w = weight.val();
  const Tensor& b = bias.val();
  require(x.ndim() == 3 && w.ndim() == 4 && b.ndim() == 1,
          "conv2d: need input {C,H,W}, weight {Co,Ci,kh,kw}, bias {Co}");
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == ci, "conv2d: channel mismatch");
  require(b.dim(0) == co, "conv2d: bias width mismatch");
  require(pad >= 0, "conv2d: negative padding");
  const int oh = h + 2 * pad - kh + 1;
  const int ow = wd + 2 * pad - kw + 1;
  require(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");

  Tensor out({co, oh, ow});
  {
    const double* X = x.data();
    const double* W = w.data();
    double* O = out.data();
    for (int o = 0; o < co; ++o) {
      const double bo = b[o];
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) O[(o * oh + y) * ow + xx] = bo;
      for (int i = 0; i < ci; ++i)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const double wv = W[((o * ci + i) * kh + ky) * kw + kx];
            if (wv == 0.0) continue;
            for (int y = 0; y < oh; ++y) {
              const int sy = y + ky - pad;
              if (sy < 0 || sy >= h) continue;
              const double* Xrow = X + (i * h + sy) * wd;
              double* Orow = O + (o * oh + y) * ow;
              for (int xx = 0; xx < ow; ++xx) {
                const int sx = xx + kx - pad;
                if (sx < 0 || sx >= wd) continue;
                Orow[xx] += wv * Xrow[sx];
              }
            }
          }
    }
  }

  Tape& t = *input.tape;
  const bool rg = t.node(input.idx).requires_grad ||
                  t.node(weight.idx).requires_grad ||
                  t.node(bias.idx).requires_grad;
  Var r = t.push(std::move(out), rg, {});
  if (rg) {
    const int xi = input.idx, wi = weight.idx, bi = bias.idx, ri = r.idx;
    t.node(ri).back = [xi, wi, bi, ri, ci, h, wd, co, kh, kw, pad, oh,
                       ow](Tape& tp) {
      const double* G = tp.node(ri).grad.data();
      const double* X = tp.node(xi).val.data();
      const double* W = tp.node(wi).val.data();
      if (tp.node(bi).requires_grad) {
        double* GB = tp.grad_of(bi).data();
        for (int o = 0; o < co; ++o) {
          double s = 0.0;
          for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) s += G[(o * oh + y) * ow + xx];
          GB[o] += s;
        }
      }
      if (tp.node(wi).requires_grad) {
        double* GW = tp.grad_of(wi).data();
        for (int o = 0; o < co; ++o)
          for (int i = 0; i < ci; ++i)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                double s = 0.0;
                for (int y = 0; y < oh; ++y) {
                  const int sy = y + ky - pad;
                  if (sy < 0 || sy >= h) continue;
                  const double* Xrow = X + (i * h + sy) * wd;
                  const double* Grow = G + (o * oh + y) * ow;
                  for (int xx = 0; xx < ow; ++xx) {
                    const int sx = xx + kx - pad;
                    if (sx < 0 || sx >= wd) continue;
                    s += Grow[xx] * Xrow[sx];
                  }
                }
                GW[((o * ci + i) * kh + ky) * kw + kx] += s;
              }
      }
      if (tp.node(xi).requires_grad) {
        double* GX = tp.grad_of(xi).data();
        for (int o = 0; o < co; ++o)
          for (int i = 0; i < ci; ++i)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const double wv = W[((o * ci + i) * kh + ky) * kw + kx];
                if (wv == 0.0) continue;
                for (int y = 0; y < oh; ++y) {
                  const int sy = y + ky - pad;
                  if (sy < 0 || sy >= h) continue;
                  const double* Grow = G + (o * oh + y) * ow;
                  double* GXrow = GX + (i * h + sy) * wd;
                  for (int xx = 0; xx < ow; ++xx) {
                    const int sx = xx + kx - pad;
                    if (sx < 0 || sx >= wd) continue;
                    GXrow[sx] += wv * Grow[xx];
                  }
                }
              }
      }
    };
  }
  return r;
}

Var relu(Var a) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  return unary(a, std::move(out), [](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    const Tensor& x = t.node(ai).val;
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return unary(a, std::move(out), [](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    const Tensor& y = t.node(ri).val;
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh_act(Var a) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return unary(a, std::move(out), [](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    const Tensor& y = t.node(ri).val;
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

namespace {

// Shared forward for the softmax family; an empty mask means all-active.
Tensor softmax_forward(const Tensor& x, const std::vector<char>& mask,
                       bool log_out) {
  require(x.ndim() == 2, "softmax: need a matrix");
  const int n = x.dim(0), d = x.dim(1);
  require(mask.empty() || static_cast<int>(mask.size()) == d,
          "softmax: mask width mismatch");
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < d; ++j)
      if (mask.empty() || mask[j]) {
        mx = std::max(mx, x.at(i, j));
        any = true;
      }
    if (!any) throw ContractError("softmax: every key is masked out");
    double z = 0.0;
    for (int j = 0; j < d; ++j)
      if (mask.empty() || mask[j]) z += std::exp(x.at(i, j) - mx);
    const double logz = std::log(z) + mx;
    for (int j = 0; j < d; ++j) {
      if (!mask.empty() && !mask[j]) {
        out.at(i, j) = log_out ? -1e300 : 0.0;
      } else {
        out.at(i, j) =
            log_out ? x.at(i, j) - logz : std::exp(x.at(i, j) - logz);
      }
    }
  }
  return out;
}

void softmax_backward(Tape& t, int ai, int ri) {
  const Tensor& g = t.node(ri).grad;
  const Tensor& p = t.node(ri).val;
  Tensor& ga = t.grad_of(ai);
  const int n = g.dim(0), d = g.dim(1);
  for (int i = 0; i < n; ++i) {
    double dot = 0.0;
    for (int j = 0; j < d; ++j) dot += g.at(i, j) * p.at(i, j);
    for (int j = 0; j < d; ++j) ga.at(i, j) += p.at(i, j) * (g.at(i, j) - dot);
  }
}

}  // namespace

Var softmax_rows(Var a) {
  Tensor out = softmax_forward(a.val(), {}, false);
  return unary(a, std::move(out), softmax_backward);
}

Var log_softmax_rows(Var a) {
  Tensor out = softmax_forward(a.val(), {}, true);
  return unary(a, std::move(out), [](Tape& t, int ai, int ri) {
    const Tensor& g = t.node(ri).grad;
    const Tensor& l = t.node(ri).val;
    Tensor& ga = t.grad_of(ai);
    const int n = g.dim(0), d = g.dim(1);
    for (int i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (int j = 0; j < d; ++j) gsum += g.at(i, j);
      for (int j = 0; j < d; ++j)
        ga.at(i, j) += g.at(i, j) - std::exp(l.at(i, j)) * gsum;
    }
  });
}

Var masked_softmax_rows(Var a, const std::vector<char>& key_mask) {
  Tensor out = softmax_forward(a.val(), key_mask, false);
  // Masked columns carry p == 0, so their logit gradient is exactly zero.
  return unary(a, std::move(out), softmax_backward);
}

Var sum_all(Var a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.val().numel(); ++i) s += a.val()[i];
  return unary(a, Tensor::scalar(s), [](Tape& t, int ai, int ri) {
    const double g = t.node(ri).grad[0];
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

Var mean_all(Var a) {
  const double inv = 1.0 / static_cast<double>(a.val().numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a.val().numel(); ++i) s += a.val()[i];
  return unary(a, Tensor::scalar(s * inv), [inv](Tape& t, int ai, int ri) {
    const double g = t.node(ri).grad[0] * inv;
    Tensor& ga = t.grad_of(ai);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

Var gru_cell(Var x, Var h, const GruParams& p) {
  const int hidden = h.val().dim(1);
  require(p.w_ih.val().dim(1) == 3 * hidden && p.w_hh.val().dim(1) == 3 * hidden,
          "gru_cell: fused gate width must be 3x hidden");
  Var gi = add_bias(matmul(x, p.w_ih), p.b_ih);  // {1, 3H}
  Var gh = add_bias(matmul(h, p.w_hh), p.b_hh);  // {1, 3H}
  Var r = sigmoid(add(slice_cols(gi, 0, hidden), slice_cols(gh, 0, hidden)));
  Var z = sigmoid(
      add(slice_cols(gi, hidden, hidden), slice_cols(gh, hidden, hidden)));
  Var n = tanh_act(add(slice_cols(gi, 2 * hidden, hidden),
                       mul(r, slice_cols(gh, 2 * hidden, hidden))));
  // h' = (1 - z) * n + z * h
  Var one = x.tape->constant(Tensor({1, hidden}, 1.0));
  return add(mul(sub(one, z), n), mul(z, h));
}

Var multi_head_attention(Var query, Var keys_values,
                         const std::vector<char>& key_mask,
                         const MhaParams& p, int heads) {
  const int d = query.val().dim(1);
  require(keys_values.val().dim(1) == d, "mha: query/key width mismatch");
  require(heads >= 1 && d % heads == 0, "mha: width must divide into heads");
  require(key_mask.empty() ||
              static_cast<int>(key_mask.size()) == keys_values.val().dim(0),
          "mha: mask length must match key count");
  const int dh = d / heads;
  Var q = matmul(query, p.wq);
  Var k = matmul(keys_values, p.wk);
  Var v = matmul(keys_values, p.wv);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int hd = 0; hd < heads; ++hd) {
    Var qh = slice_cols(q, hd * dh, dh);
    Var kh = slice_cols(k, hd * dh, dh);
    Var vh = slice_cols(v, hd * dh, dh);
    Var scores =
        scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var attn = key_mask.empty() ? softmax_rows(scores)
                                : masked_softmax_rows(scores, key_mask);
    outs.push_back(matmul(attn, vh));
  }
  return matmul(concat_cols(outs), p.wo);
}

}  // namespace pomapf::ad
