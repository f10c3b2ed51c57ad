#include "pomapf/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace pomapf::ad {

double grad_check(const ForwardFn& fn, const ParamStore& params, double eps,
                  Rng& rng, int sample_coords) {
  if (eps < 1e-7 || eps > 1e-3)
    throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");

  GradBuffer analytic;
  {
    Tape tape;
    Lift lift(tape, params, /*trainable=*/true);
    Var loss = fn(tape, lift);
    tape.backward(loss);
    analytic.accumulate(tape.named_grads());
  }

  // Flat coordinate list over all parameters, in registration order.
  std::vector<std::pair<std::string, int>> coords;
  for (const std::string& name : params.names())
    for (std::size_t i = 0; i < params.at(name).numel(); ++i)
      coords.emplace_back(name, static_cast<int>(i));

  if (static_cast<int>(coords.size()) > sample_coords) {
    // Partial Fisher-Yates: the first sample_coords entries become a
    // uniform sample without replacement.
    for (int i = 0; i < sample_coords; ++i) {
      const int j =
          static_cast<int>(rng.uniform_int(i, static_cast<int>(coords.size()) - 1));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(sample_coords);
  }

  ParamStore scratch;
  for (const std::string& name : params.names()) scratch.add(name, params.at(name));

  const auto eval = [&]() {
    Tape tape;
    Lift lift(tape, scratch, /*trainable=*/false);
    return fn(tape, lift).val()[0];
  };

  double max_rel = 0.0;
  for (const auto& [name, i] : coords) {
    double& coord = scratch.at(name)[static_cast<std::size_t>(i)];
    const double saved = coord;
    coord = saved + eps;
    const double fp = eval();
    coord = saved - eps;
    const double fm = eval();
    coord = saved;
    const double fd = (fp - fm) / (2.0 * eps);
    const double an = analytic.has(name) ? analytic.at(name)[i] : 0.0;
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - an) / denom);
  }
  return max_rel;
}

}  // namespace pomapf::ad
