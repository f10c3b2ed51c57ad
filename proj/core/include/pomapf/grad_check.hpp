#pragma once

#include <functional>

#include "pomapf/params.hpp"

namespace pomapf::ad {

// Builds a scalar loss from lifted parameters. Called repeatedly with
// perturbed stores, so it must be a pure function of the parameter values.
using ForwardFn = std::function<Var(Tape&, Lift&)>;

// Central-difference check of the tape gradient. Samples up to
// `sample_coords` coordinates (all of them when the store is smaller) and
// returns the max relative error with denominator max(|a|, |b|, 1e-8).
double grad_check(const ForwardFn& fn, const ParamStore& params, double eps,
                  Rng& rng, int sample_coords = 200);

}  // namespace pomapf::ad
