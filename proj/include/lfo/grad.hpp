#pragma once

#include <cstddef>
#include <vector>

#include "lfo/net.hpp"

namespace lfo {

// Mean loss over the batch plus d(loss)/d(params), all in double.
// loss_and_grad is the float-parameter entry point; the _d variants operate on
// an already widened parameter buffer and are what the meta-learning and
// training loops compose.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

LossGrad loss_and_grad(const NetSpec& spec, const ParamVector& params, const Batch& batch);

// params has spec.param_count() entries; grad is accumulated into a fresh vector.
LossGrad loss_and_grad_d(const NetSpec& spec, const double* params, const Batch& batch);

// Mean loss only (no backward pass).
double loss_only_d(const NetSpec& spec, const double* params, const Batch& batch);

// Hessian-vector product H(params) * v via tangent (R-op) propagation.
std::vector<double> hvp_d(const NetSpec& spec, const double* params, const double* v,
                          const Batch& batch);

// Central differences on the mean loss, step h_i = 1e-3 * max(1, |theta_i|).
std::vector<double> finite_diff_grad(const NetSpec& spec, const ParamVector& params,
                                     const Batch& batch);

// Loss head: mean loss plus per-example output gradients G [n x width] and,
// when tz != nullptr, the tangent TG of G along tz.
struct LossHead {
  double loss = 0.0;
  std::vector<double> g;
  std::vector<double> tg;
};

LossHead loss_head(const Batch& batch, int width, const double* z, const double* tz);

}  // namespace lfo
