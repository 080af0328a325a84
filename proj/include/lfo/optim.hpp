#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lfo/net.hpp"

namespace lfo {

struct OptimizerState {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Sgd;
  std::int64_t step_count = 0;
  std::vector<double> first_moment;   // adam only
  std::vector<double> second_moment;  // adam only
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptimizerState make_sgd(double lr);
OptimizerState make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);

// In-place update on a double parameter buffer; the training loops use this and
// quantize to storage precision only when checkpointing.
void step_inplace(OptimizerState& state, std::span<double> theta,
                  std::span<const double> grad);

// Storage-precision update: widen, step in double, narrow back.
std::pair<ParamVector, OptimizerState> optimizer_step(OptimizerState state,
                                                      const ParamVector& params,
                                                      std::span<const double> grad);

}  // namespace lfo
