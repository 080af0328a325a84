#include "lfo/optim.hpp"

#include <cmath>
#include <string>

#include "lfo/errors.hpp"

namespace lfo {

OptimizerState make_sgd(double lr) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::Sgd;
  s.learning_rate = lr;
  return s;
}

OptimizerState make_adam(double lr, double beta1, double beta2, double epsilon) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::Adam;
  s.learning_rate = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void step_inplace(OptimizerState& state, std::span<double> theta,
                  std::span<const double> grad) {
  if (theta.size() != grad.size()) throw ShapeError("optimizer grad length mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient entry at index " + std::to_string(i));
    }
  }
  const double lr = state.learning_rate;
  if (state.kind == OptimizerState::Kind::Sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  } else {
    if (state.first_moment.empty()) {
      state.first_moment.assign(theta.size(), 0.0);
      state.second_moment.assign(theta.size(), 0.0);
    }
    if (state.first_moment.size() != theta.size()) {
      throw ShapeError("adam moment length mismatch");
    }
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double t = static_cast<double>(state.step_count + 1);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
      state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
      const double mhat = state.first_moment[i] / c1;
      const double vhat = state.second_moment[i] / c2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  state.step_count += 1;
}

std::pair<ParamVector, OptimizerState> optimizer_step(OptimizerState state,
                                                      const ParamVector& params,
                                                      std::span<const double> grad) {
  std::vector<double> theta = widen(params);
  step_inplace(state, theta, grad);
  ParamVector out;
  out.spec_hash = params.spec_hash;
  out.values.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    out.values[i] = static_cast<float>(theta[i]);
  }
  return {std::move(out), std::move(state)};
}

}  // namespace lfo
