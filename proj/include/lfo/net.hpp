#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfo/errors.hpp"

namespace lfo {

enum class Act : std::uint8_t { Tanh, Relu };
enum class LossKind : std::uint8_t { SoftmaxCe, LogisticCe, Mse };

const char* act_name(Act a);
const char* loss_name(LossKind k);
Act act_from_name(const std::string& s);
LossKind loss_from_name(const std::string& s);

// Feed-forward net shape: layer_sizes = {input, hidden..., output}, one
// activation tag per hidden layer, linear output layer.
struct NetSpec {
  std::vector<int> layer_sizes;
  std::vector<Act> activations;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::size_t param_count() const;
  std::uint64_t hash() const;
  void validate() const;  // throws ConfigError on a malformed spec
};

NetSpec mlp(std::vector<int> sizes, Act hidden = Act::Tanh);

// Flat parameter storage: per layer, row-major weights [out x in] followed by
// biases [out]. Values are kept in 32-bit floats; every kernel computes in
// 64-bit after widening.
struct ParamVector {
  std::vector<float> values;
  std::uint64_t spec_hash = 0;
};

struct Batch {
  int n = 0;
  int input_width = 0;
  int target_width = 0;  // columns of `targets` (mse only; logistic uses 1)
  LossKind loss = LossKind::Mse;
  std::vector<double> inputs;   // n * input_width, row-major
  std::vector<double> targets;  // mse: n * target_width; logistic_ce: n
  std::vector<int> labels;      // softmax_ce: n, each in [0, output_width)

  void validate(const NetSpec& spec) const;  // throws ShapeError
};

ParamVector init_params(const NetSpec& spec, std::uint64_t seed);

std::vector<double> widen(const ParamVector& p);
ParamVector narrow(const NetSpec& spec, std::span<const double> values);

void check_params(const NetSpec& spec, const ParamVector& p);  // shape + hash

// Single-input forward returning output-layer pre-activations.
std::vector<double> forward(const NetSpec& spec, const ParamVector& params,
                            std::span<const double> input);

// Batch forward on widened parameters; outputs is n * output_width.
void forward_batch(const NetSpec& spec, const double* params, const double* inputs,
                   int n, double* outputs);

// ---- layer-level kernels -------------------------------------------------
//
// These power plain gradients, custom objectives (PPO), composite models
// (snippet classifier, pair predictor) and Hessian-vector products. All take
// widened (double) parameters and work batch-wise.

struct MlpFwd {
  std::vector<std::vector<double>> a;  // a[0] = inputs copy, a[l] activations
  int n = 0;
};

struct MlpBack {
  std::vector<std::vector<double>> delta;  // delta[l] = dL/dz_{l+1}, n x width
};

struct MlpTan {
  std::vector<std::vector<double>> t;   // tangents of a
  std::vector<std::vector<double>> tz;  // tangents of z, per weight layer
};

void mlp_forward(const NetSpec& spec, const double* params, const double* inputs,
                 int n, MlpFwd& f);

// Backward from output gradients dOut (n x output_width). Accumulates into
// grad (param_count) and optionally the input gradient dX (n x input_width)
// and the per-layer deltas needed later by mlp_backward_tangent.
void mlp_backward(const NetSpec& spec, const double* params, const MlpFwd& f,
                  const double* dOut, double* grad, double* dX, MlpBack* save);

// Forward tangents for parameter direction v (and optional input tangent tX).
void mlp_forward_tangent(const NetSpec& spec, const double* params, const double* v,
                         const MlpFwd& f, const double* tX, MlpTan& t);

// Tangent of the backward pass: accumulates the directional derivative of the
// parameter gradient into hv and optionally of the input gradient into dXTan.
void mlp_backward_tangent(const NetSpec& spec, const double* params, const double* v,
                          const MlpFwd& f, const MlpTan& t, const MlpBack& b,
                          const double* dOut, const double* dOutTan, double* hv,
                          double* dXTan);

// Offset of layer l's weight block / bias block in the flat parameter array.
std::size_t weight_offset(const NetSpec& spec, int layer);
std::size_t bias_offset(const NetSpec& spec, int layer);

}  // namespace lfo
