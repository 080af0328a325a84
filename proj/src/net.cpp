#include "lfo/net.hpp"

#include <cmath>
#include <cstring>

#include "lfo/rng.hpp"

namespace lfo {

const char* act_name(Act a) { return a == Act::Tanh ? "tanh" : "relu"; }

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::SoftmaxCe: return "softmax_ce";
    case LossKind::LogisticCe: return "logistic_ce";
    default: return "mse";
  }
}

Act act_from_name(const std::string& s) {
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  throw ConfigError("unknown activation: " + s);
}

LossKind loss_from_name(const std::string& s) {
  if (s == "softmax_ce") return LossKind::SoftmaxCe;
  if (s == "logistic_ce") return LossKind::LogisticCe;
  if (s == "mse") return LossKind::Mse;
  throw ConfigError("unknown loss kind: " + s);
}

std::size_t NetSpec::param_count() const {
  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l) {
    total += static_cast<std::size_t>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
  }
  return total;
}

std::uint64_t NetSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (int s : layer_sizes) mix(static_cast<std::uint64_t>(s));
  mix(0xffULL);
  for (Act a : activations) mix(static_cast<std::uint64_t>(a) + 1);
  return h;
}

void NetSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("net needs at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("all layer widths must be >= 1");
  }
  if (activations.size() != layer_sizes.size() - 2) {
    throw ConfigError("activation count must equal hidden-layer count");
  }
}

NetSpec mlp(std::vector<int> sizes, Act hidden) {
  NetSpec s;
  s.layer_sizes = std::move(sizes);
  if (s.layer_sizes.size() >= 2) {
    s.activations.assign(s.layer_sizes.size() - 2, hidden);
  }
  s.validate();
  return s;
}

std::size_t weight_offset(const NetSpec& spec, int layer) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(spec.layer_sizes[l + 1]) * (spec.layer_sizes[l] + 1);
  }
  return off;
}

std::size_t bias_offset(const NetSpec& spec, int layer) {
  return weight_offset(spec, layer) +
         static_cast<std::size_t>(spec.layer_sizes[layer + 1]) * spec.layer_sizes[layer];
}

void Batch::validate(const NetSpec& spec) const {
  if (n <= 0) throw ShapeError("batch is empty");
  if (input_width != spec.input_width()) throw ShapeError("batch input width mismatch");
  if (inputs.size() != static_cast<std::size_t>(n) * input_width) {
    throw ShapeError("batch inputs size mismatch");
  }
  const int w = spec.output_width();
  switch (loss) {
    case LossKind::SoftmaxCe:
      if (labels.size() != static_cast<std::size_t>(n)) throw ShapeError("label count mismatch");
      for (int y : labels) {
        if (y < 0 || y >= w) throw ShapeError("label out of range");
      }
      break;
    case LossKind::LogisticCe:
      if (w != 1) throw ShapeError("logistic_ce needs output width 1");
      if (targets.size() != static_cast<std::size_t>(n)) throw ShapeError("target count mismatch");
      break;
    case LossKind::Mse:
      if (target_width != w) throw ShapeError("mse target width mismatch");
      if (targets.size() != static_cast<std::size_t>(n) * w) {
        throw ShapeError("target count mismatch");
      }
      break;
  }
}

ParamVector init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p;
  p.spec_hash = spec.hash();
  p.values.assign(spec.param_count(), 0.0f);
  Rng rng(mix_seed(seed, spec.hash()));
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    float* w = p.values.data() + weight_offset(spec, l);
    for (int i = 0; i < out * in; ++i) {
      w[i] = static_cast<float>(rng.uniform(-bound, bound));
    }
    // biases stay zero
  }
  return p;
}

std::vector<double> widen(const ParamVector& p) {
  return std::vector<double>(p.values.begin(), p.values.end());
}

ParamVector narrow(const NetSpec& spec, std::span<const double> values) {
  ParamVector p;
  p.spec_hash = spec.hash();
  p.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    p.values[i] = static_cast<float>(values[i]);
  }
  return p;
}

void check_params(const NetSpec& spec, const ParamVector& p) {
  if (p.values.size() != spec.param_count()) throw ShapeError("param count mismatch");
  if (p.spec_hash != 0 && p.spec_hash != spec.hash()) {
    throw ShapeError("params belong to a different net spec");
  }
}

namespace {

inline double apply_act(Act a, double z) {
  return a == Act::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// derivative in terms of the activation value
inline double act_prime(Act act, double a) {
  return act == Act::Tanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0);
}

// second derivative in terms of the activation value
inline double act_second(Act act, double a) {
  return act == Act::Tanh ? -2.0 * a * (1.0 - a * a) : 0.0;
}

// y[n x out] = x[n x in] * W^T + b, with W row-major [out x in]
void affine_forward(const double* w, const double* b, const double* x, int n, int in,
                    int out, double* y) {
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * in;
    double* yi = y + static_cast<std::size_t>(i) * out;
    for (int o = 0; o < out; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * in;
      double acc = b[o];
      for (int k = 0; k < in; ++k) acc += wr[k] * xi[k];
      yi[o] = acc;
    }
  }
}

// dx[n x in] += delta[n x out] * W
void affine_backward_input(const double* w, const double* delta, int n, int in, int out,
                           double* dx) {
  for (int i = 0; i < n; ++i) {
    const double* di = delta + static_cast<std::size_t>(i) * out;
    double* dxi = dx + static_cast<std::size_t>(i) * in;
    for (int o = 0; o < out; ++o) {
      const double d = di[o];
      const double* wr = w + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) dxi[k] += d * wr[k];
    }
  }
}

// gw[out x in] += delta^T * x ; gb[out] += column sums of delta
void affine_backward_params(const double* x, const double* delta, int n, int in, int out,
                            double* gw, double* gb) {
  for (int i = 0; i < n; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * in;
    const double* di = delta + static_cast<std::size_t>(i) * out;
    for (int o = 0; o < out; ++o) {
      const double d = di[o];
      double* gwr = gw + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) gwr[k] += d * xi[k];
      gb[o] += d;
    }
  }
}

}  // namespace

void mlp_forward(const NetSpec& spec, const double* params, const double* inputs, int n,
                 MlpFwd& f) {
  const int L = spec.num_layers();
  f.n = n;
  f.a.resize(L + 1);
  f.a[0].assign(inputs, inputs + static_cast<std::size_t>(n) * spec.input_width());
  for (int l = 0; l < L; ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    f.a[l + 1].resize(static_cast<std::size_t>(n) * out);
    affine_forward(params + weight_offset(spec, l), params + bias_offset(spec, l),
                   f.a[l].data(), n, in, out, f.a[l + 1].data());
    if (l + 1 < L) {
      const Act act = spec.activations[l];
      for (double& v : f.a[l + 1]) v = apply_act(act, v);
    }
  }
}

void forward_batch(const NetSpec& spec, const double* params, const double* inputs, int n,
                   double* outputs) {
  MlpFwd f;
  mlp_forward(spec, params, inputs, n, f);
  std::memcpy(outputs, f.a.back().data(), f.a.back().size() * sizeof(double));
}

std::vector<double> forward(const NetSpec& spec, const ParamVector& params,
                            std::span<const double> input) {
  spec.validate();
  check_params(spec, params);
  if (input.size() != static_cast<std::size_t>(spec.input_width())) {
    throw ShapeError("forward input width mismatch");
  }
  const std::vector<double> w = widen(params);
  std::vector<double> out(spec.output_width());
  forward_batch(spec, w.data(), input.data(), 1, out.data());
  return out;
}

void mlp_backward(const NetSpec& spec, const double* params, const MlpFwd& f,
                  const double* dOut, double* grad, double* dX, MlpBack* save) {
  const int L = spec.num_layers();
  const int n = f.n;
  if (save != nullptr) save->delta.assign(L, {});
  std::vector<double> delta(dOut, dOut + static_cast<std::size_t>(n) * spec.output_width());
  for (int l = L - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    if (save != nullptr) save->delta[l] = delta;
    affine_backward_params(f.a[l].data(), delta.data(), n, in, out,
                           grad + weight_offset(spec, l), grad + bias_offset(spec, l));
    if (l > 0) {
      std::vector<double> dprev(static_cast<std::size_t>(n) * in, 0.0);
      affine_backward_input(params + weight_offset(spec, l), delta.data(), n, in, out,
                            dprev.data());
      const Act act = spec.activations[l - 1];
      const double* a = f.a[l].data();
      for (std::size_t i = 0; i < dprev.size(); ++i) dprev[i] *= act_prime(act, a[i]);
      delta = std::move(dprev);
    } else if (dX != nullptr) {
      affine_backward_input(params + weight_offset(spec, 0), delta.data(), n, in, out, dX);
    }
  }
}

void mlp_forward_tangent(const NetSpec& spec, const double* params, const double* v,
                         const MlpFwd& f, const double* tX, MlpTan& t) {
  const int L = spec.num_layers();
  const int n = f.n;
  t.t.resize(L + 1);
  t.tz.resize(L);
  if (tX != nullptr) {
    t.t[0].assign(tX, tX + static_cast<std::size_t>(n) * spec.input_width());
  } else {
    t.t[0].assign(static_cast<std::size_t>(n) * spec.input_width(), 0.0);
  }
  for (int l = 0; l < L; ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    // tz = V a_{l} + W t_{l} + c
    t.tz[l].resize(static_cast<std::size_t>(n) * out);
    affine_forward(v + weight_offset(spec, l), v + bias_offset(spec, l), f.a[l].data(), n,
                   in, out, t.tz[l].data());
    std::vector<double> wt(static_cast<std::size_t>(n) * out);
    const double zero_bias = 0.0;
    (void)zero_bias;
    {
      // W t_l without bias: reuse affine_forward with zero bias
      std::vector<double> zb(out, 0.0);
      affine_forward(params + weight_offset(spec, l), zb.data(), t.t[l].data(), n, in, out,
                     wt.data());
    }
    for (std::size_t i = 0; i < t.tz[l].size(); ++i) t.tz[l][i] += wt[i];
    t.t[l + 1] = t.tz[l];
    if (l + 1 < L) {
      const Act act = spec.activations[l];
      const double* a = f.a[l + 1].data();
      for (std::size_t i = 0; i < t.t[l + 1].size(); ++i) {
        t.t[l + 1][i] *= act_prime(act, a[i]);
      }
    }
  }
}

void mlp_backward_tangent(const NetSpec& spec, const double* params, const double* v,
                          const MlpFwd& f, const MlpTan& t, const MlpBack& b,
                          const double* dOut, const double* dOutTan, double* hv,
                          double* dXTan) {
  const int L = spec.num_layers();
  const int n = f.n;
  (void)dOut;
  std::vector<double> ddelta(dOutTan,
                             dOutTan + static_cast<std::size_t>(n) * spec.output_width());
  for (int l = L - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const std::vector<double>& delta = b.delta[l];
    // d(grad_W) = ddelta a^T + delta t^T ; d(grad_b) = ddelta
    affine_backward_params(f.a[l].data(), ddelta.data(), n, in, out,
                           hv + weight_offset(spec, l), hv + bias_offset(spec, l));
    {
      std::vector<double> zb(out, 0.0);
      // only the weight part receives the delta t^T term
      std::vector<double> scratch(static_cast<std::size_t>(out) * in, 0.0);
      affine_backward_params(t.t[l].data(), delta.data(), n, in, out, scratch.data(),
                             zb.data());
      double* gw = hv + weight_offset(spec, l);
      for (std::size_t i = 0; i < scratch.size(); ++i) gw[i] += scratch[i];
    }
    if (l > 0) {
      // d(dL/da_{l-1}) = V^T delta + W^T ddelta
      std::vector<double> dback(static_cast<std::size_t>(n) * in, 0.0);
      affine_backward_input(v + weight_offset(spec, l), delta.data(), n, in, out,
                            dback.data());
      affine_backward_input(params + weight_offset(spec, l), ddelta.data(), n, in, out,
                            dback.data());
      // W^T delta alone, for the phi'' term
      std::vector<double> wd(static_cast<std::size_t>(n) * in, 0.0);
      affine_backward_input(params + weight_offset(spec, l), delta.data(), n, in, out,
                            wd.data());
      const Act act = spec.activations[l - 1];
      const double* a = f.a[l].data();
      const double* tz = t.tz[l - 1].data();
      for (std::size_t i = 0; i < dback.size(); ++i) {
        dback[i] = dback[i] * act_prime(act, a[i]) + wd[i] * act_second(act, a[i]) * tz[i];
      }
      ddelta = std::move(dback);
    } else if (dXTan != nullptr) {
      affine_backward_input(v + weight_offset(spec, 0), delta.data(), n, in, out, dXTan);
      affine_backward_input(params + weight_offset(spec, 0), ddelta.data(), n, in, out,
                            dXTan);
    }
  }
}

}  // namespace lfo
