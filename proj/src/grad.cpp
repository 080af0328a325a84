#include "lfo/grad.hpp"

#include <cmath>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lfo/parallel.hpp"

namespace lfo {

namespace {

// Per-example losses and output gradients for examples [i0, i1). The mean is
// folded into g as 1/divisor so chunked calls sum to the full-batch gradient.
// z (and tz when given) hold the output block for this range only.
double head_range(const Batch& batch, int width, int i0, int i1, int divisor,
                  const double* z, const double* tz, double* g, double* tg) {
  double loss_sum = 0.0;
  const double inv = 1.0 / static_cast<double>(divisor);
  switch (batch.loss) {
    case LossKind::SoftmaxCe: {
      std::vector<double> p(width);
      for (int i = i0; i < i1; ++i) {
        const double* zi = z + static_cast<std::size_t>(i - i0) * width;
        double m = zi[0];
        for (int j = 1; j < width; ++j) m = std::max(m, zi[j]);
        double denom = 0.0;
        for (int j = 0; j < width; ++j) {
          p[j] = std::exp(zi[j] - m);
          denom += p[j];
        }
        for (int j = 0; j < width; ++j) p[j] /= denom;
        const int y = batch.labels[i];
        const double li = -(zi[y] - m) + std::log(denom);
        if (!std::isfinite(li)) {
          throw NumericError("non-finite loss at example " + std::to_string(i));
        }
        loss_sum += li;
        double* gi = g + static_cast<std::size_t>(i - i0) * width;
        for (int j = 0; j < width; ++j) gi[j] = p[j] * inv;
        gi[y] -= inv;
        if (tz != nullptr) {
          const double* tzi = tz + static_cast<std::size_t>(i - i0) * width;
          double pdot = 0.0;
          for (int j = 0; j < width; ++j) pdot += p[j] * tzi[j];
          double* tgi = tg + static_cast<std::size_t>(i - i0) * width;
          for (int j = 0; j < width; ++j) tgi[j] = p[j] * (tzi[j] - pdot) * inv;
        }
      }
      break;
    }
    case LossKind::LogisticCe: {
      for (int i = i0; i < i1; ++i) {
        const double zi = z[i - i0];
        const double y = batch.targets[i];
        const double li = std::max(zi, 0.0) - zi * y + std::log1p(std::exp(-std::abs(zi)));
        if (!std::isfinite(li)) {
          throw NumericError("non-finite loss at example " + std::to_string(i));
        }
        loss_sum += li;
        const double s = 1.0 / (1.0 + std::exp(-zi));
        g[i - i0] = (s - y) * inv;
        if (tz != nullptr) tg[i - i0] = s * (1.0 - s) * tz[i - i0] * inv;
      }
      break;
    }
    case LossKind::Mse: {
      for (int i = i0; i < i1; ++i) {
        const double* zi = z + static_cast<std::size_t>(i - i0) * width;
        const double* ti = batch.targets.data() + static_cast<std::size_t>(i) * width;
        double li = 0.0;
        double* gi = g + static_cast<std::size_t>(i - i0) * width;
        for (int j = 0; j < width; ++j) {
          const double d = zi[j] - ti[j];
          li += d * d;
          gi[j] = 2.0 * d * inv;
        }
        if (!std::isfinite(li)) {
          throw NumericError("non-finite loss at example " + std::to_string(i));
        }
        loss_sum += li;
        if (tz != nullptr) {
          const double* tzi = tz + static_cast<std::size_t>(i - i0) * width;
          double* tgi = tg + static_cast<std::size_t>(i - i0) * width;
          for (int j = 0; j < width; ++j) tgi[j] = 2.0 * tzi[j] * inv;
        }
      }
      break;
    }
  }
  return loss_sum;
}

// Forward + backward over examples [i0, i1), accumulating into grad (already
// sized and zeroed) with the mean taken over `divisor` examples.
double grad_range(const NetSpec& spec, const double* params, const Batch& batch, int i0,
                  int i1, int divisor, double* grad) {
  const int n = i1 - i0;
  const int w = batch.input_width;
  MlpFwd f;
  mlp_forward(spec, params, batch.inputs.data() + static_cast<std::size_t>(i0) * w, n, f);
  const int out = spec.output_width();
  std::vector<double> g(static_cast<std::size_t>(n) * out);
  const double loss_sum = head_range(batch, out, i0, i1, divisor, f.a.back().data(),
                                     nullptr, g.data(), nullptr);
  mlp_backward(spec, params, f, g.data(), grad, nullptr, nullptr);
  return loss_sum;
}

}  // namespace

LossHead loss_head(const Batch& batch, int width, const double* z, const double* tz) {
  LossHead h;
  const std::size_t total = static_cast<std::size_t>(batch.n) * width;
  h.g.assign(total, 0.0);
  if (tz != nullptr) h.tg.assign(total, 0.0);
  const double sum = head_range(batch, width, 0, batch.n, batch.n, z, tz, h.g.data(),
                                tz != nullptr ? h.tg.data() : nullptr);
  h.loss = sum / batch.n;
  return h;
}

LossGrad loss_and_grad_d(const NetSpec& spec, const double* params, const Batch& batch) {
  LossGrad out;
  out.grad.assign(spec.param_count(), 0.0);
  const int n = batch.n;
  if (par::reference() || par::threads() <= 1 || n <= par::kReduceChunk) {
    const double sum = grad_range(spec, params, batch, 0, n, n, out.grad.data());
    out.loss = sum / n;
    return out;
  }
  const int nchunks = (n + par::kReduceChunk - 1) / par::kReduceChunk;
  std::vector<std::vector<double>> chunk_grad(nchunks);
  std::vector<double> chunk_sum(nchunks, 0.0);
  std::string error;
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (int c = 0; c < nchunks; ++c) {
    try {
      const int i0 = c * par::kReduceChunk;
      const int i1 = std::min(n, i0 + par::kReduceChunk);
      chunk_grad[c].assign(spec.param_count(), 0.0);
      chunk_sum[c] = grad_range(spec, params, batch, i0, i1, n, chunk_grad[c].data());
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw NumericError(error);
  double sum = 0.0;
  for (int c = 0; c < nchunks; ++c) {
    sum += chunk_sum[c];
    const double* cg = chunk_grad[c].data();
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += cg[i];
  }
  out.loss = sum / n;
  return out;
}

LossGrad loss_and_grad(const NetSpec& spec, const ParamVector& params, const Batch& batch) {
  spec.validate();
  check_params(spec, params);
  batch.validate(spec);
  const std::vector<double> w = widen(params);
  return loss_and_grad_d(spec, w.data(), batch);
}

double loss_only_d(const NetSpec& spec, const double* params, const Batch& batch) {
  const int n = batch.n;
  MlpFwd f;
  mlp_forward(spec, params, batch.inputs.data(), n, f);
  const int out = spec.output_width();
  std::vector<double> g(static_cast<std::size_t>(n) * out);
  const double sum = head_range(batch, out, 0, n, n, f.a.back().data(), nullptr, g.data(),
                                nullptr);
  return sum / n;
}

std::vector<double> hvp_d(const NetSpec& spec, const double* params, const double* v,
                          const Batch& batch) {
  const int n = batch.n;
  MlpFwd f;
  mlp_forward(spec, params, batch.inputs.data(), n, f);
  MlpTan t;
  mlp_forward_tangent(spec, params, v, f, nullptr, t);
  LossHead h = loss_head(batch, spec.output_width(), f.a.back().data(), t.tz.back().data());
  std::vector<double> grad(spec.param_count(), 0.0);
  MlpBack b;
  mlp_backward(spec, params, f, h.g.data(), grad.data(), nullptr, &b);
  std::vector<double> hv(spec.param_count(), 0.0);
  mlp_backward_tangent(spec, params, v, f, t, b, h.g.data(), h.tg.data(), hv.data(),
                       nullptr);
  return hv;
}

std::vector<double> finite_diff_grad(const NetSpec& spec, const ParamVector& params,
                                     const Batch& batch) {
  spec.validate();
  check_params(spec, params);
  batch.validate(spec);
  const std::vector<double> theta = widen(params);
  const std::size_t count = theta.size();
  std::vector<double> grad(count, 0.0);
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    const double h = 1e-3 * std::max(1.0, std::abs(theta[i]));
    std::vector<double> work = theta;
    work[i] = theta[i] + h;
    const double hi = work[i] - theta[i];
    const double fp = loss_only_d(spec, work.data(), batch);
    work[i] = theta[i] - h;
    const double lo = theta[i] - work[i];
    const double fm = loss_only_d(spec, work.data(), batch);
    grad[i] = (fp - fm) / (hi + lo);
  }
  return grad;
}

}  // namespace lfo
