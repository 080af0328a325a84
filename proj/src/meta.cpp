#include "lfo/meta.hpp"

namespace lfo {

MlpObjective::MlpObjective(NetSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::size_t MlpObjective::param_count() const { return spec_.param_count(); }

double MlpObjective::loss_grad(const double* params, const Batch& data,
                               double* grad) const {
  LossGrad lg = loss_and_grad_d(spec_, params, data);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) grad[i] += lg.grad[i];
  return lg.loss;
}

void MlpObjective::hvp(const double* params, const double* v, const Batch& data,
                       double* hv) const {
  std::vector<double> out = hvp_d(spec_, params, v, data);
  for (std::size_t i = 0; i < out.size(); ++i) hv[i] += out[i];
}

MetaGrad meta_grad(const MetaObjective& model, const double* theta, const Batch& support,
                   const Batch& query, double alpha, bool first_order) {
  const std::size_t count = model.param_count();
  MetaGrad out;
  out.grad.assign(count, 0.0);
  if (alpha == 0.0) {
    out.query_loss = model.loss_grad(theta, query, out.grad.data());
    return out;
  }
  std::vector<double> gs(count, 0.0);
  model.loss_grad(theta, support, gs.data());
  std::vector<double> adapted(count);
  for (std::size_t i = 0; i < count; ++i) adapted[i] = theta[i] - alpha * gs[i];
  out.query_loss = model.loss_grad(adapted.data(), query, out.grad.data());
  if (first_order) return out;
  std::vector<double> hv(count, 0.0);
  model.hvp(theta, out.grad.data(), support, hv.data());
  for (std::size_t i = 0; i < count; ++i) out.grad[i] -= alpha * hv[i];
  return out;
}

MetaGrad meta_grad_maml(const NetSpec& spec, const ParamVector& theta,
                        const Batch& support, const Batch& query, double alpha,
                        bool first_order) {
  spec.validate();
  check_params(spec, theta);
  support.validate(spec);
  query.validate(spec);
  MlpObjective model(spec);
  const std::vector<double> t = widen(theta);
  return meta_grad(model, t.data(), support, query, alpha, first_order);
}

}  // namespace lfo
