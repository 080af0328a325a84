#pragma once

#include <vector>

#include "lfo/grad.hpp"
#include "lfo/net.hpp"

namespace lfo {

// Differentiable objective over a flat parameter vector. The plain-MLP wrapper
// covers the core ops; the snippet classifier supplies its own composite
// implementation.
class MetaObjective {
 public:
  virtual ~MetaObjective() = default;
  virtual std::size_t param_count() const = 0;
  // Mean loss; grad (already zeroed, param_count long) receives the gradient.
  virtual double loss_grad(const double* params, const Batch& data,
                           double* grad) const = 0;
  // Hessian-vector product accumulated into hv (already zeroed).
  virtual void hvp(const double* params, const double* v, const Batch& data,
                   double* hv) const = 0;
};

class MlpObjective final : public MetaObjective {
 public:
  explicit MlpObjective(NetSpec spec);
  std::size_t param_count() const override;
  double loss_grad(const double* params, const Batch& data, double* grad) const override;
  void hvp(const double* params, const double* v, const Batch& data,
           double* hv) const override;

 private:
  NetSpec spec_;
};

struct MetaGrad {
  double query_loss = 0.0;
  std::vector<double> grad;
};

// Gradient of C(query; theta - alpha * dC(support)/dtheta) with respect to
// theta. first_order drops the curvature term and returns the query gradient
// evaluated at the adapted parameters.
MetaGrad meta_grad(const MetaObjective& model, const double* theta, const Batch& support,
                   const Batch& query, double alpha, bool first_order);

MetaGrad meta_grad_maml(const NetSpec& spec, const ParamVector& theta,
                        const Batch& support, const Batch& query, double alpha,
                        bool first_order);

}  // namespace lfo
