#pragma once

#include "ldpnn/mgf.hpp"
#include "ldpnn/optim.hpp"
#include "ldpnn/ratefn.hpp"

namespace ldpnn::detail {

struct LayerSolve {
  double value = kInfinite;
  Vector coords;  ///< tilt in scaled span coordinates
  Matrix lambda;
  double grad_norm = 0.0;
  bool converged = false;
};

/// Inner sup of one layer cost for a fixed pre-activation covariance, restricted to the
/// increment span and solved in units scaled by the typical increment size.
class LayerCost {
 public:
  LayerCost(const Matrix& pre_covariance, const ActivationKind& act, const QuadratureSpec& quad,
            const OptimizerSettings& opt);

  LayerSolve solve(const Matrix& target, const Vector* warm) const;
  double log_mgf(const Matrix& lambda) const;

  const ConditionalMgf& mgf() const { return mgf_; }
  const SymmetricBasis& span() const { return span_; }
  double scale() const { return scale_; }

 private:
  double objective(const Vector& c, const Vector& t, Vector* grad) const;
  /// Damped Newton on the convex inner objective using the exact tilted covariance.
  OptimResult newton(const Vector& c0, const Vector& t) const;

  ConditionalMgf mgf_;
  SymmetricBasis span_;
  OptimizerSettings opt_;
  double scale_;
};

}  // namespace ldpnn::detail
