#pragma once

#include <optional>

#include "ldpnn/kernelcore.hpp"
#include "ldpnn/nngp.hpp"
#include "ldpnn/quadrature.hpp"

namespace ldpnn {

/// Symmetric tilt parameter of the kernel increment.
struct TiltMatrix {
  Matrix lambda;
  explicit TiltMatrix(const Matrix& l);
};

struct MgfValue {
  bool diverged = false;
  double log_mgf = 0.0;
  Matrix tilted_mean;  ///< E_tilt[Xi]; empty unless requested
  Matrix hessian;      ///< Cov_tilt[svec(Xi)]; empty unless requested
};

/// log E[exp(sigma(g)^T Lambda sigma(g))] for g ~ N(0, covariance) and fixed activation.
///
/// The covariance is factored as S S^T with S of numerical rank r. Homogeneous activations are
/// integrated radially in closed form, leaving an angular average over the unit sphere in R^r
/// (exact two-point rule for r = 1, adaptive Gauss-Legendre over the activation's linear arcs for
/// r = 2, seeded sphere sampling above). Other activations use gaussian_rule nodes.
class ConditionalMgf {
 public:
  ConditionalMgf(const Matrix& covariance, const ActivationKind& act, const QuadratureSpec& quad = {});

  MgfValue evaluate(const Matrix& lambda, bool with_mean, bool with_hessian = false) const;
  /// Untilted mean E[Xi].
  const Matrix& mean() const { return mean_; }
  /// Numerical span of the increment Xi (support of its law, as symmetric matrices).
  SymmetricBasis increment_span(double rel_tol = 1e-12) const;

  int size() const { return m_; }
  int rank() const { return static_cast<int>(s_.cols()); }
  const Matrix& factor() const { return s_; }

 private:
  struct Arc {
    double begin, end;
    Eigen::ArrayXd mask;
  };

  MgfValue evaluate_homogeneous(const Matrix& lambda, bool with_mean, bool with_hessian) const;
  MgfValue evaluate_planar(const Matrix& lambda, bool with_mean, bool with_hessian) const;
  MgfValue evaluate_nodes(const Matrix& lambda, bool with_mean, bool with_hessian) const;
  Matrix angular_nodes_second_moment() const;

  int m_;
  ActivationKind act_;
  QuadratureSpec quad_;
  Matrix s_;
  std::vector<Arc> arcs_;
  Matrix sigma_;  ///< activations at nodes (columns); directions for homogeneous r >= 3
  Vector weights_;
  Matrix mean_;
};

/// Returns std::nullopt when the MGF is infinite (DIVERGED).
std::optional<double> cond_log_mgf(const TiltMatrix& lambda, const KernelMatrix& kappa, const ActivationKind& act,
                                   const QuadratureSpec& quad = {});

/// Tilted mean of the increment; throws Diverged outside the MGF domain.
Matrix grad_cond_log_mgf(const TiltMatrix& lambda, const KernelMatrix& kappa, const ActivationKind& act,
                         const QuadratureSpec& quad = {});

}  // namespace ldpnn
