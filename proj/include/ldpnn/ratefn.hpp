#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldpnn/dataset.hpp"
#include "ldpnn/errors.hpp"
#include "ldpnn/kernelcore.hpp"
#include "ldpnn/mgf.hpp"
#include "ldpnn/nngp.hpp"

namespace ldpnn {

struct OptimizerSettings {
  int inner_adam_steps = 200;
  double inner_adam_lr = 0.05;
  double inner_lbfgs_tol = 1e-8;
  int inner_lbfgs_max_iter = 200;
  int outer_adam_steps = 1500;
  double outer_adam_lr = 0.01;
  double grad_tol = 1e-5;
  std::uint64_t seed = 0;
  int lbfgs_history = 10;
  int outer_lbfgs_max_iter = 500;

  void validate() const;
};

/// Optimizer state carried between neighbouring solves of a sweep.
struct WarmStart {
  std::vector<Vector> outer;
  std::vector<Vector> inner;
  bool empty() const { return outer.empty() && inner.empty(); }
};

struct RateEvaluation {
  double value = kInfinite;
  std::optional<KernelMatrix> argmin_kernel;  ///< last hidden-layer kernel at the optimum
  std::vector<KernelMatrix> layer_kernels;    ///< kappa^(1), ..., at the optimum
  Vector h;                                   ///< optimal output vector, when the problem has one
  Vector alpha;                               ///< dual output weights, h = kappa_out * alpha
  Matrix lambda;                              ///< optimal tilt (single layer cost)
  double inner_grad_norm_final = 0.0;
  double outer_grad_norm_final = 0.0;
  double min_kernel_diag = 0.0;
  double kernel_gap_vs_nngp = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  WarmStart warm;
};

/// sup over Lambda of <Lambda, target> - log E exp<Lambda, Xi>, Xi = sigma(g) sigma(g)^T,
/// g ~ N(0, base + bias * 11^T). Throws InnerNotConverged when the sup is not resolved.
RateEvaluation layer_cost(const KernelMatrix& target, const KernelMatrix& base, const ActivationKind& act,
                          const OptimizerSettings& opt, double bias_variance = 0.0, const QuadratureSpec& quad = {});

/// Rate of the layer-ell kernel (1 <= ell <= depth - 1).
RateEvaluation kernel_rate(const KernelMatrix& kappa, int ell, const InputSet& x, const NetworkSpec& spec,
                           const OptimizerSettings& opt, const QuadratureSpec& quad = {},
                           const WarmStart* warm = nullptr);

/// Prior rate of the full output vector h over the input set.
RateEvaluation prior_output_rate(const Vector& h, const InputSet& x, const NetworkSpec& spec,
                                 const OptimizerSettings& opt, const QuadratureSpec& quad = {},
                                 const WarmStart* warm = nullptr);

/// Prior rate of the output value y at one point of the input set (other coordinates free).
RateEvaluation prior_marginal_rate(double y, int index, const InputSet& x, const NetworkSpec& spec,
                                   const OptimizerSettings& opt, const QuadratureSpec& quad = {},
                                   const WarmStart* warm = nullptr);

struct MapPrediction {
  double y_star = 0.0;
  int index = -1;
  KernelMatrix kernel;
  Vector h;
  double objective = 0.0;  ///< unnormalized posterior minimum
  RateEvaluation diagnostics;
};

/// Minimizes loss(h) + prior_output_rate(h) over output vectors h.
MapPrediction map_predict(int test_index, const Dataset& data, const NetworkSpec& spec, const OptimizerSettings& opt,
                          const QuadratureSpec& quad = {}, const WarmStart* warm = nullptr);

/// Minimizer over h of loss(h) + 0.5 h^T kappa^+ h, reported at test_index (numerical route).
double map_predict_fixed_kernel(int test_index, const Dataset& data, const KernelMatrix& kappa);

/// Posterior rates with the additive constant computed once per dataset.
class PosteriorRate {
 public:
  PosteriorRate(Dataset data, NetworkSpec spec, OptimizerSettings opt, QuadratureSpec quad = {});

  /// Global minimum of loss + prior rate (the normalization constant).
  double constant();
  const MapPrediction& map();

  /// loss(h) + prior_output_rate(h), full vector h.
  RateEvaluation unnormalized(const Vector& h, const WarmStart* warm = nullptr) const;
  RateEvaluation normalized(const Vector& h, const WarmStart* warm = nullptr);
  /// Contraction to the value y at test_index.
  RateEvaluation marginal_unnormalized(double y, int test_index, const WarmStart* warm = nullptr) const;
  RateEvaluation marginal(double y, int test_index, const WarmStart* warm = nullptr);

  const Dataset& data() const { return data_; }

 private:
  Dataset data_;
  NetworkSpec spec_;
  OptimizerSettings opt_;
  QuadratureSpec quad_;
  std::optional<MapPrediction> map_;
};

RateEvaluation posterior_output_rate(const Vector& h, const Dataset& data, const NetworkSpec& spec,
                                     const OptimizerSettings& opt, const QuadratureSpec& quad = {});

/// kernel_rate(kappa, depth - 1) + 0.5 y_D^T (kappa_DD + I)^{-1} y_D.
double kernel_posterior_objective(const KernelMatrix& kappa, const Dataset& data, const NetworkSpec& spec,
                                  const OptimizerSettings& opt, const QuadratureSpec& quad = {});

/// Minimizes kernel_posterior_objective over the hidden kernels.
RateEvaluation minimize_kernel_posterior_objective(const Dataset& data, const NetworkSpec& spec,
                                                   const OptimizerSettings& opt, const QuadratureSpec& quad = {},
                                                   const WarmStart* warm = nullptr);

}  // namespace ldpnn
