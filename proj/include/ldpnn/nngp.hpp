#pragma once

#include <string>
#include <vector>

#include "ldpnn/kernelcore.hpp"
#include "ldpnn/quadrature.hpp"

namespace ldpnn {

enum class Activation { relu, tanh, linear };

struct ActivationKind {
  Activation kind = Activation::relu;
  double a = 1.0;  ///< linear only: sigma(x) = sqrt(a) x

  static ActivationKind relu() { return {Activation::relu, 1.0}; }
  static ActivationKind tanh() { return {Activation::tanh, 1.0}; }
  static ActivationKind linear(double a = 1.0) { return {Activation::linear, a}; }
  static ActivationKind parse(const std::string& name, double a = 1.0);

  double operator()(double x) const;
  double derivative(double x) const;
  /// Positively homogeneous of degree one (relu, linear).
  bool homogeneous() const { return kind != Activation::tanh; }
  std::string name() const;
  void validate() const;
};

struct NetworkSpec {
  int depth = 2;
  std::vector<ActivationKind> activations{ActivationKind::relu()};  ///< one per hidden layer
  int d_in = 1;
  double bias_variance = 1.0;         ///< hidden layers
  double output_bias_variance = 0.0;  ///< readout layer

  static NetworkSpec uniform(int depth, ActivationKind act, double bias_variance = 1.0, int d_in = 1);
  const ActivationKind& activation(int layer) const;  ///< layer in 1..depth-1
  void validate() const;
};

KernelMatrix input_kernel(const InputSet& x);

/// Entry-wise E[sigma(g_i) sigma(g_j)], g ~ N(0, pre + bias * 11^T).
KernelMatrix nngp_layer_map(const KernelMatrix& pre, const ActivationKind& act, double bias_variance,
                            const QuadratureSpec& quad = {});

/// kappa_0^(0), ..., kappa_0^(L-1).
std::vector<KernelMatrix> nngp_kernels(const InputSet& x, const NetworkSpec& spec, const QuadratureSpec& quad = {});

/// Covariance of the readout given the last hidden kernel: kappa + output_bias * 11^T.
Matrix output_covariance(const Matrix& last_kernel, const NetworkSpec& spec);

/// Eigenvalue clipping within -1e-8 (relative); QuadratureUnstable beyond.
KernelMatrix psd_repair(const Matrix& a, double tol = 1e-8);

}  // namespace ldpnn
