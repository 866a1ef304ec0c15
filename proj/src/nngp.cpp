#include "ldpnn/nngp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ldpnn/errors.hpp"

namespace ldpnn {

ActivationKind ActivationKind::parse(const std::string& name, double a) {
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  if (name == "linear") return linear(a);
  throw ConfigError("unknown activation '" + name + "'");
}

double ActivationKind::operator()(double x) const {
  switch (kind) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: return std::sqrt(a) * x;
  }
  return 0.0;
}

double ActivationKind::derivative(double x) const {
  switch (kind) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::linear: return std::sqrt(a);
  }
  return 0.0;
}

std::string ActivationKind::name() const {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "?";
}

void ActivationKind::validate() const {
  if (kind == Activation::linear && !(a > 0.0)) throw InvalidArgument("linear scale a must be positive");
}

NetworkSpec NetworkSpec::uniform(int depth, ActivationKind act, double bias_variance, int d_in) {
  NetworkSpec s;
  s.depth = depth;
  s.activations.assign(std::max(depth - 1, 1), act);
  s.bias_variance = bias_variance;
  s.d_in = d_in;
  return s;
}

const ActivationKind& NetworkSpec::activation(int layer) const {
  if (activations.size() == 1) return activations.front();
  return activations.at(layer - 1);
}

void NetworkSpec::validate() const {
  if (depth < 2) throw InvalidArgument("depth must be at least 2");
  if (d_in < 1) throw InvalidArgument("d_in must be positive");
  if (activations.empty()) throw InvalidArgument("missing activation");
  if (activations.size() != 1 && static_cast<int>(activations.size()) != depth - 1)
    throw InvalidArgument("need one activation per hidden layer");
  for (const auto& a : activations) a.validate();
  if (bias_variance < 0.0 || output_bias_variance < 0.0) throw InvalidArgument("bias variances must be nonnegative");
}

KernelMatrix input_kernel(const InputSet& x) {
  const int m = x.size();
  Matrix k(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) k(i, j) = x.points[i].dot(x.points[j]) / x.dim();
  return KernelMatrix(k);
}

KernelMatrix psd_repair(const Matrix& a, double tol) {
  const Matrix s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() >= 0.0) return KernelMatrix(s);
  if (es.eigenvalues().minCoeff() < -tol * scale)
    throw QuadratureUnstable("layer map violates positive semidefiniteness");
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return KernelMatrix(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

namespace {

double relu_pair(double kii, double kjj, double kij) {
  if (kii <= 0.0 || kjj <= 0.0) return 0.0;
  const double s = std::sqrt(kii * kjj);
  const double rho = std::clamp(kij / s, -1.0, 1.0);
  const double th = std::acos(rho);
  return s / (2.0 * std::numbers::pi) * (std::sin(th) + (std::numbers::pi - th) * rho);
}

double generic_pair(const ActivationKind& act, const Matrix& cov2, const QuadratureSpec& quad) {
  const Matrix s = low_rank_factor(cov2);
  const GaussianRule rule = gaussian_rule(static_cast<int>(s.cols()), quad);
  double sum = 0.0;
  for (int k = 0; k < rule.w.size(); ++k) {
    const Vector g = s * rule.z.col(k);
    sum += rule.w(k) * act(g(0)) * act(g(1));
  }
  return sum;
}

}  // namespace

KernelMatrix nngp_layer_map(const KernelMatrix& pre, const ActivationKind& act, double bias_variance,
                            const QuadratureSpec& quad) {
  act.validate();
  const int m = pre.size();
  const Matrix c = pre.matrix() + bias_variance * Matrix::Ones(m, m);
  Matrix out(m, m);
  switch (act.kind) {
    case Activation::linear:
      out = act.a * c;
      break;
    case Activation::relu:
      for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) out(i, j) = out(j, i) = i == j ? 0.5 * c(i, i) : relu_pair(c(i, i), c(j, j), c(i, j));
      break;
    case Activation::tanh:
      for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) {
          Matrix cov2(2, 2);
          cov2 << c(i, i), c(i, j), c(j, i), c(j, j);
          out(i, j) = out(j, i) = generic_pair(act, cov2, quad);
        }
      break;
  }
  return psd_repair(out);
}

std::vector<KernelMatrix> nngp_kernels(const InputSet& x, const NetworkSpec& spec, const QuadratureSpec& quad) {
  spec.validate();
  std::vector<KernelMatrix> chain{input_kernel(x)};
  for (int l = 1; l < spec.depth; ++l)
    chain.push_back(nngp_layer_map(chain.back(), spec.activation(l), spec.bias_variance, quad));
  return chain;
}

Matrix output_covariance(const Matrix& last_kernel, const NetworkSpec& spec) {
  const int m = static_cast<int>(last_kernel.rows());
  return last_kernel + spec.output_bias_variance * Matrix::Ones(m, m);
}

}  // namespace ldpnn
