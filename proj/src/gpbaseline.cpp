#include "ldpnn/gpbaseline.hpp"

#include <cmath>
#include <sstream>

#include "ldpnn/errors.hpp"

namespace ldpnn {

namespace {

void check(const KernelMatrix& kappa, int index) {
  if (index < 0 || index >= kappa.size()) throw InvalidArgument("input index is not in the kernel");
}

}  // namespace

GpMoments gp_posterior_mean_var(const KernelMatrix& kappa, const Dataset& data, int index) {
  check(kappa, index);
  data.validate();
  if (kappa.size() != data.x.size()) throw InvalidArgument("kernel size does not match the input set");
  const auto& d = data.x.train_indices;
  const int n = static_cast<int>(d.size());
  const Matrix& k = kappa.matrix();
  Matrix a(n, n);
  Vector kx(n);
  for (int i = 0; i < n; ++i) {
    kx(i) = k(index, d[i]);
    for (int j = 0; j < n; ++j) a(i, j) = k(d[i], d[j]);
  }
  a += Matrix::Identity(n, n);
  const Eigen::LLT<Matrix> llt(a);
  GpMoments out;
  out.mean = n ? kx.dot(llt.solve(data.y_train)) : 0.0;
  out.variance = std::max(k(index, index) - (n ? kx.dot(llt.solve(kx)) : 0.0), 0.0);
  return out;
}

double gp_prior_rate(double y, const KernelMatrix& kappa, int index) {
  check(kappa, index);
  if (!std::isfinite(y)) throw NonFiniteInput("output value is not finite");
  if (y == 0.0) return 0.0;
  const double v = kappa(index, index);
  return v > 0.0 ? 0.5 * y * y / v : kInfinite;
}

double gp_posterior_rate(double y, const KernelMatrix& kappa, const Dataset& data, int index) {
  if (!std::isfinite(y)) throw NonFiniteInput("output value is not finite");
  const GpMoments g = gp_posterior_mean_var(kappa, data, index);
  if (g.variance <= 1e-12) {
    std::ostringstream os;
    os << "posterior variance " << g.variance << " at index " << index;
    throw DegenerateVariance(os.str());
  }
  const double r = y - g.mean;
  return 0.5 * r * r / g.variance;
}

}  // namespace ldpnn
