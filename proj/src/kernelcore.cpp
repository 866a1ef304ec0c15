#include "ldpnn/kernelcore.hpp"

#include <cmath>
#include <sstream>

#include "ldpnn/errors.hpp"

namespace ldpnn {

int InputSet::find(const Vector& x, double tol) const {
  for (int i = 0; i < size(); ++i) {
    if (points[i].size() == x.size() && (points[i] - x).cwiseAbs().maxCoeff() <= tol) return i;
  }
  return -1;
}

int InputSet::add(const Vector& x) {
  const int i = find(x);
  if (i >= 0) return i;
  points.push_back(x);
  return size() - 1;
}

InputSet InputSet::scalars(const std::vector<double>& xs) {
  InputSet s;
  for (double x : xs) s.add(Vector::Constant(1, x));
  return s;
}

void InputSet::validate() const {
  if (points.empty()) throw InvalidArgument("input set is empty");
  const int d = dim();
  if (d < 1) throw InvalidArgument("input dimension must be positive");
  for (int i = 0; i < size(); ++i) {
    if (points[i].size() != d) throw InvalidArgument("inconsistent input dimension");
    if (!points[i].allFinite()) throw NonFiniteInput("input point is not finite");
    for (int j = 0; j < i; ++j) {
      if ((points[i] - points[j]).cwiseAbs().maxCoeff() == 0.0)
        throw InvalidArgument("input points must be distinct");
    }
  }
  for (int i : train_indices)
    if (i < 0 || i >= size()) throw InvalidArgument("train index out of range");
  for (int i : test_indices)
    if (i < 0 || i >= size()) throw InvalidArgument("test index out of range");
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

KernelMatrix::KernelMatrix(const Matrix& entries) {
  if (entries.rows() != entries.cols()) throw InvalidArgument("kernel must be square");
  if (!entries.allFinite()) throw NonFiniteInput("kernel has non-finite entries");
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "kernel is not symmetric (max asymmetry " << asym << ")";
    throw InvalidArgument(os.str());
  }
  k_ = 0.5 * (entries + entries.transpose());
  if (k_.rows() > 0 && min_eigenvalue() < -1e-10 * scale) {
    std::ostringstream os;
    os << "kernel is not positive semidefinite (min eigenvalue " << min_eigenvalue() << ")";
    throw NonPositiveKernel(os.str());
  }
}

double KernelMatrix::min_eigenvalue() const {
  if (k_.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(k_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double softplus_derivative(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double inverse_softplus(double y) {
  if (y <= 0.0) throw InvalidArgument("inverse_softplus requires a positive argument");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

namespace {

double diag_map(double raw) { return std::max(softplus(raw), kDiagonalFloor); }

double diag_map_derivative(double raw) {
  return softplus(raw) > kDiagonalFloor ? softplus_derivative(raw) : 0.0;
}

}  // namespace

CholeskyParam::CholeskyParam(Matrix raw_lower) : raw_(std::move(raw_lower)) {
  if (raw_.rows() != raw_.cols()) throw InvalidArgument("Cholesky parameter must be square");
  raw_.triangularView<Eigen::StrictlyUpper>().setZero();
}

CholeskyParam CholeskyParam::from_kernel(const KernelMatrix& kernel) {
  const int m = kernel.size();
  const double scale = std::max(1.0, kernel.matrix().diagonal().maxCoeff());
  Matrix k = kernel.matrix();
  Eigen::LLT<Matrix> llt;
  llt.compute(k);
  for (double eps = 1e-12 * scale; llt.info() != Eigen::Success && eps < scale; eps *= 10.0)
    llt.compute(k + eps * Matrix::Identity(m, m));
  Matrix l = llt.matrixL();
  for (int i = 0; i < m; ++i) l(i, i) = inverse_softplus(std::max(l(i, i), 2.0 * kDiagonalFloor));
  return CholeskyParam(l);
}

CholeskyParam CholeskyParam::from_vector(const Vector& v, int m) {
  if (v.size() != dimension(m)) throw InvalidArgument("Cholesky vector has wrong length");
  Matrix raw = Matrix::Zero(m, m);
  int k = 0;
  for (int j = 0; j < m; ++j)
    for (int i = j; i < m; ++i) raw(i, j) = v(k++);
  return CholeskyParam(raw);
}

Matrix CholeskyParam::lower() const {
  Matrix l = raw_;
  for (int i = 0; i < size(); ++i) l(i, i) = diag_map(raw_(i, i));
  return l;
}

KernelMatrix CholeskyParam::materialize() const {
  const Matrix l = lower();
  Matrix k = l * l.transpose();
  k = 0.5 * (k + k.transpose());
  return KernelMatrix(k);
}

Vector CholeskyParam::to_vector() const {
  const int m = size();
  Vector v(dimension(m));
  int k = 0;
  for (int j = 0; j < m; ++j)
    for (int i = j; i < m; ++i) v(k++) = raw_(i, j);
  return v;
}

Vector CholeskyParam::pullback(const Matrix& dK) const {
  const int m = size();
  const Matrix l = lower();
  const Matrix sym = dK + dK.transpose();
  const Matrix dl = sym * l;
  Vector g(dimension(m));
  int k = 0;
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      g(k++) = i == j ? dl(i, i) * diag_map_derivative(raw_(i, i)) : dl(i, j);
    }
  }
  return g;
}

double rkhs_seminorm_sq(const Vector& h, const KernelMatrix& kappa, double rank_tol) {
  if (rank_tol <= 0.0) throw InvalidArgument("rank_tol must be positive");
  if (!h.allFinite()) throw NonFiniteInput("h has non-finite entries");
  if (h.size() != kappa.size()) throw InvalidArgument("h and kappa sizes differ");
  const double hn = h.norm();
  if (hn == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(kappa.matrix());
  const Vector& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (lmax <= 0.0) return kInfinite;
  const Vector coef = es.eigenvectors().transpose() * h;
  double value = 0.0;
  double off = 0.0;
  for (int k = 0; k < ev.size(); ++k) {
    if (ev(k) > rank_tol * lmax) value += coef(k) * coef(k) / ev(k);
    else off += coef(k) * coef(k);
  }
  if (std::sqrt(off) > std::sqrt(rank_tol) * hn) return kInfinite;
  return value;
}

double op_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double op_norm_gap(const KernelMatrix& k1, const KernelMatrix& k0) {
  const double ref = op_norm(k0.matrix());
  if (ref == 0.0) throw ZeroReference("reference kernel has zero operator norm");
  return op_norm(k1.matrix() - k0.matrix()) / ref;
}

KernelMatrix jitter(const KernelMatrix& kappa, double eps) {
  if (eps <= 0.0) throw InvalidArgument("jitter must be positive");
  return KernelMatrix(kappa.matrix() + eps * Matrix::Identity(kappa.size(), kappa.size()));
}

int svec_size(int m) { return m * (m + 1) / 2; }

Vector svec(const Matrix& a) {
  const int m = static_cast<int>(a.rows());
  Vector v(svec_size(m));
  int k = 0;
  for (int i = 0; i < m; ++i) v(k++) = a(i, i);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) v(k++) = std::sqrt(2.0) * 0.5 * (a(i, j) + a(j, i));
  return v;
}

Matrix smat(const Vector& v, int m) {
  Matrix a(m, m);
  int k = 0;
  for (int i = 0; i < m; ++i) a(i, i) = v(k++);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) a(i, j) = a(j, i) = v(k++) / std::sqrt(2.0);
  return a;
}

SymmetricBasis SymmetricBasis::full(int m) {
  SymmetricBasis b;
  b.m = m;
  b.q = Matrix::Identity(svec_size(m), svec_size(m));
  return b;
}

double SymmetricBasis::residual(const Matrix& a) const {
  const Vector v = svec(a);
  return (v - q * (q.transpose() * v)).norm();
}

}  // namespace ldpnn
