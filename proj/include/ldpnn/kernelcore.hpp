#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ldpnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Ordered finite input set with training and test index subsets.
struct InputSet {
  std::vector<Vector> points;
  std::vector<int> train_indices;
  std::vector<int> test_indices;

  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }

  /// Index of a point equal to x, or -1.
  int find(const Vector& x, double tol = 1e-12) const;
  /// Adds x unless already present; returns its index.
  int add(const Vector& x);

  static InputSet scalars(const std::vector<double>& xs);
  void validate() const;
};

/// Symmetric PSD matrix over an input set.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  /// Symmetrizes and checks the symmetry (1e-12) and PSD (-1e-10) invariants.
  explicit KernelMatrix(const Matrix& entries);

  static KernelMatrix identity(int m) { return KernelMatrix(Matrix::Identity(m, m)); }
  static KernelMatrix zero(int m) { return KernelMatrix(Matrix::Zero(m, m)); }

  const Matrix& matrix() const { return k_; }
  int size() const { return static_cast<int>(k_.rows()); }
  double operator()(int i, int j) const { return k_(i, j); }
  double min_eigenvalue() const;

 private:
  Matrix k_;
};

double softplus(double x);
double softplus_derivative(double x);
double inverse_softplus(double y);

inline constexpr double kDiagonalFloor = 1e-8;

/// Lower-triangular factor whose diagonal is stored through softplus with a 1e-8 floor.
class CholeskyParam {
 public:
  explicit CholeskyParam(Matrix raw_lower);

  /// Raw parameters that reproduce the Cholesky factor of kernel + floor jitter.
  static CholeskyParam from_kernel(const KernelMatrix& kernel);
  static CholeskyParam from_vector(const Vector& v, int m);

  const Matrix& raw() const { return raw_; }
  int size() const { return static_cast<int>(raw_.rows()); }
  Matrix lower() const;
  KernelMatrix materialize() const;
  Vector to_vector() const;
  /// Gradient with respect to to_vector() coordinates given dF/dK (symmetric).
  Vector pullback(const Matrix& dK) const;

  static int dimension(int m) { return m * (m + 1) / 2; }

 private:
  Matrix raw_;
};

inline KernelMatrix materialize(const CholeskyParam& p) { return p.materialize(); }

/// h^T kappa^+ h with relative rank cutoff; kInfinite off the numerical range.
double rkhs_seminorm_sq(const Vector& h, const KernelMatrix& kappa, double rank_tol = 1e-10);

/// ||k1 - k0||_op / ||k0||_op.
double op_norm_gap(const KernelMatrix& k1, const KernelMatrix& k0);
double op_norm(const Matrix& a);

KernelMatrix jitter(const KernelMatrix& kappa, double eps);

/// Isometric vectorization of symmetric matrices: diagonal, then sqrt(2) * upper entries.
Vector svec(const Matrix& a);
Matrix smat(const Vector& v, int m);
int svec_size(int m);

/// Orthonormal basis (columns, svec coordinates) of a subspace of symmetric matrices.
struct SymmetricBasis {
  int m = 0;
  Matrix q;

  static SymmetricBasis full(int m);
  int dim() const { return static_cast<int>(q.cols()); }
  bool is_full() const { return dim() == svec_size(m); }
  Vector coords(const Matrix& a) const { return q.transpose() * svec(a); }
  Matrix matrix(const Vector& c) const { return smat(q * c, m); }
  /// Frobenius norm of the component of a outside the subspace.
  double residual(const Matrix& a) const;
};

bool all_finite(const Matrix& a);

}  // namespace ldpnn
