#include "ldpnn/mgf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ldpnn/errors.hpp"

namespace ldpnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLogOverflow = 700.0;
constexpr int kPanelOrder = 16;
constexpr int kMaxPanelDepth = 40;
constexpr int kPanelBudget = 4096;

struct PanelSums {
  double i0 = 0.0;
  double i1 = 0.0;
  Eigen::Matrix2d u = Eigen::Matrix2d::Zero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();

  PanelSums& operator+=(const PanelSums& o) {
    i0 += o.i0;
    i1 += o.i1;
    u += o.u;
    h += o.h;
    return *this;
  }
};

PanelSums panel(const Eigen::Matrix2d& mq, double a, double b, bool with_mean, bool with_hessian) {
  const Rule1D& gl = gauss_legendre(kPanelOrder);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  PanelSums s;
  for (int k = 0; k < kPanelOrder; ++k) {
    const double th = mid + half * gl.x(k);
    const Eigen::Vector2d u(std::cos(th), std::sin(th));
    const double d = 1.0 - 2.0 * u.dot(mq * u);
    const double w = half * gl.w(k);
    const double f0 = 1.0 / d;
    const double f1 = 2.0 * f0 * f0;
    s.i0 += w * f0;
    s.i1 += w * f1;
    if (with_mean) s.u += (w * f1) * (u * u.transpose());
    if (with_hessian) {
      const Eigen::Vector3d e(u(0) * u(0), std::numbers::sqrt2 * u(0) * u(1), u(1) * u(1));
      s.h += (4.0 * w * f1 * f0) * (e * e.transpose());
    }
  }
  return s;
}

PanelSums adaptive(const Eigen::Matrix2d& mq, double a, double b, const PanelSums& whole, double tol, bool with_mean,
                   bool with_hessian, int depth, int& budget) {
  const double mid = 0.5 * (a + b);
  const PanelSums left = panel(mq, a, mid, with_mean, with_hessian);
  const PanelSums right = panel(mq, mid, b, with_mean, with_hessian);
  PanelSums both = left;
  both += right;
  const bool ok0 = std::abs(both.i0 - whole.i0) <= tol * both.i0;
  const bool ok1 = std::abs(both.i1 - whole.i1) <= tol * both.i1;
  const bool ok2 = !with_hessian || std::abs(both.h.trace() - whole.h.trace()) <= tol * both.h.trace();
  if ((ok0 && (!with_mean || ok1) && ok2) || depth >= kMaxPanelDepth || --budget <= 0) return both;
  PanelSums out = adaptive(mq, a, mid, left, tol, with_mean, with_hessian, depth + 1, budget);
  out += adaptive(mq, mid, b, right, tol, with_mean, with_hessian, depth + 1, budget);
  return out;
}

/// Largest value of u^T M u over the arc u = (cos t, sin t), t in [a, b].
double arc_max(const Eigen::Matrix2d& mq, double a, double b) {
  auto q = [&](double t) {
    const Eigen::Vector2d u(std::cos(t), std::sin(t));
    return u.dot(mq * u);
  };
  double best = std::max(q(a), q(b));
  const double psi = std::atan2(mq(0, 1), 0.5 * (mq(0, 0) - mq(1, 1)));
  double t = 0.5 * psi;
  while (t > a) t -= std::numbers::pi;
  while (t < a) t += std::numbers::pi;
  for (; t <= b; t += std::numbers::pi) best = std::max(best, q(t));
  return best;
}

double linear_scale(const ActivationKind& act) { return act.kind == Activation::linear ? std::sqrt(act.a) : 1.0; }

/// Columns svec(x_k x_k^T).
Matrix outer_svecs(const Matrix& x) {
  Matrix out(svec_size(static_cast<int>(x.rows())), x.cols());
  for (int k = 0; k < x.cols(); ++k) out.col(k) = svec(x.col(k) * x.col(k).transpose());
  return out;
}

/// Turns E[svec(Xi) svec(Xi)^T] into the covariance.
void center_hessian(MgfValue& v) { v.hessian -= svec(v.tilted_mean) * svec(v.tilted_mean).transpose(); }

}  // namespace

TiltMatrix::TiltMatrix(const Matrix& l) : lambda(l) {
  if (l.rows() != l.cols()) throw InvalidArgument("tilt must be square");
  if (!l.allFinite()) throw NonFiniteInput("tilt has non-finite entries");
  if ((l - l.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, l.cwiseAbs().maxCoeff()))
    throw InvalidArgument("tilt is not symmetric");
  lambda = 0.5 * (l + l.transpose());
}

ConditionalMgf::ConditionalMgf(const Matrix& covariance, const ActivationKind& act, const QuadratureSpec& quad)
    : m_(static_cast<int>(covariance.rows())), act_(act), quad_(quad) {
  act_.validate();
  quad_.validate();
  s_ = low_rank_factor(covariance);
  const int r = rank();
  if (act_.homogeneous()) {
    if (r == 2) {
      std::vector<double> br{0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
      if (act_.kind == Activation::relu) {
        const double rmax = s_.rowwise().norm().maxCoeff();
        for (int i = 0; i < m_; ++i) {
          if (s_.row(i).norm() <= 1e-14 * rmax) continue;
          const double phi = std::atan2(s_(i, 1), s_(i, 0));
          for (double t : {phi + 0.5 * std::numbers::pi, phi - 0.5 * std::numbers::pi}) {
            t = std::fmod(t, kTwoPi);
            if (t < 0.0) t += kTwoPi;
            br.push_back(t);
          }
        }
      }
      std::sort(br.begin(), br.end());
      std::vector<double> uniq;
      for (double t : br)
        if (uniq.empty() || t - uniq.back() > 1e-13) uniq.push_back(t);
      if (kTwoPi - uniq.back() <= 1e-13) uniq.pop_back();
      uniq.push_back(kTwoPi);
      const double sc = linear_scale(act_);
      for (std::size_t k = 0; k + 1 < uniq.size(); ++k) {
        Arc arc{uniq[k], uniq[k + 1], Eigen::ArrayXd(m_)};
        const double mid = 0.5 * (arc.begin + arc.end);
        const Vector p = s_ * Eigen::Vector2d(std::cos(mid), std::sin(mid));
        for (int i = 0; i < m_; ++i) arc.mask(i) = act_.kind == Activation::relu ? (p(i) > 0.0 ? 1.0 : 0.0) : sc;
        arcs_.push_back(arc);
      }
    } else if (r >= 3) {
      if (!quad_.allow_mc_fallback)
        throw DimensionTooLarge("rank " + std::to_string(r) + " increments need the Monte Carlo fallback");
      const GaussianRule rule = gaussian_rule(r, quad_);
      sigma_.resize(m_, rule.w.size());
      for (int k = 0; k < rule.w.size(); ++k) {
        const Vector g = s_ * rule.z.col(k).normalized();
        for (int i = 0; i < m_; ++i) sigma_(i, k) = act_(g(i));
      }
      weights_ = rule.w;
    }
  } else {
    const GaussianRule rule = gaussian_rule(r, quad_);
    sigma_.resize(m_, rule.w.size());
    for (int k = 0; k < rule.w.size(); ++k) {
      const Vector g = s_ * rule.z.col(k);
      for (int i = 0; i < m_; ++i) sigma_(i, k) = act_(g(i));
    }
    weights_ = rule.w;
  }
  mean_ = evaluate(Matrix::Zero(m_, m_), true).tilted_mean;
}

MgfValue ConditionalMgf::evaluate(const Matrix& lambda, bool with_mean, bool with_hessian) const {
  if (lambda.rows() != m_ || lambda.cols() != m_) throw InvalidArgument("tilt size mismatch");
  if (!lambda.allFinite()) throw NonFiniteInput("tilt has non-finite entries");
  with_mean = with_mean || with_hessian;
  MgfValue v = act_.homogeneous() ? evaluate_homogeneous(lambda, with_mean, with_hessian)
                                  : evaluate_nodes(lambda, with_mean, with_hessian);
  if (with_hessian && !v.diverged) center_hessian(v);
  if (lambda.isZero(0.0)) v.log_mgf = 0.0;
  if (!v.diverged && v.log_mgf > kLogOverflow) v.diverged = true;
  if (v.diverged) {
    v.log_mgf = kInfinite;
    v.tilted_mean.resize(0, 0);
    v.hessian.resize(0, 0);
  }
  return v;
}

MgfValue ConditionalMgf::evaluate_homogeneous(const Matrix& lambda, bool with_mean, bool with_hessian) const {
  const int r = rank();
  MgfValue v;
  if (r == 0) {
    if (with_mean) v.tilted_mean = Matrix::Zero(m_, m_);
    if (with_hessian) v.hessian = Matrix::Zero(svec_size(m_), svec_size(m_));
    return v;
  }
  if (r == 2) return evaluate_planar(lambda, with_mean, with_hessian);

  // Sphere average of (1 - 2q)^{-r/2} with q = sigma(u)^T Lambda sigma(u).
  Matrix dirs;
  Vector w;
  if (r == 1) {
    dirs.resize(m_, 2);
    for (int i = 0; i < m_; ++i) {
      dirs(i, 0) = act_(s_(i, 0));
      dirs(i, 1) = act_(-s_(i, 0));
    }
    w = Vector::Constant(2, 0.5);
  } else {
    dirs = sigma_;
    w = weights_;
  }
  const Matrix ld = lambda * dirs;
  const Vector q = dirs.cwiseProduct(ld).colwise().sum().transpose();
  if (q.maxCoeff() >= 0.5) {
    v.diverged = true;
    return v;
  }
  const Eigen::ArrayXd d = 1.0 - 2.0 * q.array();
  const Eigen::ArrayXd f0 = d.pow(-0.5 * r);
  const double mgf = (w.array() * f0).sum();
  v.log_mgf = std::log(mgf);
  if (with_mean) {
    const Eigen::ArrayXd f1 = r * f0 / d;
    const Vector p = (w.array() * f1 / mgf).matrix();
    v.tilted_mean = dirs * p.asDiagonal() * dirs.transpose();
  }
  if (with_hessian) {
    const Eigen::ArrayXd f2 = (r + 2) * f0 * r / (d * d);
    const Vector p = (w.array() * f2 / mgf).matrix();
    const Matrix sv = outer_svecs(dirs);
    v.hessian = sv * p.asDiagonal() * sv.transpose();
  }
  return v;
}

MgfValue ConditionalMgf::evaluate_planar(const Matrix& lambda, bool with_mean, bool with_hessian) const {
  MgfValue v;
  double total = 0.0;
  Matrix t = Matrix::Zero(m_, m_);
  const int n = svec_size(m_);
  Matrix h = with_hessian ? Matrix::Zero(n, n) : Matrix();
  for (const Arc& arc : arcs_) {
    const Matrix b = arc.mask.matrix().asDiagonal() * s_;
    const Eigen::Matrix2d mq = b.transpose() * lambda * b;
    if (arc_max(mq, arc.begin, arc.end) >= 0.5) {
      v.diverged = true;
      return v;
    }
    const PanelSums whole = panel(mq, arc.begin, arc.end, with_mean, with_hessian);
    int budget = kPanelBudget;
    const PanelSums sums =
        adaptive(mq, arc.begin, arc.end, whole, quad_.angular_tol, with_mean, with_hessian, 0, budget);
    total += sums.i0;
    if (with_mean) t += b * sums.u * b.transpose();
    if (with_hessian) {
      Matrix wk(n, 3);
      wk.col(0) = svec(b.col(0) * b.col(0).transpose());
      wk.col(1) = svec(b.col(0) * b.col(1).transpose() + b.col(1) * b.col(0).transpose()) / std::numbers::sqrt2;
      wk.col(2) = svec(b.col(1) * b.col(1).transpose());
      h += wk * sums.h * wk.transpose();
    }
  }
  const double mgf = total / kTwoPi;
  v.log_mgf = std::log(mgf);
  if (with_mean) {
    v.tilted_mean = t / (kTwoPi * mgf);
    v.tilted_mean = 0.5 * (v.tilted_mean + v.tilted_mean.transpose());
  }
  if (with_hessian) v.hessian = h / (kTwoPi * mgf);
  return v;
}

MgfValue ConditionalMgf::evaluate_nodes(const Matrix& lambda, bool with_mean, bool with_hessian) const {
  MgfValue v;
  const Matrix ls = lambda * sigma_;
  const Eigen::ArrayXd t = sigma_.cwiseProduct(ls).colwise().sum().transpose().array();
  const Eigen::ArrayXd lw = weights_.array().log() + t;
  const double mx = lw.maxCoeff();
  const Eigen::ArrayXd e = (lw - mx).exp();
  const double z = e.sum();
  v.log_mgf = mx + std::log(z);
  if (with_mean) {
    const Vector p = (e / z).matrix();
    v.tilted_mean = sigma_ * p.asDiagonal() * sigma_.transpose();
    if (with_hessian) {
      const Matrix sv = outer_svecs(sigma_);
      v.hessian = sv * p.asDiagonal() * sv.transpose();
    }
  }
  return v;
}

Matrix ConditionalMgf::angular_nodes_second_moment() const {
  const int n = svec_size(m_);
  Matrix m2 = Matrix::Zero(n, n);
  auto add = [&](const Vector& sig, double w) {
    const Vector s = svec(sig * sig.transpose());
    m2.noalias() += w * s * s.transpose();
  };
  const int r = rank();
  if (r == 0) return m2;
  if (act_.homogeneous() && r == 1) {
    Vector a(m_), b(m_);
    for (int i = 0; i < m_; ++i) {
      a(i) = act_(s_(i, 0));
      b(i) = act_(-s_(i, 0));
    }
    add(a, 0.5);
    add(b, 0.5);
  } else if (act_.homogeneous() && r == 2) {
    const Rule1D& gl = gauss_legendre(32);
    for (const Arc& arc : arcs_) {
      const double half = 0.5 * (arc.end - arc.begin), mid = 0.5 * (arc.end + arc.begin);
      for (int k = 0; k < gl.x.size(); ++k) {
        const double th = mid + half * gl.x(k);
        const Vector sig = arc.mask.matrix().asDiagonal() * (s_ * Eigen::Vector2d(std::cos(th), std::sin(th)));
        add(sig, half * gl.w(k) / kTwoPi);
      }
    }
  } else {
    for (int k = 0; k < sigma_.cols(); ++k) add(sigma_.col(k), weights_(k));
  }
  return m2;
}

SymmetricBasis ConditionalMgf::increment_span(double rel_tol) const {
  const Matrix m2 = angular_nodes_second_moment();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m2);
  const Vector& ev = es.eigenvalues();
  const double emax = ev.size() ? ev.maxCoeff() : 0.0;
  std::vector<int> keep;
  for (int k = static_cast<int>(ev.size()) - 1; k >= 0; --k)
    if (emax > 0.0 && ev(k) > rel_tol * emax) keep.push_back(k);
  SymmetricBasis b;
  b.m = m_;
  b.q.resize(svec_size(m_), static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) b.q.col(static_cast<int>(c)) = es.eigenvectors().col(keep[c]);
  if (b.is_full()) b = SymmetricBasis::full(m_);
  return b;
}

std::optional<double> cond_log_mgf(const TiltMatrix& lambda, const KernelMatrix& kappa, const ActivationKind& act,
                                   const QuadratureSpec& quad) {
  const ConditionalMgf f(kappa.matrix(), act, quad);
  const MgfValue v = f.evaluate(lambda.lambda, false);
  if (v.diverged) return std::nullopt;
  return v.log_mgf;
}

Matrix grad_cond_log_mgf(const TiltMatrix& lambda, const KernelMatrix& kappa, const ActivationKind& act,
                         const QuadratureSpec& quad) {
  const ConditionalMgf f(kappa.matrix(), act, quad);
  const MgfValue v = f.evaluate(lambda.lambda, true);
  if (v.diverged) throw Diverged("moment generating function is infinite at the given tilt");
  return v.tilted_mean;
}

}  // namespace ldpnn
