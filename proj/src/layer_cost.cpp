#include "layer_cost.hpp"

#include <cmath>

#include "ldpnn/errors.hpp"
#include "ldpnn/optim.hpp"

namespace ldpnn::detail {

LayerCost::LayerCost(const Matrix& pre_covariance, const ActivationKind& act, const QuadratureSpec& quad,
                     const OptimizerSettings& opt)
    : mgf_(pre_covariance, act, quad), span_(mgf_.increment_span()), opt_(opt) {
  scale_ = mgf_.mean().size() ? mgf_.mean().diagonal().maxCoeff() : 0.0;
}

double LayerCost::log_mgf(const Matrix& lambda) const { return mgf_.evaluate(lambda, false).log_mgf; }

double LayerCost::objective(const Vector& c, const Vector& t, Vector* grad) const {
  const Matrix lambda = span_.matrix(c) / scale_;
  const MgfValue v = mgf_.evaluate(lambda, grad != nullptr);
  if (v.diverged) return kInfinite;
  if (grad) *grad = span_.coords(v.tilted_mean) / scale_ - t;
  return v.log_mgf - c.dot(t);
}

OptimResult LayerCost::newton(const Vector& c0, const Vector& t) const {
  OptimResult r;
  r.x = c0;
  const double s2 = scale_ * scale_;
  for (r.iterations = 0; r.iterations < opt_.inner_lbfgs_max_iter; ++r.iterations) {
    const MgfValue v = mgf_.evaluate(span_.matrix(r.x) / scale_, true, true);
    ++r.evaluations;
    if (v.diverged) break;
    r.value = v.log_mgf - r.x.dot(t);
    r.grad = span_.coords(v.tilted_mean) / scale_ - t;
    if (r.grad.norm() <= opt_.inner_lbfgs_tol) {
      r.converged = true;
      break;
    }
    const Matrix h = span_.q.transpose() * v.hessian * span_.q / s2;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    const Vector& ev = es.eigenvalues();
    const double floor = 1e-14 * std::max(ev.maxCoeff(), 1e-300);
    const Vector gq = es.eigenvectors().transpose() * r.grad;
    Vector pq(gq.size());
    for (int i = 0; i < gq.size(); ++i) pq(i) = -gq(i) / std::max(ev(i), floor);
    const Vector p = es.eigenvectors() * pq;
    const double slope = r.grad.dot(p);
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      const Vector x = r.x + step * p;
      const double fx = objective(x, t, nullptr);
      ++r.evaluations;
      if (std::isfinite(fx) && fx <= r.value + 1e-4 * step * slope) {
        moved = fx < r.value || step * p.norm() > 1e-14 * (1.0 + r.x.norm());
        r.x = x;
        break;
      }
    }
    if (!moved) break;
  }
  if (r.iterations == opt_.inner_lbfgs_max_iter) r.value = objective(r.x, t, &r.grad);
  if (r.grad.size() == 0) r.value = kInfinite;
  return r;
}

LayerSolve LayerCost::solve(const Matrix& target, const Vector* warm) const {
  LayerSolve out;
  const int m = mgf_.size();
  if (!target.allFinite()) throw NonFiniteInput("layer target is not finite");
  if (scale_ <= 0.0 || span_.dim() == 0) {
    out.value = target.cwiseAbs().maxCoeff() <= 1e-14 ? 0.0 : kInfinite;
    out.lambda = Matrix::Zero(m, m);
    out.coords = Vector::Zero(span_.dim());
    out.converged = true;
    return out;
  }
  const double tnorm = std::max(target.norm(), scale_);
  if (span_.residual(target) > 1e-9 * tnorm) {
    out.converged = true;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(target, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -1e-10 * tnorm) {
    out.converged = true;
    return out;
  }

  const Vector t = span_.coords(target) / scale_;
  const Objective f = [&](const Vector& c, Vector* g) { return objective(c, t, g); };
  Vector c0 = (warm && warm->size() == span_.dim()) ? *warm : Vector::Zero(span_.dim());
  if (!std::isfinite(f(c0, nullptr))) c0.setZero();
  OptimResult r = newton(c0, t);
  if (!r.converged) {
    AdamOptions ao;
    ao.steps = opt_.inner_adam_steps;
    ao.lr = opt_.inner_adam_lr;
    ao.grad_tol = opt_.inner_lbfgs_tol;
    const Vector start = std::isfinite(r.value) ? r.x : c0;
    LbfgsOptions lo;
    lo.max_iter = opt_.inner_lbfgs_max_iter;
    lo.history = opt_.lbfgs_history;
    lo.grad_tol = opt_.inner_lbfgs_tol;
    const OptimResult q = lbfgs(f, adam(f, start, ao).x, lo);
    if (!std::isfinite(r.value) || q.grad.norm() < r.grad.norm()) r = q;
  }

  out.coords = r.x;
  out.grad_norm = r.grad.norm();
  out.converged = out.grad_norm <= 10.0 * opt_.inner_lbfgs_tol;
  out.value = -r.value;
  out.lambda = span_.matrix(r.x) / scale_;
  if (out.converged) return out;

  // Unbounded growth along the ray through the final tilt means the target is not attainable.
  std::vector<double> vals;
  for (int k = 0; k <= 3; ++k) {
    const double v = f(std::ldexp(1.0, k) * r.x, nullptr);
    if (!std::isfinite(v)) break;
    vals.push_back(-v);
  }
  if (vals.size() == 4) {
    const double d1 = vals[1] - vals[0], d2 = vals[2] - vals[1], d3 = vals[3] - vals[2];
    const double floor = 1e-10 * (1.0 + std::abs(vals[0]));
    if (d1 > floor && d2 > floor && d3 > floor && d2 >= 0.75 * d1 && d3 >= 0.75 * d2) {
      out.value = kInfinite;
      out.converged = true;
    }
  }
  return out;
}

}  // namespace ldpnn::detail
