#include "ldpnn/optim.hpp"

#include <cmath>
#include <deque>

#include "ldpnn/errors.hpp"

namespace ldpnn {

OptimResult adam(const Objective& f, const Vector& x0, const AdamOptions& opt) {
  OptimResult best;
  Vector x = x0;
  Vector g(x.size());
  double fx = f(x, &g);
  ++best.evaluations;
  best.x = x;
  best.value = fx;
  best.grad = g;
  if (!std::isfinite(fx)) return best;
  if (g.norm() <= opt.grad_tol) {
    best.converged = true;
    return best;
  }
  Vector m = Vector::Zero(x.size()), v = Vector::Zero(x.size());
  for (int t = 1; t <= opt.steps; ++t) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt.beta1, t), c2 = 1.0 - std::pow(opt.beta2, t);
    Vector step = -opt.lr * (m / c1).array() / ((v / c2).array().sqrt() + opt.eps);
    Vector gn(x.size());
    double fn = kInfinite;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      fn = f(x + step, &gn);
      ++best.evaluations;
      if (std::isfinite(fn)) break;
      ++best.rejected;
      step *= 0.5;
    }
    best.iterations = t;
    if (!std::isfinite(fn)) break;
    x += step;
    fx = fn;
    g = gn;
    if (fx < best.value) {
      best.x = x;
      best.value = fx;
      best.grad = g;
    }
    if (g.norm() <= opt.grad_tol) {
      best.x = x;
      best.value = fx;
      best.grad = g;
      best.converged = true;
      break;
    }
  }
  return best;
}

OptimResult lbfgs(const Objective& f, const Vector& x0, const LbfgsOptions& opt) {
  OptimResult r;
  r.x = x0;
  r.grad.resize(x0.size());
  r.value = f(r.x, &r.grad);
  ++r.evaluations;
  if (!std::isfinite(r.value)) return r;
  std::deque<Vector> ss, ys;
  std::deque<double> rhos;
  for (int it = 0; it < opt.max_iter; ++it) {
    const double gn = r.grad.norm();
    if (gn <= opt.grad_tol) {
      r.converged = true;
      return r;
    }
    // Two-loop recursion.
    Vector q = r.grad;
    std::vector<double> alpha(ss.size());
    for (int i = static_cast<int>(ss.size()) - 1; i >= 0; --i) {
      alpha[i] = rhos[i] * ss[i].dot(q);
      q -= alpha[i] * ys[i];
    }
    if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double b = rhos[i] * ys[i].dot(q);
      q += (alpha[i] - b) * ss[i];
    }
    Vector d = -q;
    double dg = d.dot(r.grad);
    if (!(dg < 0.0)) {
      ss.clear();
      ys.clear();
      rhos.clear();
      d = -r.grad;
      dg = -gn * gn;
    }
    double step = ss.empty() ? std::min(1.0, 1.0 / gn) : 1.0;
    double lo = 0.0, hi = kInfinite;
    Vector xn, gnew(x0.size());
    double fn = kInfinite;
    bool accepted = false;
    Vector best_x;
    Vector best_g;
    double best_f = r.value;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      xn = r.x + step * d;
      fn = f(xn, &gnew);
      ++r.evaluations;
      if (!std::isfinite(fn)) ++r.rejected;
      if (std::isfinite(fn) && fn < best_f) {
        best_f = fn;
        best_x = xn;
        best_g = gnew;
      }
      if (!std::isfinite(fn) || fn > r.value + opt.c1 * step * dg) {
        hi = step;
        step = 0.5 * (lo + hi);
      } else if (gnew.dot(d) < opt.c2 * dg) {
        lo = step;
        step = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * step;
      } else {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (best_x.size() == 0) break;
      xn = best_x;
      fn = best_f;
      gnew = best_g;
    }
    const Vector s = xn - r.x, y = gnew - r.grad;
    r.x = xn;
    r.value = fn;
    r.grad = gnew;
    r.iterations = it + 1;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      ss.push_back(s);
      ys.push_back(y);
      rhos.push_back(1.0 / sy);
      if (static_cast<int>(ss.size()) > opt.history) {
        ss.pop_front();
        ys.pop_front();
        rhos.pop_front();
      }
    }
  }
  r.converged = r.grad.norm() <= opt.grad_tol;
  return r;
}

}  // namespace ldpnn
