#include "ldpnn/ratefn.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "layer_cost.hpp"
#include "ldpnn/errors.hpp"
#include "ldpnn/optim.hpp"

namespace ldpnn {

void OptimizerSettings::validate() const {
  if (inner_adam_steps < 1 || inner_lbfgs_max_iter < 1 || outer_adam_steps < 1 || lbfgs_history < 1 ||
      outer_lbfgs_max_iter < 1)
    throw InvalidArgument("optimizer counts must be at least 1");
  if (!(inner_adam_lr > 0.0) || !(outer_adam_lr > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (!(inner_lbfgs_tol > 0.0) || !(grad_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
}

namespace {

using detail::LayerCost;
using detail::LayerSolve;

struct OutputTerm {
  bool active = false;
  std::vector<int> fixed_idx;
  Vector fixed_val;
  std::vector<int> data_idx;
  Vector data_y;
};

struct TermValue {
  double value = 0.0;
  Matrix dk;
  Vector h;
  Vector alpha;
};

/// min over the free outputs of 0.5 sum_D (h_i - y_i)^2 + 0.5 h^T K^+ h with h fixed on C.
TermValue output_term(const Matrix& k, const OutputTerm& t) {
  const int m = static_cast<int>(k.rows());
  TermValue out;
  std::vector<int> s;
  std::vector<double> rhs, noise;
  for (std::size_t i = 0; i < t.data_idx.size(); ++i) {
    const int idx = t.data_idx[i];
    bool fixed = false;
    for (std::size_t c = 0; c < t.fixed_idx.size(); ++c) {
      if (t.fixed_idx[c] == idx) {
        const double r = t.fixed_val(static_cast<int>(c)) - t.data_y(static_cast<int>(i));
        out.value += 0.5 * r * r;
        fixed = true;
      }
    }
    if (!fixed) {
      s.push_back(idx);
      rhs.push_back(t.data_y(static_cast<int>(i)));
      noise.push_back(1.0);
    }
  }
  for (std::size_t c = 0; c < t.fixed_idx.size(); ++c) {
    s.push_back(t.fixed_idx[c]);
    rhs.push_back(t.fixed_val(static_cast<int>(c)));
    noise.push_back(0.0);
  }
  const int n = static_cast<int>(s.size());
  Matrix a(n, n);
  Vector b(n);
  for (int i = 0; i < n; ++i) {
    b(i) = rhs[i];
    for (int j = 0; j < n; ++j) a(i, j) = k(s[i], s[j]);
    a(i, i) += noise[i];
  }
  Vector alpha = Vector::Zero(n);
  if (n > 0 && b.norm() > 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const Vector& ev = es.eigenvalues();
    const double lmax = ev.maxCoeff();
    const Vector coef = es.eigenvectors().transpose() * b;
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      if (lmax > 0.0 && ev(i) > 1e-12 * lmax) alpha += (coef(i) / ev(i)) * es.eigenvectors().col(i);
      else off += coef(i) * coef(i);
    }
    if (std::sqrt(off) > 1e-6 * b.norm()) {
      out.value = kInfinite;
      return out;
    }
  }
  out.alpha = Vector::Zero(m);
  double noise_part = 0.0;
  for (int i = 0; i < n; ++i) {
    out.alpha(s[i]) += alpha(i);
    if (noise[i] > 0.0) noise_part += alpha(i) * alpha(i);
  }
  out.h = k * out.alpha;
  out.value += 0.5 * noise_part + 0.5 * out.alpha.dot(out.h);
  out.dk = -0.5 * out.alpha * out.alpha.transpose();
  return out;
}

/// Layer-1 kernel in exponential-family coordinates: kappa = E_Lambda[Xi], Lambda = smat(Q c) / s.
struct DualPoint {
  bool ok = false;
  Matrix kernel;
  double cost = 0.0;  ///< <Lambda, kappa> - log E exp<Lambda, Xi>
  Vector mu;
  Matrix hessian;
};

KernelMatrix as_kernel(const Matrix& k) {
  try {
    return KernelMatrix(0.5 * (k + k.transpose()));
  } catch (const Error&) {
    return psd_repair(k, 1e-6);
  }
}

class OuterProblem {
 public:
  OuterProblem(const InputSet& x, const NetworkSpec& spec, const OptimizerSettings& opt, const QuadratureSpec& quad,
               int n_layers, std::optional<Matrix> fixed_top, OutputTerm term)
      : spec_(spec), opt_(opt), quad_(quad), n_(n_layers), fixed_top_(std::move(fixed_top)), term_(std::move(term)) {
    spec_.validate();
    opt_.validate();
    x.validate();
    if (n_ < 1 || n_ > spec_.depth - 1) throw InvalidArgument("layer index out of range");
    nngp_ = nngp_kernels(x, spec_, quad_);
    m_ = x.size();
    first_ = std::make_unique<LayerCost>(pre_covariance(nngp_[0].matrix()), spec_.activation(1), quad_, opt_);
    dual_ = !(fixed_top_ && n_ == 1);
    int offset = dual_ ? first_->span().dim() : 0;
    const int last_var = fixed_top_ ? n_ - 1 : n_;
    for (int k = 2; k <= last_var; ++k) {
      const LayerCost probe(pre_covariance(nngp_[k - 1].matrix()), spec_.activation(k), quad_, opt_);
      if (!probe.span().is_full()) {
        std::ostringstream os;
        os << "layer " << k << " has a rank-deficient increment span and a variable input kernel";
        throw UnsupportedConfiguration(os.str());
      }
      var_.push_back(k);
      scales_.push_back(std::max(nngp_[k].matrix().diagonal().maxCoeff(), 1e-300));
      offsets_.push_back(offset);
      offset += CholeskyParam::dimension(m_);
    }
    dim_ = offset;
    inner_warm_.assign(n_ + 1, Vector());
    solves_.assign(n_ + 1, LayerSolve());
  }

  void set_fixed_values(const Vector& v) { term_.fixed_val = v; }

  RateEvaluation run(const WarmStart* warm) {
    Vector x = initial_point();
    if (warm && warm->outer.size() == 1 && warm->outer[0].size() == dim_) {
      if (warm->inner.size() == inner_warm_.size()) inner_warm_ = warm->inner;
      if (std::isfinite(evaluate(warm->outer[0], nullptr))) x = warm->outer[0];
    }
    RateEvaluation out;
    Vector g(dim_);
    double fx;
    if (newton_applicable()) {
      const OptimResult r = gauss_newton(x);
      x = r.x;
      out.outer_iterations = r.iterations;
    } else if (dim_ > 0) {
      const Objective f = [this](const Vector& z, Vector* gz) { return evaluate(z, gz); };
      fx = f(x, &g);
      const double tol0 = opt_.grad_tol * std::max(1.0, std::abs(fx));
      if (std::isfinite(fx) && g.norm() > tol0) {
        AdamOptions ao;
        ao.steps = opt_.outer_adam_steps;
        ao.lr = opt_.outer_adam_lr;
        ao.grad_tol = tol0;
        const OptimResult ar = adam(f, x, ao);
        LbfgsOptions lo;
        lo.max_iter = opt_.outer_lbfgs_max_iter;
        lo.history = opt_.lbfgs_history;
        lo.grad_tol = opt_.grad_tol * std::max(1.0, std::abs(ar.value));
        const OptimResult lr = lbfgs(f, ar.x, lo);
        x = lr.x;
        out.outer_iterations = ar.iterations + lr.iterations;
      }
    }
    fx = evaluate(x, &g);
    out.value = fx;
    if (!std::isfinite(fx)) {
      out.converged = true;
      return out;
    }
    out.outer_grad_norm_final = dim_ > 0 ? g.norm() : 0.0;
    for (int l = 1; l <= n_; ++l) {
      out.layer_kernels.push_back(as_kernel(last_kernels_[l]));
      out.inner_grad_norm_final = std::max(out.inner_grad_norm_final, solves_[l].grad_norm);
    }
    out.argmin_kernel = out.layer_kernels.back();
    out.min_kernel_diag = last_kernels_[n_].diagonal().minCoeff();
    const double ref = op_norm(nngp_[n_].matrix());
    out.kernel_gap_vs_nngp = ref > 0.0 ? op_norm(last_kernels_[n_] - nngp_[n_].matrix()) / ref : 0.0;
    out.lambda = solves_[n_].lambda;
    if (term_.active) {
      out.h = last_term_.h;
      out.alpha = last_term_.alpha;
    }
    bool inner_ok = true;
    for (int l = 1; l <= n_; ++l) inner_ok = inner_ok && solves_[l].converged;
    out.converged = inner_ok && out.outer_grad_norm_final <= opt_.grad_tol * std::max(1.0, std::abs(fx));
    out.warm.outer = {x};
    out.warm.inner = inner_warm_;
    return out;
  }

 private:
  Matrix pre_covariance(const Matrix& k) const { return k + spec_.bias_variance * Matrix::Ones(k.rows(), k.cols()); }

  bool newton_applicable() const { return dual_ && var_.empty() && n_ == 1 && !fixed_top_; }

  Vector initial_point() const {
    Vector x0 = Vector::Zero(dim_);
    for (std::size_t v = 0; v < var_.size(); ++v)
      x0.segment(offsets_[v], CholeskyParam::dimension(m_)) =
          CholeskyParam::from_kernel(KernelMatrix(nngp_[var_[v]].matrix() / scales_[v])).to_vector();
    return x0;
  }

  DualPoint dual_point(const Vector& c, bool with_hessian) const {
    DualPoint p;
    const SymmetricBasis& q = first_->span();
    const double s = first_->scale();
    const MgfValue v = first_->mgf().evaluate(q.matrix(c) / s, true, with_hessian);
    if (v.diverged) return p;
    p.ok = true;
    p.kernel = v.tilted_mean;
    p.mu = q.coords(v.tilted_mean) / s;
    p.cost = c.dot(p.mu) - v.log_mgf;
    if (with_hessian) p.hessian = q.q.transpose() * v.hessian * q.q / (s * s);
    return p;
  }

  /// Gradient of a function of the layer-1 kernel, in the scaled span coordinates of that kernel.
  Vector to_span(const Matrix& dk) const { return first_->scale() * first_->span().coords(dk); }

  double evaluate(const Vector& x, Vector* grad) {
    std::vector<Matrix> k(n_ + 1);
    k[0] = nngp_[0].matrix();
    DualPoint dp;
    const int p1 = dual_ ? first_->span().dim() : 0;
    if (dual_) {
      dp = dual_point(x.head(p1), grad != nullptr);
      if (!dp.ok) return kInfinite;
      k[1] = 0.5 * (dp.kernel + dp.kernel.transpose());
    }
    for (std::size_t v = 0; v < var_.size(); ++v)
      k[var_[v]] = scales_[v] *
                   CholeskyParam::from_vector(x.segment(offsets_[v], CholeskyParam::dimension(m_)), m_).materialize().matrix();
    if (fixed_top_) k[n_] = *fixed_top_;

    std::vector<std::unique_ptr<LayerCost>> costs(n_ + 1);
    std::vector<LayerSolve> solves(n_ + 1);
    double total = 0.0;
    if (dual_) {
      solves[1].value = dp.cost;
      solves[1].converged = true;
      solves[1].lambda = first_->span().matrix(x.head(p1)) / first_->scale();
      total += dp.cost;
    }
    for (int l = dual_ ? 2 : 1; l <= n_; ++l) {
      const LayerCost* lc = first_.get();
      if (l >= 2) {
        costs[l] = std::make_unique<LayerCost>(pre_covariance(k[l - 1]), spec_.activation(l), quad_, opt_);
        lc = costs[l].get();
      }
      const Vector* w = inner_warm_[l].size() ? &inner_warm_[l] : nullptr;
      solves[l] = lc->solve(k[l], w);
      if (!std::isfinite(solves[l].value)) return kInfinite;
      total += solves[l].value;
    }
    TermValue tv;
    if (term_.active) {
      tv = output_term(output_covariance(k[n_], spec_), term_);
      if (!std::isfinite(tv.value)) return kInfinite;
      total += tv.value;
    }

    for (int l = 1; l <= n_; ++l) inner_warm_[l] = solves[l].coords;
    solves_ = solves;
    last_term_ = tv;
    last_kernels_ = k;

    if (grad) {
      std::vector<Matrix> dk(n_ + 1, Matrix::Zero(m_, m_));
      for (int l = 2; l <= n_; ++l) {
        if (!(fixed_top_ && l == n_)) dk[l] += solves[l].lambda;
        dk[l - 1] += base_gradient(l, k[l - 1], solves[l].lambda);
      }
      if (term_.active) dk[n_] += tv.dk;
      grad->resize(dim_);
      if (dual_) grad->head(p1) = dp.hessian * (x.head(p1) + to_span(dk[1]));
      for (std::size_t v = 0; v < var_.size(); ++v) {
        const int d = CholeskyParam::dimension(m_);
        grad->segment(offsets_[v], d) =
            scales_[v] * CholeskyParam::from_vector(x.segment(offsets_[v], d), m_).pullback(dk[var_[v]]);
      }
    }
    return total;
  }

  /// -d/d(base) log E exp<Lambda, Xi(base)> at fixed Lambda, by central differences.
  Matrix base_gradient(int layer, const Matrix& base, const Matrix& lambda) const {
    const double h = 1e-5 * std::max(base.diagonal().maxCoeff(), 1e-300);
    auto lm = [&](const Matrix& b) {
      const ConditionalMgf f(pre_covariance(b), spec_.activation(layer), quad_);
      return f.evaluate(lambda, false).log_mgf;
    };
    const double f0 = lm(base);
    Matrix g(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j <= i; ++j) {
        Matrix e = Matrix::Zero(m_, m_);
        e(i, j) = e(j, i) = 1.0;
        const double fp = lm(base + h * e), fm = lm(base - h * e);
        double d;
        if (std::isfinite(fp) && std::isfinite(fm)) d = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp)) d = (fp - f0) / h;
        else d = (f0 - fm) / h;
        g(i, j) = g(j, i) = i == j ? d : 0.5 * d;
      }
    return -g;
  }

  /// Output-term gradient as a function of the layer-1 span coordinates k (kappa = s smat(Q k)).
  Vector term_gradient(const Vector& kc) const {
    const Matrix kap = first_->scale() * first_->span().matrix(kc);
    const TermValue tv = output_term(output_covariance(kap, spec_), term_);
    if (!std::isfinite(tv.value)) return Vector();
    return to_span(tv.dk);
  }

  /// Gauss-Newton in the tilt coordinates c: gradient H v with v = c + g(mu(c)); the step solves
  /// (I + M H) dc = -v, M the output-term Hessian in kernel coordinates.
  OptimResult gauss_newton(const Vector& x0) {
    OptimResult r;
    r.x = x0;
    const int p = dim_;
    const int max_iter = opt_.outer_lbfgs_max_iter;
    double fx = evaluate(r.x, &r.grad);
    if (!std::isfinite(fx)) {
      r.x = Vector::Zero(p);
      fx = evaluate(r.x, &r.grad);
    }
    for (r.iterations = 0; r.iterations < max_iter && std::isfinite(fx); ++r.iterations) {
      const double tol = opt_.grad_tol * std::max(1.0, std::abs(fx));
      const DualPoint dp = dual_point(r.x, true);
      Vector v = r.x;
      Matrix mk = Matrix::Zero(p, p);
      if (term_.active) {
        const Vector g0 = term_gradient(dp.mu);
        v += g0;
        const double eps = 1e-6;
        for (int i = 0; i < p; ++i) {
          Vector kp = dp.mu, km = dp.mu;
          kp(i) += eps;
          km(i) -= eps;
          const Vector gp = term_gradient(kp), gm = term_gradient(km);
          if (gp.size() && gm.size()) mk.col(i) = (gp - gm) / (2.0 * eps);
          else if (gp.size()) mk.col(i) = (gp - g0) / eps;
          else if (gm.size()) mk.col(i) = (g0 - gm) / eps;
        }
        mk = 0.5 * (mk + mk.transpose());
      }
      const Vector grad = dp.hessian * v;
      if (grad.norm() <= 1e-3 * tol && v.norm() <= 1e-8 * (1.0 + r.x.norm())) break;
      Vector step = (Matrix::Identity(p, p) + mk * dp.hessian).fullPivLu().solve(-v);
      double slope = grad.dot(step);
      if (!step.allFinite() || !(slope < 0.0)) {
        step = -v;
        slope = grad.dot(step);
      }
      double t = 1.0;
      bool moved = false;
      for (int k = 0; k < 60 && slope < 0.0; ++k, t *= 0.5) {
        const Vector xt = r.x + t * step;
        const double ft = evaluate(xt, nullptr);
        if (std::isfinite(ft) && ft <= fx + 1e-4 * t * slope) {
          moved = ft < fx || t * step.norm() > 1e-14 * (1.0 + r.x.norm());
          r.x = xt;
          fx = ft;
          break;
        }
      }
      if (!moved) break;
    }
    r.value = fx;
    return r;
  }

  NetworkSpec spec_;
  OptimizerSettings opt_;
  QuadratureSpec quad_;
  int n_;
  std::optional<Matrix> fixed_top_;
  OutputTerm term_;
  std::vector<KernelMatrix> nngp_;
  int m_ = 0;
  std::unique_ptr<LayerCost> first_;
  bool dual_ = false;
  std::vector<int> var_;
  std::vector<double> scales_;
  std::vector<int> offsets_;
  int dim_ = 0;
  std::vector<Vector> inner_warm_;
  std::vector<LayerSolve> solves_;
  TermValue last_term_;
  std::vector<Matrix> last_kernels_;
};

OutputTerm data_term(const Dataset& data) {
  OutputTerm t;
  t.active = true;
  t.data_idx = data.x.train_indices;
  t.data_y = data.y_train;
  return t;
}

OutputTerm all_fixed(const InputSet& x, const Vector& h, OutputTerm t = {}) {
  t.active = true;
  t.fixed_idx.clear();
  for (int i = 0; i < x.size(); ++i) t.fixed_idx.push_back(i);
  t.fixed_val = h;
  return t;
}

OutputTerm one_fixed(int index, double y, OutputTerm t = {}) {
  t.active = true;
  t.fixed_idx = {index};
  t.fixed_val = Vector::Constant(1, y);
  return t;
}

void check_index(int index, const InputSet& x) {
  if (index < 0 || index >= x.size()) throw InvalidArgument("output index is not in the input set");
}

}  // namespace

RateEvaluation layer_cost(const KernelMatrix& target, const KernelMatrix& base, const ActivationKind& act,
                          const OptimizerSettings& opt, double bias_variance, const QuadratureSpec& quad) {
  opt.validate();
  if (target.size() != base.size()) throw InvalidArgument("kernel sizes differ");
  const int m = base.size();
  const LayerCost lc(base.matrix() + bias_variance * Matrix::Ones(m, m), act, quad, opt);
  const LayerSolve s = lc.solve(target.matrix(), nullptr);
  if (!s.converged) {
    std::ostringstream os;
    os << "inner gradient norm " << s.grad_norm << " after " << opt.inner_lbfgs_max_iter << " iterations";
    throw InnerNotConverged(os.str());
  }
  RateEvaluation out;
  out.value = s.value;
  out.lambda = s.lambda;
  out.argmin_kernel = target;
  out.layer_kernels = {target};
  out.inner_grad_norm_final = s.grad_norm;
  out.min_kernel_diag = target.matrix().diagonal().minCoeff();
  const Matrix nngp = nngp_layer_map(base, act, bias_variance, quad).matrix();
  const double ref = op_norm(nngp);
  out.kernel_gap_vs_nngp = ref > 0.0 ? op_norm(target.matrix() - nngp) / ref : 0.0;
  out.converged = true;
  out.warm.inner = {Vector(), s.coords};
  return out;
}

RateEvaluation kernel_rate(const KernelMatrix& kappa, int ell, const InputSet& x, const NetworkSpec& spec,
                           const OptimizerSettings& opt, const QuadratureSpec& quad, const WarmStart* warm) {
  if (kappa.size() != x.size()) throw InvalidArgument("kernel size does not match the input set");
  OuterProblem p(x, spec, opt, quad, ell, kappa.matrix(), OutputTerm{});
  return p.run(warm);
}

RateEvaluation prior_output_rate(const Vector& h, const InputSet& x, const NetworkSpec& spec,
                                 const OptimizerSettings& opt, const QuadratureSpec& quad, const WarmStart* warm) {
  if (h.size() != x.size()) throw InvalidArgument("output vector size does not match the input set");
  if (!h.allFinite()) throw NonFiniteInput("output vector is not finite");
  OuterProblem p(x, spec, opt, quad, spec.depth - 1, std::nullopt, all_fixed(x, h));
  return p.run(warm);
}

RateEvaluation prior_marginal_rate(double y, int index, const InputSet& x, const NetworkSpec& spec,
                                   const OptimizerSettings& opt, const QuadratureSpec& quad, const WarmStart* warm) {
  check_index(index, x);
  if (!std::isfinite(y)) throw NonFiniteInput("output value is not finite");
  OuterProblem p(x, spec, opt, quad, spec.depth - 1, std::nullopt, one_fixed(index, y));
  return p.run(warm);
}

MapPrediction map_predict(int test_index, const Dataset& data, const NetworkSpec& spec, const OptimizerSettings& opt,
                          const QuadratureSpec& quad, const WarmStart* warm) {
  data.validate();
  check_index(test_index, data.x);
  const int m = data.x.size();
  OuterProblem prior(data.x, spec, opt, quad, spec.depth - 1, std::nullopt, all_fixed(data.x, Vector::Zero(m)));

  // Whitened outputs h = L z with L L^T the NNGP output covariance.
  const Matrix k0 = output_covariance(nngp_kernels(data.x, spec, quad).back().matrix(), spec);
  const Matrix l = jitter(KernelMatrix(k0), 1e-10 * std::max(k0.diagonal().maxCoeff(), 1e-300)).matrix().llt().matrixL();
  const Vector target = data.embedded_targets();
  Vector mask = Vector::Zero(m);
  for (int i : data.x.train_indices) mask(i) = 1.0;

  WarmStart inner;
  if (warm && !warm->empty()) inner = *warm;
  RateEvaluation last;
  const Objective f = [&](const Vector& z, Vector* g) {
    const Vector h = l * z;
    prior.set_fixed_values(h);
    const RateEvaluation r = prior.run(inner.empty() ? nullptr : &inner);
    if (!std::isfinite(r.value)) return kInfinite;
    inner = r.warm;
    last = r;
    const Vector res = mask.cwiseProduct(h - target);
    if (g) *g = l.transpose() * (res + r.alpha);
    return 0.5 * res.squaredNorm() + r.value;
  };
  LbfgsOptions lo;
  lo.max_iter = opt.outer_lbfgs_max_iter;
  lo.history = opt.lbfgs_history;
  lo.grad_tol = 1e-3 * opt.grad_tol;
  const OptimResult r = lbfgs(f, Vector::Zero(m), lo);
  Vector g;
  const double value = f(r.x, &g);

  MapPrediction out;
  out.diagnostics = last;
  out.diagnostics.value = value;
  out.diagnostics.outer_iterations = r.iterations;
  out.diagnostics.outer_grad_norm_final = g.norm();
  out.diagnostics.converged = last.converged && g.norm() <= opt.grad_tol * std::max(1.0, std::abs(value));
  out.index = test_index;
  out.objective = value;
  out.h = l * r.x;
  out.y_star = out.h(test_index);
  out.kernel = *last.argmin_kernel;
  return out;
}

double map_predict_fixed_kernel(int test_index, const Dataset& data, const KernelMatrix& kappa) {
  data.validate();
  check_index(test_index, data.x);
  const Matrix& k = kappa.matrix();
  const int m = k.rows();
  const double s = std::max(k.diagonal().maxCoeff(), 1e-300);
  const Vector target = data.embedded_targets();
  Vector mask = Vector::Zero(m);
  for (int i : data.x.train_indices) mask(i) = 1.0;
  // h = K alpha; 0.5 ||(h - y)_D||^2 + 0.5 alpha^T K alpha, alpha scaled by s.
  const Objective f = [&](const Vector& a, Vector* g) {
    const Vector alpha = a / s;
    const Vector h = k * alpha;
    const Vector res = mask.cwiseProduct(h - target);
    if (g) *g = k * (res + alpha) / s;
    return 0.5 * res.squaredNorm() + 0.5 * alpha.dot(h);
  };
  LbfgsOptions lo;
  lo.max_iter = 20000;
  lo.history = 20;
  lo.grad_tol = 1e-13 * std::max(1.0, target.cwiseAbs().maxCoeff());
  const OptimResult r = lbfgs(f, Vector::Zero(m), lo);
  return (k * (r.x / s))(test_index);
}

PosteriorRate::PosteriorRate(Dataset data, NetworkSpec spec, OptimizerSettings opt, QuadratureSpec quad)
    : data_(std::move(data)), spec_(std::move(spec)), opt_(opt), quad_(quad) {
  data_.validate();
}

const MapPrediction& PosteriorRate::map() {
  if (!map_) {
    const int idx = data_.x.test_indices.empty() ? 0 : data_.x.test_indices.front();
    map_ = map_predict(idx, data_, spec_, opt_, quad_);
  }
  return *map_;
}

double PosteriorRate::constant() { return map().objective; }

RateEvaluation PosteriorRate::unnormalized(const Vector& h, const WarmStart* warm) const {
  if (h.size() != data_.x.size()) throw InvalidArgument("output vector size does not match the input set");
  OuterProblem p(data_.x, spec_, opt_, quad_, spec_.depth - 1, std::nullopt, all_fixed(data_.x, h, data_term(data_)));
  return p.run(warm);
}

RateEvaluation PosteriorRate::normalized(const Vector& h, const WarmStart* warm) {
  RateEvaluation r = unnormalized(h, warm);
  r.value -= constant();
  return r;
}

RateEvaluation PosteriorRate::marginal_unnormalized(double y, int test_index, const WarmStart* warm) const {
  check_index(test_index, data_.x);
  OuterProblem p(data_.x, spec_, opt_, quad_, spec_.depth - 1, std::nullopt, one_fixed(test_index, y, data_term(data_)));
  return p.run(warm);
}

RateEvaluation PosteriorRate::marginal(double y, int test_index, const WarmStart* warm) {
  RateEvaluation r = marginal_unnormalized(y, test_index, warm);
  r.value -= constant();
  return r;
}

RateEvaluation posterior_output_rate(const Vector& h, const Dataset& data, const NetworkSpec& spec,
                                     const OptimizerSettings& opt, const QuadratureSpec& quad) {
  PosteriorRate p(data, spec, opt, quad);
  return p.normalized(h);
}

double kernel_posterior_objective(const KernelMatrix& kappa, const Dataset& data, const NetworkSpec& spec,
                                  const OptimizerSettings& opt, const QuadratureSpec& quad) {
  data.validate();
  const RateEvaluation kr = kernel_rate(kappa, spec.depth - 1, data.x, spec, opt, quad);
  return kr.value + output_term(output_covariance(kappa.matrix(), spec), data_term(data)).value;
}

RateEvaluation minimize_kernel_posterior_objective(const Dataset& data, const NetworkSpec& spec,
                                                   const OptimizerSettings& opt, const QuadratureSpec& quad,
                                                   const WarmStart* warm) {
  data.validate();
  OuterProblem p(data.x, spec, opt, quad, spec.depth - 1, std::nullopt, data_term(data));
  return p.run(warm);
}

}  // namespace ldpnn
