#include "ldpnn/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include "ldpnn/errors.hpp"

namespace ldpnn {

void QuadratureSpec::validate() const {
  if (nodes_per_dim < 8) throw InvalidArgument("nodes_per_dim must be at least 8");
  if (mc_fallback_samples < 100000) throw InvalidArgument("mc_fallback_samples must be at least 1e5");
  if (!(angular_tol > 0.0)) throw InvalidArgument("angular_tol must be positive");
}

namespace {

Rule1D compute_legendre(int n) {
  Rule1D r{Vector(n), Vector(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.x(i) = -x;
    r.w(i) = w;
    r.x(n - 1 - i) = x;
    r.w(n - 1 - i) = w;
  }
  return r;
}

Rule1D compute_hermite(int n) {
  // Golub-Welsch for the probabilists' Hermite recurrence.
  Matrix j = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  Rule1D r{es.eigenvalues(), Vector(n)};
  for (int k = 0; k < n; ++k) r.w(k) = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  r.w /= r.w.sum();
  return r;
}

template <class F>
const Rule1D& cached(std::map<int, Rule1D>& cache, std::mutex& mu, int n, F compute) {
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute(n)).first;
  return it->second;
}

constexpr double kRadius = 10.0;

}  // namespace

Rule1D gauss_legendre(int n) {
  static std::map<int, Rule1D> cache;
  static std::mutex mu;
  if (n < 1) throw InvalidArgument("rule size must be positive");
  return cached(cache, mu, n, compute_legendre);
}

Rule1D gauss_hermite(int n) {
  static std::map<int, Rule1D> cache;
  static std::mutex mu;
  if (n < 1) throw InvalidArgument("rule size must be positive");
  return cached(cache, mu, n, compute_hermite);
}

GaussianRule gaussian_rule(int r, const QuadratureSpec& quad) {
  const int n = quad.nodes_per_dim;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  GaussianRule g;
  if (r == 0) {
    g.z = Matrix::Zero(0, 1);
    g.w = Vector::Ones(1);
  } else if (r == 1) {
    // Folded about the origin so that Legendre nodes cluster where odd activations bend.
    const Rule1D gl = gauss_legendre(n);
    g.z.resize(1, 2 * n);
    g.w.resize(2 * n);
    for (int k = 0; k < n; ++k) {
      const double rho = 0.5 * kRadius * (gl.x(k) + 1.0);
      const double w = 0.5 * kRadius * gl.w(k) * inv_sqrt_2pi * std::exp(-0.5 * rho * rho);
      g.z(0, 2 * k) = rho;
      g.z(0, 2 * k + 1) = -rho;
      g.w(2 * k) = g.w(2 * k + 1) = w;
    }
  } else if (r == 2) {
    const Rule1D gl = gauss_legendre(n);
    const int na = 4 * n;
    g.z.resize(2, na * n);
    g.w.resize(na * n);
    int idx = 0;
    for (int a = 0; a < na; ++a) {
      const double th = 2.0 * std::numbers::pi * a / na;
      for (int k = 0; k < n; ++k) {
        const double rho = 0.5 * kRadius * (gl.x(k) + 1.0);
        g.z(0, idx) = rho * std::cos(th);
        g.z(1, idx) = rho * std::sin(th);
        g.w(idx) = 0.5 * kRadius * gl.w(k) * rho * std::exp(-0.5 * rho * rho) / na;
        ++idx;
      }
    }
  } else if (r == 3) {
    const int k1 = std::min(n, 32);
    const Rule1D gh = gauss_hermite(k1);
    g.z.resize(3, k1 * k1 * k1);
    g.w.resize(k1 * k1 * k1);
    int idx = 0;
    for (int a = 0; a < k1; ++a)
      for (int b = 0; b < k1; ++b)
        for (int c = 0; c < k1; ++c) {
          g.z.col(idx) << gh.x(a), gh.x(b), gh.x(c);
          g.w(idx) = gh.w(a) * gh.w(b) * gh.w(c);
          ++idx;
        }
  } else {
    if (!quad.allow_mc_fallback)
      throw DimensionTooLarge("Gaussian rank " + std::to_string(r) + " needs the Monte Carlo fallback");
    std::mt19937_64 rng(quad.mc_seed);
    std::normal_distribution<double> normal;
    g.z.resize(r, quad.mc_fallback_samples);
    for (long k = 0; k < quad.mc_fallback_samples; ++k)
      for (int i = 0; i < r; ++i) g.z(i, k) = normal(rng);
    g.w = Vector::Constant(quad.mc_fallback_samples, 1.0 / quad.mc_fallback_samples);
  }
  g.w /= g.w.sum();
  return g;
}

Matrix low_rank_factor(const Matrix& cov, double rank_tol) {
  const int m = static_cast<int>(cov.rows());
  if (!cov.allFinite()) throw NonFiniteInput("covariance has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  const Vector& ev = es.eigenvalues();
  const double lmax = m > 0 ? ev.maxCoeff() : 0.0;
  std::vector<int> keep;
  for (int k = m - 1; k >= 0; --k)
    if (lmax > 0.0 && ev(k) > rank_tol * lmax) keep.push_back(k);
  Matrix s(m, static_cast<int>(keep.size()));
  for (int c = 0; c < static_cast<int>(keep.size()); ++c)
    s.col(c) = es.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));
  return s;
}

}  // namespace ldpnn
