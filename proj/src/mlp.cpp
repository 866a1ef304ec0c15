#include "ldpnn/mlp.hpp"

#include <cmath>

#include "ldpnn/errors.hpp"

namespace ldpnn {

Mlp::Mlp(const NetworkSpec& spec, int width) : spec_(spec), width_(width) {
  spec_.validate();
  if (width < 1) throw InvalidArgument("width must be at least 1");
  int offset = 0;
  for (int l = 1; l <= spec_.depth; ++l) {
    Layer layer;
    layer.in = l == 1 ? spec_.d_in : width_;
    layer.out = l == spec_.depth ? 1 : width_;
    const double bv = l == spec_.depth ? spec_.output_bias_variance : spec_.bias_variance;
    layer.w_scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.b_scale = std::sqrt(bv);
    layer.w_offset = offset;
    offset += layer.in * layer.out;
    layer.b_offset = offset;
    if (bv > 0.0) offset += layer.out;
    else layer.b_offset = -1;
    layers_.push_back(layer);
  }
  n_params_ = offset;
}

double Mlp::forward_point(const Vector& xi, const Vector& point) const {
  Vector a = point;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& ly = layers_[l];
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        xi.data() + ly.w_offset, ly.out, ly.in);
    Vector z = ly.w_scale * (w * a);
    if (ly.b_offset >= 0) z += ly.b_scale * xi.segment(ly.b_offset, ly.out);
    if (l + 1 == layers_.size()) return z(0);
    const ActivationKind& act = spec_.activation(static_cast<int>(l) + 1);
    for (int i = 0; i < z.size(); ++i) z(i) = act(z(i));
    a = std::move(z);
  }
  return 0.0;
}

Vector Mlp::forward(const Vector& xi, const InputSet& x) const {
  if (xi.size() != n_params_) throw InvalidArgument("parameter vector has the wrong size");
  Vector out(x.size());
  for (int i = 0; i < x.size(); ++i) out(i) = forward_point(xi, x.points[i]);
  return out;
}

double Mlp::loss_and_grad(const Vector& xi, const InputSet& x, const std::vector<int>& idx, const Vector& y,
                          double scale, Vector* grad) const {
  if (xi.size() != n_params_) throw InvalidArgument("parameter vector has the wrong size");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int n = static_cast<int>(idx.size());
  const int nl = static_cast<int>(layers_.size());
  // Activations stored column-wise per data point.
  std::vector<Matrix> acts(nl + 1), pre(nl);
  acts[0].resize(spec_.d_in, n);
  for (int k = 0; k < n; ++k) acts[0].col(k) = x.points[idx[k]];
  for (int l = 0; l < nl; ++l) {
    const Layer& ly = layers_[l];
    const Eigen::Map<const RowMat> w(xi.data() + ly.w_offset, ly.out, ly.in);
    pre[l] = ly.w_scale * (w * acts[l]);
    if (ly.b_offset >= 0) pre[l].colwise() += ly.b_scale * xi.segment(ly.b_offset, ly.out);
    if (l + 1 < nl) {
      const ActivationKind& act = spec_.activation(l + 1);
      acts[l + 1] = pre[l].unaryExpr([&](double v) { return act(v); });
    }
  }
  const Vector out = pre[nl - 1].row(0).transpose();
  const Vector res = scale * out - y;
  const double loss = 0.5 * res.squaredNorm();
  if (!grad) return loss;
  grad->setZero(n_params_);
  Matrix delta = scale * res.transpose();  // d loss / d pre[nl-1], 1 x n
  for (int l = nl - 1; l >= 0; --l) {
    const Layer& ly = layers_[l];
    Eigen::Map<RowMat> gw(grad->data() + ly.w_offset, ly.out, ly.in);
    gw = ly.w_scale * (delta * acts[l].transpose());
    if (ly.b_offset >= 0) grad->segment(ly.b_offset, ly.out) = ly.b_scale * delta.rowwise().sum();
    if (l == 0) break;
    const Eigen::Map<const RowMat> w(xi.data() + ly.w_offset, ly.out, ly.in);
    Matrix back = ly.w_scale * (w.transpose() * delta);
    const ActivationKind& act = spec_.activation(l);
    delta = back.cwiseProduct(pre[l - 1].unaryExpr([&](double v) { return act.derivative(v); }));
  }
  return loss;
}

}  // namespace ldpnn
