#pragma once

#include "ldpnn/kernelcore.hpp"
#include "ldpnn/nngp.hpp"

namespace ldpnn {

/// Fully connected network in whitened coordinates: every parameter is xi ~ N(0, 1), weights are
/// xi / sqrt(fan_in) and biases sqrt(bias_variance) * xi.
class Mlp {
 public:
  Mlp(const NetworkSpec& spec, int width);

  int num_params() const { return n_params_; }
  int width() const { return width_; }

  /// Readout h_theta(x) at every point.
  Vector forward(const Vector& xi, const InputSet& x) const;
  /// Readout at a single point, without allocating per-layer buffers for the whole input set.
  double forward_point(const Vector& xi, const Vector& point) const;

  /// Returns 0.5 * sum_i (scale * h(x_{idx_i}) - y_i)^2 and its gradient with respect to xi.
  double loss_and_grad(const Vector& xi, const InputSet& x, const std::vector<int>& idx, const Vector& y, double scale,
                       Vector* grad) const;

 private:
  struct Layer {
    int in, out, w_offset, b_offset;
    double w_scale, b_scale;
  };

  NetworkSpec spec_;
  int width_;
  std::vector<Layer> layers_;
  int n_params_ = 0;
};

}  // namespace ldpnn
