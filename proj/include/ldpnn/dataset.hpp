#pragma once

#include <string>
#include <vector>

#include "ldpnn/kernelcore.hpp"

namespace ldpnn {

/// Training targets on a shared input set; the loss is always quadratic.
struct Dataset {
  InputSet x;
  Vector y_train;  ///< aligned with x.train_indices

  /// Builds the input set from training inputs followed by test inputs (duplicates merged).
  static Dataset scalar(const std::vector<double>& train_x, const std::vector<double>& train_y,
                        const std::vector<double>& test_x = {});
  /// Inputs {-3, ..., 2} with Heaviside targets 1{x >= 0}.
  static Dataset heaviside6(const std::vector<double>& test_x = {});
  static Dataset named(const std::string& preset, const std::vector<double>& test_x = {});

  int train_size() const { return static_cast<int>(x.train_indices.size()); }
  int index_of(double x_scalar) const;
  /// Same inputs, all targets zero.
  Dataset zero_targets() const;
  /// Full-length vector with targets on training coordinates and zero elsewhere.
  Vector embedded_targets() const;
  /// 0.5 * sum over training points of (h_i - y_i)^2.
  double loss(const Vector& h) const;
  void validate() const;
};

}  // namespace ldpnn
