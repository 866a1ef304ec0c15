#include "ldpnn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "ldpnn/errors.hpp"

namespace ldpnn {

Dataset Dataset::scalar(const std::vector<double>& train_x, const std::vector<double>& train_y,
                        const std::vector<double>& test_x) {
  if (train_x.size() != train_y.size()) throw InvalidArgument("training inputs and targets differ in length");
  Dataset d;
  d.y_train.resize(static_cast<int>(train_y.size()));
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    if (d.x.find(Vector::Constant(1, train_x[i])) >= 0) throw InvalidArgument("duplicate training input");
    d.x.train_indices.push_back(d.x.add(Vector::Constant(1, train_x[i])));
    d.y_train(static_cast<int>(i)) = train_y[i];
  }
  for (double t : test_x) {
    const int idx = d.x.add(Vector::Constant(1, t));
    if (std::find(d.x.test_indices.begin(), d.x.test_indices.end(), idx) == d.x.test_indices.end())
      d.x.test_indices.push_back(idx);
  }
  return d;
}

Dataset Dataset::heaviside6(const std::vector<double>& test_x) {
  const std::vector<double> xs{-3, -2, -1, 0, 1, 2};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(x >= 0.0 ? 1.0 : 0.0);
  return scalar(xs, ys, test_x);
}

Dataset Dataset::named(const std::string& preset, const std::vector<double>& test_x) {
  if (preset == "heaviside6") return heaviside6(test_x);
  if (preset == "empty") return scalar({}, {}, test_x);
  throw ConfigError("unknown dataset preset '" + preset + "'");
}

int Dataset::index_of(double x_scalar) const { return x.find(Vector::Constant(1, x_scalar)); }

Dataset Dataset::zero_targets() const {
  Dataset d = *this;
  d.y_train.setZero();
  return d;
}

Vector Dataset::embedded_targets() const {
  Vector y = Vector::Zero(x.size());
  for (int i = 0; i < train_size(); ++i) y(x.train_indices[i]) = y_train(i);
  return y;
}

double Dataset::loss(const Vector& h) const {
  double s = 0.0;
  for (int i = 0; i < train_size(); ++i) {
    const double r = h(x.train_indices[i]) - y_train(i);
    s += r * r;
  }
  return 0.5 * s;
}

void Dataset::validate() const {
  x.validate();
  if (y_train.size() != train_size()) throw InvalidArgument("targets do not match training indices");
  if (!y_train.allFinite()) throw NonFiniteInput("targets are not finite");
}

}  // namespace ldpnn
