#pragma once

#include "dualaug/skeleton.hpp"
#include "dualaug/tape.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace testing {

using dualaug::Matrix;
using dualaug::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline dualaug::Pose3D random_pose(std::mt19937_64& rng, int joints = 16, double scale = 300.0) {
  dualaug::Pose3D p;
  p.joints = random_matrix(joints, 3, rng, scale);
  return p;
}

// Worst mixed relative/absolute error between an analytic gradient and central
// differences of f. Entries with both values tiny are compared absolutely.
inline double fd_error(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& analytic,
                       double h = 1e-5, double floor = 1e-8) {
  double worst = 0.0;
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(numeric), std::abs(analytic(i)));
    const double err = scale < floor ? std::abs(numeric - analytic(i)) : std::abs(numeric - analytic(i)) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// Worst relative error of the analytic directional derivative g.v against a
// fourth-order central difference along random unit directions v. Small steps
// keep the probe clear of activation kinks in large networks.
inline double fd_directional_error(const std::function<double(const Vector&)>& f, const Vector& x,
                                   const Vector& analytic, std::mt19937_64& rng, int directions = 4,
                                   double h = 1e-6) {
  double worst = 0.0;
  std::normal_distribution<double> n;
  for (int d = 0; d < directions; ++d) {
    Vector v(x.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    v.normalize();
    const double numeric =
        (-f(x + 2 * h * v) + 8 * f(x + h * v) - 8 * f(x - h * v) + f(x - 2 * h * v)) / (12.0 * h);
    const double exact = analytic.dot(v);
    const double scale = std::max(std::abs(numeric), std::abs(exact));
    worst = std::max(worst, scale < 1e-12 ? std::abs(numeric - exact) : std::abs(numeric - exact) / scale);
  }
  return worst;
}

inline Vector as_vector(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace testing
