#pragma once

#include <random>

#include <Eigen/Dense>

#include "craneplan/crane_model.hpp"

namespace craneplan::testutil {

inline std::mt19937& rng() {
  static std::mt19937 engine(12345);
  return engine;
}

inline double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng());
}

inline Eigen::VectorXd random_vector(int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
  return v;
}

// Random configuration strictly inside the joint limits.
inline Eigen::VectorXd random_q(const CraneModel& model, double margin = 0.05) {
  const auto& lim = model.limits();
  Eigen::VectorXd q(model.n());
  for (int i = 0; i < model.n(); ++i) {
    const double span = lim.q_max[i] - lim.q_min[i];
    q[i] = uniform(lim.q_min[i] + margin * span, lim.q_max[i] - margin * span);
  }
  return q;
}

inline Configuration split(const CraneModel& model, const Eigen::VectorXd& q) {
  return Configuration{q.head(model.n_actuated()), q.tail(model.n_passive())};
}

// Central-difference gradient of a scalar function.
template <typename F>
Eigen::VectorXd fd_gradient(const F& f, const Eigen::VectorXd& x,
                            double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

// Central-difference Jacobian of a vector function.
template <typename F>
Eigen::MatrixXd fd_jacobian(const F& f, const Eigen::VectorXd& x,
                            double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return J;
}

}  // namespace craneplan::testutil
