#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace craneplan {

struct CmaOptions {
  int population = 0;        // lambda; 0 = 4 + floor(3 ln n)
  double sigma_init = 1.0;
  int max_generations = 300;
  uint64_t seed = 0;
  int threads = 1;           // concurrent objective evaluations
  double stagnation_tol = 1e-12;
  int stagnation_window = 50;
  double sigma_stop = 1e-12;
  double f_target = -std::numeric_limits<double>::infinity();
  // Optional per-generation trace: (generation, f_best, sigma).
  std::function<void(int, double, double)> trace;
  // Polled once per generation; returning true stops the run (budget reason).
  std::function<bool()> stop_request;
};

enum class CmaStop { Budget, Stagnation, SigmaFloor, Target };

struct CmaResult {
  Eigen::VectorXd x_best;
  double f_best = std::numeric_limits<double>::infinity();
  int generations = 0;
  int evaluations = 0;
  CmaStop reason = CmaStop::Budget;
  std::vector<double> history;  // best-so-far per generation
};

/// Evolution-strategy state: sampling mean, step size, covariance and the
/// two evolution paths. The covariance is kept symmetric positive definite
/// by flooring its eigenvalues on every update.
struct EsState {
  Eigen::VectorXd mean;
  double sigma = 1.0;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_cov;
  int generation = 0;
  uint64_t seed = 0;
};

/// Rank-based covariance-matrix-adaptation search. The objective must be a
/// pure function of its argument; non-finite values are ranked worst and the
/// run continues. Identical options and seed reproduce the identical sample
/// sequence and result.
CmaResult cma_optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const Eigen::VectorXd& x0, const CmaOptions& options);

}  // namespace craneplan
