#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace craneplan {

/// Discrete-horizon problem with stage costs, inequality constraints
/// g(k, x, u) <= 0, and dynamics x_{k+1} = f(k, x_k, u_k). The final control
/// only enters its own stage cost and constraints. `constraint_jacobians`
/// receives an activity mask and only needs to fill the masked rows.
struct IlqrProblem {
  int nx = 0;
  int nu = 0;
  int N = 0;

  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      dynamics;
  std::function<void(int, const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&, Eigen::MatrixXd&)>
      dynamics_jacobians;
  std::function<double(int, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      stage_cost;
  std::function<void(int, const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&,
                     Eigen::MatrixXd&, Eigen::MatrixXd&)>
      cost_expansion;

  int n_constraints = 0;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      constraints;
  std::function<void(int, const Eigen::VectorXd&, const Eigen::VectorXd&,
                     const std::vector<char>&, Eigen::MatrixXd&,
                     Eigen::MatrixXd&)>
      constraint_jacobians;
};

struct IlqrOptions {
  int max_outer = 25;
  int max_inner = 60;
  double tol_constraint = 1e-5;
  double tol_gradient = 1e-6;
  double tol_cost = 1e-9;
  double mu_init = 10.0;
  double mu_scale = 8.0;
  double mu_max = 1e9;
  double reg_init = 0.0;
  double reg_max = 1e9;
  int line_search_steps = 12;
};

struct IlqrSolution {
  std::vector<Eigen::VectorXd> X;
  std::vector<Eigen::VectorXd> U;
  double cost = 0.0;             // true stage cost sum
  double max_violation = 0.0;    // max over (k, c) of max(0, g)
  double stationarity = 0.0;     // max |Q_u| at the solution
  bool converged = false;
  bool line_search_failed = false;
  int inner_iterations = 0;
  int outer_iterations = 0;
  // Multiplier state for receding-horizon warm starts.
  std::vector<Eigen::VectorXd> multipliers;
  double mu = 0.0;
};

/// Augmented-Lagrangian iLQR. `U_init` seeds the rollout; `warm` optionally
/// seeds the multipliers. Throws std::runtime_error when the dynamics return
/// non-finite values.
IlqrSolution solve_al_ilqr(const IlqrProblem& prob, const Eigen::VectorXd& x0,
                           const std::vector<Eigen::VectorXd>& U_init,
                           const IlqrOptions& options,
                           const IlqrSolution* warm = nullptr);

}  // namespace craneplan
