#pragma once

#include "craneplan/collision.hpp"
#include "craneplan/global_planner.hpp"
#include "craneplan/ilqr.hpp"
#include "craneplan/via_trajectory.hpp"

namespace craneplan {

struct LocalPlanConfig {
  double T_s = 0.1;
  int N = 40;
  double w1 = 0.5;
  double w2 = 0.005;
  double w3 = 0.05;
  double clearance_margin = 0.02;  // enforce sd >= margin [m]
  double flow_smooth_eps = 1e-4;   // |ddot| smoothing [m/s]
  bool constrain_collisions = true;
  bool constrain_flow = true;
  IlqrOptions ilqr;

  double stop_pos_tol = 5e-4;   // terminal |q_A - q_goal|_inf
  double stop_vel_tol = 5e-4;   // terminal |qdot|_inf
  double stop_sway_tol = 6e-3;  // terminal |q_P - eq(q_goal)|_inf
  double time_cap_factor = 3.0;
  double time_cap_extra_s = 8.0;
};

/// One receding-horizon window. References are absolute-step indexed and
/// padded with the goal configuration past the trajectory end.
struct OcpProblem {
  const CraneModel* model = nullptr;
  const CollisionWorld* world = nullptr;
  int N = 0;
  double T_s = 0.1;
  Eigen::VectorXd x_init;  // [q; qdot], length 2n
  std::vector<Eigen::VectorXd> q_A_ref;    // length N
  std::vector<Eigen::VectorXd> qdd_A_ref;  // length N
  std::vector<Eigen::VectorXd> q_P_ref;    // length N
  std::vector<Eigen::VectorXd> qd_P_ref;   // length N
  double w1 = 0.5, w2 = 0.005, w3 = 0.05;
  double clearance_margin = 0.02;
  double flow_smooth_eps = 1e-4;
  bool constrain_collisions = true;
  bool constrain_flow = true;
};

struct OcpSolution {
  std::vector<Eigen::VectorXd> X;
  std::vector<Eigen::VectorXd> U;
  double cost = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  bool converged = false;
  bool line_search_failed = false;
  int inner_iterations = 0;
  int outer_iterations = 0;
  std::vector<Eigen::VectorXd> multipliers;
  double mu = 0.0;
};

/// One fixed-step RK4 integration of (qddot_A = u, qddot_P from the passive
/// dynamics) over T_s.
Eigen::VectorXd discrete_step(const CraneModel& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, double T_s);

/// Tracking stage cost:
/// |q_A - ref|^2 + w1 |u - qdd_ref|^2 + w2 |q_P - ref|^2 + w3 |qd_P - ref|^2.
double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& q_A_ref,
                  const Eigen::VectorXd& qdd_A_ref,
                  const Eigen::VectorXd& q_P_ref,
                  const Eigen::VectorXd& qd_P_ref, double w1, double w2,
                  double w3, int n_A, int n_P);

/// Smoothed pump flow used as the C1 constraint surrogate; upper-bounds the
/// true flow and converges to it as eps -> 0.
double smoothed_flow(const CraneModel& model, const Eigen::VectorXd& q_A,
                     const Eigen::VectorXd& qd_A, double eps);

OcpSolution solve_ocp(const OcpProblem& problem, const IlqrOptions& options,
                      const std::vector<Eigen::VectorXd>* U_init = nullptr,
                      const OcpSolution* warm = nullptr);

struct StepDiagnostics {
  double t = 0.0;
  double cost = 0.0;
  double violation = 0.0;
  double solve_time_s = 0.0;
  int inner_iterations = 0;
  bool converged = false;
};

struct ExecutedTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;  // full state per step
  std::vector<Eigen::VectorXd> u;  // applied control (zero at final sample)
  std::vector<double> flow;        // true pump flow
  std::vector<double> clearance;   // min signed distance, actual passive pose
  std::vector<StepDiagnostics> diagnostics;
  bool reached = false;
  std::string stop_reason;
};

/// Receding-horizon execution of a feasible global plan: solve the window,
/// apply the first control, integrate, shift. Warm-starts each window from
/// the previous solution.
ExecutedTrajectory run_receding_horizon(const CraneModel& model,
                                        const CollisionWorld& world,
                                        const GlobalPlanResult& global,
                                        const LocalPlanConfig& config);

/// Open-loop comparison: integrate the passive dynamics along the global
/// reference accelerations without feedback.
std::vector<Eigen::VectorXd> open_loop_rollout(const CraneModel& model,
                                               const GlobalPlanResult& global,
                                               double T_s, double total_time);

/// Largest deviation of the passive joints from the moving equilibrium.
double peak_passive_deviation(const CraneModel& model,
                              const std::vector<Eigen::VectorXd>& states);

/// CSV with columns t, q (n), qd (n), u (n_A), Q, min_clearance.
void export_executed_csv(const CraneModel& model, const ExecutedTrajectory& exec,
                         const std::string& path);

}  // namespace craneplan
