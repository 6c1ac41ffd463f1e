#pragma once

#include <string>

#include "craneplan/crane_model.hpp"

namespace craneplan {

/// Via-point parameterization of an actuated-space path. `xi` concatenates
/// the interior via configurations; the fixed boundary configurations are
/// stored separately and are not optimization variables.
struct ViaPoints {
  Eigen::VectorXd xi;  // length n_via * n_A
  Eigen::VectorXd q_start;
  Eigen::VectorXd q_goal;

  int n_joints() const { return static_cast<int>(q_start.size()); }
  int n_via() const {
    return n_joints() == 0 ? 0 : static_cast<int>(xi.size()) / n_joints();
  }
  Eigen::VectorXd via(int i) const {
    return xi.segment(static_cast<Eigen::Index>(i) * n_joints(), n_joints());
  }
};

/// Per-joint clamped cubic spline over uniform knots on s in [0, 1].
/// Interpolates start, vias, goal with zero end slopes; C2 at the knots.
class PathSpline {
 public:
  PathSpline() = default;

  int n_joints() const { return static_cast<int>(knots_.cols()); }
  int n_knots() const { return static_cast<int>(knots_.rows()); }

  void eval(double s, Eigen::VectorXd& q, Eigen::VectorXd& dq,
            Eigen::VectorXd& ddq) const;
  Eigen::VectorXd position(double s) const;

  static PathSpline fit(const ViaPoints& vias);

 private:
  Eigen::MatrixXd knots_;   // (n_via + 2) x n_A interpolated values
  Eigen::MatrixXd second_;  // second derivatives at the knots
  double h_ = 0.0;          // uniform knot spacing
};

PathSpline build_spline(const ViaPoints& vias);

/// Uniform samples of the path and its s-derivatives, endpoints included.
struct PathGrid {
  Eigen::VectorXd s;
  Eigen::MatrixXd q;    // N_eval x n_A
  Eigen::MatrixXd dq;   // dq/ds
  Eigen::MatrixXd ddq;  // d2q/ds2
};

PathGrid eval_grid(const PathSpline& path, int n_eval);

/// Path-domain pump flow rate per unit path speed:
/// Qhat(s) = sum_l A_l(sign(dhat'_l)) |dhat'_l|, dhat' = J_C(q) dq/ds.
double flow_profile(const CraneModel& model, const Eigen::VectorXd& q_A,
                    const Eigen::VectorXd& dq_ds);
double flow_profile(const CraneModel& model, const PathSpline& path, double s);

enum class ConstraintFamily { None, Velocity, Acceleration, PumpFlow };

struct MinDuration {
  double T = 0.0;
  double T_velocity = 0.0;
  double T_acceleration = 0.0;
  double T_flow = 0.0;
  std::vector<ConstraintFamily> active;  // binding family per grid sample
};

/// Minimal duration of the linear time parameterization s(t) = t/T that
/// satisfies the velocity, acceleration, and pump flow rate limits on the
/// evaluation grid. Floored at `duration_floor` for zero-length motions.
MinDuration min_duration(const CraneModel& model, const PathSpline& path,
                         int n_eval, double duration_floor = 1e-3);

struct TimedTrajectory {
  PathSpline path;
  double duration = 0.0;

  void sample(double t, Eigen::VectorXd& q_A, Eigen::VectorXd& qd_A,
              Eigen::VectorXd& qdd_A) const;
};

/// CSV export with columns t, q_A, qd_A, qdd_A, Q at a fixed time step.
void export_trajectory_csv(const CraneModel& model, const TimedTrajectory& traj,
                           const std::string& path, double dt = 0.05);

ViaPoints straight_line_vias(const Eigen::VectorXd& q_start,
                             const Eigen::VectorXd& q_goal, int n_via);

}  // namespace craneplan
