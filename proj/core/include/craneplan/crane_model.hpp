#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace craneplan {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class JointType { Revolute, Prismatic };

/// One joint of the serial chain. `origin` is the fixed transform from the
/// parent joint frame (post motion) to this joint's origin frame; the joint
/// motion (rotation or translation about `axis`) is applied on top of it.
/// `coord` indexes the generalized coordinate vector, which is ordered
/// actuated-first, so chain order and coordinate order may differ.
/// `motion_scale` is the joint displacement per unit generalized coordinate
/// (used for the telescope, where one coordinate drives a multiplied
/// extension).
struct JointDesc {
  std::string name;
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
  int coord = 0;
  double motion_scale = 1.0;
};

/// Rigid body attached to a joint frame. Inertia is about the COM, expressed
/// in joint-frame axes.
struct BodyDesc {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
};

/// Hydraulic cylinder kinematics d_l = h_l(q_l) for one actuated coordinate,
/// plus the direction-dependent effective areas.
///
///   Linear:  d = gain * q            (rotary drives, rack actuators,
///                                     telescope with gain = 1/kappa)
///   Linkage: d = sqrt(a^2 + b^2 - 2 a b cos(q + phi0)) - d0
///                                    (boom/stick triangle geometry)
struct CylinderGeom {
  enum class Kind { Linear, Linkage } kind = Kind::Linear;
  double gain = 1.0;
  double a = 0.0, b = 0.0, phi0 = 0.0, d0 = 0.0;
  double area_pos = 0.0;  // A+ [m^2], piston extending
  double area_neg = 0.0;  // A- [m^2], piston retracting

  double displacement(double q) const;
  double derivative(double q) const;
  double second_derivative(double q) const;
};

struct JointLimits {
  Eigen::VectorXd q_min;   // length n (full, actuated-first)
  Eigen::VectorXd q_max;   // length n
  Eigen::VectorXd qd_max;  // length n_A
  Eigen::VectorXd u_max;   // length n_A
  double flow_max = 0.0;   // Q_max [m^3/s]
};

/// Payload merged into the jaw body while a log is carried.
struct PayloadParams {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();   // in the jaw joint frame
  Mat3 inertia = Mat3::Zero();
};

struct CraneModelParams {
  std::vector<JointDesc> joints;  // chain order
  std::vector<BodyDesc> bodies;   // one per joint, chain order
  std::vector<CylinderGeom> cylinders;  // one per actuated coordinate
  int n_actuated = 0;
  JointLimits limits;
  Vec3 gravity = Vec3(0, 0, -9.81);
  double telescope_ratio = 1.0;  // kappa
  int jaw_joint = -1;            // chain index of the jaw body (payload merge)
  int schema_version = 1;
};

struct Configuration {
  Eigen::VectorXd q_A;
  Eigen::VectorXd q_P;

  Eigen::VectorXd full() const {
    Eigen::VectorXd q(q_A.size() + q_P.size());
    q << q_A, q_P;
    return q;
  }
};

/// Partitioned dynamics terms of the actuated/passive split.
struct DynamicsEval {
  Eigen::MatrixXd D_A;  // n_A x n_A
  Eigen::MatrixXd D_M;  // n_P x n_A
  Eigen::MatrixXd D_P;  // n_P x n_P
  Eigen::MatrixXd C_A;  // n_A x n
  Eigen::MatrixXd C_P;  // n_P x n
  Eigen::VectorXd g_A;  // n_A
  Eigen::VectorXd g_P;  // n_P

  Eigen::MatrixXd full_mass() const;
  Eigen::MatrixXd full_coriolis() const;
  Eigen::VectorXd full_gravity() const;
};

struct CylinderState {
  Eigen::VectorXd d;    // cylinder displacements [m]
  Eigen::MatrixXd J_C;  // d(d)/d(q_A), n_A x n_A
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Immutable crane model. Construction validates the partition, limits and
/// cylinder parameters and throws std::invalid_argument on violations.
class CraneModel {
 public:
  explicit CraneModel(CraneModelParams params);

  int n() const { return static_cast<int>(params_.joints.size()); }
  int n_actuated() const { return params_.n_actuated; }
  int n_passive() const { return n() - params_.n_actuated; }

  const std::vector<JointDesc>& joints() const { return params_.joints; }
  const std::vector<BodyDesc>& bodies() const { return params_.bodies; }
  const std::vector<CylinderGeom>& cylinders() const { return params_.cylinders; }
  const JointLimits& limits() const { return params_.limits; }
  const Vec3& gravity() const { return params_.gravity; }
  double telescope_ratio() const { return params_.telescope_ratio; }
  int jaw_joint() const { return params_.jaw_joint; }
  const CraneModelParams& params() const { return params_; }

  /// New model with the payload rigidly merged into the jaw body.
  CraneModel with_payload(const PayloadParams& payload) const;

 private:
  CraneModelParams params_;
};

/// World poses of every joint frame (post joint motion), chain order.
std::vector<Eigen::Isometry3d> frame_poses(const CraneModel& model,
                                           const Eigen::VectorXd& q_full);

DynamicsEval dynamics_blocks(const CraneModel& model, const Configuration& q,
                             const Eigen::VectorXd& qdot);

/// Passive accelerations for a given actuated acceleration input,
/// qddot_P = -D_P^{-1} (D_M u + C_P qdot + g_P).
Eigen::VectorXd passive_accel(const CraneModel& model, const Configuration& q,
                              const Eigen::VectorXd& qdot,
                              const Eigen::VectorXd& u);

/// Passive configuration where the passive gravity torques vanish.
/// Damped Newton descent on the potential; throws SolverError on
/// non-convergence. `guess` warm-starts the iteration.
Eigen::VectorXd equilibrium(const CraneModel& model, const Eigen::VectorXd& q_A,
                            const std::optional<Eigen::VectorXd>& guess = std::nullopt);

std::pair<CylinderState, Eigen::VectorXd> cylinder_state(
    const CraneModel& model, const Eigen::VectorXd& q_A,
    const Eigen::VectorXd& qd_A);

/// Total pump flow rate Q = sum_l A_l(sign(ddot_l)) |ddot_l|.
double pump_flow(const CraneModel& model, const Eigen::VectorXd& ddot);

/// Energy helpers (used by the dynamics consistency checks).
double potential_energy(const CraneModel& model, const Eigen::VectorXd& q_full);
double kinetic_energy(const CraneModel& model, const Eigen::VectorXd& q_full,
                      const Eigen::VectorXd& qdot);

/// Inverse dynamics tau = D qddot + C qdot + g via recursive Newton-Euler.
/// With `with_gravity` false the gravity contribution is dropped.
Eigen::VectorXd inverse_dynamics(const CraneModel& model,
                                 const Eigen::VectorXd& q_full,
                                 const Eigen::VectorXd& qdot,
                                 const Eigen::VectorXd& qddot,
                                 bool with_gravity = true);

/// Gravity torques of the passive coordinates only (cheap path used by the
/// equilibrium solver and the planners).
Eigen::VectorXd passive_gravity(const CraneModel& model,
                                const Eigen::VectorXd& q_full);

}  // namespace craneplan
