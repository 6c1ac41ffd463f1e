#include "craneplan/model_io.hpp"

namespace craneplan {

namespace {

JointDesc make_joint(const std::string& name, JointType type, const Vec3& axis,
                     const Vec3& xyz, int coord, double scale = 1.0) {
  JointDesc j;
  j.name = name;
  j.type = type;
  j.axis = axis;
  j.origin = Eigen::Isometry3d::Identity();
  j.origin.translation() = xyz;
  j.coord = coord;
  j.motion_scale = scale;
  return j;
}

BodyDesc make_body(double mass, const Vec3& com, const Vec3& inertia_diag) {
  BodyDesc b;
  b.mass = mass;
  b.com = com;
  b.inertia = inertia_diag.asDiagonal();
  return b;
}

}  // namespace

ModelBundle desk_crane() {
  CraneModelParams p;
  p.schema_version = 1;
  p.n_actuated = 5;
  p.telescope_ratio = 2.0;
  p.gravity = Vec3(0, 0, -9.81);
  p.jaw_joint = 6;

  // Chain order: slew, boom, stick, telescope, swing pitch, swing roll,
  // rotator. Coordinates are actuated-first: [q1 q2 q3 q4 q7 | q5 q6].
  p.joints = {
      make_joint("slew", JointType::Revolute, Vec3::UnitZ(), {0.0, 0.0, 0.5}, 0),
      make_joint("boom", JointType::Revolute, Vec3::UnitY(), {0.3, 0.0, 1.7}, 1),
      make_joint("stick", JointType::Revolute, Vec3::UnitY(), {4.0, 0.0, 0.0}, 2),
      make_joint("telescope", JointType::Prismatic, Vec3::UnitX(),
                 {2.6, 0.0, 0.0}, 3, 2.0),
      make_joint("swing_pitch", JointType::Revolute, Vec3::UnitY(),
                 {0.9, 0.0, 0.0}, 5),
      make_joint("swing_roll", JointType::Revolute, Vec3::UnitX(),
                 {0.0, 0.0, 0.0}, 6),
      make_joint("rotator", JointType::Revolute, Vec3::UnitZ(),
                 {0.0, 0.0, -0.35}, 4),
  };

  // COMs of the suspension and jaw bodies sit on the pendant axis, so the
  // hanging equilibrium keeps the grapple COM directly under the swing pivot.
  p.bodies = {
      make_body(900.0, {0.10, 0.0, 0.90}, {320.0, 320.0, 180.0}),
      make_body(520.0, {1.90, 0.0, 0.05}, {14.0, 760.0, 760.0}),
      make_body(310.0, {1.30, 0.0, 0.00}, {6.0, 270.0, 270.0}),
      make_body(160.0, {0.45, 0.0, 0.00}, {2.5, 95.0, 95.0}),
      make_body(25.0, {0.0, 0.0, -0.08}, {0.9, 0.9, 0.5}),
      make_body(45.0, {0.0, 0.0, -0.20}, {2.2, 2.2, 1.0}),
      make_body(210.0, {0.0, 0.0, -0.45}, {30.0, 36.0, 24.0}),
  };

  // h_C per actuated coordinate. The telescope linkage doubles the joint
  // travel relative to the piston, so d4 = q4 / kappa.
  CylinderGeom slew{CylinderGeom::Kind::Linear, 0.30, 0, 0, 0, 0, 0.0045, 0.0045};
  CylinderGeom boom;
  boom.kind = CylinderGeom::Kind::Linkage;
  boom.a = 1.05;
  boom.b = 1.15;
  boom.phi0 = 1.9;
  boom.d0 = 1.05;
  boom.area_pos = 0.011;
  boom.area_neg = 0.0065;
  CylinderGeom stick;
  stick.kind = CylinderGeom::Kind::Linkage;
  stick.a = 0.9;
  stick.b = 1.0;
  stick.phi0 = 2.6;
  stick.d0 = 0.215;
  stick.area_pos = 0.009;
  stick.area_neg = 0.0055;
  CylinderGeom tele{CylinderGeom::Kind::Linear, 0.5, 0, 0, 0, 0, 0.008, 0.005};
  CylinderGeom rot{CylinderGeom::Kind::Linear, 0.10, 0, 0, 0, 0, 0.0022, 0.0022};
  p.cylinders = {slew, boom, stick, tele, rot};

  JointLimits lim;
  lim.q_min = Eigen::VectorXd(7);
  lim.q_max = Eigen::VectorXd(7);
  lim.q_min << -3.2, -0.9, -2.4, 0.0, -3.2, -3.5, -1.6;
  lim.q_max << 3.2, 0.75, 0.4, 1.25, 3.2, 3.5, 1.6;
  lim.qd_max = Eigen::VectorXd(5);
  lim.qd_max << 0.45, 0.35, 0.40, 0.30, 1.20;
  lim.u_max = Eigen::VectorXd(5);
  lim.u_max << 0.60, 0.50, 0.70, 0.50, 2.50;
  lim.flow_max = 0.0038;
  p.limits = lim;

  ModelBundle b{CraneModel(std::move(p)), {}, "desk_crane"};

  b.links = {
      LinkTemplate{1, 0, Obb{{0.15, 0.0, 1.1}, Mat3::Identity(), {0.40, 0.40, 1.10}}, false},
      LinkTemplate{2, 1, Capsule{{0, 0, 0}, {4.0, 0, 0}, 0.22}, false},
      LinkTemplate{3, 2, Capsule{{0, 0, 0}, {3.5, 0, 0}, 0.18}, true},
      LinkTemplate{4, 6, Obb{{0.0, 0.0, -0.50}, Mat3::Identity(), {0.55, 0.40, 0.50}}, false},
  };
  return b;
}

CraneModel planar_test_model() {
  CraneModelParams p;
  p.n_actuated = 1;
  p.telescope_ratio = 1.0;
  p.gravity = Vec3(0, 0, -9.81);
  p.jaw_joint = 1;

  p.joints = {
      make_joint("shoulder", JointType::Revolute, Vec3::UnitY(), {0, 0, 0}, 0),
      make_joint("pendulum", JointType::Revolute, Vec3::UnitY(), {1.0, 0, 0}, 1),
  };
  p.bodies = {
      make_body(2.0, {0.5, 0, 0}, {0.010, 0.020, 0.010}),
      make_body(1.2, {0.4, 0, 0}, {0.005, 0.010, 0.005}),
  };
  CylinderGeom cyl{CylinderGeom::Kind::Linear, 0.1, 0, 0, 0, 0, 0.002, 0.002};
  p.cylinders = {cyl};

  JointLimits lim;
  lim.q_min = Eigen::VectorXd(2);
  lim.q_max = Eigen::VectorXd(2);
  lim.q_min << -6.4, -6.4;
  lim.q_max << 6.4, 6.4;
  lim.qd_max = Eigen::VectorXd(1);
  lim.qd_max << 2.0;
  lim.u_max = Eigen::VectorXd(1);
  lim.u_max << 5.0;
  lim.flow_max = 1e-3;
  p.limits = lim;

  return CraneModel(std::move(p));
}

}  // namespace craneplan
