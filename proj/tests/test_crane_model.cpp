#include <doctest.h>

#include <Eigen/Cholesky>

#include "craneplan/model_io.hpp"
#include "test_util.hpp"

using namespace craneplan;
using namespace craneplan::testutil;

namespace {

// Hand-derived Lagrangian of the planar two-link chain (rotations about +y,
// gravity -z): the oracle for the reduced test model.
struct PlanarOracle {
  double m1 = 2.0, lc1 = 0.5, I1 = 0.020;
  double m2 = 1.2, l1 = 1.0, lc2 = 0.4, I2 = 0.010;
  double g = 9.81;

  Eigen::Matrix2d mass(double q2) const {
    const double c2 = std::cos(q2);
    Eigen::Matrix2d D;
    D(0, 0) = m1 * lc1 * lc1 + I1 +
              m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + I2;
    D(0, 1) = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2;
    D(1, 0) = D(0, 1);
    D(1, 1) = m2 * lc2 * lc2 + I2;
    return D;
  }

  Eigen::Vector2d gravity(double q1, double q2) const {
    const double c1 = std::cos(q1), c12 = std::cos(q1 + q2);
    Eigen::Vector2d gr;
    gr[0] = -g * (m1 * lc1 * c1 + m2 * (l1 * c1 + lc2 * c12));
    gr[1] = -g * m2 * lc2 * c12;
    return gr;
  }

  Eigen::Vector2d coriolis_times_qd(double q2, double qd1, double qd2) const {
    const double h = m2 * l1 * lc2 * std::sin(q2);
    return {-h * (2.0 * qd1 * qd2 + qd2 * qd2), h * qd1 * qd1};
  }
};

CraneModel single_cylinder_model(double area_pos, double area_neg) {
  CraneModelParams p;
  p.n_actuated = 1;
  JointDesc j;
  j.name = "lift";
  j.type = JointType::Prismatic;
  j.axis = Vec3::UnitZ();
  j.coord = 0;
  p.joints = {j};
  BodyDesc b;
  b.mass = 10.0;
  b.inertia = Mat3::Identity();
  p.bodies = {b};
  CylinderGeom c;
  c.kind = CylinderGeom::Kind::Linear;
  c.gain = 1.0;
  c.area_pos = area_pos;
  c.area_neg = area_neg;
  p.cylinders = {c};
  p.limits.q_min = Eigen::VectorXd::Constant(1, -1.0);
  p.limits.q_max = Eigen::VectorXd::Constant(1, 1.0);
  p.limits.qd_max = Eigen::VectorXd::Constant(1, 1.0);
  p.limits.u_max = Eigen::VectorXd::Constant(1, 1.0);
  p.limits.flow_max = 1.0;
  p.jaw_joint = 0;
  return CraneModel(std::move(p));
}

}  // namespace

TEST_CASE("planar model matches the two-link pendulum oracle") {
  const CraneModel model = planar_test_model();
  const PlanarOracle oracle;

  SUBCASE("mass matrix and gravity at zero") {
    const Configuration q{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    const auto e = dynamics_blocks(model, q, Eigen::VectorXd::Zero(2));
    const Eigen::Matrix2d D = oracle.mass(0.0);
    CHECK(e.full_mass()(0, 0) == doctest::Approx(D(0, 0)).epsilon(1e-12));
    CHECK(e.full_mass()(0, 1) == doctest::Approx(D(0, 1)).epsilon(1e-12));
    CHECK(e.full_mass()(1, 1) == doctest::Approx(D(1, 1)).epsilon(1e-12));
  }

  SUBCASE("random states: D, g, and C qd") {
    for (int trial = 0; trial < 50; ++trial) {
      const double q1 = uniform(-3, 3), q2 = uniform(-3, 3);
      const double qd1 = uniform(-2, 2), qd2 = uniform(-2, 2);
      Configuration q{Eigen::VectorXd::Constant(1, q1),
                      Eigen::VectorXd::Constant(1, q2)};
      Eigen::VectorXd qd(2);
      qd << qd1, qd2;
      const auto e = dynamics_blocks(model, q, qd);

      const Eigen::Matrix2d D = oracle.mass(q2);
      const Eigen::Vector2d g = oracle.gravity(q1, q2);
      const Eigen::Vector2d cqd = oracle.coriolis_times_qd(q2, qd1, qd2);

      CHECK((e.full_mass() - D).cwiseAbs().maxCoeff() < 1e-11);
      CHECK((e.full_gravity() - g).cwiseAbs().maxCoeff() < 1e-11);
      CHECK((e.full_coriolis() * qd - cqd).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("Coriolis contributes nothing at rest") {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd qv = random_q(model);
      const auto e = dynamics_blocks(model, split(model, qv),
                                     Eigen::VectorXd::Zero(2));
      CHECK((e.full_coriolis() * Eigen::VectorXd::Zero(2)).norm() == 0.0);
    }
  }

  SUBCASE("driven pendulum acceleration") {
    for (int trial = 0; trial < 20; ++trial) {
      const double q1 = uniform(-3, 3), q2 = uniform(-3, 3);
      const double qd1 = uniform(-2, 2), qd2 = uniform(-2, 2);
      const double u = uniform(-4, 4);
      Configuration q{Eigen::VectorXd::Constant(1, q1),
                      Eigen::VectorXd::Constant(1, q2)};
      Eigen::VectorXd qd(2);
      qd << qd1, qd2;

      const Eigen::Matrix2d D = oracle.mass(q2);
      const Eigen::Vector2d g = oracle.gravity(q1, q2);
      const double h = oracle.m2 * oracle.l1 * oracle.lc2 * std::sin(q2);
      const double expect = -(D(1, 0) * u + h * qd1 * qd1 + g[1]) / D(1, 1);

      const Eigen::VectorXd acc =
          passive_accel(model, q, qd, Eigen::VectorXd::Constant(1, u));
      CHECK(acc[0] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("desk crane mass matrix is SPD across the workspace") {
  const CraneModel model = desk_crane().model;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd qv = random_q(model);
    const auto e =
        dynamics_blocks(model, split(model, qv), Eigen::VectorXd::Zero(7));
    const Eigen::MatrixXd D = e.full_mass();
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("passive acceleration agrees with full forward dynamics") {
  // Independent route: solve the full system D qdd = [tau_A; 0] - C qd - g
  // for the tau_A that realizes qdd_A = u, then compare passive rows.
  const CraneModel model = desk_crane().model;
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd qv = random_q(model);
    const Eigen::VectorXd qd = random_vector(model.n(), -0.5, 0.5);
    const Eigen::VectorXd u = random_vector(n_A, -0.5, 0.5);
    const Configuration q = split(model, qv);

    const auto e = dynamics_blocks(model, q, qd);
    const Eigen::MatrixXd D = e.full_mass();
    const Eigen::VectorXd b = e.full_coriolis() * qd + e.full_gravity();
    const Eigen::MatrixXd Dinv = D.inverse();
    const Eigen::MatrixXd Dinv_AA = Dinv.topLeftCorner(n_A, n_A);
    const Eigen::VectorXd tau_A =
        Dinv_AA.ldlt().solve(u + (Dinv * b).head(n_A));
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(model.n());
    tau.head(n_A) = tau_A;
    const Eigen::VectorXd qdd_full = Dinv * (tau - b);

    CHECK((qdd_full.head(n_A) - u).lpNorm<Eigen::Infinity>() < 1e-8);

    const Eigen::VectorXd acc = passive_accel(model, q, qd, u);
    const double rel = (acc - qdd_full.tail(n_P)).norm() /
                       std::max(1.0, qdd_full.tail(n_P).norm());
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inverse dynamics closes the energy balance") {
  const CraneModel model = desk_crane().model;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd qv = random_q(model);
    const Eigen::VectorXd qd = random_vector(model.n(), -0.4, 0.4);
    const Eigen::VectorXd u = random_vector(model.n_actuated(), -0.5, 0.5);
    const Configuration q = split(model, qv);

    Eigen::VectorXd qdd(model.n());
    qdd << u, passive_accel(model, q, qd, u);
    const Eigen::VectorXd tau = inverse_dynamics(model, qv, qd, qdd);

    // Passive rows of the generalized force must vanish.
    CHECK(tau.tail(model.n_passive()).lpNorm<Eigen::Infinity>() < 1e-8);

    // dE/dt = qd_A . tau_A, probed with a central difference in time.
    const double h = 1e-5;
    auto energy_at = [&](double dt) {
      const Eigen::VectorXd qn = qv + dt * qd + 0.5 * dt * dt * qdd;
      const Eigen::VectorXd qdn = qd + dt * qdd;
      return kinetic_energy(model, qn, qdn) + potential_energy(model, qn);
    };
    const double de = (energy_at(h) - energy_at(-h)) / (2.0 * h);
    const double power = qd.head(model.n_actuated()).dot(tau.head(model.n_actuated()));
    CHECK(de == doctest::Approx(power).epsilon(1e-5));
  }
}

TEST_CASE("Ddot - 2C is skew symmetric") {
  const CraneModel model = desk_crane().model;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd qv = random_q(model);
    const Eigen::VectorXd qd = random_vector(model.n(), -0.5, 0.5);
    const auto e = dynamics_blocks(model, split(model, qv), qd);

    const double h = 1e-6;
    const auto ep = dynamics_blocks(model, split(model, qv + h * qd), qd);
    const auto em = dynamics_blocks(model, split(model, qv - h * qd), qd);
    const Eigen::MatrixXd Ddot = (ep.full_mass() - em.full_mass()) / (2.0 * h);

    const Eigen::MatrixXd N = Ddot - 2.0 * e.full_coriolis();
    const double scale = std::max(1.0, e.full_mass().norm());
    CHECK((N + N.transpose()).cwiseAbs().maxCoeff() / scale < 1e-6);
  }
}

TEST_CASE("energy is conserved in a zero-input zero-gravity rollout") {
  CraneModelParams p = desk_crane().model.params();
  p.gravity = Vec3::Zero();
  const CraneModel model(std::move(p));

  Eigen::VectorXd qv = random_q(model);
  Eigen::VectorXd qd = random_vector(model.n(), -0.3, 0.3);

  auto accel = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
    const auto e = dynamics_blocks(model, split(model, q), v);
    return (-e.full_mass().ldlt().solve(e.full_coriolis() * v)).eval();
  };

  const double e0 = kinetic_energy(model, qv, qd);
  const double h = 1e-3;
  for (int step = 0; step < 2000; ++step) {
    // RK4 on (q, qd).
    const Eigen::VectorXd k1q = qd, k1v = accel(qv, qd);
    const Eigen::VectorXd k2q = qd + 0.5 * h * k1v,
                          k2v = accel(qv + 0.5 * h * k1q, qd + 0.5 * h * k1v);
    const Eigen::VectorXd k3q = qd + 0.5 * h * k2v,
                          k3v = accel(qv + 0.5 * h * k2q, qd + 0.5 * h * k2v);
    const Eigen::VectorXd k4q = qd + h * k3v,
                          k4v = accel(qv + h * k3q, qd + h * k3v);
    qv += (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q);
    qd += (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  const double e1 = kinetic_energy(model, qv, qd);
  CHECK(std::abs(e1 - e0) / std::max(1.0, std::abs(e0)) < 1e-6);
}

TEST_CASE("equilibrium of the passive joints") {
  const CraneModel model = desk_crane().model;
  const int n_A = model.n_actuated();

  SUBCASE("residual, limits, and independent potential gradient") {
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd q_A = random_q(model).head(n_A);
      const Eigen::VectorXd q_P = equilibrium(model, q_A);

      Eigen::VectorXd qv(model.n());
      qv << q_A, q_P;
      CHECK(passive_gravity(model, qv).lpNorm<Eigen::Infinity>() <= 1e-10);

      // Finite-difference check against the raw potential.
      auto v_of = [&](const Eigen::VectorXd& qp) {
        Eigen::VectorXd q(model.n());
        q << q_A, qp;
        return potential_energy(model, q);
      };
      const Eigen::VectorXd g = fd_gradient(v_of, q_P, 1e-4);
      CHECK(g.lpNorm<Eigen::Infinity>() < 1e-4);
    }
  }

  SUBCASE("grapple hangs straight below the swing pivot") {
    Eigen::VectorXd q_A(5);
    q_A << 0.4, -0.3, -0.9, 0.5, 1.1;
    const Eigen::VectorXd q_P = equilibrium(model, q_A);
    Eigen::VectorXd qv(model.n());
    qv << q_A, q_P;

    const auto poses = frame_poses(model, qv);
    const Vec3 pivot = poses[4].translation();  // swing pitch origin
    double mass = 0.0;
    Vec3 weighted = Vec3::Zero();
    for (int b = 4; b < model.n(); ++b) {
      const double m = model.bodies()[b].mass;
      weighted += m * (poses[b] * model.bodies()[b].com);
      mass += m;
    }
    const Vec3 com = weighted / mass;
    CHECK(std::abs(com.x() - pivot.x()) < 1e-8);
    CHECK(std::abs(com.y() - pivot.y()) < 1e-8);
    CHECK(com.z() < pivot.z());
  }

  SUBCASE("invariant under slewing") {
    Eigen::VectorXd q_A(5);
    q_A << 0.0, 0.2, -1.1, 0.7, -0.4;
    const Eigen::VectorXd ref = equilibrium(model, q_A);
    for (double q1 : {-2.5, -1.0, 0.7, 2.9}) {
      Eigen::VectorXd qa = q_A;
      qa[0] = q1;
      CHECK((equilibrium(model, qa) - ref).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }

  SUBCASE("perturbed warm starts find the hanging branch") {
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd q_A = random_q(model).head(n_A);
      const Eigen::VectorXd ref = equilibrium(model, q_A);
      Eigen::VectorXd guess = ref + random_vector(model.n_passive(), -0.5, 0.5);
      const Eigen::VectorXd again = equilibrium(model, q_A, guess);
      CHECK((again - ref).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("cylinder kinematics") {
  const CraneModel model = desk_crane().model;
  const int n_A = model.n_actuated();

  SUBCASE("zero joint velocity gives zero cylinder velocity") {
    const auto [st, ddot] = cylinder_state(model, random_q(model).head(n_A),
                                           Eigen::VectorXd::Zero(n_A));
    CHECK(ddot.norm() == 0.0);
  }

  SUBCASE("telescope drive is scaled by the coupling ratio") {
    Eigen::VectorXd q_A = random_q(model).head(n_A);
    Eigen::VectorXd qd = Eigen::VectorXd::Zero(n_A);
    qd[3] = 0.22;
    const auto [st, ddot] = cylinder_state(model, q_A, qd);
    CHECK(ddot[3] ==
          doctest::Approx(0.22 / model.telescope_ratio()).epsilon(1e-12));
  }

  SUBCASE("Jacobian matches finite differences") {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd q_A = random_q(model).head(n_A);
      const auto [st, ddot] =
          cylinder_state(model, q_A, Eigen::VectorXd::Zero(n_A));
      auto disp = [&](const Eigen::VectorXd& q) {
        return cylinder_state(model, q, Eigen::VectorXd::Zero(n_A)).first.d;
      };
      const Eigen::MatrixXd J_fd = fd_jacobian(disp, q_A);
      const double rel = (st.J_C - J_fd).cwiseAbs().maxCoeff() /
                         std::max(1.0, J_fd.cwiseAbs().maxCoeff());
      CHECK(rel < 1e-6);
    }
  }
}

TEST_CASE("pump flow") {
  SUBCASE("direct evaluation and sign dependence") {
    const CraneModel m = single_cylinder_model(0.01, 0.004);
    CHECK(pump_flow(m, Eigen::VectorXd::Zero(1)) == 0.0);
    CHECK(pump_flow(m, Eigen::VectorXd::Constant(1, 0.1)) ==
          doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(pump_flow(m, Eigen::VectorXd::Constant(1, -0.1)) ==
          doctest::Approx(4e-4).epsilon(1e-14));
  }

  SUBCASE("positive homogeneity and positivity") {
    const CraneModel model = desk_crane().model;
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd dd = random_vector(model.n_actuated(), -0.5, 0.5);
      const double alpha = uniform(0.01, 10.0);
      const double q1 = pump_flow(model, dd);
      CHECK(pump_flow(model, alpha * dd) == doctest::Approx(alpha * q1).epsilon(1e-12));
      if (dd.norm() > 0) CHECK(q1 > 0.0);
    }
    CHECK(pump_flow(model, Eigen::VectorXd::Zero(model.n_actuated())) == 0.0);
  }
}

TEST_CASE("payload merge shifts the jaw mass parameters") {
  const CraneModel model = desk_crane().model;
  PayloadParams log;
  log.mass = 480.0;
  log.com = Vec3(0, 0, -0.75);
  log.inertia = Vec3(7.8, 522.0, 522.0).asDiagonal();
  const CraneModel loaded = model.with_payload(log);

  const BodyDesc& jaw = loaded.bodies()[loaded.jaw_joint()];
  CHECK(jaw.mass == doctest::Approx(210.0 + 480.0));
  // Combined COM stays on the pendant axis.
  CHECK(std::abs(jaw.com.x()) < 1e-12);
  CHECK(std::abs(jaw.com.y()) < 1e-12);
  CHECK(jaw.com.z() < -0.45);

  // Passive block gets heavier.
  const Eigen::VectorXd qv = random_q(model);
  const auto e0 = dynamics_blocks(model, split(model, qv), Eigen::VectorXd::Zero(7));
  const auto e1 = dynamics_blocks(loaded, split(loaded, qv), Eigen::VectorXd::Zero(7));
  CHECK(e1.D_P(0, 0) > e0.D_P(0, 0));
}

TEST_CASE("model JSON round trip preserves the dynamics") {
  const ModelBundle bundle = desk_crane();
  const std::string path = "desk_crane_roundtrip.json";
  save_model(bundle, path);
  const ModelBundle loaded = load_model(path);

  CHECK(loaded.model.n() == bundle.model.n());
  CHECK(loaded.links.size() == bundle.links.size());

  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd qv = random_q(bundle.model);
    const Eigen::VectorXd qd = random_vector(7, -0.5, 0.5);
    const auto a = dynamics_blocks(bundle.model, split(bundle.model, qv), qd);
    const auto b = dynamics_blocks(loaded.model, split(loaded.model, qv), qd);
    CHECK((a.full_mass() - b.full_mass()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.full_gravity() - b.full_gravity()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("construction rejects inconsistent parameters") {
  CraneModelParams p = desk_crane().model.params();
  p.limits.q_min[2] = p.limits.q_max[2] + 1.0;
  CHECK_THROWS_AS(CraneModel{p}, std::invalid_argument);

  CraneModelParams p2 = desk_crane().model.params();
  p2.cylinders.pop_back();
  CHECK_THROWS_AS(CraneModel{p2}, std::invalid_argument);

  const CraneModel model = desk_crane().model;
  CHECK_THROWS_AS(
      dynamics_blocks(model,
                      Configuration{Eigen::VectorXd::Zero(3),
                                    Eigen::VectorXd::Zero(2)},
                      Eigen::VectorXd::Zero(7)),
      std::invalid_argument);
}
