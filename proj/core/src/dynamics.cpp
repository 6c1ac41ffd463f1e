#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

#include "craneplan/crane_model.hpp"

namespace craneplan {

namespace {

// Forward-kinematics cache, chain order. z is the world motion axis (taken
// before the joint's own motion), o the world joint origin.
struct FrameCache {
  std::vector<Mat3> R;      // post-motion orientation
  std::vector<Vec3> p;      // post-motion origin
  std::vector<Vec3> z;      // motion axis, world
  std::vector<Vec3> o;      // origin point, world
  std::vector<Mat3> R_body;
  std::vector<Vec3> p_com;  // body COM, world
};

FrameCache fk(const CraneModel& model, const Eigen::VectorXd& q) {
  const auto& joints = model.joints();
  const auto& bodies = model.bodies();
  const int n = model.n();
  if (q.size() != n) throw std::invalid_argument("fk: q dimension mismatch");

  FrameCache c;
  c.R.resize(n);
  c.p.resize(n);
  c.z.resize(n);
  c.o.resize(n);
  c.R_body.resize(n);
  c.p_com.resize(n);

  Mat3 R_par = Mat3::Identity();
  Vec3 p_par = Vec3::Zero();
  for (int j = 0; j < n; ++j) {
    const JointDesc& jd = joints[j];
    const Mat3 R_org = R_par * jd.origin.linear();
    const Vec3 p_org = p_par + R_par * jd.origin.translation();
    const double th = jd.motion_scale * q[jd.coord];

    c.z[j] = R_org * jd.axis;
    c.o[j] = p_org;
    if (jd.type == JointType::Revolute) {
      c.R[j] = R_org * Eigen::AngleAxisd(th, jd.axis).toRotationMatrix();
      c.p[j] = p_org;
    } else {
      c.R[j] = R_org;
      c.p[j] = p_org + c.z[j] * th;
    }
    c.R_body[j] = c.R[j];
    c.p_com[j] = c.p[j] + c.R[j] * bodies[j].com;

    R_par = c.R[j];
    p_par = c.p[j];
  }
  return c;
}

// Geometric Jacobian columns of a point attached to body b (world point pt),
// written into the coordinate-indexed matrices.
void body_jacobian(const CraneModel& model, const FrameCache& c, int b,
                   const Vec3& pt, Eigen::Matrix<double, 3, Eigen::Dynamic>& Jv,
                   Eigen::Matrix<double, 3, Eigen::Dynamic>& Jw) {
  const auto& joints = model.joints();
  Jv.setZero(3, model.n());
  Jw.setZero(3, model.n());
  for (int a = 0; a <= b; ++a) {
    const JointDesc& jd = joints[a];
    const int col = jd.coord;
    if (jd.type == JointType::Revolute) {
      Jv.col(col) = jd.motion_scale * c.z[a].cross(pt - c.o[a]);
      Jw.col(col) = jd.motion_scale * c.z[a];
    } else {
      Jv.col(col) = jd.motion_scale * c.z[a];
    }
  }
}

Eigen::MatrixXd mass_matrix(const CraneModel& model, const FrameCache& c) {
  const int n = model.n();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  Eigen::Matrix<double, 3, Eigen::Dynamic> Jv(3, n), Jw(3, n);
  for (int b = 0; b < n; ++b) {
    const BodyDesc& body = model.bodies()[b];
    if (body.mass == 0.0 && body.inertia.isZero(0.0)) continue;
    body_jacobian(model, c, b, c.p_com[b], Jv, Jw);
    const Mat3 Iw = c.R_body[b] * body.inertia * c.R_body[b].transpose();
    D.noalias() += body.mass * Jv.transpose() * Jv;
    D.noalias() += Jw.transpose() * Iw * Jw;
  }
  return D;
}

Eigen::VectorXd gravity_vector(const CraneModel& model, const FrameCache& c) {
  const int n = model.n();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  const Vec3 grav = model.gravity();
  const auto& joints = model.joints();
  // g = dV/dq with V = -sum_b m_b grav . p_com_b
  for (int b = 0; b < n; ++b) {
    const double m = model.bodies()[b].mass;
    if (m == 0.0) continue;
    for (int a = 0; a <= b; ++a) {
      const JointDesc& jd = joints[a];
      Vec3 dp;
      if (jd.type == JointType::Revolute)
        dp = jd.motion_scale * c.z[a].cross(c.p_com[b] - c.o[a]);
      else
        dp = jd.motion_scale * c.z[a];
      g[jd.coord] -= m * grav.dot(dp);
    }
  }
  return g;
}

// Recursive Newton-Euler over the chain; returns generalized forces for
// given (q, qdot, qddot). Gravity is folded in through the base acceleration.
Eigen::VectorXd rnea(const CraneModel& model, const FrameCache& c,
                     const Eigen::VectorXd& qdot, const Eigen::VectorXd& qddot,
                     bool with_gravity) {
  const auto& joints = model.joints();
  const auto& bodies = model.bodies();
  const int n = model.n();

  std::vector<Vec3> w(n), wd(n), a(n);  // angular vel/acc, origin linear acc
  Vec3 w_par = Vec3::Zero();
  Vec3 wd_par = Vec3::Zero();
  Vec3 a_par = with_gravity ? Vec3(-model.gravity()) : Vec3::Zero();
  Vec3 p_par = Vec3::Zero();

  for (int j = 0; j < n; ++j) {
    const JointDesc& jd = joints[j];
    const double thd = jd.motion_scale * qdot[jd.coord];
    const double thdd = jd.motion_scale * qddot[jd.coord];
    const Vec3 r = c.p[j] - p_par;
    const Vec3 a_transport =
        a_par + wd_par.cross(r) + w_par.cross(w_par.cross(r));
    if (jd.type == JointType::Revolute) {
      w[j] = w_par + c.z[j] * thd;
      wd[j] = wd_par + c.z[j] * thdd + w_par.cross(c.z[j] * thd);
      a[j] = a_transport;
    } else {
      w[j] = w_par;
      wd[j] = wd_par;
      a[j] = a_transport + c.z[j] * thdd + 2.0 * w_par.cross(c.z[j] * thd);
    }
    w_par = w[j];
    wd_par = wd[j];
    a_par = a[j];
    p_par = c.p[j];
  }

  Eigen::VectorXd tau = Eigen::VectorXd::Zero(n);
  Vec3 f_child = Vec3::Zero();
  Vec3 n_child = Vec3::Zero();
  Vec3 p_child = Vec3::Zero();
  for (int j = n - 1; j >= 0; --j) {
    const BodyDesc& body = bodies[j];
    const Vec3 rc = c.p_com[j] - c.p[j];
    const Vec3 a_com = a[j] + wd[j].cross(rc) + w[j].cross(w[j].cross(rc));
    const Mat3 Iw = c.R_body[j] * body.inertia * c.R_body[j].transpose();
    const Vec3 F = body.mass * a_com;
    const Vec3 N = Iw * wd[j] + w[j].cross(Iw * w[j]);

    Vec3 f = F;
    Vec3 nm = N + rc.cross(F);
    if (j + 1 < n) {
      f += f_child;
      nm += n_child + (p_child - c.p[j]).cross(f_child);
    }

    const JointDesc& jd = joints[j];
    const double t =
        (jd.type == JointType::Revolute) ? c.z[j].dot(nm) : c.z[j].dot(f);
    tau[jd.coord] = jd.motion_scale * t;

    f_child = f;
    n_child = nm;
    p_child = c.p[j];
  }
  return tau;
}

// Christoffel-consistent Coriolis matrix via polarization of the quadratic
// velocity bias: C(q, v) e_j = (b(v + e_j) - b(v) - b(e_j)) / 2.
Eigen::MatrixXd coriolis_matrix(const CraneModel& model, const FrameCache& c,
                                const Eigen::VectorXd& qdot) {
  const int n = model.n();
  Eigen::MatrixXd C(n, n);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd b_v = rnea(model, c, qdot, zero, false);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd ej = Eigen::VectorXd::Zero(n);
    ej[j] = 1.0;
    const Eigen::VectorXd b_sum = rnea(model, c, qdot + ej, zero, false);
    const Eigen::VectorXd b_ej = rnea(model, c, ej, zero, false);
    C.col(j) = 0.5 * (b_sum - b_v - b_ej);
  }
  return C;
}

}  // namespace

std::vector<Eigen::Isometry3d> frame_poses(const CraneModel& model,
                                           const Eigen::VectorXd& q_full) {
  const FrameCache c = fk(model, q_full);
  std::vector<Eigen::Isometry3d> out(model.n());
  for (int j = 0; j < model.n(); ++j) {
    out[j].setIdentity();
    out[j].linear() = c.R[j];
    out[j].translation() = c.p[j];
  }
  return out;
}

DynamicsEval dynamics_blocks(const CraneModel& model, const Configuration& q,
                             const Eigen::VectorXd& qdot) {
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  const int n = model.n();
  if (q.q_A.size() != n_A || q.q_P.size() != n_P || qdot.size() != n)
    throw std::invalid_argument("dynamics_blocks: dimension mismatch");

  const FrameCache c = fk(model, q.full());
  const Eigen::MatrixXd D = mass_matrix(model, c);
  const Eigen::MatrixXd C = coriolis_matrix(model, c, qdot);
  const Eigen::VectorXd g = gravity_vector(model, c);

  DynamicsEval e;
  e.D_A = D.topLeftCorner(n_A, n_A);
  e.D_M = D.bottomLeftCorner(n_P, n_A);
  e.D_P = D.bottomRightCorner(n_P, n_P);
  e.C_A = C.topRows(n_A);
  e.C_P = C.bottomRows(n_P);
  e.g_A = g.head(n_A);
  e.g_P = g.tail(n_P);
  return e;
}

Eigen::VectorXd passive_accel(const CraneModel& model, const Configuration& q,
                              const Eigen::VectorXd& qdot,
                              const Eigen::VectorXd& u) {
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  const int n = model.n();
  if (q.q_A.size() != n_A || q.q_P.size() != n_P || qdot.size() != n ||
      u.size() != n_A)
    throw std::invalid_argument("passive_accel: dimension mismatch");

  const FrameCache c = fk(model, q.full());
  const Eigen::MatrixXd D = mass_matrix(model, c);
  // Coriolis + gravity bias of the passive rows in one recursive pass.
  const Eigen::VectorXd bias =
      rnea(model, c, qdot, Eigen::VectorXd::Zero(n), true);

  const Eigen::MatrixXd D_M = D.bottomLeftCorner(n_P, n_A);
  const Eigen::MatrixXd D_P = D.bottomRightCorner(n_P, n_P);
  const Eigen::VectorXd rhs = D_M * u + bias.tail(n_P);

  Eigen::LLT<Eigen::MatrixXd> llt(D_P);
  if (llt.info() != Eigen::Success) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D_P);
    const double cond = svd.singularValues()(0) /
                        svd.singularValues()(svd.singularValues().size() - 1);
    throw SolverError("passive_accel: singular passive mass block, cond=" +
                          std::to_string(cond),
                      cond);
  }
  return -llt.solve(rhs);
}

Eigen::VectorXd passive_gravity(const CraneModel& model,
                                const Eigen::VectorXd& q_full) {
  const FrameCache c = fk(model, q_full);
  return gravity_vector(model, c).tail(model.n_passive());
}

double potential_energy(const CraneModel& model,
                        const Eigen::VectorXd& q_full) {
  const FrameCache c = fk(model, q_full);
  double v = 0.0;
  for (int b = 0; b < model.n(); ++b)
    v -= model.bodies()[b].mass * model.gravity().dot(c.p_com[b]);
  return v;
}

double kinetic_energy(const CraneModel& model, const Eigen::VectorXd& q_full,
                      const Eigen::VectorXd& qdot) {
  const FrameCache c = fk(model, q_full);
  const Eigen::MatrixXd D = mass_matrix(model, c);
  return 0.5 * qdot.dot(D * qdot);
}

Eigen::VectorXd inverse_dynamics(const CraneModel& model,
                                 const Eigen::VectorXd& q_full,
                                 const Eigen::VectorXd& qdot,
                                 const Eigen::VectorXd& qddot,
                                 bool with_gravity) {
  const FrameCache c = fk(model, q_full);
  return rnea(model, c, qdot, qddot, with_gravity);
}

Eigen::VectorXd equilibrium(const CraneModel& model, const Eigen::VectorXd& q_A,
                            const std::optional<Eigen::VectorXd>& guess) {
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  if (q_A.size() != n_A)
    throw std::invalid_argument("equilibrium: q_A dimension mismatch");

  Eigen::VectorXd q(model.n());
  q.head(n_A) = q_A;

  auto set_passive = [&](const Eigen::VectorXd& qp) { q.tail(n_P) = qp; };
  auto potential = [&](const Eigen::VectorXd& qp) {
    set_passive(qp);
    return potential_energy(model, q);
  };
  auto residual = [&](const Eigen::VectorXd& qp) {
    set_passive(qp);
    return passive_gravity(model, q);
  };

  Eigen::VectorXd qp;
  if (guess) {
    if (guess->size() != n_P)
      throw std::invalid_argument("equilibrium: guess dimension mismatch");
    qp = *guess;
  } else {
    // Coordinate sweeps with the exact 1-D minimizer. For a revolute passive
    // joint the potential restricted to that angle is A + B cos + C sin.
    qp = Eigen::VectorXd::Zero(n_P);
    for (int sweep = 0; sweep < 3; ++sweep) {
      for (int i = 0; i < n_P; ++i) {
        Eigen::VectorXd qa = qp, qb = qp, qc = qp;
        qa[i] = 0.0;
        qb[i] = M_PI / 2.0;
        qc[i] = M_PI;
        const double v0 = potential(qa);
        const double v1 = potential(qb);
        const double v2 = potential(qc);
        const double A = 0.5 * (v0 + v2);
        const double B = 0.5 * (v0 - v2);
        const double C = v1 - A;
        if (std::abs(B) + std::abs(C) > 1e-12)
          qp[i] = std::atan2(-C, -B);
      }
    }
  }

  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 100;
  const double fd_step = 1e-6;

  Eigen::VectorXd g = residual(qp);
  for (int it = 0; it < kMaxIter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= kTol) {
      const auto& lim = model.limits();
      for (int i = 0; i < n_P; ++i) {
        const int ci = n_A + i;
        if (qp[i] < lim.q_min[ci] - 1e-9 || qp[i] > lim.q_max[ci] + 1e-9)
          throw SolverError("equilibrium outside passive joint limits",
                            g.lpNorm<Eigen::Infinity>());
      }
      return qp;
    }

    // FD Jacobian of g_P wrt q_P (= Hessian of the potential).
    Eigen::MatrixXd H(n_P, n_P);
    for (int i = 0; i < n_P; ++i) {
      Eigen::VectorXd qpp = qp, qpm = qp;
      qpp[i] += fd_step;
      qpm[i] -= fd_step;
      H.col(i) = (residual(qpp) - residual(qpm)) / (2.0 * fd_step);
    }
    H = 0.5 * (H + H.transpose()).eval();

    // Shift to positive definite so the step descends the potential.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (lmin < 1e-8 * std::max(lmax, 1.0))
      H += (1e-8 * std::max(lmax, 1.0) - lmin) * Eigen::MatrixXd::Identity(n_P, n_P);

    const Eigen::VectorXd step = -H.ldlt().solve(g);
    const double v0 = potential(qp);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd cand = qp + alpha * step;
      const Eigen::VectorXd g_cand = residual(cand);
      if (potential(cand) < v0 ||
          g_cand.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
        qp = cand;
        g = g_cand;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw SolverError("equilibrium: line search failed",
                        g.lpNorm<Eigen::Infinity>());
  }
  throw SolverError("equilibrium: no convergence",
                    g.lpNorm<Eigen::Infinity>());
}

}  // namespace craneplan
