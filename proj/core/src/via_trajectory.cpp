#include "craneplan/via_trajectory.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace craneplan {

PathSpline PathSpline::fit(const ViaPoints& vias) {
  const int n_via = vias.n_via();
  const int nj = vias.n_joints();
  if (n_via < 1) throw std::invalid_argument("spline needs at least one via-point");
  if (vias.q_goal.size() != nj)
    throw std::invalid_argument("boundary dimension mismatch");

  const int m = n_via + 2;
  PathSpline sp;
  sp.h_ = 1.0 / (m - 1);
  sp.knots_.resize(m, nj);
  sp.knots_.row(0) = vias.q_start.transpose();
  for (int i = 0; i < n_via; ++i)
    sp.knots_.row(i + 1) = vias.via(i).transpose();
  sp.knots_.row(m - 1) = vias.q_goal.transpose();

  // Clamped cubic spline: solve the tridiagonal system for the knot second
  // derivatives with zero end slopes.
  const double h = sp.h_;
  Eigen::VectorXd a(m), b(m), c(m);  // sub, diag, super
  Eigen::MatrixXd rhs(m, nj);
  b[0] = 2.0 * h;
  c[0] = h;
  a[0] = 0.0;
  rhs.row(0) = 6.0 * (sp.knots_.row(1) - sp.knots_.row(0)) / h;
  for (int i = 1; i < m - 1; ++i) {
    a[i] = h;
    b[i] = 4.0 * h;
    c[i] = h;
    rhs.row(i) = 6.0 *
                 (sp.knots_.row(i + 1) - 2.0 * sp.knots_.row(i) +
                  sp.knots_.row(i - 1)) /
                 h;
  }
  a[m - 1] = h;
  b[m - 1] = 2.0 * h;
  c[m - 1] = 0.0;
  rhs.row(m - 1) = -6.0 * (sp.knots_.row(m - 1) - sp.knots_.row(m - 2)) / h;

  // Thomas algorithm.
  for (int i = 1; i < m; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    rhs.row(i) -= w * rhs.row(i - 1);
  }
  sp.second_.resize(m, nj);
  sp.second_.row(m - 1) = rhs.row(m - 1) / b[m - 1];
  for (int i = m - 2; i >= 0; --i)
    sp.second_.row(i) = (rhs.row(i) - c[i] * sp.second_.row(i + 1)) / b[i];

  return sp;
}

PathSpline build_spline(const ViaPoints& vias) { return PathSpline::fit(vias); }

void PathSpline::eval(double s, Eigen::VectorXd& q, Eigen::VectorXd& dq,
                      Eigen::VectorXd& ddq) const {
  const int m = n_knots();
  const int nj = n_joints();
  int i = static_cast<int>(std::floor(s / h_));
  i = std::clamp(i, 0, m - 2);
  const double s0 = i * h_;
  const double A = (s0 + h_ - s) / h_;
  const double B = (s - s0) / h_;

  q.resize(nj);
  dq.resize(nj);
  ddq.resize(nj);
  for (int j = 0; j < nj; ++j) {
    const double y0 = knots_(i, j), y1 = knots_(i + 1, j);
    const double m0 = second_(i, j), m1 = second_(i + 1, j);
    q[j] = A * y0 + B * y1 +
           ((A * A * A - A) * m0 + (B * B * B - B) * m1) * h_ * h_ / 6.0;
    dq[j] = (y1 - y0) / h_ +
            (-(3.0 * A * A - 1.0) * m0 + (3.0 * B * B - 1.0) * m1) * h_ / 6.0;
    ddq[j] = A * m0 + B * m1;
  }
}

Eigen::VectorXd PathSpline::position(double s) const {
  Eigen::VectorXd q, dq, ddq;
  eval(s, q, dq, ddq);
  return q;
}

PathGrid eval_grid(const PathSpline& path, int n_eval) {
  if (n_eval < 2) throw std::invalid_argument("eval_grid: n_eval must be >= 2");
  const int nj = path.n_joints();
  PathGrid g;
  g.s.resize(n_eval);
  g.q.resize(n_eval, nj);
  g.dq.resize(n_eval, nj);
  g.ddq.resize(n_eval, nj);
  Eigen::VectorXd q, dq, ddq;
  for (int k = 0; k < n_eval; ++k) {
    const double s = static_cast<double>(k) / (n_eval - 1);
    g.s[k] = s;
    path.eval(s, q, dq, ddq);
    g.q.row(k) = q.transpose();
    g.dq.row(k) = dq.transpose();
    g.ddq.row(k) = ddq.transpose();
  }
  return g;
}

double flow_profile(const CraneModel& model, const Eigen::VectorXd& q_A,
                    const Eigen::VectorXd& dq_ds) {
  double flow = 0.0;
  for (int l = 0; l < model.n_actuated(); ++l) {
    const auto& cyl = model.cylinders()[l];
    const double dd = cyl.derivative(q_A[l]) * dq_ds[l];
    flow += (dd >= 0.0 ? cyl.area_pos : cyl.area_neg) * std::abs(dd);
  }
  return flow;
}

double flow_profile(const CraneModel& model, const PathSpline& path, double s) {
  Eigen::VectorXd q, dq, ddq;
  path.eval(s, q, dq, ddq);
  return flow_profile(model, q, dq);
}

MinDuration min_duration(const CraneModel& model, const PathSpline& path,
                         int n_eval, double duration_floor) {
  const auto& lim = model.limits();
  const PathGrid g = eval_grid(path, n_eval);

  MinDuration r;
  r.active.assign(n_eval, ConstraintFamily::None);
  for (int k = 0; k < n_eval; ++k) {
    double t_vel = 0.0, t_acc = 0.0;
    for (int j = 0; j < model.n_actuated(); ++j) {
      t_vel = std::max(t_vel, std::abs(g.dq(k, j)) / lim.qd_max[j]);
      t_acc = std::max(t_acc, std::sqrt(std::abs(g.ddq(k, j)) / lim.u_max[j]));
    }
    const double t_flow =
        flow_profile(model, g.q.row(k).transpose(), g.dq.row(k).transpose()) /
        lim.flow_max;

    r.T_velocity = std::max(r.T_velocity, t_vel);
    r.T_acceleration = std::max(r.T_acceleration, t_acc);
    r.T_flow = std::max(r.T_flow, t_flow);

    const double tk = std::max({t_vel, t_acc, t_flow});
    if (tk > 0.0) {
      if (tk == t_vel)
        r.active[k] = ConstraintFamily::Velocity;
      else if (tk == t_acc)
        r.active[k] = ConstraintFamily::Acceleration;
      else
        r.active[k] = ConstraintFamily::PumpFlow;
    }
  }
  r.T = std::max({r.T_velocity, r.T_acceleration, r.T_flow, duration_floor});
  return r;
}

void TimedTrajectory::sample(double t, Eigen::VectorXd& q_A,
                             Eigen::VectorXd& qd_A,
                             Eigen::VectorXd& qdd_A) const {
  const double s = std::clamp(t / duration, 0.0, 1.0);
  path.eval(s, q_A, qd_A, qdd_A);
  const bool inside = t >= 0.0 && t <= duration;
  qd_A = inside ? (qd_A / duration).eval()
                : Eigen::VectorXd::Zero(q_A.size()).eval();
  qdd_A = inside ? (qdd_A / (duration * duration)).eval()
                 : Eigen::VectorXd::Zero(q_A.size()).eval();
}

void export_trajectory_csv(const CraneModel& model, const TimedTrajectory& traj,
                           const std::string& path, double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory csv: " + path);
  const int nj = traj.path.n_joints();
  out << "t";
  for (int j = 0; j < nj; ++j) out << ",q" << j + 1;
  for (int j = 0; j < nj; ++j) out << ",qd" << j + 1;
  for (int j = 0; j < nj; ++j) out << ",qdd" << j + 1;
  out << ",Q\n";
  out << std::setprecision(17);

  Eigen::VectorXd q, qd, qdd;
  const int steps = static_cast<int>(std::ceil(traj.duration / dt));
  for (int k = 0; k <= steps; ++k) {
    const double t = std::min(k * dt, traj.duration);
    traj.sample(t, q, qd, qdd);
    const auto [cyl, ddot] = cylinder_state(model, q, qd);
    out << t;
    for (int j = 0; j < nj; ++j) out << "," << q[j];
    for (int j = 0; j < nj; ++j) out << "," << qd[j];
    for (int j = 0; j < nj; ++j) out << "," << qdd[j];
    out << "," << pump_flow(model, ddot) << "\n";
  }
}

ViaPoints straight_line_vias(const Eigen::VectorXd& q_start,
                             const Eigen::VectorXd& q_goal, int n_via) {
  ViaPoints v;
  v.q_start = q_start;
  v.q_goal = q_goal;
  v.xi.resize(static_cast<Eigen::Index>(n_via) * q_start.size());
  for (int i = 0; i < n_via; ++i) {
    const double f = static_cast<double>(i + 1) / (n_via + 1);
    v.xi.segment(static_cast<Eigen::Index>(i) * q_start.size(), q_start.size()) =
        q_start + f * (q_goal - q_start);
  }
  return v;
}

}  // namespace craneplan
