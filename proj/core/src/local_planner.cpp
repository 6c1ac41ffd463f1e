#include "craneplan/local_planner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace craneplan {

namespace {

Eigen::VectorXd state_derivative(const CraneModel& model,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u) {
  const int n = model.n();
  const int n_A = model.n_actuated();
  Configuration q{x.head(n_A), x.segment(n_A, model.n_passive())};
  const Eigen::VectorXd qdot = x.tail(n);
  const Eigen::VectorXd qdd_P = passive_accel(model, q, qdot, u);
  Eigen::VectorXd dx(2 * n);
  dx.head(n) = qdot;
  dx.segment(n, n_A) = u;
  dx.tail(model.n_passive()) = qdd_P;
  return dx;
}

}  // namespace

Eigen::VectorXd discrete_step(const CraneModel& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, double T_s) {
  const Eigen::VectorXd k1 = state_derivative(model, x, u);
  const Eigen::VectorXd k2 = state_derivative(model, x + 0.5 * T_s * k1, u);
  const Eigen::VectorXd k3 = state_derivative(model, x + 0.5 * T_s * k2, u);
  const Eigen::VectorXd k4 = state_derivative(model, x + T_s * k3, u);
  return x + (T_s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& q_A_ref,
                  const Eigen::VectorXd& qdd_A_ref,
                  const Eigen::VectorXd& q_P_ref,
                  const Eigen::VectorXd& qd_P_ref, double w1, double w2,
                  double w3, int n_A, int n_P) {
  const int n = n_A + n_P;
  return (x.head(n_A) - q_A_ref).squaredNorm() +
         w1 * (u - qdd_A_ref).squaredNorm() +
         w2 * (x.segment(n_A, n_P) - q_P_ref).squaredNorm() +
         w3 * (x.segment(n + n_A, n_P) - qd_P_ref).squaredNorm();
}

double smoothed_flow(const CraneModel& model, const Eigen::VectorXd& q_A,
                     const Eigen::VectorXd& qd_A, double eps) {
  double flow = 0.0;
  for (int l = 0; l < model.n_actuated(); ++l) {
    const auto& cyl = model.cylinders()[l];
    const double v = cyl.derivative(q_A[l]) * qd_A[l];
    flow += 0.5 * (cyl.area_pos + cyl.area_neg) * std::sqrt(v * v + eps * eps) +
            0.5 * (cyl.area_pos - cyl.area_neg) * v;
  }
  return flow;
}

namespace {

struct ConstraintLayout {
  int n = 0, n_A = 0;
  int n_pairs = 0;
  bool flow = false;
  int total() const {
    return 2 * n + 2 * n_A + (flow ? 1 : 0) + n_pairs;
  }
  int flow_row() const { return 2 * n + 2 * n_A; }
  int sd_row0() const { return 2 * n + 2 * n_A + (flow ? 1 : 0); }
};

IlqrProblem build_ilqr_problem(const OcpProblem& ocp,
                               const ConstraintLayout& lay) {
  const CraneModel& model = *ocp.model;
  const int n = model.n();
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  const int nx = 2 * n;

  IlqrProblem p;
  p.nx = nx;
  p.nu = n_A;
  p.N = ocp.N;

  p.dynamics = [&model, &ocp](int, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u) {
    return discrete_step(model, x, u, ocp.T_s);
  };

  p.dynamics_jacobians = [&model, &ocp, nx, n_A](int, const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& u,
                                                 Eigen::MatrixXd& A,
                                                 Eigen::MatrixXd& B) {
    A.resize(nx, nx);
    B.resize(nx, n_A);
    const double h = 1e-6;
    Eigen::VectorXd xp = x, xm = x;
    for (int i = 0; i < nx; ++i) {
      xp[i] += h;
      xm[i] -= h;
      A.col(i) = (discrete_step(model, xp, u, ocp.T_s) -
                  discrete_step(model, xm, u, ocp.T_s)) /
                 (2.0 * h);
      xp[i] = x[i];
      xm[i] = x[i];
    }
    Eigen::VectorXd up = u, um = u;
    for (int i = 0; i < n_A; ++i) {
      up[i] += h;
      um[i] -= h;
      B.col(i) = (discrete_step(model, x, up, ocp.T_s) -
                  discrete_step(model, x, um, ocp.T_s)) /
                 (2.0 * h);
      up[i] = u[i];
      um[i] = u[i];
    }
  };

  p.stage_cost = [&ocp, n_A, n_P](int k, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) {
    return stage_cost(x, u, ocp.q_A_ref[k], ocp.qdd_A_ref[k], ocp.q_P_ref[k],
                      ocp.qd_P_ref[k], ocp.w1, ocp.w2, ocp.w3, n_A, n_P);
  };

  p.cost_expansion = [&ocp, n, n_A, n_P, nx](int k, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& u,
                                             Eigen::VectorXd& lx,
                                             Eigen::VectorXd& lu,
                                             Eigen::MatrixXd& lxx,
                                             Eigen::MatrixXd& luu,
                                             Eigen::MatrixXd& lux) {
    lx = Eigen::VectorXd::Zero(nx);
    lu = 2.0 * ocp.w1 * (u - ocp.qdd_A_ref[k]);
    lxx = Eigen::MatrixXd::Zero(nx, nx);
    luu = 2.0 * ocp.w1 * Eigen::MatrixXd::Identity(n_A, n_A);
    lux = Eigen::MatrixXd::Zero(n_A, nx);

    lx.head(n_A) = 2.0 * (x.head(n_A) - ocp.q_A_ref[k]);
    lx.segment(n_A, n_P) =
        2.0 * ocp.w2 * (x.segment(n_A, n_P) - ocp.q_P_ref[k]);
    lx.segment(n + n_A, n_P) =
        2.0 * ocp.w3 * (x.segment(n + n_A, n_P) - ocp.qd_P_ref[k]);
    lxx.topLeftCorner(n_A, n_A) = 2.0 * Eigen::MatrixXd::Identity(n_A, n_A);
    lxx.block(n_A, n_A, n_P, n_P) =
        2.0 * ocp.w2 * Eigen::MatrixXd::Identity(n_P, n_P);
    lxx.block(n + n_A, n + n_A, n_P, n_P) =
        2.0 * ocp.w3 * Eigen::MatrixXd::Identity(n_P, n_P);
  };

  p.n_constraints = lay.total();

  p.constraints = [&ocp, lay, n, n_A](int, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u) {
    const CraneModel& m = *ocp.model;
    const auto& lim = m.limits();
    Eigen::VectorXd g(lay.total());
    g.segment(0, n) = x.head(n) - lim.q_max;
    g.segment(n, n) = lim.q_min - x.head(n);
    g.segment(2 * n, n_A) = u - lim.u_max;
    g.segment(2 * n + n_A, n_A) = -u - lim.u_max;
    if (lay.flow) {
      g[lay.flow_row()] =
          smoothed_flow(m, x.head(n_A), x.segment(n, n_A), ocp.flow_smooth_eps) /
              lim.flow_max -
          1.0;
    }
    if (lay.n_pairs > 0) {
      const auto dists = world_signed_distances(*ocp.world, m, x.head(n));
      for (int i = 0; i < lay.n_pairs; ++i)
        g[lay.sd_row0() + i] = ocp.clearance_margin - dists[i].sd;
    }
    return g;
  };

  p.constraint_jacobians = [&ocp, lay, n, n_A, nx](
                               int, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u,
                               const std::vector<char>& mask,
                               Eigen::MatrixXd& Gx, Eigen::MatrixXd& Gu) {
    const CraneModel& m = *ocp.model;
    const auto& lim = m.limits();
    Gx.setZero(lay.total(), nx);
    Gu.setZero(lay.total(), n_A);
    for (int i = 0; i < n; ++i) {
      if (mask[i]) Gx(i, i) = 1.0;
      if (mask[n + i]) Gx(n + i, i) = -1.0;
    }
    for (int i = 0; i < n_A; ++i) {
      if (mask[2 * n + i]) Gu(2 * n + i, i) = 1.0;
      if (mask[2 * n + n_A + i]) Gu(2 * n + n_A + i, i) = -1.0;
    }
    if (lay.flow && mask[lay.flow_row()]) {
      const int r = lay.flow_row();
      const double eps = ocp.flow_smooth_eps;
      for (int l = 0; l < n_A; ++l) {
        const auto& cyl = m.cylinders()[l];
        const double d1 = cyl.derivative(x[l]);
        const double d2 = cyl.second_derivative(x[l]);
        const double qd = x[n + l];
        const double v = d1 * qd;
        const double dQdv =
            0.5 * (cyl.area_pos + cyl.area_neg) * v / std::sqrt(v * v + eps * eps) +
            0.5 * (cyl.area_pos - cyl.area_neg);
        Gx(r, l) = dQdv * d2 * qd / lim.flow_max;
        Gx(r, n + l) = dQdv * d1 / lim.flow_max;
      }
    }
    if (lay.n_pairs > 0) {
      std::vector<int> active;
      for (int i = 0; i < lay.n_pairs; ++i)
        if (mask[lay.sd_row0() + i]) active.push_back(i);
      if (!active.empty()) {
        // Central differences of the active signed distances in q.
        const double h = 1e-5;
        Eigen::VectorXd q = x.head(n);
        for (int i = 0; i < n; ++i) {
          Eigen::VectorXd qp = q, qm = q;
          qp[i] += h;
          qm[i] -= h;
          const auto dp = world_signed_distances(*ocp.world, m, qp);
          const auto dm = world_signed_distances(*ocp.world, m, qm);
          for (int a : active)
            Gx(lay.sd_row0() + a, i) = -(dp[a].sd - dm[a].sd) / (2.0 * h);
        }
      }
    }
    (void)u;
  };

  return p;
}

}  // namespace

OcpSolution solve_ocp(const OcpProblem& ocp, const IlqrOptions& options,
                      const std::vector<Eigen::VectorXd>* U_init,
                      const OcpSolution* warm) {
  if (!ocp.model) throw std::invalid_argument("solve_ocp: missing model");
  if (ocp.N < 2) throw std::invalid_argument("solve_ocp: N must be >= 2");
  if (!ocp.x_init.allFinite())
    throw std::invalid_argument("solve_ocp: non-finite initial state");
  if (static_cast<int>(ocp.q_A_ref.size()) < ocp.N)
    throw std::invalid_argument("solve_ocp: reference shorter than horizon");

  ConstraintLayout lay;
  lay.n = ocp.model->n();
  lay.n_A = ocp.model->n_actuated();
  lay.flow = ocp.constrain_flow;
  if (ocp.constrain_collisions && ocp.world) {
    lay.n_pairs = static_cast<int>(
        world_signed_distances(*ocp.world, *ocp.model, ocp.x_init.head(lay.n))
            .size());
  }

  const IlqrProblem p = build_ilqr_problem(ocp, lay);

  std::vector<Eigen::VectorXd> U0(
      ocp.N, Eigen::VectorXd::Zero(ocp.model->n_actuated()));
  if (U_init && static_cast<int>(U_init->size()) == ocp.N) U0 = *U_init;

  IlqrSolution warm_il;
  const IlqrSolution* warm_ptr = nullptr;
  if (warm) {
    warm_il.multipliers = warm->multipliers;
    warm_il.mu = warm->mu;
    warm_ptr = &warm_il;
  }

  const IlqrSolution s = solve_al_ilqr(p, ocp.x_init, U0, options, warm_ptr);

  OcpSolution out;
  out.X = s.X;
  out.U = s.U;
  out.cost = s.cost;
  out.max_violation = s.max_violation;
  out.stationarity = s.stationarity;
  out.converged = s.converged;
  out.line_search_failed = s.line_search_failed;
  out.inner_iterations = s.inner_iterations;
  out.outer_iterations = s.outer_iterations;
  out.multipliers = s.multipliers;
  out.mu = s.mu;
  return out;
}

namespace {

// Absolute-step reference with goal hold past the trajectory end; the
// passive references follow the equilibrium of the actuated reference.
class ReferenceTable {
 public:
  ReferenceTable(const CraneModel& model, const GlobalPlanResult& global,
                 double T_s)
      : model_(model), traj_{global.spline, global.duration}, T_s_(T_s) {}

  void ensure(int steps) {
    Eigen::VectorXd q, qd, qdd;
    while (static_cast<int>(q_A_.size()) < steps) {
      const int k = static_cast<int>(q_A_.size());
      traj_.sample(k * T_s_, q, qd, qdd);
      q_A_.push_back(q);
      qdd_A_.push_back(qdd);
      std::optional<Eigen::VectorXd> warm;
      if (!q_P_.empty()) warm = q_P_.back();
      q_P_.push_back(equilibrium(model_, q, warm));
    }
  }

  void fill(OcpProblem& ocp, int first, int N) {
    ensure(first + N + 1);
    ocp.q_A_ref.assign(q_A_.begin() + first, q_A_.begin() + first + N);
    ocp.qdd_A_ref.assign(qdd_A_.begin() + first, qdd_A_.begin() + first + N);
    ocp.q_P_ref.assign(q_P_.begin() + first, q_P_.begin() + first + N);
    ocp.qd_P_ref.resize(N);
    for (int i = 0; i < N; ++i) {
      const int k = first + i;
      // Central difference of the equilibrium trajectory; one-sided at 0.
      if (k == 0) {
        ocp.qd_P_ref[i] = (q_P_[1] - q_P_[0]) / T_s_;
      } else {
        ensure(k + 2);
        ocp.qd_P_ref[i] = (q_P_[k + 1] - q_P_[k - 1]) / (2.0 * T_s_);
      }
    }
  }

  const Eigen::VectorXd& q_A(int k) {
    ensure(k + 1);
    return q_A_[k];
  }

 private:
  const CraneModel& model_;
  TimedTrajectory traj_;
  double T_s_;
  std::vector<Eigen::VectorXd> q_A_, qdd_A_, q_P_;
};

}  // namespace

ExecutedTrajectory run_receding_horizon(const CraneModel& model,
                                        const CollisionWorld& world,
                                        const GlobalPlanResult& global,
                                        const LocalPlanConfig& config) {
  if (!global.feasible)
    throw std::invalid_argument("run_receding_horizon: infeasible global plan");

  const int n = model.n();
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();

  ReferenceTable refs(model, global, config.T_s);
  const Eigen::VectorXd q_goal = global.vias.q_goal;
  const Eigen::VectorXd q_P_goal = equilibrium(model, q_goal);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * n);
  x.head(n_A) = global.vias.q_start;
  x.segment(n_A, n_P) = equilibrium(model, global.vias.q_start);

  const double time_cap =
      config.time_cap_factor * global.duration + config.time_cap_extra_s;
  const int max_steps = static_cast<int>(std::ceil(time_cap / config.T_s));

  ExecutedTrajectory exec;
  OcpSolution prev;
  bool have_prev = false;

  auto record = [&](double t, const Eigen::VectorXd& state,
                    const Eigen::VectorXd& u) {
    exec.t.push_back(t);
    exec.x.push_back(state);
    exec.u.push_back(u);
    exec.flow.push_back(pump_flow(
        model, cylinder_state(model, state.head(n_A), state.segment(n, n_A))
                   .second));
    exec.clearance.push_back(min_clearance(world, model, state.head(n)));
  };

  for (int step = 0; step < max_steps; ++step) {
    const double t = step * config.T_s;

    // Terminal test once the reference has been consumed.
    if (t + 0.5 * config.T_s >= global.duration) {
      const bool pos_ok = ((x.head(n_A) - q_goal).lpNorm<Eigen::Infinity>() <
                           config.stop_pos_tol);
      const bool vel_ok =
          x.tail(n).lpNorm<Eigen::Infinity>() < config.stop_vel_tol;
      const bool sway_ok =
          ((x.segment(n_A, n_P) - q_P_goal).lpNorm<Eigen::Infinity>() <
           config.stop_sway_tol);
      if (pos_ok && vel_ok && sway_ok) {
        exec.reached = true;
        exec.stop_reason = "converged";
        break;
      }
    }

    OcpProblem ocp;
    ocp.model = &model;
    ocp.world = &world;
    ocp.N = config.N;
    ocp.T_s = config.T_s;
    ocp.x_init = x;
    ocp.w1 = config.w1;
    ocp.w2 = config.w2;
    ocp.w3 = config.w3;
    ocp.clearance_margin = config.clearance_margin;
    ocp.flow_smooth_eps = config.flow_smooth_eps;
    ocp.constrain_collisions = config.constrain_collisions;
    ocp.constrain_flow = config.constrain_flow;
    refs.fill(ocp, step, config.N);

    std::vector<Eigen::VectorXd> U0;
    if (have_prev) {
      U0.assign(prev.U.begin() + 1, prev.U.end());
      U0.push_back(prev.U.back());
      prev.multipliers.erase(prev.multipliers.begin());
      prev.multipliers.push_back(prev.multipliers.back());
    } else {
      U0.assign(config.N, Eigen::VectorXd::Zero(n_A));
      for (int k = 0; k < config.N; ++k) U0[k] = ocp.qdd_A_ref[k];
    }

    const auto t0 = std::chrono::steady_clock::now();
    OcpSolution sol =
        solve_ocp(ocp, config.ilqr, &U0, have_prev ? &prev : nullptr);
    const double solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    StepDiagnostics diag;
    diag.t = t;
    diag.cost = sol.cost;
    diag.violation = sol.max_violation;
    diag.solve_time_s = solve_time;
    diag.inner_iterations = sol.inner_iterations;
    diag.converged = sol.converged;
    exec.diagnostics.push_back(diag);

    const Eigen::VectorXd u0 = sol.U[0];
    record(t, x, u0);

    x = discrete_step(model, x, u0, config.T_s);
    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e6) {
      exec.stop_reason = "divergence";
      return exec;
    }

    prev = std::move(sol);
    have_prev = true;
  }

  if (exec.stop_reason.empty() && !exec.reached) exec.stop_reason = "time cap";
  record(exec.t.empty() ? 0.0 : exec.t.back() + config.T_s, x,
         Eigen::VectorXd::Zero(n_A));
  return exec;
}

std::vector<Eigen::VectorXd> open_loop_rollout(const CraneModel& model,
                                               const GlobalPlanResult& global,
                                               double T_s, double total_time) {
  const int n = model.n();
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  TimedTrajectory traj{global.spline, global.duration};

  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * n);
  x.head(n_A) = global.vias.q_start;
  x.segment(n_A, n_P) = equilibrium(model, global.vias.q_start);

  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd q, qd, qdd;
  const int steps = static_cast<int>(std::ceil(total_time / T_s));
  for (int k = 0; k <= steps; ++k) {
    out.push_back(x);
    traj.sample(k * T_s, q, qd, qdd);
    x = discrete_step(model, x, qdd, T_s);
    if (!x.allFinite()) break;
  }
  return out;
}

double peak_passive_deviation(const CraneModel& model,
                              const std::vector<Eigen::VectorXd>& states) {
  const int n_A = model.n_actuated();
  const int n_P = model.n_passive();
  double peak = 0.0;
  std::optional<Eigen::VectorXd> warm;
  for (const auto& x : states) {
    const Eigen::VectorXd eq = equilibrium(model, x.head(n_A), warm);
    warm = eq;
    peak = std::max(peak,
                    (x.segment(n_A, n_P) - eq).lpNorm<Eigen::Infinity>());
  }
  return peak;
}

void export_executed_csv(const CraneModel& model, const ExecutedTrajectory& exec,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write executed csv: " + path);
  const int n = model.n();
  const int n_A = model.n_actuated();
  out << "t";
  for (int j = 0; j < n; ++j) out << ",q" << j + 1;
  for (int j = 0; j < n; ++j) out << ",qd" << j + 1;
  for (int j = 0; j < n_A; ++j) out << ",u" << j + 1;
  out << ",Q,min_clearance\n";
  out << std::setprecision(17);
  for (size_t k = 0; k < exec.t.size(); ++k) {
    out << exec.t[k];
    for (int j = 0; j < n; ++j) out << "," << exec.x[k][j];
    for (int j = 0; j < n; ++j) out << "," << exec.x[k][n + j];
    for (int j = 0; j < n_A; ++j) out << "," << exec.u[k][j];
    out << "," << exec.flow[k] << "," << exec.clearance[k] << "\n";
  }
}

}  // namespace craneplan
