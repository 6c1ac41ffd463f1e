#include "craneplan/ilqr.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace craneplan {

namespace {

struct AlState {
  std::vector<Eigen::VectorXd> lambda;  // per step
  double mu = 10.0;
};

// PHR penalty value for one constraint row.
inline double penalty_value(double g, double lam, double mu) {
  const double t = std::max(0.0, lam + mu * g);
  return (t * t - lam * lam) / (2.0 * mu);
}

struct Rollout {
  std::vector<Eigen::VectorXd> X, U;
  std::vector<Eigen::VectorXd> g;  // constraint values per step
  double true_cost = 0.0;
  double al_cost = 0.0;
};

void evaluate_rollout(const IlqrProblem& p, const AlState& al, Rollout& r) {
  r.true_cost = 0.0;
  r.al_cost = 0.0;
  r.g.assign(p.N, Eigen::VectorXd());
  for (int k = 0; k < p.N; ++k) {
    const double l = p.stage_cost(k, r.X[k], r.U[k]);
    r.true_cost += l;
    double pen = 0.0;
    if (p.n_constraints > 0) {
      r.g[k] = p.constraints(k, r.X[k], r.U[k]);
      for (int c = 0; c < p.n_constraints; ++c)
        pen += penalty_value(r.g[k][c], al.lambda[k][c], al.mu);
    }
    r.al_cost += l + pen;
  }
  if (!std::isfinite(r.al_cost))
    r.al_cost = std::numeric_limits<double>::infinity();
}

Rollout make_rollout(const IlqrProblem& p, const Eigen::VectorXd& x0,
                     const std::vector<Eigen::VectorXd>& U, const AlState& al) {
  Rollout r;
  r.U = U;
  r.X.assign(p.N, Eigen::VectorXd());
  r.X[0] = x0;
  for (int k = 0; k + 1 < p.N; ++k) {
    r.X[k + 1] = p.dynamics(k, r.X[k], r.U[k]);
    if (!r.X[k + 1].allFinite())
      throw std::runtime_error("ilqr: dynamics produced non-finite state");
  }
  evaluate_rollout(p, al, r);
  return r;
}

double max_violation(const IlqrProblem& p, const Rollout& r) {
  double v = 0.0;
  if (p.n_constraints == 0) return 0.0;
  for (int k = 0; k < p.N; ++k)
    for (int c = 0; c < p.n_constraints; ++c)
      v = std::max(v, r.g[k][c]);
  return std::max(0.0, v);
}

}  // namespace

IlqrSolution solve_al_ilqr(const IlqrProblem& p, const Eigen::VectorXd& x0,
                           const std::vector<Eigen::VectorXd>& U_init,
                           const IlqrOptions& opt, const IlqrSolution* warm) {
  if (p.N < 2) throw std::invalid_argument("ilqr: horizon must be >= 2");
  if (static_cast<int>(U_init.size()) != p.N)
    throw std::invalid_argument("ilqr: U_init size mismatch");

  AlState al;
  al.mu = opt.mu_init;
  al.lambda.assign(p.N, Eigen::VectorXd::Zero(p.n_constraints));
  if (warm && static_cast<int>(warm->multipliers.size()) == p.N &&
      (p.n_constraints == 0 ||
       warm->multipliers[0].size() == p.n_constraints)) {
    al.lambda = warm->multipliers;
    al.mu = std::max(opt.mu_init, warm->mu);
  }

  Rollout cur = make_rollout(p, x0, U_init, al);

  IlqrSolution sol;
  sol.X = cur.X;
  sol.U = cur.U;

  std::vector<Eigen::MatrixXd> A(p.N), B(p.N);
  std::vector<Eigen::VectorXd> kff(p.N);
  std::vector<Eigen::MatrixXd> Kfb(p.N);
  Eigen::VectorXd lx(p.nx), lu(p.nu);
  Eigen::MatrixXd lxx(p.nx, p.nx), luu(p.nu, p.nu), lux(p.nu, p.nx);
  Eigen::MatrixXd Gx, Gu;
  if (p.n_constraints > 0) {
    Gx.resize(p.n_constraints, p.nx);
    Gu.resize(p.n_constraints, p.nu);
  }

  double reg = opt.reg_init;
  double prev_violation = std::numeric_limits<double>::infinity();
  double last_grad_norm = std::numeric_limits<double>::infinity();
  bool inner_converged = false;

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    sol.outer_iterations = outer + 1;
    inner_converged = false;

    for (int inner = 0; inner < opt.max_inner; ++inner) {
      ++sol.inner_iterations;

      // Linearize dynamics around the current trajectory.
      for (int k = 0; k + 1 < p.N; ++k)
        p.dynamics_jacobians(k, cur.X[k], cur.U[k], A[k], B[k]);

      // Backward pass with regularization retries.
      bool backward_ok = false;
      double dv1 = 0.0, dv2 = 0.0, grad_norm = 0.0;
      while (!backward_ok) {
        backward_ok = true;
        dv1 = dv2 = grad_norm = 0.0;
        Eigen::VectorXd Vx = Eigen::VectorXd::Zero(p.nx);
        Eigen::MatrixXd Vxx = Eigen::MatrixXd::Zero(p.nx, p.nx);
        for (int k = p.N - 1; k >= 0; --k) {
          p.cost_expansion(k, cur.X[k], cur.U[k], lx, lu, lxx, luu, lux);

          if (p.n_constraints > 0) {
            // Gauss-Newton expansion of the active PHR terms.
            std::vector<char> mask(p.n_constraints, 0);
            bool any = false;
            for (int c = 0; c < p.n_constraints; ++c) {
              if (al.lambda[k][c] + al.mu * cur.g[k][c] > 0.0) {
                mask[c] = 1;
                any = true;
              }
            }
            if (any) {
              p.constraint_jacobians(k, cur.X[k], cur.U[k], mask, Gx, Gu);
              for (int c = 0; c < p.n_constraints; ++c) {
                if (!mask[c]) continue;
                const double t = al.lambda[k][c] + al.mu * cur.g[k][c];
                lx += t * Gx.row(c).transpose();
                lu += t * Gu.row(c).transpose();
                lxx += al.mu * Gx.row(c).transpose() * Gx.row(c);
                luu += al.mu * Gu.row(c).transpose() * Gu.row(c);
                lux += al.mu * Gu.row(c).transpose() * Gx.row(c);
              }
            }
          }

          Eigen::VectorXd Qx = lx;
          Eigen::VectorXd Qu = lu;
          Eigen::MatrixXd Qxx = lxx;
          Eigen::MatrixXd Quu = luu;
          Eigen::MatrixXd Qux = lux;
          if (k + 1 < p.N) {
            Qx += A[k].transpose() * Vx;
            Qu += B[k].transpose() * Vx;
            Qxx += A[k].transpose() * Vxx * A[k];
            Quu += B[k].transpose() * Vxx * B[k];
            Qux += B[k].transpose() * Vxx * A[k];
          }

          Eigen::MatrixXd Quu_reg =
              Quu + reg * Eigen::MatrixXd::Identity(p.nu, p.nu);
          Eigen::LLT<Eigen::MatrixXd> llt(Quu_reg);
          if (llt.info() != Eigen::Success) {
            reg = std::max(reg * 10.0, 1e-6);
            if (reg > opt.reg_max) {
              sol.line_search_failed = true;
              sol.cost = cur.true_cost;
              sol.max_violation = max_violation(p, cur);
              sol.stationarity = grad_norm;
              sol.multipliers = al.lambda;
              sol.mu = al.mu;
              return sol;
            }
            backward_ok = false;
            break;
          }

          kff[k] = -llt.solve(Qu);
          Kfb[k] = -llt.solve(Qux);

          grad_norm = std::max(grad_norm, Qu.lpNorm<Eigen::Infinity>());
          dv1 += kff[k].dot(Qu);
          dv2 += 0.5 * kff[k].dot(Quu * kff[k]);

          Vx = Qx + Kfb[k].transpose() * Quu * kff[k] +
               Kfb[k].transpose() * Qu + Qux.transpose() * kff[k];
          Vxx = Qxx + Kfb[k].transpose() * Quu * Kfb[k] +
                Kfb[k].transpose() * Qux + Qux.transpose() * Kfb[k];
          Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
        }
      }

      last_grad_norm = grad_norm;
      if (grad_norm < opt.tol_gradient) {
        inner_converged = true;
        break;
      }

      // Forward pass with backtracking line search.
      bool accepted = false;
      double alpha = 1.0;
      for (int ls = 0; ls < opt.line_search_steps; ++ls, alpha *= 0.5) {
        Rollout cand;
        cand.U.assign(p.N, Eigen::VectorXd());
        cand.X.assign(p.N, Eigen::VectorXd());
        cand.X[0] = x0;
        bool finite = true;
        for (int k = 0; k < p.N; ++k) {
          cand.U[k] =
              cur.U[k] + alpha * kff[k] + Kfb[k] * (cand.X[k] - cur.X[k]);
          if (k + 1 < p.N) {
            cand.X[k + 1] = p.dynamics(k, cand.X[k], cand.U[k]);
            if (!cand.X[k + 1].allFinite()) {
              finite = false;
              break;
            }
          }
        }
        if (!finite) continue;
        evaluate_rollout(p, al, cand);

        const double expected = -(alpha * dv1 + alpha * alpha * dv2);
        const double actual = cur.al_cost - cand.al_cost;
        if (actual > 1e-4 * std::max(expected, 0.0) &&
            (actual > 0.0 || expected <= 0.0)) {
          cur = std::move(cand);
          accepted = true;
          reg = std::max(reg / 10.0, 0.0);
          if (reg < 1e-9) reg = 0.0;
          break;
        }
      }

      if (!accepted) {
        reg = std::max(reg * 10.0, 1e-6);
        if (reg > opt.reg_max) {
          sol.line_search_failed = true;
          break;
        }
        continue;
      }

      const double expected_total = -(dv1 + dv2);
      if (std::abs(expected_total) < opt.tol_cost * (1.0 + std::abs(cur.al_cost))) {
        inner_converged = true;
        break;
      }
    }

    sol.X = cur.X;
    sol.U = cur.U;
    sol.cost = cur.true_cost;
    sol.max_violation = max_violation(p, cur);
    sol.multipliers = al.lambda;
    sol.mu = al.mu;

    if (sol.line_search_failed) break;

    if (sol.max_violation <= opt.tol_constraint && inner_converged) {
      sol.converged = true;
      break;
    }

    // Multiplier and penalty updates.
    if (p.n_constraints > 0) {
      for (int k = 0; k < p.N; ++k)
        for (int c = 0; c < p.n_constraints; ++c)
          al.lambda[k][c] =
              std::max(0.0, al.lambda[k][c] + al.mu * cur.g[k][c]);
      if (sol.max_violation > 0.25 * prev_violation)
        al.mu = std::min(al.mu * opt.mu_scale, opt.mu_max);
      prev_violation = sol.max_violation;
      evaluate_rollout(p, al, cur);
    } else if (inner_converged) {
      sol.converged = true;
      break;
    }
  }

  sol.stationarity = last_grad_norm;
  return sol;
}

}  // namespace craneplan
