#include "craneplan/global_planner.hpp"

#include <chrono>
#include <cmath>

namespace craneplan {

const char* to_string(CostVariant v) {
  switch (v) {
    case CostVariant::Binary:
      return "binary";
    case CostVariant::Sdf:
      return "sdf";
    case CostVariant::Wsdf:
      return "wsdf";
  }
  return "?";
}

CostVariant cost_variant_from_string(const std::string& s) {
  if (s == "binary") return CostVariant::Binary;
  if (s == "sdf") return CostVariant::Sdf;
  if (s == "wsdf") return CostVariant::Wsdf;
  throw std::invalid_argument("unknown cost variant: " + s);
}

std::vector<Eigen::VectorXd> equilibrium_postures(const CraneModel& model,
                                                  const PathGrid& grid) {
  const int n_eval = static_cast<int>(grid.s.size());
  const int n_P = model.n_passive();
  std::vector<Eigen::VectorXd> out(n_eval);
  std::optional<Eigen::VectorXd> warm;
  for (int k = 0; k < n_eval; ++k) {
    const Eigen::VectorXd q_A = grid.q.row(k).transpose();
    Eigen::VectorXd q_P;
    try {
      q_P = equilibrium(model, q_A, warm);
    } catch (const SolverError&) {
      // Retry cold (coordinate-sweep initialization).
      q_P = equilibrium(model, q_A);
    }
    warm = q_P;
    Eigen::VectorXd q(model.n());
    q << q_A, q_P;
    out[k] = q;
    (void)n_P;
  }
  return out;
}

namespace {

double pair_weight(const PairDistance& pd,
                   const std::array<double, 4>& link_weights) {
  // Weight of the pair's moving link; log-crane pairs carry link id 5.
  const int link = pd.link_id;
  return link_weights[std::clamp(link, 2, 5) - 2];
}

struct CollisionCosts {
  double binary = 0.0;  // count of penetrating (sample, pair) entries
  double wsdf = 0.0;
  double min_sd = std::numeric_limits<double>::infinity();
};

CollisionCosts collision_profile(const CollisionWorld& world,
                                 const CraneModel& model, const PathGrid& grid,
                                 const std::vector<Eigen::VectorXd>& postures,
                                 const std::array<double, 4>& link_weights) {
  CollisionCosts c;
  for (const auto& q : postures) {
    const auto dists = world_signed_distances(world, model, q);
    for (const auto& pd : dists) {
      c.min_sd = std::min(c.min_sd, pd.sd);
      if (pd.sd < 0.0) c.binary += 1.0;
      if (pd.sd <= 0.0) c.wsdf += pair_weight(pd, link_weights) * (1.0 - pd.sd);
    }
  }
  (void)grid;
  return c;
}

}  // namespace

double collision_cost_binary(const CollisionWorld& world, const CraneModel& model,
                             const PathGrid& grid, double w_coll) {
  const auto postures = equilibrium_postures(model, grid);
  const auto c = collision_profile(world, model, grid, postures,
                                   {1.0, 1.0, 1.0, 1.0});
  return w_coll * c.binary;
}

double collision_cost_wsdf(const CollisionWorld& world, const CraneModel& model,
                           const PathGrid& grid,
                           const std::array<double, 4>& link_weights) {
  const auto postures = equilibrium_postures(model, grid);
  return collision_profile(world, model, grid, postures, link_weights).wsdf;
}

double collision_cost_sdf(const CollisionWorld& world, const CraneModel& model,
                          const PathGrid& grid, double weight) {
  return collision_cost_wsdf(world, model, grid,
                             {weight, weight, weight, weight});
}

double joint_limit_cost(const PathGrid& grid, const JointLimits& limits,
                        double weight) {
  double cost = 0.0;
  const int nj = static_cast<int>(grid.q.cols());
  for (int k = 0; k < grid.s.size(); ++k) {
    for (int j = 0; j < nj; ++j) {
      const double q = grid.q(k, j);
      cost += std::max(0.0, q - limits.q_max[j]);
      cost += std::max(0.0, limits.q_min[j] - q);
    }
  }
  return weight * cost;
}

GlobalPlanResult plan_global(const CraneModel& model, const CollisionWorld& world,
                             const Eigen::VectorXd& q_start,
                             const Eigen::VectorXd& q_goal,
                             const GlobalPlanConfig& config) {
  const int n_A = model.n_actuated();
  if (q_start.size() != n_A || q_goal.size() != n_A)
    throw std::invalid_argument("plan_global: boundary dimension mismatch");
  if (config.n_via < 1) throw std::invalid_argument("plan_global: n_via >= 1");
  for (size_t i = 1; i < config.wsdf_weights.size(); ++i)
    if (config.wsdf_weights[i] > config.wsdf_weights[i - 1])
      throw std::invalid_argument(
          "plan_global: link weights must be nonincreasing along the chain");

  const auto& lim = model.limits();
  for (int j = 0; j < n_A; ++j) {
    if (q_start[j] < lim.q_min[j] - 1e-12 || q_start[j] > lim.q_max[j] + 1e-12 ||
        q_goal[j] < lim.q_min[j] - 1e-12 || q_goal[j] > lim.q_max[j] + 1e-12)
      throw std::invalid_argument("plan_global: boundary outside joint limits");
  }
  {
    Eigen::VectorXd q0(model.n());
    q0 << q_start, equilibrium(model, q_start);
    if (min_clearance(world, model, q0) <= 0.0)
      throw std::invalid_argument("plan_global: start pose in collision");
  }

  // Optimize in joint-range-normalized coordinates so the isotropic initial
  // covariance treats radians and meters alike.
  const Eigen::VectorXd range =
      (lim.q_max.head(n_A) - lim.q_min.head(n_A)).eval();
  const Eigen::VectorXd lo = lim.q_min.head(n_A);

  auto denormalize = [&](const Eigen::VectorXd& x) {
    ViaPoints v;
    v.q_start = q_start;
    v.q_goal = q_goal;
    v.xi.resize(x.size());
    for (int i = 0; i < config.n_via; ++i)
      v.xi.segment(static_cast<Eigen::Index>(i) * n_A, n_A) =
          lo + range.cwiseProduct(x.segment(static_cast<Eigen::Index>(i) * n_A, n_A));
    return v;
  };

  const ViaPoints init = straight_line_vias(q_start, q_goal, config.n_via);
  Eigen::VectorXd x0(init.xi.size());
  for (int i = 0; i < config.n_via; ++i)
    x0.segment(static_cast<Eigen::Index>(i) * n_A, n_A) =
        (init.via(i) - lo).cwiseQuotient(range);

  struct Breakdown {
    double T = 0.0, coll = 0.0, joint = 0.0;
  };
  auto evaluate = [&](const ViaPoints& vias, Breakdown& b) {
    const PathSpline spline = build_spline(vias);
    const MinDuration md =
        min_duration(model, spline, config.n_eval, config.duration_floor);
    const PathGrid grid = eval_grid(spline, config.n_eval);
    b.T = md.T;
    b.joint = joint_limit_cost(grid, lim, config.joint_weight);
    const auto postures = equilibrium_postures(model, grid);
    const std::array<double, 4> weights =
        config.cost_variant == CostVariant::Sdf
            ? std::array<double, 4>{config.sdf_weight, config.sdf_weight,
                                    config.sdf_weight, config.sdf_weight}
            : config.wsdf_weights;
    const auto c = collision_profile(world, model, grid, postures, weights);
    b.coll = config.cost_variant == CostVariant::Binary
                 ? config.w_coll_binary * c.binary
                 : c.wsdf;
    return b.T + b.coll + b.joint;
  };

  auto objective = [&](const Eigen::VectorXd& x) -> double {
    try {
      Breakdown b;
      return evaluate(denormalize(x), b);
    } catch (const SolverError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const auto t0 = std::chrono::steady_clock::now();

  CmaOptions opt;
  opt.population = config.population;
  opt.sigma_init = config.sigma_init;
  opt.max_generations =
      std::max(1, (config.max_evaluations + config.population - 1) /
                      config.population);
  opt.seed = config.seed;
  opt.threads = config.threads;
  opt.trace = config.trace;
  if (config.runtime_cap_s > 0.0) {
    opt.stop_request = [&t0, cap = config.runtime_cap_s]() {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           t0)
                 .count() > cap;
    };
  }

  const CmaResult cr = cma_optimize(objective, x0, opt);

  GlobalPlanResult res;
  res.vias = denormalize(cr.x_best);
  res.spline = build_spline(res.vias);
  res.timing =
      min_duration(model, res.spline, config.n_eval, config.duration_floor);
  res.duration = res.timing.T;

  Breakdown b;
  evaluate(res.vias, b);
  res.cost_duration = b.T;
  res.cost_collision = b.coll;
  res.cost_joint = b.joint;

  const PathGrid grid = eval_grid(res.spline, config.n_eval);
  const auto postures = equilibrium_postures(model, grid);
  double min_sd = std::numeric_limits<double>::infinity();
  for (const auto& q : postures)
    min_sd = std::min(min_sd, min_clearance(world, model, q));
  bool limits_ok = true;
  for (int k = 0; k < grid.s.size() && limits_ok; ++k)
    for (int j = 0; j < n_A; ++j)
      if (grid.q(k, j) < lim.q_min[j] - 1e-12 ||
          grid.q(k, j) > lim.q_max[j] + 1e-12) {
        limits_ok = false;
        break;
      }
  res.min_clearance = min_sd;
  res.feasible = limits_ok && min_sd > 0.0;

  res.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  res.evaluations = cr.evaluations;
  res.generations = cr.generations;
  res.seed = config.seed;
  return res;
}

}  // namespace craneplan
