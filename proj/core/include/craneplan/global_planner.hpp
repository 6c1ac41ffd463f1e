#pragma once

#include <array>
#include <cstdint>

#include "craneplan/cma_es.hpp"
#include "craneplan/collision.hpp"
#include "craneplan/via_trajectory.hpp"

namespace craneplan {

enum class CostVariant { Binary, Sdf, Wsdf };

const char* to_string(CostVariant v);
CostVariant cost_variant_from_string(const std::string& s);

struct GlobalPlanConfig {
  int n_via = 6;
  int population = 50;
  double sigma_init = 1.0;
  int n_eval = 64;
  CostVariant cost_variant = CostVariant::Wsdf;

  double w_coll_binary = 1e4;
  double sdf_weight = 1e2;
  // Link-dependent weights for links 2..5, nonincreasing along the chain.
  std::array<double, 4> wsdf_weights = {1e5, 1e4, 1e3, 1e2};
  double joint_weight = 1e3;

  int max_evaluations = 12500;
  uint64_t seed = 0;
  double duration_floor = 1e-3;
  int threads = 1;
  double runtime_cap_s = 0.0;  // 0 = no cap
  std::function<void(int, double, double)> trace;
};

struct GlobalPlanResult {
  ViaPoints vias;
  PathSpline spline;
  MinDuration timing;
  double duration = 0.0;
  bool feasible = false;
  double cost_duration = 0.0;
  double cost_collision = 0.0;
  double cost_joint = 0.0;
  double total() const { return cost_duration + cost_collision + cost_joint; }
  double min_clearance = 0.0;
  double runtime_s = 0.0;
  int evaluations = 0;
  int generations = 0;
  uint64_t seed = 0;
};

/// Equilibrium passive postures along the grid (warm-started sweep); returns
/// the full configuration per sample.
std::vector<Eigen::VectorXd> equilibrium_postures(const CraneModel& model,
                                                  const PathGrid& grid);

/// Collision penalties over the evaluation grid, passive joints posed at
/// their equilibrium. Binary counts penetrating (sample, pair) entries; the
/// weighted variant charges w_i * (1 - sd) on contact, with the link weight
/// taken from the pair's moving link (the log uses the link-5 weight).
double collision_cost_binary(const CollisionWorld& world, const CraneModel& model,
                             const PathGrid& grid, double w_coll);
double collision_cost_wsdf(const CollisionWorld& world, const CraneModel& model,
                           const PathGrid& grid,
                           const std::array<double, 4>& link_weights);
double collision_cost_sdf(const CollisionWorld& world, const CraneModel& model,
                          const PathGrid& grid, double weight);

/// Linear joint-range violation penalty over the grid samples.
double joint_limit_cost(const PathGrid& grid, const JointLimits& limits,
                        double weight);

/// Stochastic search over via-points minimizing T + J_coll + J_joint.
/// Deterministic for a fixed seed. Throws std::invalid_argument when the
/// boundary configurations violate limits or the start pose collides.
GlobalPlanResult plan_global(const CraneModel& model, const CollisionWorld& world,
                             const Eigen::VectorXd& q_start,
                             const Eigen::VectorXd& q_goal,
                             const GlobalPlanConfig& config);

}  // namespace craneplan
