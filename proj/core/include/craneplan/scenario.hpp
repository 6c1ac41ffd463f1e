#pragma once

#include <optional>

#include "craneplan/global_planner.hpp"
#include "craneplan/local_planner.hpp"
#include "craneplan/model_io.hpp"

namespace craneplan {

/// Carried log: collision capsule in the jaw frame plus the payload mass
/// parameters merged into the jaw body while attached.
struct LogSpec {
  double length = 3.6;
  double radius = 0.18;
  double mass = 480.0;
  Vec3 grasp_offset = Vec3(0, 0, -0.75);  // jaw frame, log midpoint

  Capsule capsule() const;
  PayloadParams payload() const;
};

struct TaskSpec {
  std::string name;
  Eigen::VectorXd q_start;  // actuated
  Eigen::VectorXd q_goal;
  bool payload = false;
};

struct ScenarioSpec {
  std::string name;
  ModelBundle model_bundle;
  std::vector<Shape> truck;
  std::vector<Shape> env_obstacles;
  LogSpec log;
  std::vector<TaskSpec> tasks;
  GlobalPlanConfig global;
  LocalPlanConfig local;
  int runs = 1;
  uint64_t base_seed = 0;

  /// Model and world for one task leg; the payload flag attaches the log
  /// both as collision body and as jaw mass.
  CraneModel task_model(bool payload) const;
  CollisionWorld task_world(bool payload) const;
  const TaskSpec& task(const std::string& name) const;
};

/// Loads the scenario JSON; model references resolve relative to the
/// scenario file ("builtin:desk_crane" selects the built-in parameter set).
/// Throws SchemaError with the offending path on malformed input.
ScenarioSpec load_scenario(const std::string& path);

}  // namespace craneplan
