#pragma once

#include "craneplan/scenario.hpp"

namespace craneplan {

struct CampaignOptions {
  std::optional<CostVariant> cost_override;
  std::optional<int> runs_override;
  std::optional<uint64_t> seed_override;
  std::optional<std::string> task_filter;
  bool run_local = false;
  std::string out_dir;  // empty: no files emitted
  int threads = 1;      // concurrent runs
  bool trace = false;   // per-generation JSONL traces (needs out_dir)
};

struct RunRecord {
  std::string task;
  int run = 0;
  uint64_t seed = 0;
  std::string cost_variant;
  bool payload = false;

  bool feasible = false;
  bool success = false;  // feasible, and locally reached when executed
  double duration = 0.0;
  double cost_collision = 0.0;
  double cost_joint = 0.0;
  double total_cost = 0.0;
  double min_clearance = 0.0;
  int evaluations = 0;
  double runtime_s = 0.0;
  Eigen::VectorXd xi;  // via-points of the returned plan

  bool local_executed = false;
  bool local_reached = false;
  double local_max_flow = 0.0;
  double local_min_clearance = 0.0;
  double local_terminal_error = 0.0;
  double local_peak_sway = 0.0;
  double local_runtime_s = 0.0;

  std::string trajectory_csv;  // relative to out_dir when emitted
};

struct TaskStats {
  std::string task;
  std::string cost_variant;
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  // Over successful runs only; NaN when there are none ("-" in reports).
  double duration_mean = 0.0;
  double duration_std = 0.0;
  double runtime_mean = 0.0;
  double runtime_std = 0.0;
};

struct CampaignResult {
  std::string scenario;
  std::vector<RunRecord> records;
  std::vector<TaskStats> stats;
};

/// Seeded statistics campaign: run i of a task uses seed = base_seed + i.
/// Runs may execute concurrently; records are keyed by (task, run) so the
/// result is independent of scheduling.
CampaignResult run_campaign(const ScenarioSpec& spec,
                            const CampaignOptions& options);

/// Writes summary.csv, runs.jsonl and campaign.json into `dir`.
void emit_report(const CampaignResult& result, const std::string& dir);

CampaignResult parse_report(const std::string& campaign_json_path);

/// Canonical serialization of everything except wall-clock fields; equal
/// strings certify bitwise-identical planning results.
std::string deterministic_digest(const CampaignResult& result);

}  // namespace craneplan
