#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "craneplan/campaign.hpp"

using namespace craneplan;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string scenario;
  std::string cost;
  std::string task;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string local = "off";
  bool trace = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_runs, int* runs) {
  cmd->add_option("--scenario", a.scenario, "Scenario JSON file")->required();
  cmd->add_option("--cost", a.cost, "Collision cost variant")
      ->check(CLI::IsMember({"binary", "sdf", "wsdf"}));
  cmd->add_option("--task", a.task, "Restrict to one task by name");
  cmd->add_option("--seed", a.seed, "Base seed")->each([&a](const std::string&) {
    a.seed_set = true;
  });
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--local", a.local, "Run the local planner after planning")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_flag("--trace", a.trace, "Emit per-generation optimizer traces");
  cmd->add_option("--threads", a.threads, "Worker threads (0 = hardware)");
  if (with_runs)
    cmd->add_option("--runs", *runs, "Runs per task (overrides scenario)");
}

void print_stats(const CampaignResult& res) {
  std::cout << "scenario " << res.scenario << "\n";
  for (const auto& st : res.stats) {
    std::cout << "  " << st.task << " [" << st.cost_variant << "] "
              << st.successes << "/" << st.runs << " success";
    if (st.successes > 0) {
      std::cout << ", duration " << st.duration_mean << " +- "
                << st.duration_std << " s, runtime " << st.runtime_mean
                << " +- " << st.runtime_std << " s";
    } else {
      std::cout << ", duration -";
    }
    std::cout << "\n";
  }
}

json plan_to_json(const ScenarioSpec& spec, const TaskSpec& task,
                  const GlobalPlanResult& plan, const std::string& variant) {
  json doc;
  doc["schema_version"] = 1;
  doc["scenario"] = spec.name;
  doc["task"] = task.name;
  doc["payload"] = task.payload;
  doc["seed"] = plan.seed;
  doc["cost_variant"] = variant;
  doc["feasible"] = plan.feasible;
  doc["duration"] = plan.duration;
  json xi = json::array();
  for (int i = 0; i < plan.vias.xi.size(); ++i) xi.push_back(plan.vias.xi[i]);
  doc["xi"] = xi;
  json qs = json::array(), qg = json::array();
  for (int i = 0; i < task.q_start.size(); ++i) {
    qs.push_back(task.q_start[i]);
    qg.push_back(task.q_goal[i]);
  }
  doc["q_start"] = qs;
  doc["q_goal"] = qg;
  return doc;
}

int cmd_plan(const CommonArgs& a) {
  ScenarioSpec spec = load_scenario(a.scenario);
  const TaskSpec& task = a.task.empty() ? spec.tasks.front() : spec.task(a.task);

  GlobalPlanConfig cfg = spec.global;
  if (!a.cost.empty()) cfg.cost_variant = cost_variant_from_string(a.cost);
  if (a.seed_set) cfg.seed = a.seed;
  cfg.threads = a.threads;

  const CraneModel model = spec.task_model(task.payload);
  const CollisionWorld world = spec.task_world(task.payload);

  std::ofstream trace_file;
  if (a.trace && !a.out.empty()) {
    std::filesystem::create_directories(a.out);
    trace_file.open(a.out + "/" + task.name + "_trace.jsonl");
    cfg.trace = [&trace_file](int gen, double fbest, double sigma) {
      trace_file << "{\"generation\":" << gen << ",\"f_best\":" << fbest
                 << ",\"sigma\":" << sigma << "}\n";
    };
  }

  const GlobalPlanResult plan =
      plan_global(model, world, task.q_start, task.q_goal, cfg);

  std::cout << "task " << task.name << " seed " << cfg.seed << " ["
            << to_string(cfg.cost_variant) << "]\n"
            << "  feasible:  " << (plan.feasible ? "yes" : "no") << "\n"
            << "  duration:  " << plan.duration << " s\n"
            << "  cost:      T=" << plan.cost_duration
            << " J_coll=" << plan.cost_collision
            << " J_joint=" << plan.cost_joint << "\n"
            << "  clearance: " << plan.min_clearance << " m\n"
            << "  runtime:   " << plan.runtime_s << " s (" << plan.evaluations
            << " evaluations)\n";

  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    const std::string base =
        a.out + "/" + task.name + "_seed" + std::to_string(cfg.seed);
    export_trajectory_csv(model, {plan.spline, plan.duration},
                          base + "_global.csv");
    std::ofstream pj(base + "_plan.json");
    pj << plan_to_json(spec, task, plan, to_string(cfg.cost_variant)).dump(2)
       << "\n";
    std::cout << "  wrote " << base << "_global.csv\n";
  }

  if (a.local == "on") {
    if (!plan.feasible) {
      std::cout << "  local:     skipped (infeasible global plan)\n";
      return 0;
    }
    const ExecutedTrajectory exec =
        run_receding_horizon(model, world, plan, spec.local);
    double max_flow = 0.0;
    for (double f : exec.flow) max_flow = std::max(max_flow, f);
    std::cout << "  local:     " << (exec.reached ? "reached" : exec.stop_reason)
              << " in " << exec.t.back() << " s, max Q " << max_flow << " / "
              << model.limits().flow_max << "\n";
    if (!a.out.empty()) {
      const std::string csv = a.out + "/" + task.name + "_seed" +
                              std::to_string(cfg.seed) + "_executed.csv";
      export_executed_csv(model, exec, csv);
      std::cout << "  wrote " << csv << "\n";
    }
  }
  return 0;
}

int cmd_bench(const CommonArgs& a, int runs) {
  ScenarioSpec spec = load_scenario(a.scenario);
  CampaignOptions opt;
  if (!a.cost.empty()) opt.cost_override = cost_variant_from_string(a.cost);
  if (runs > 0) opt.runs_override = runs;
  if (a.seed_set) opt.seed_override = a.seed;
  if (!a.task.empty()) opt.task_filter = a.task;
  opt.run_local = a.local == "on";
  opt.out_dir = a.out;
  opt.trace = a.trace;
  opt.threads = a.threads;

  const CampaignResult res = run_campaign(spec, opt);
  print_stats(res);
  if (!a.out.empty()) std::cout << "report written to " << a.out << "\n";
  return 0;
}

int cmd_replay(const std::string& scenario_path, const std::string& plan_path,
               const std::string& out) {
  ScenarioSpec spec = load_scenario(scenario_path);
  std::ifstream in(plan_path);
  if (!in) throw SchemaError("cannot open plan file: " + plan_path);
  json doc;
  in >> doc;

  const TaskSpec& task = spec.task(doc.at("task").get<std::string>());
  const CraneModel model = spec.task_model(task.payload);
  const CollisionWorld world = spec.task_world(task.payload);

  GlobalPlanResult plan;
  plan.vias.q_start = task.q_start;
  plan.vias.q_goal = task.q_goal;
  const auto& xi = doc.at("xi");
  plan.vias.xi.resize(xi.size());
  for (size_t i = 0; i < xi.size(); ++i) plan.vias.xi[i] = xi[i].get<double>();
  plan.spline = build_spline(plan.vias);
  plan.timing = min_duration(model, plan.spline, spec.global.n_eval,
                             spec.global.duration_floor);
  plan.duration = plan.timing.T;
  plan.feasible = doc.value("feasible", true);
  plan.seed = doc.value("seed", 0ull);

  const ExecutedTrajectory exec =
      run_receding_horizon(model, world, plan, spec.local);
  double max_flow = 0.0;
  for (double f : exec.flow) max_flow = std::max(max_flow, f);
  std::cout << "replay " << task.name << ": "
            << (exec.reached ? "reached" : exec.stop_reason) << " in "
            << exec.t.back() << " s, max Q " << max_flow << " / "
            << model.limits().flow_max << "\n";

  if (!out.empty()) {
    std::filesystem::create_directories(out);
    const std::string csv = out + "/" + task.name + "_replay_executed.csv";
    export_executed_csv(model, exec, csv);
    std::cout << "wrote " << csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid motion planning benchmark for a hydraulic crane"};
  app.require_subcommand(1);

  CommonArgs plan_args, bench_args;
  int bench_runs = 0;
  std::string replay_scenario, replay_plan, replay_out;

  CLI::App* plan_cmd = app.add_subcommand("plan", "Single seeded planning run");
  add_common(plan_cmd, plan_args, false, nullptr);

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Seeded statistics campaign");
  add_common(bench_cmd, bench_args, true, &bench_runs);

  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "Re-execute the local planner on a stored global plan");
  replay_cmd->add_option("--scenario", replay_scenario, "Scenario JSON file")
      ->required();
  replay_cmd->add_option("--plan", replay_plan, "Stored *_plan.json file")
      ->required();
  replay_cmd->add_option("--out", replay_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan_cmd->parsed()) return cmd_plan(plan_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args, bench_runs);
    if (replay_cmd->parsed())
      return cmd_replay(replay_scenario, replay_plan, replay_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
