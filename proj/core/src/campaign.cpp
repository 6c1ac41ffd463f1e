#include "craneplan/campaign.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "craneplan/parallel.hpp"

namespace craneplan {

using nlohmann::json;

namespace {

struct RunJob {
  const TaskSpec* task;
  int run = 0;
  uint64_t seed = 0;
};

json record_to_json(const RunRecord& r, bool with_timing) {
  json j;
  j["task"] = r.task;
  j["run"] = r.run;
  j["seed"] = r.seed;
  j["cost_variant"] = r.cost_variant;
  j["payload"] = r.payload;
  j["feasible"] = r.feasible;
  j["success"] = r.success;
  j["duration"] = r.duration;
  j["cost_collision"] = r.cost_collision;
  j["cost_joint"] = r.cost_joint;
  j["total_cost"] = r.total_cost;
  j["min_clearance"] = r.min_clearance;
  j["evaluations"] = r.evaluations;
  json xi = json::array();
  for (int i = 0; i < r.xi.size(); ++i) xi.push_back(r.xi[i]);
  j["xi"] = xi;
  j["local_executed"] = r.local_executed;
  if (r.local_executed) {
    j["local_reached"] = r.local_reached;
    j["local_max_flow"] = r.local_max_flow;
    j["local_min_clearance"] = r.local_min_clearance;
    j["local_terminal_error"] = r.local_terminal_error;
    j["local_peak_sway"] = r.local_peak_sway;
  }
  if (!r.trajectory_csv.empty()) j["trajectory_csv"] = r.trajectory_csv;
  if (with_timing) {
    j["runtime_s"] = r.runtime_s;
    if (r.local_executed) j["local_runtime_s"] = r.local_runtime_s;
  }
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.task = j.at("task").get<std::string>();
  r.run = j.at("run").get<int>();
  r.seed = j.at("seed").get<uint64_t>();
  r.cost_variant = j.at("cost_variant").get<std::string>();
  r.payload = j.at("payload").get<bool>();
  r.feasible = j.at("feasible").get<bool>();
  r.success = j.at("success").get<bool>();
  r.duration = j.at("duration").get<double>();
  r.cost_collision = j.at("cost_collision").get<double>();
  r.cost_joint = j.at("cost_joint").get<double>();
  r.total_cost = j.at("total_cost").get<double>();
  r.min_clearance = j.at("min_clearance").get<double>();
  r.evaluations = j.at("evaluations").get<int>();
  const auto& xi = j.at("xi");
  r.xi.resize(xi.size());
  for (size_t i = 0; i < xi.size(); ++i) r.xi[i] = xi[i].get<double>();
  r.local_executed = j.value("local_executed", false);
  r.local_reached = j.value("local_reached", false);
  r.local_max_flow = j.value("local_max_flow", 0.0);
  r.local_min_clearance = j.value("local_min_clearance", 0.0);
  r.local_terminal_error = j.value("local_terminal_error", 0.0);
  r.local_peak_sway = j.value("local_peak_sway", 0.0);
  r.runtime_s = j.value("runtime_s", 0.0);
  r.local_runtime_s = j.value("local_runtime_s", 0.0);
  r.trajectory_csv = j.value("trajectory_csv", "");
  return r;
}

void compute_stats(CampaignResult& result, const std::string& variant) {
  // One stats row per task, aggregated over its runs.
  std::vector<std::string> order;
  for (const auto& r : result.records)
    if (std::find(order.begin(), order.end(), r.task) == order.end())
      order.push_back(r.task);

  for (const auto& task : order) {
    TaskStats st;
    st.task = task;
    st.cost_variant = variant;
    std::vector<double> durations, runtimes;
    for (const auto& r : result.records) {
      if (r.task != task) continue;
      ++st.runs;
      if (r.success) {
        ++st.successes;
        durations.push_back(r.duration);
        runtimes.push_back(r.runtime_s);
      }
    }
    st.success_rate =
        st.runs > 0 ? static_cast<double>(st.successes) / st.runs : 0.0;
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) {
        mean = sd = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      sd = 0.0;
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / v.size());
    };
    mean_std(durations, st.duration_mean, st.duration_std);
    mean_std(runtimes, st.runtime_mean, st.runtime_std);
    result.stats.push_back(st);
  }
}

}  // namespace

CampaignResult run_campaign(const ScenarioSpec& spec,
                            const CampaignOptions& options) {
  GlobalPlanConfig gcfg = spec.global;
  if (options.cost_override) gcfg.cost_variant = *options.cost_override;
  const int runs = options.runs_override.value_or(spec.runs);
  const uint64_t base_seed = options.seed_override.value_or(spec.base_seed);

  std::vector<RunJob> jobs;
  for (const auto& task : spec.tasks) {
    if (options.task_filter && task.name != *options.task_filter) continue;
    for (int i = 0; i < runs; ++i)
      jobs.push_back(RunJob{&task, i, base_seed + static_cast<uint64_t>(i)});
  }
  if (jobs.empty()) throw std::invalid_argument("campaign: no matching tasks");

  const bool emit = !options.out_dir.empty();
  if (emit) std::filesystem::create_directories(options.out_dir);

  CampaignResult result;
  result.scenario = spec.name;
  result.records.resize(jobs.size());

  // Model/world variants shared across runs (immutable).
  const CraneModel model_plain = spec.task_model(false);
  const CraneModel model_loaded = spec.task_model(true);
  const CollisionWorld world_plain = spec.task_world(false);
  const CollisionWorld world_loaded = spec.task_world(true);

  std::mutex io_mutex;

  parallel_for(
      static_cast<int>(jobs.size()),
      [&](int idx) {
        const RunJob& job = jobs[idx];
        const CraneModel& model = job.task->payload ? model_loaded : model_plain;
        const CollisionWorld& world =
            job.task->payload ? world_loaded : world_plain;

        GlobalPlanConfig cfg = gcfg;
        cfg.seed = job.seed;
        cfg.threads = 1;  // parallelism lives at the run level here

        std::ofstream trace_file;
        if (options.trace && emit) {
          std::lock_guard<std::mutex> lock(io_mutex);
          trace_file.open(options.out_dir + "/" + job.task->name + "_run" +
                          std::to_string(job.run) + "_trace.jsonl");
          cfg.trace = [&trace_file](int gen, double fbest, double sigma) {
            trace_file << "{\"generation\":" << gen << ",\"f_best\":" << fbest
                       << ",\"sigma\":" << sigma << "}\n";
          };
        }

        RunRecord rec;
        rec.task = job.task->name;
        rec.run = job.run;
        rec.seed = job.seed;
        rec.cost_variant = to_string(cfg.cost_variant);
        rec.payload = job.task->payload;

        const GlobalPlanResult plan = plan_global(
            model, world, job.task->q_start, job.task->q_goal, cfg);

        rec.feasible = plan.feasible;
        rec.duration = plan.duration;
        rec.cost_collision = plan.cost_collision;
        rec.cost_joint = plan.cost_joint;
        rec.total_cost = plan.total();
        rec.min_clearance = plan.min_clearance;
        rec.evaluations = plan.evaluations;
        rec.runtime_s = plan.runtime_s;
        rec.xi = plan.vias.xi;
        rec.success = plan.feasible;

        if (options.run_local && plan.feasible) {
          rec.local_executed = true;
          const auto t0 = std::chrono::steady_clock::now();
          const ExecutedTrajectory exec =
              run_receding_horizon(model, world, plan, spec.local);
          rec.local_runtime_s = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
          rec.local_reached = exec.reached;
          rec.success = plan.feasible && exec.reached;
          double max_flow = 0.0, min_cl = std::numeric_limits<double>::infinity();
          for (double f : exec.flow) max_flow = std::max(max_flow, f);
          for (double c : exec.clearance) min_cl = std::min(min_cl, c);
          rec.local_max_flow = max_flow;
          rec.local_min_clearance = min_cl;
          const int n_A = model.n_actuated();
          rec.local_terminal_error =
              (exec.x.back().head(n_A) - job.task->q_goal)
                  .lpNorm<Eigen::Infinity>();
          rec.local_peak_sway = peak_passive_deviation(model, exec.x);

          if (emit) {
            const std::string csv = job.task->name + "_run" +
                                    std::to_string(job.run) + "_executed.csv";
            export_executed_csv(model, exec, options.out_dir + "/" + csv);
            rec.trajectory_csv = csv;
          }
        }

        if (emit) {
          const std::string csv = job.task->name + "_run" +
                                  std::to_string(job.run) + "_global.csv";
          export_trajectory_csv(model, {plan.spline, plan.duration},
                                options.out_dir + "/" + csv);
          if (rec.trajectory_csv.empty()) rec.trajectory_csv = csv;
        }

        result.records[idx] = std::move(rec);
      },
      options.threads);

  compute_stats(result, to_string(gcfg.cost_variant));

  if (emit) emit_report(result, options.out_dir);
  return result;
}

void emit_report(const CampaignResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream csv(dir + "/summary.csv");
    if (!csv) throw std::runtime_error("cannot write summary.csv in " + dir);
    csv << "scenario,task,cost_variant,runs,successes,success_rate,"
           "duration_mean,duration_std,runtime_mean,runtime_std\n";
    csv.precision(17);
    for (const auto& st : result.stats) {
      csv << result.scenario << "," << st.task << "," << st.cost_variant << ","
          << st.runs << "," << st.successes << "," << st.success_rate << ",";
      auto put = [&](double v) {
        if (std::isnan(v))
          csv << "-";
        else
          csv << v;
      };
      put(st.duration_mean);
      csv << ",";
      put(st.duration_std);
      csv << ",";
      put(st.runtime_mean);
      csv << ",";
      put(st.runtime_std);
      csv << "\n";
    }
  }

  {
    std::ofstream jsonl(dir + "/runs.jsonl");
    for (const auto& r : result.records)
      jsonl << record_to_json(r, true).dump() << "\n";
  }

  {
    json doc;
    doc["schema_version"] = 1;
    doc["scenario"] = result.scenario;
    doc["records"] = json::array();
    for (const auto& r : result.records)
      doc["records"].push_back(record_to_json(r, true));
    std::ofstream out(dir + "/campaign.json");
    out << doc.dump(2) << "\n";
  }
}

CampaignResult parse_report(const std::string& campaign_json_path) {
  std::ifstream in(campaign_json_path);
  if (!in) throw SchemaError("cannot open " + campaign_json_path);
  json doc;
  in >> doc;
  CampaignResult result;
  result.scenario = doc.at("scenario").get<std::string>();
  for (const auto& j : doc.at("records"))
    result.records.push_back(record_from_json(j));
  std::string variant =
      result.records.empty() ? "wsdf" : result.records.front().cost_variant;
  compute_stats(result, variant);
  return result;
}

std::string deterministic_digest(const CampaignResult& result) {
  json doc;
  doc["scenario"] = result.scenario;
  doc["records"] = json::array();
  for (const auto& r : result.records)
    doc["records"].push_back(record_to_json(r, false));
  return doc.dump();
}

}  // namespace craneplan
