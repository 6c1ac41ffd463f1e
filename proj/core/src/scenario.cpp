#include "craneplan/scenario.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace craneplan {

using nlohmann::json;

Shape shape_from_json(const json& o, const std::string& where);

Capsule LogSpec::capsule() const {
  Capsule c;
  c.p0 = grasp_offset - Vec3(0.5 * length, 0, 0);
  c.p1 = grasp_offset + Vec3(0.5 * length, 0, 0);
  c.radius = radius;
  return c;
}

PayloadParams LogSpec::payload() const {
  PayloadParams p;
  p.mass = mass;
  p.com = grasp_offset;
  // Solid cylinder along the jaw-frame x axis.
  const double ix = 0.5 * mass * radius * radius;
  const double it = mass * (length * length / 12.0 + radius * radius / 4.0);
  p.inertia = Vec3(ix, it, it).asDiagonal();
  return p;
}

CraneModel ScenarioSpec::task_model(bool payload) const {
  if (!payload) return model_bundle.model;
  return model_bundle.model.with_payload(log.payload());
}

CollisionWorld ScenarioSpec::task_world(bool payload) const {
  std::vector<Shape> obstacles = truck;
  obstacles.insert(obstacles.end(), env_obstacles.begin(), env_obstacles.end());
  CollisionWorld w(model_bundle.links, std::move(obstacles),
                   static_cast<int>(truck.size()));
  if (!payload) return w;
  return w.with_log(log.capsule(), model_bundle.model.jaw_joint());
}

const TaskSpec& ScenarioSpec::task(const std::string& name) const {
  for (const auto& t : tasks)
    if (t.name == name) return t;
  throw std::invalid_argument("unknown task: " + name);
}

namespace {

Eigen::VectorXd parse_vec(const json& a, const std::string& where) {
  if (!a.is_array()) throw SchemaError(where + ": expected array");
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

}  // namespace

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError("scenario file " + path + ": " + e.what());
  }

  try {
    if (doc.at("schema_version").get<int>() != 1)
      throw SchemaError("scenario " + path + ": unsupported schema version");

    const std::string model_ref = doc.value("model", "builtin:desk_crane");
    ModelBundle bundle =
        model_ref == "builtin:desk_crane"
            ? desk_crane()
            : load_model((std::filesystem::path(path).parent_path() / model_ref)
                             .string());

    ScenarioSpec s{std::string(), std::move(bundle), {}, {}, {}, {}, {}, {},
                   1,             0};
    s.name = doc.value("name", "scenario");

    if (doc.contains("environment")) {
      const auto& env = doc.at("environment");
      if (env.contains("truck"))
        for (const auto& o : env.at("truck"))
          s.truck.push_back(shape_from_json(o, path + ":environment.truck"));
      if (env.contains("obstacles"))
        for (const auto& o : env.at("obstacles"))
          s.env_obstacles.push_back(
              shape_from_json(o, path + ":environment.obstacles"));
    }

    if (doc.contains("log")) {
      const auto& l = doc.at("log");
      s.log.length = l.value("length", s.log.length);
      s.log.radius = l.value("radius", s.log.radius);
      s.log.mass = l.value("mass", s.log.mass);
      if (l.contains("grasp_offset")) {
        const Eigen::VectorXd g = parse_vec(l.at("grasp_offset"), "grasp_offset");
        s.log.grasp_offset = Vec3(g[0], g[1], g[2]);
      }
    }

    const int n_A = s.model_bundle.model.n_actuated();
    for (const auto& t : doc.at("tasks")) {
      TaskSpec task;
      task.name = t.at("name").get<std::string>();
      task.q_start = parse_vec(t.at("start"), path + ":tasks.start");
      task.q_goal = parse_vec(t.at("goal"), path + ":tasks.goal");
      task.payload = t.value("payload", false);
      if (task.q_start.size() != n_A || task.q_goal.size() != n_A)
        throw SchemaError("scenario " + path + ": task " + task.name +
                          " boundary dimension != n_A");
      s.tasks.push_back(std::move(task));
    }
    if (s.tasks.empty())
      throw SchemaError("scenario " + path + ": no tasks");

    if (doc.contains("global_planner")) {
      const auto& g = doc.at("global_planner");
      s.global.n_via = g.value("n_via", s.global.n_via);
      s.global.population = g.value("population", s.global.population);
      s.global.sigma_init = g.value("sigma_init", s.global.sigma_init);
      s.global.n_eval = g.value("n_eval", s.global.n_eval);
      if (g.contains("cost"))
        s.global.cost_variant =
            cost_variant_from_string(g.at("cost").get<std::string>());
      s.global.w_coll_binary = g.value("w_coll_binary", s.global.w_coll_binary);
      s.global.sdf_weight = g.value("sdf_weight", s.global.sdf_weight);
      if (g.contains("wsdf_weights")) {
        const Eigen::VectorXd w = parse_vec(g.at("wsdf_weights"), "wsdf_weights");
        if (w.size() != 4)
          throw SchemaError("scenario " + path + ": wsdf_weights needs 4 entries");
        for (int i = 0; i < 4; ++i) s.global.wsdf_weights[i] = w[i];
      }
      s.global.joint_weight = g.value("joint_weight", s.global.joint_weight);
      s.global.max_evaluations =
          g.value("max_evaluations", s.global.max_evaluations);
      s.global.duration_floor = g.value("duration_floor", s.global.duration_floor);
      s.global.runtime_cap_s = g.value("runtime_cap_s", s.global.runtime_cap_s);
    }

    if (doc.contains("local_planner")) {
      const auto& l = doc.at("local_planner");
      s.local.T_s = l.value("T_s", s.local.T_s);
      s.local.N = l.value("N", s.local.N);
      s.local.w1 = l.value("w1", s.local.w1);
      s.local.w2 = l.value("w2", s.local.w2);
      s.local.w3 = l.value("w3", s.local.w3);
      s.local.clearance_margin =
          l.value("clearance_margin", s.local.clearance_margin);
      s.local.flow_smooth_eps =
          l.value("flow_smooth_eps", s.local.flow_smooth_eps);
      s.local.time_cap_factor = l.value("time_cap_factor", s.local.time_cap_factor);
      s.local.time_cap_extra_s =
          l.value("time_cap_extra_s", s.local.time_cap_extra_s);
    }

    s.runs = doc.value("runs", 1);
    s.base_seed = doc.value("base_seed", 0ull);

    // Boundary configurations must respect the joint limits up front.
    const auto& lim = s.model_bundle.model.limits();
    for (const auto& t : s.tasks)
      for (int j = 0; j < n_A; ++j)
        if (t.q_start[j] < lim.q_min[j] || t.q_start[j] > lim.q_max[j] ||
            t.q_goal[j] < lim.q_min[j] || t.q_goal[j] > lim.q_max[j])
          throw SchemaError("scenario " + path + ": task " + t.name +
                            " boundary outside joint limits");
    return s;
  } catch (const json::exception& e) {
    throw SchemaError("scenario file " + path + ": " + e.what());
  }
}

}  // namespace craneplan
