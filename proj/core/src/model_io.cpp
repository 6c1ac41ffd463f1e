#include "craneplan/model_io.hpp"

#include <fstream>

#include <json.hpp>

namespace craneplan {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vec(const json& a, const std::string& where) {
  if (!a.is_array()) throw SchemaError(where + ": expected array");
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

Vec3 json_to_vec3(const json& a, const std::string& where) {
  const Eigen::VectorXd v = json_to_vec(a, where);
  if (v.size() != 3) throw SchemaError(where + ": expected 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

Mat3 rpy_to_rot(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

json shape_to_json(const Shape& s) {
  json o;
  if (std::holds_alternative<Capsule>(s)) {
    const Capsule& c = std::get<Capsule>(s);
    o["type"] = "capsule";
    o["p0"] = {c.p0.x(), c.p0.y(), c.p0.z()};
    o["p1"] = {c.p1.x(), c.p1.y(), c.p1.z()};
    o["radius"] = c.radius;
  } else {
    const Obb& b = std::get<Obb>(s);
    o["type"] = "obb";
    o["center"] = {b.center.x(), b.center.y(), b.center.z()};
    Eigen::Quaterniond q(b.rot);
    o["quat_wxyz"] = {q.w(), q.x(), q.y(), q.z()};
    o["half_extents"] = {b.half.x(), b.half.y(), b.half.z()};
  }
  return o;
}

}  // namespace

Shape shape_from_json(const json& o, const std::string& where);

Shape shape_from_json(const json& o, const std::string& where) {
  const std::string type = o.value("type", "");
  if (type == "capsule") {
    Capsule c;
    c.p0 = json_to_vec3(o.at("p0"), where + ".p0");
    c.p1 = json_to_vec3(o.at("p1"), where + ".p1");
    c.radius = o.at("radius").get<double>();
    validate_shape(c);
    return c;
  }
  if (type == "obb") {
    Obb b;
    b.center = json_to_vec3(o.at("center"), where + ".center");
    if (o.contains("quat_wxyz")) {
      const auto& q = o.at("quat_wxyz");
      b.rot = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                 q[2].get<double>(), q[3].get<double>())
                  .normalized()
                  .toRotationMatrix();
    } else if (o.contains("rpy")) {
      b.rot = rpy_to_rot(json_to_vec3(o.at("rpy"), where + ".rpy"));
    }
    b.half = json_to_vec3(o.at("half_extents"), where + ".half_extents");
    validate_shape(b);
    return b;
  }
  throw SchemaError(where + ": unknown shape type '" + type + "'");
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError("model file " + path + ": " + e.what());
  }

  try {
    if (doc.at("schema_version").get<int>() != 1)
      throw SchemaError("model file " + path + ": unsupported schema version");

    CraneModelParams p;
    p.schema_version = 1;
    p.n_actuated = doc.at("n_actuated").get<int>();
    p.telescope_ratio = doc.value("telescope_ratio", 1.0);
    p.gravity = json_to_vec3(doc.at("gravity"), "gravity");

    std::string jaw_name = doc.value("jaw_joint", "");
    int idx = 0;
    for (const auto& jj : doc.at("joints")) {
      JointDesc j;
      j.name = jj.at("name").get<std::string>();
      const std::string t = jj.at("type").get<std::string>();
      if (t == "revolute")
        j.type = JointType::Revolute;
      else if (t == "prismatic")
        j.type = JointType::Prismatic;
      else
        throw SchemaError("joint " + j.name + ": unknown type " + t);
      j.axis = json_to_vec3(jj.at("axis"), "axis").normalized();
      j.origin = Eigen::Isometry3d::Identity();
      j.origin.translation() = json_to_vec3(jj.at("origin_xyz"), "origin_xyz");
      if (jj.contains("origin_rpy"))
        j.origin.linear() = rpy_to_rot(json_to_vec3(jj.at("origin_rpy"), "origin_rpy"));
      j.coord = jj.at("coord").get<int>();
      j.motion_scale = jj.value("motion_scale", 1.0);
      p.joints.push_back(j);

      const auto& bb = jj.at("body");
      BodyDesc b;
      b.mass = bb.at("mass").get<double>();
      b.com = json_to_vec3(bb.at("com"), "com");
      if (bb.contains("inertia_diag"))
        b.inertia = json_to_vec3(bb.at("inertia_diag"), "inertia_diag").asDiagonal();
      else {
        const auto& m = bb.at("inertia");
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) b.inertia(r, c) = m[r][c].get<double>();
      }
      p.bodies.push_back(b);

      if (j.name == jaw_name) p.jaw_joint = idx;
      ++idx;
    }

    for (const auto& cc : doc.at("cylinders")) {
      CylinderGeom c;
      const std::string k = cc.at("kind").get<std::string>();
      if (k == "linear") {
        c.kind = CylinderGeom::Kind::Linear;
        c.gain = cc.at("gain").get<double>();
      } else if (k == "linkage") {
        c.kind = CylinderGeom::Kind::Linkage;
        c.a = cc.at("a").get<double>();
        c.b = cc.at("b").get<double>();
        c.phi0 = cc.at("phi0").get<double>();
        c.d0 = cc.value("d0", 0.0);
      } else {
        throw SchemaError("unknown cylinder kind " + k);
      }
      c.area_pos = cc.at("area_pos").get<double>();
      c.area_neg = cc.at("area_neg").get<double>();
      p.cylinders.push_back(c);
    }

    const auto& ll = doc.at("limits");
    p.limits.q_min = json_to_vec(ll.at("q_min"), "q_min");
    p.limits.q_max = json_to_vec(ll.at("q_max"), "q_max");
    p.limits.qd_max = json_to_vec(ll.at("qd_max"), "qd_max");
    p.limits.u_max = json_to_vec(ll.at("u_max"), "u_max");
    p.limits.flow_max = ll.at("flow_max").get<double>();

    ModelBundle bundle{CraneModel(std::move(p)), {}, doc.value("name", "")};

    if (doc.contains("collision_links")) {
      for (const auto& cl : doc.at("collision_links")) {
        LinkTemplate lt;
        lt.link_id = cl.at("link").get<int>();
        const std::string joint_name = cl.at("joint").get<std::string>();
        lt.joint_index = -1;
        for (int j = 0; j < bundle.model.n(); ++j)
          if (bundle.model.joints()[j].name == joint_name) lt.joint_index = j;
        if (lt.joint_index < 0)
          throw SchemaError("collision link bound to unknown joint " + joint_name);
        lt.local = shape_from_json(cl, "collision_links");
        lt.telescopic = cl.value("telescopic", false);
        bundle.links.push_back(lt);
      }
    }
    return bundle;
  } catch (const json::exception& e) {
    throw SchemaError("model file " + path + ": " + e.what());
  }
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  const CraneModelParams& p = bundle.model.params();
  json doc;
  doc["schema_version"] = p.schema_version;
  doc["name"] = bundle.name;
  doc["n_actuated"] = p.n_actuated;
  doc["telescope_ratio"] = p.telescope_ratio;
  doc["gravity"] = {p.gravity.x(), p.gravity.y(), p.gravity.z()};
  if (p.jaw_joint >= 0) doc["jaw_joint"] = p.joints[p.jaw_joint].name;

  doc["joints"] = json::array();
  for (size_t i = 0; i < p.joints.size(); ++i) {
    const JointDesc& j = p.joints[i];
    const BodyDesc& b = p.bodies[i];
    json jj;
    jj["name"] = j.name;
    jj["type"] = j.type == JointType::Revolute ? "revolute" : "prismatic";
    jj["axis"] = {j.axis.x(), j.axis.y(), j.axis.z()};
    const Vec3 t = j.origin.translation();
    jj["origin_xyz"] = {t.x(), t.y(), t.z()};
    const Vec3 rpy = j.origin.linear().eulerAngles(2, 1, 0).reverse();
    jj["origin_rpy"] = {rpy.x(), rpy.y(), rpy.z()};
    jj["coord"] = j.coord;
    jj["motion_scale"] = j.motion_scale;
    json bb;
    bb["mass"] = b.mass;
    bb["com"] = {b.com.x(), b.com.y(), b.com.z()};
    json m = json::array();
    for (int r = 0; r < 3; ++r)
      m.push_back({b.inertia(r, 0), b.inertia(r, 1), b.inertia(r, 2)});
    bb["inertia"] = m;
    jj["body"] = bb;
    doc["joints"].push_back(jj);
  }

  doc["cylinders"] = json::array();
  for (const auto& c : p.cylinders) {
    json cc;
    if (c.kind == CylinderGeom::Kind::Linear) {
      cc["kind"] = "linear";
      cc["gain"] = c.gain;
    } else {
      cc["kind"] = "linkage";
      cc["a"] = c.a;
      cc["b"] = c.b;
      cc["phi0"] = c.phi0;
      cc["d0"] = c.d0;
    }
    cc["area_pos"] = c.area_pos;
    cc["area_neg"] = c.area_neg;
    doc["cylinders"].push_back(cc);
  }

  json ll;
  ll["q_min"] = vec_to_json(p.limits.q_min);
  ll["q_max"] = vec_to_json(p.limits.q_max);
  ll["qd_max"] = vec_to_json(p.limits.qd_max);
  ll["u_max"] = vec_to_json(p.limits.u_max);
  ll["flow_max"] = p.limits.flow_max;
  doc["limits"] = ll;

  doc["collision_links"] = json::array();
  for (const auto& l : bundle.links) {
    json cl = shape_to_json(l.local);
    cl["link"] = l.link_id;
    cl["joint"] = p.joints[l.joint_index].name;
    if (l.telescopic) cl["telescopic"] = true;
    doc["collision_links"].push_back(cl);
  }

  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write model file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace craneplan
