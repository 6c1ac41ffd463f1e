#include "craneplan/collision.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace craneplan {

namespace {

constexpr double kGjkEps = 1e-12;

// Closest points between segments p1+s*d1 and p2+t*d2 (Ericson 5.1.9).
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s, t;
  if (a <= kGjkEps && e <= kGjkEps) {
    return r.norm();
  }
  if (a <= kGjkEps) {
    s = 0.0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kGjkEps) {
      t = 0.0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kGjkEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

// --- distance between convex vertex clouds ----------------------------------
//
// Wolfe's min-norm-point algorithm on the Minkowski difference cloud. The
// cores here are tiny (segment: 2 vertices, box: 8), so the difference cloud
// has at most 64 points and the corral at most 4. Terminates with the
// support-gap certificate.
double min_norm_distance(const std::vector<Vec3>& cloud) {
  int start = 0;
  double best = cloud[0].squaredNorm();
  for (size_t i = 1; i < cloud.size(); ++i) {
    const double d = cloud[i].squaredNorm();
    if (d < best) {
      best = d;
      start = static_cast<int>(i);
    }
  }

  std::vector<int> corral = {start};
  std::vector<double> weights = {1.0};
  Vec3 x = cloud[start];

  for (int iter = 0; iter < 200; ++iter) {
    const double xx = x.squaredNorm();
    if (xx < 1e-24) return 0.0;

    // Support point that certifies optimality or makes progress.
    int j = 0;
    double bd = x.dot(cloud[0]);
    for (size_t i = 1; i < cloud.size(); ++i) {
      const double d = x.dot(cloud[i]);
      if (d < bd) {
        bd = d;
        j = static_cast<int>(i);
      }
    }
    if (xx - bd <= 1e-13 * std::max(xx, 1e-12)) return std::sqrt(xx);
    bool already = false;
    for (int c : corral)
      if (c == j) already = true;
    if (already) return std::sqrt(xx);

    corral.push_back(j);
    weights.push_back(0.0);

    // Minor cycle: move to the min-norm point of the corral's affine hull,
    // dropping vertices until the solution has nonnegative weights.
    for (int minor = 0; minor < 50; ++minor) {
      const int m = static_cast<int>(corral.size());
      Eigen::MatrixXd K(m + 1, m + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
          K(r, c) = 2.0 * cloud[corral[r]].dot(cloud[corral[c]]);
      K.block(0, m, m, 1).setOnes();
      K.block(m, 0, 1, m).setOnes();
      K(m, m) = 0.0;
      rhs[m] = 1.0;
      const Eigen::VectorXd sol =
          K.completeOrthogonalDecomposition().solve(rhs);
      const Eigen::VectorXd lam = sol.head(m);

      if (lam.minCoeff() > -1e-12) {
        for (int i = 0; i < m; ++i) weights[i] = std::max(0.0, lam[i]);
        break;
      }

      // Step from the current weights toward lam until a weight hits zero.
      double theta = 1.0;
      for (int i = 0; i < m; ++i)
        if (lam[i] < 1e-12 && weights[i] > lam[i])
          theta = std::min(theta, weights[i] / (weights[i] - lam[i]));
      for (int i = 0; i < m; ++i)
        weights[i] = (1.0 - theta) * weights[i] + theta * lam[i];

      // Drop one vanished vertex and iterate.
      int drop = -1;
      double wmin = 1e-10;
      for (int i = 0; i < m; ++i)
        if (weights[i] < wmin) {
          wmin = weights[i];
          drop = i;
        }
      if (drop < 0) break;
      corral.erase(corral.begin() + drop);
      weights.erase(weights.begin() + drop);
    }

    double wsum = 0.0;
    for (double w : weights) wsum += w;
    x.setZero();
    for (size_t i = 0; i < corral.size(); ++i)
      x += (weights[i] / wsum) * cloud[corral[i]];
  }
  return x.norm();
}

double gjk_distance(const Vec3* pa, int na, const Vec3* pb, int nb) {
  std::vector<Vec3> cloud;
  cloud.reserve(static_cast<size_t>(na) * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) cloud.push_back(pa[i] - pb[j]);
  return min_norm_distance(cloud);
}

void obb_corners(const Obb& o, std::array<Vec3, 8>& out) {
  int k = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[k++] = o.center + o.rot * Vec3(sx * o.half.x(), sy * o.half.y(),
                                           sz * o.half.z());
}

// --- SAT penetration depths -------------------------------------------------

void project_obb(const Obb& o, const Vec3& axis, double& lo, double& hi) {
  const double c = o.center.dot(axis);
  const double r = o.half.x() * std::abs(o.rot.col(0).dot(axis)) +
                   o.half.y() * std::abs(o.rot.col(1).dot(axis)) +
                   o.half.z() * std::abs(o.rot.col(2).dot(axis));
  lo = c - r;
  hi = c + r;
}

void project_segment(const Vec3& p0, const Vec3& p1, const Vec3& axis,
                     double& lo, double& hi) {
  const double a = p0.dot(axis);
  const double b = p1.dot(axis);
  lo = std::min(a, b);
  hi = std::max(a, b);
}

// Minimal translation along the axis that makes the intervals disjoint;
// negative when they already are.
double overlap(double lo1, double hi1, double lo2, double hi2) {
  return std::min(hi1 - lo2, hi2 - lo1);
}

// Minimal translation depth of a segment whose core intersects a box.
double sat_depth_segment_obb(const Vec3& p0, const Vec3& p1, const Obb& box) {
  std::vector<Vec3> axes;
  axes.reserve(6);
  for (int i = 0; i < 3; ++i) axes.push_back(box.rot.col(i));
  const Vec3 d = p1 - p0;
  if (d.squaredNorm() > kGjkEps) {
    for (int i = 0; i < 3; ++i) {
      Vec3 a = d.cross(box.rot.col(i));
      const double n = a.norm();
      if (n > 1e-9) axes.push_back(a / n);
    }
  }
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec3& a : axes) {
    double lo1, hi1, lo2, hi2;
    project_segment(p0, p1, a, lo1, hi1);
    project_obb(box, a, lo2, hi2);
    depth = std::min(depth, std::max(0.0, overlap(lo1, hi1, lo2, hi2)));
  }
  return depth;
}

double sat_depth_obb_obb(const Obb& a, const Obb& b) {
  std::vector<Vec3> axes;
  axes.reserve(15);
  for (int i = 0; i < 3; ++i) axes.push_back(a.rot.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(b.rot.col(i));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec3 c = a.rot.col(i).cross(b.rot.col(j));
      const double n = c.norm();
      if (n > 1e-9) axes.push_back(c / n);
    }
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec3& ax : axes) {
    double lo1, hi1, lo2, hi2;
    project_obb(a, ax, lo1, hi1);
    project_obb(b, ax, lo2, hi2);
    depth = std::min(depth, std::max(0.0, overlap(lo1, hi1, lo2, hi2)));
  }
  return depth;
}

double sd_capsule_capsule(const Capsule& a, const Capsule& b) {
  return segment_segment_distance(a.p0, a.p1, b.p0, b.p1) - a.radius - b.radius;
}

// Below this core separation the overlap branch takes over; the SAT depth is
// ~0 there, so the signed distance stays continuous across the switch.
constexpr double kCoreContact = 1e-7;

double sd_capsule_obb(const Capsule& c, const Obb& o) {
  const std::array<Vec3, 2> seg = {c.p0, c.p1};
  std::array<Vec3, 8> corners;
  obb_corners(o, corners);
  const double core = gjk_distance(seg.data(), 2, corners.data(), 8);
  if (core > kCoreContact) return core - c.radius;
  return -(sat_depth_segment_obb(c.p0, c.p1, o) + c.radius);
}

double sd_obb_obb(const Obb& a, const Obb& b) {
  std::array<Vec3, 8> ca, cb;
  obb_corners(a, ca);
  obb_corners(b, cb);
  const double core = gjk_distance(ca.data(), 8, cb.data(), 8);
  if (core > kCoreContact) return core;
  return -sat_depth_obb_obb(a, b);
}

}  // namespace

void validate_shape(const Shape& s) {
  if (std::holds_alternative<Capsule>(s)) {
    if (std::get<Capsule>(s).radius <= 0.0)
      throw std::invalid_argument("capsule radius must be positive");
    return;
  }
  const Obb& o = std::get<Obb>(s);
  if ((o.half.array() <= 0.0).any())
    throw std::invalid_argument("obb half extents must be positive");
  if ((o.rot.transpose() * o.rot - Mat3::Identity())
          .cwiseAbs()
          .maxCoeff() > 1e-12 ||
      o.rot.determinant() < 0.0)
    throw std::invalid_argument("obb rotation must be orthonormal");
}

double signed_distance(const Shape& a, const Shape& b) {
  if (std::holds_alternative<Capsule>(a)) {
    if (std::holds_alternative<Capsule>(b))
      return sd_capsule_capsule(std::get<Capsule>(a), std::get<Capsule>(b));
    return sd_capsule_obb(std::get<Capsule>(a), std::get<Obb>(b));
  }
  if (std::holds_alternative<Capsule>(b))
    return sd_capsule_obb(std::get<Capsule>(b), std::get<Obb>(a));
  return sd_obb_obb(std::get<Obb>(a), std::get<Obb>(b));
}

Shape transform_shape(const Eigen::Isometry3d& pose, const Shape& local) {
  if (std::holds_alternative<Capsule>(local)) {
    const Capsule& c = std::get<Capsule>(local);
    return Capsule{pose * c.p0, pose * c.p1, c.radius};
  }
  const Obb& o = std::get<Obb>(local);
  return Obb{pose * o.center, pose.linear() * o.rot, o.half};
}

CollisionWorld::CollisionWorld(std::vector<LinkTemplate> links,
                               std::vector<Shape> obstacles, int n_truck)
    : links_(std::move(links)), obstacles_(std::move(obstacles)),
      n_truck_(n_truck) {
  if (n_truck_ < 0 || n_truck_ > static_cast<int>(obstacles_.size()))
    throw std::invalid_argument("invalid truck obstacle count");
  for (const auto& l : links_) {
    validate_shape(l.local);
    if (l.link_id == 5) log_attached_ = true;
  }
  for (const auto& o : obstacles_) validate_shape(o);
}

CollisionWorld CollisionWorld::with_log(const Capsule& log_local,
                                        int jaw_joint) const {
  std::vector<LinkTemplate> links = links_;
  links.erase(std::remove_if(links.begin(), links.end(),
                             [](const LinkTemplate& l) { return l.link_id == 5; }),
              links.end());
  links.push_back(LinkTemplate{5, jaw_joint, log_local, false});
  return CollisionWorld(std::move(links), obstacles_, n_truck_);
}

std::vector<PosedLink> place_shapes(const CollisionWorld& world,
                                    const CraneModel& model,
                                    const Eigen::VectorXd& q_full) {
  const auto poses = frame_poses(model, q_full);

  int tele_coord = -1;
  for (const auto& j : model.joints())
    if (j.type == JointType::Prismatic) {
      tele_coord = j.coord;
      break;
    }

  std::vector<PosedLink> out;
  out.reserve(world.links().size());
  for (const auto& l : world.links()) {
    Shape local = l.local;
    if (l.telescopic) {
      if (tele_coord < 0)
        throw std::invalid_argument("telescopic link without prismatic joint");
      Capsule& c = std::get<Capsule>(local);
      Vec3 dir = c.p1 - c.p0;
      const double len = dir.norm();
      if (len > 0.0)
        c.p1 += (dir / len) * (model.telescope_ratio() * q_full[tele_coord]);
    }
    out.push_back(PosedLink{l.link_id, transform_shape(poses[l.joint_index], local)});
  }
  return out;
}

std::vector<PairDistance> world_signed_distances(const CollisionWorld& world,
                                                 const CraneModel& model,
                                                 const Eigen::VectorXd& q_full) {
  const auto posed = place_shapes(world, model, q_full);
  auto find = [&](int id) -> const PosedLink* {
    for (const auto& p : posed)
      if (p.link_id == id) return &p;
    return nullptr;
  };

  std::vector<PairDistance> out;
  for (int id : {2, 3, 4, 5}) {
    const PosedLink* link = find(id);
    if (!link) continue;
    for (int j = 0; j < static_cast<int>(world.obstacles().size()); ++j)
      out.push_back(
          PairDistance{id, j, true, signed_distance(link->shape, world.obstacles()[j])});
  }
  if (world.log_attached()) {
    const PosedLink* log = find(5);
    for (int id : {1, 2, 3}) {
      const PosedLink* link = find(id);
      if (log && link)
        out.push_back(
            PairDistance{5, id, false, signed_distance(log->shape, link->shape)});
    }
  }
  return out;
}

double min_clearance(const CollisionWorld& world, const CraneModel& model,
                     const Eigen::VectorXd& q_full) {
  return min_clearance(world_signed_distances(world, model, q_full));
}

}  // namespace craneplan
