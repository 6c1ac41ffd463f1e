#include <doctest.h>

#include "craneplan/collision.hpp"
#include "craneplan/model_io.hpp"
#include "test_util.hpp"

using namespace craneplan;
using namespace craneplan::testutil;

namespace {

// ---- test-side oracles, independent of the library's distance routines ----

double point_box_distance(const Vec3& p, const Obb& box) {
  const Vec3 local = box.rot.transpose() * (p - box.center);
  Vec3 clamped;
  for (int i = 0; i < 3; ++i)
    clamped[i] = std::clamp(local[i], -box.half[i], box.half[i]);
  return (local - clamped).norm();
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double den = ab.squaredNorm();
  const double t = den > 0 ? std::clamp((p - a).dot(ab) / den, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double point_shape_distance(const Vec3& p, const Shape& s) {
  if (std::holds_alternative<Capsule>(s)) {
    const Capsule& c = std::get<Capsule>(s);
    return point_segment_distance(p, c.p0, c.p1) - c.radius;
  }
  return point_box_distance(p, std::get<Obb>(s));
}

// Surface-sampling distance for separated pairs: densely sample the core of
// shape a (segment or box surface), take point distances to b, then shrink a
// local refinement window around the best sample.
double sampling_distance(const Shape& a, const Shape& b) {
  auto core_point = [&](double u, double v, double w) -> Vec3 {
    if (std::holds_alternative<Capsule>(a)) {
      const Capsule& c = std::get<Capsule>(a);
      return c.p0 + u * (c.p1 - c.p0);
    }
    const Obb& o = std::get<Obb>(a);
    // Map (u, v, w) in [0,1]^3 to the box surface by snapping the largest
    // coordinate to its face.
    Vec3 t(2 * u - 1, 2 * v - 1, 2 * w - 1);
    int imax = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(t[i]) > std::abs(t[imax])) imax = i;
    t[imax] = t[imax] >= 0 ? 1.0 : -1.0;
    return o.center + o.rot * t.cwiseProduct(o.half);
  };
  const double r_a =
      std::holds_alternative<Capsule>(a) ? std::get<Capsule>(a).radius : 0.0;

  double best = std::numeric_limits<double>::infinity();
  Vec3 best_uvw = Vec3::Zero();
  const int grid = 12;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j)
      for (int k = 0; k <= grid; ++k) {
        const Vec3 uvw(static_cast<double>(i) / grid,
                       static_cast<double>(j) / grid,
                       static_cast<double>(k) / grid);
        const double d =
            point_shape_distance(core_point(uvw[0], uvw[1], uvw[2]), b);
        if (d < best) {
          best = d;
          best_uvw = uvw;
        }
      }
  double radius = 1.0 / grid;
  std::mt19937 local(42);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int round = 0; round < 60; ++round) {
    for (int s = 0; s < 24; ++s) {
      Vec3 uvw = best_uvw + radius * Vec3(unit(local), unit(local), unit(local));
      for (int i = 0; i < 3; ++i) uvw[i] = std::clamp(uvw[i], 0.0, 1.0);
      const double d =
          point_shape_distance(core_point(uvw[0], uvw[1], uvw[2]), b);
      if (d < best) {
        best = d;
        best_uvw = uvw;
      }
    }
    radius *= 0.75;
  }
  return best - r_a;
}

double support(const Shape& s, const Vec3& d) {
  if (std::holds_alternative<Capsule>(s)) {
    const Capsule& c = std::get<Capsule>(s);
    return std::max(c.p0.dot(d), c.p1.dot(d)) + c.radius;
  }
  const Obb& o = std::get<Obb>(s);
  return o.center.dot(d) + o.half.x() * std::abs(o.rot.col(0).dot(d)) +
         o.half.y() * std::abs(o.rot.col(1).dot(d)) +
         o.half.z() * std::abs(o.rot.col(2).dot(d));
}

Vec3 shape_center(const Shape& s) {
  if (std::holds_alternative<Capsule>(s))
    return 0.5 * (std::get<Capsule>(s).p0 + std::get<Capsule>(s).p1);
  return std::get<Obb>(s).center;
}

// Closest point of the solid shape to p (clamp projections).
Vec3 project_onto(const Shape& s, const Vec3& p) {
  if (std::holds_alternative<Obb>(s)) {
    const Obb& o = std::get<Obb>(s);
    Vec3 local = o.rot.transpose() * (p - o.center);
    for (int i = 0; i < 3; ++i)
      local[i] = std::clamp(local[i], -o.half[i], o.half[i]);
    return o.center + o.rot * local;
  }
  const Capsule& c = std::get<Capsule>(s);
  const Vec3 ab = c.p1 - c.p0;
  const double den = ab.squaredNorm();
  const double t = den > 0 ? std::clamp((p - c.p0).dot(ab) / den, 0.0, 1.0) : 0.0;
  const Vec3 seg = c.p0 + t * ab;
  const Vec3 off = p - seg;
  const double n = off.norm();
  if (n <= c.radius) return p;
  return seg + (c.radius / n) * off;
}

// Separation distance certified by matching bounds: alternating clamp
// projections give a witness pair (upper bound); the support gap along the
// witness direction gives the lower bound.
double support_function_distance(const Shape& a, const Shape& b) {
  auto gap = [&](const Vec3& d) { return -support(a, -d) - support(b, d); };

  Vec3 pa = shape_center(a);
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 20000; ++it) {
    const Vec3 pb = project_onto(b, pa);
    pa = project_onto(a, pb);
    if (it % 4 != 0) continue;
    const Vec3 diff = pa - pb;  // points from b toward a
    const double d = diff.norm();
    ub = std::min(ub, d);
    if (d > 1e-15) lb = std::max(lb, gap(diff / d));
    if (ub - lb < 1e-9) break;
  }
  return 0.5 * (ub + lb);
}

// Separation test by alternating projections with the support-gap
// certificate; resolves margins far below the 1e-3 oracle tolerance.
bool boolean_intersects(const Shape& a, const Shape& b) {
  auto gap = [&](const Vec3& d) { return -support(a, -d) - support(b, d); };
  Vec3 pa = shape_center(a);
  for (int it = 0; it < 400; ++it) {
    const Vec3 pb = project_onto(b, pa);
    pa = project_onto(a, pb);
    const Vec3 diff = pa - pb;
    const double d = diff.norm();
    if (d < 1e-7) return true;
    if (gap(diff / d) > 0.0) return false;
  }
  return true;
}

// Penetration oracle. Translating `a` by t*d separates the pair exactly when
// the support gap along some hyperplane turns positive; along the hyperplane
// normal to d itself the required translation is -gap(d), and minimizing over
// unit d yields the minimal translation distance. Candidate directions are
// the separating axes (both signs), their cross products, and random samples,
// followed by a shrinking-cap refinement.
double translation_search_penetration(const Shape& a, const Shape& b) {
  auto gap = [&](const Vec3& d) { return -support(a, -d) - support(b, d); };

  std::vector<Vec3> dirs;
  auto push_dir = [&](const Vec3& d) {
    if (d.norm() > 1e-9) {
      dirs.push_back(d.normalized());
      dirs.push_back(-d.normalized());
    }
  };
  auto add_axes = [&](const Shape& s) {
    if (std::holds_alternative<Obb>(s)) {
      const Obb& o = std::get<Obb>(s);
      for (int i = 0; i < 3; ++i) push_dir(o.rot.col(i));
    } else {
      const Capsule& c = std::get<Capsule>(s);
      push_dir(c.p1 - c.p0);
    }
  };
  add_axes(a);
  add_axes(b);
  const size_t base = dirs.size();
  for (size_t i = 0; i < base; i += 2)
    for (size_t j = i + 2; j < base; j += 2) push_dir(dirs[i].cross(dirs[j]));
  push_dir(shape_center(b) - shape_center(a));
  std::mt19937 local(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 512; ++s)
    push_dir(Vec3(gauss(local), gauss(local), gauss(local)));

  double best = -std::numeric_limits<double>::infinity();
  Vec3 best_dir = Vec3::UnitX();
  for (const Vec3& d : dirs) {
    const double g = gap(d);
    if (g > best) {
      best = g;
      best_dir = d;
    }
  }
  double radius = 0.5;
  for (int round = 0; round < 60; ++round) {
    const double before = best;
    for (int s = 0; s < 48; ++s) {
      Vec3 d = best_dir + radius * Vec3(gauss(local), gauss(local), gauss(local));
      if (d.norm() < 1e-12) continue;
      d.normalize();
      const double g = gap(d);
      if (g > best) {
        best = g;
        best_dir = d;
      }
    }
    if (best <= before + 1e-15) radius *= 0.7;
  }
  return -best;
}

Shape random_shape() {
  if (uniform(0, 1) < 0.5) {
    Capsule c;
    c.p0 = Vec3(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    c.p1 = c.p0 + Vec3(uniform(-1.5, 1.5), uniform(-1.5, 1.5), uniform(-1.5, 1.5));
    c.radius = uniform(0.05, 0.6);
    return c;
  }
  Obb o;
  o.center = Vec3(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
  o.rot = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
  o.half = Vec3(uniform(0.1, 1.0), uniform(0.1, 1.0), uniform(0.1, 1.0));
  return o;
}

}  // namespace

TEST_CASE("analytic sphere and box cases") {
  // Two spheres of radius 1 with centers 3 apart.
  Capsule s1{{0, 0, 0}, {0, 0, 0}, 1.0};
  Capsule s2{{3, 0, 0}, {3, 0, 0}, 1.0};
  CHECK(signed_distance(s1, s2) == doctest::Approx(1.0).epsilon(1e-12));

  // Identical coincident unit boxes: two half-extents of penetration.
  Obb b1{Vec3::Zero(), Mat3::Identity(), {1, 1, 1}};
  CHECK(signed_distance(b1, b1) == doctest::Approx(-2.0).epsilon(1e-12));

  // Capsule beside a box face.
  Obb b2{Vec3::Zero(), Mat3::Identity(), {1, 1, 1}};
  Capsule c{{3, -1, 0}, {3, 1, 0}, 0.5};
  CHECK(signed_distance(c, b2) == doctest::Approx(1.5).epsilon(1e-9));

  // Small sphere centered inside the box.
  Capsule s3{{0.2, 0, 0}, {0.2, 0, 0}, 0.1};
  CHECK(signed_distance(s3, b2) == doctest::Approx(-(0.8 + 0.1)).epsilon(1e-9));
}

TEST_CASE("signed distance properties") {
  for (int trial = 0; trial < 300; ++trial) {
    const Shape a = random_shape();
    const Shape b = random_shape();
    const double sd = signed_distance(a, b);

    CHECK(signed_distance(b, a) == doctest::Approx(sd).epsilon(1e-12));

    const Vec3 t(uniform(-5, 5), uniform(-5, 5), uniform(-5, 5));
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.translation() = t;
    const double sd_t =
        signed_distance(transform_shape(T, a), transform_shape(T, b));
    CHECK(std::abs(sd_t - sd) < 1e-9);

    // Uniform scaling about the origin scales the signed distance.
    const double alpha = uniform(0.3, 3.0);
    auto scale = [&](const Shape& s) -> Shape {
      if (std::holds_alternative<Capsule>(s)) {
        const Capsule& cc = std::get<Capsule>(s);
        return Capsule{alpha * cc.p0, alpha * cc.p1, alpha * cc.radius};
      }
      const Obb& o = std::get<Obb>(s);
      return Obb{alpha * o.center, o.rot, alpha * o.half};
    };
    CHECK(std::abs(signed_distance(scale(a), scale(b)) - alpha * sd) <
          1e-7 * std::max(1.0, std::abs(alpha * sd)));
  }
}

TEST_CASE("random pairs against the sampling oracle") {
  int separated = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const Shape a = random_shape();
    const Shape b = random_shape();
    const double sd = signed_distance(a, b);
    if (sd > 1e-3) {
      ++separated;
      const double oracle = sampling_distance(a, b);
      CHECK(std::abs(sd - oracle) < 1e-3);
    }
  }
  CHECK(separated > 200);

  // Overlapping pairs constructed by pulling the second shape close.
  int penetrating = 0;
  for (int trial = 0; trial < 300 && penetrating < 50; ++trial) {
    const Shape a = random_shape();
    Shape b = random_shape();
    const Vec3 shift =
        shape_center(a) - shape_center(b) +
        Vec3(uniform(-0.4, 0.4), uniform(-0.4, 0.4), uniform(-0.4, 0.4));
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.translation() = shift;
    b = transform_shape(T, b);
    const double sd = signed_distance(a, b);
    if (sd >= -1e-3) continue;
    ++penetrating;
    const double oracle = translation_search_penetration(a, b);
    CHECK(std::abs(-sd - oracle) < 1e-3);
  }
  CHECK(penetrating == 50);
}

TEST_CASE("separated pairs match the support-function oracle") {
  int checked = 0;
  for (int trial = 0; trial < 600 && checked < 200; ++trial) {
    const Shape a = random_shape();
    const Shape b = random_shape();
    const double sd = signed_distance(a, b);
    if (sd <= 1e-4) continue;
    ++checked;
    const double oracle = support_function_distance(a, b);
    CHECK(std::abs(sd - oracle) < 1e-6);
  }
  CHECK(checked >= 200);
}

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(validate_shape(Capsule{{0, 0, 0}, {1, 0, 0}, 0.0}),
                  std::invalid_argument);
  Obb bad{Vec3::Zero(), Mat3::Identity() * 1.1, {1, 1, 1}};
  CHECK_THROWS_AS(validate_shape(bad), std::invalid_argument);
  CHECK_THROWS_AS(validate_shape(Obb{Vec3::Zero(), Mat3::Identity(), {0, 1, 1}}),
                  std::invalid_argument);
}

TEST_CASE("link placement by forward kinematics") {
  const ModelBundle bundle = desk_crane();
  const CraneModel& model = bundle.model;
  CollisionWorld world(bundle.links, {}, 0);

  SUBCASE("zero pose matches the composed fixed offsets") {
    const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(7);
    const auto posed = place_shapes(world, model, q0);

    // Chain translations at q = 0: slew (0,0,0.5), boom (0.3,0,2.2),
    // stick (4.3,0,2.2), telescope end (6.9,0,2.2), swing (7.8,0,2.2),
    // rotator (7.8,0,1.85).
    const Capsule& boom = std::get<Capsule>(posed[1].shape);
    CHECK((boom.p0 - Vec3(0.3, 0, 2.2)).norm() < 1e-12);
    CHECK((boom.p1 - Vec3(4.3, 0, 2.2)).norm() < 1e-12);

    const Capsule& stick = std::get<Capsule>(posed[2].shape);
    CHECK((stick.p0 - Vec3(4.3, 0, 2.2)).norm() < 1e-12);
    CHECK((stick.p1 - Vec3(7.8, 0, 2.2)).norm() < 1e-12);

    const Obb& jaw = std::get<Obb>(posed[3].shape);
    CHECK((jaw.center - Vec3(7.8, 0, 2.2 - 0.35 - 0.5)).norm() < 1e-12);
  }

  SUBCASE("slewing rotates every shape rigidly") {
    Eigen::VectorXd q = random_q(model);
    Eigen::VectorXd q_rot = q;
    const double delta = 0.9;
    q_rot[0] += delta;
    const auto posed0 = place_shapes(world, model, q);
    const auto posed1 = place_shapes(world, model, q_rot);
    const Mat3 R = Eigen::AngleAxisd(delta, Vec3::UnitZ()).toRotationMatrix();

    for (size_t i = 0; i < posed0.size(); ++i) {
      if (std::holds_alternative<Capsule>(posed0[i].shape)) {
        const Capsule& c0 = std::get<Capsule>(posed0[i].shape);
        const Capsule& c1 = std::get<Capsule>(posed1[i].shape);
        CHECK((c1.p0 - R * c0.p0).norm() < 1e-9);
        CHECK((c1.p1 - R * c0.p1).norm() < 1e-9);
      } else {
        const Obb& o0 = std::get<Obb>(posed0[i].shape);
        const Obb& o1 = std::get<Obb>(posed1[i].shape);
        CHECK((o1.center - R * o0.center).norm() < 1e-9);
        CHECK((o1.rot - R * o0.rot).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }

  SUBCASE("telescope extension lengthens the stick capsule") {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(7);
    const double delta = 0.8;
    const auto posed0 = place_shapes(world, model, q);
    q[3] += delta;
    const auto posed1 = place_shapes(world, model, q);

    const Capsule& s0 = std::get<Capsule>(posed0[2].shape);
    const Capsule& s1 = std::get<Capsule>(posed1[2].shape);
    const double len0 = (s0.p1 - s0.p0).norm();
    const double len1 = (s1.p1 - s1.p0).norm();
    CHECK(len1 - len0 ==
          doctest::Approx(model.telescope_ratio() * delta).epsilon(1e-9));

    // Jaw translates along the stick axis by the same extension.
    const Obb& j0 = std::get<Obb>(posed0[3].shape);
    const Obb& j1 = std::get<Obb>(posed1[3].shape);
    CHECK((j1.center - j0.center - Vec3(model.telescope_ratio() * delta, 0, 0))
              .norm() < 1e-9);
  }
}

TEST_CASE("world distance pairs") {
  const ModelBundle bundle = desk_crane();
  const CraneModel& model = bundle.model;

  SUBCASE("no obstacles and no log yields an empty pair set") {
    CollisionWorld world(bundle.links, {}, 0);
    const auto dists =
        world_signed_distances(world, model, Eigen::VectorXd::Zero(7));
    CHECK(dists.empty());
    CHECK(min_clearance(dists) == std::numeric_limits<double>::infinity());
  }

  SUBCASE("pair set composition") {
    std::vector<Shape> obstacles = {
        Obb{{4, 0, 1}, Mat3::Identity(), {0.5, 0.5, 0.5}},
        Capsule{{2, 2, 0}, {2, 2, 2}, 0.3}};
    CollisionWorld world(bundle.links, obstacles, 1);
    // Links 2..4 x two obstacles (no log attached; L1 never vs obstacles).
    auto dists = world_signed_distances(world, model, Eigen::VectorXd::Zero(7));
    CHECK(dists.size() == 6);

    CollisionWorld with_log =
        world.with_log(Capsule{{-1.8, 0, -0.75}, {1.8, 0, -0.75}, 0.18},
                       model.jaw_joint());
    dists = world_signed_distances(with_log, model, Eigen::VectorXd::Zero(7));
    // Links 2..5 x two obstacles + log vs links 1..3.
    CHECK(dists.size() == 11);
    int log_pairs = 0;
    for (const auto& d : dists)
      if (!d.vs_obstacle) {
        CHECK(d.link_id == 5);
        ++log_pairs;
      }
    CHECK(log_pairs == 3);
  }

  SUBCASE("posing inside a wall reports penetration") {
    std::vector<Shape> obstacles = {
        Obb{{6.5, 0, 2.0}, Mat3::Identity(), {0.4, 3.0, 2.0}}};
    CollisionWorld world(bundle.links, obstacles, 0);
    const auto dists =
        world_signed_distances(world, model, Eigen::VectorXd::Zero(7));
    CHECK(min_clearance(dists) < 0.0);
  }

  SUBCASE("clearance is continuous along a configuration segment") {
    std::vector<Shape> obstacles = {
        Obb{{5.0, 2.0, 1.5}, Mat3::Identity(), {0.6, 0.6, 1.5}},
        Obb{{6.0, -2.5, 2.5}, Mat3::Identity(), {1.0, 0.5, 0.4}}};
    CollisionWorld world(bundle.links, obstacles, 0);

    Eigen::VectorXd qa = Eigen::VectorXd::Zero(7);
    Eigen::VectorXd qb(7);
    qb << 1.2, -0.4, -0.8, 0.9, 0.5, 0.3, -0.2;

    // Lipschitz estimate at coarse resolution, verified at fine resolution.
    auto clearance_at = [&](double t) {
      return min_clearance(world, model, qa + t * (qb - qa));
    };
    double lip = 0.0;
    double prev = clearance_at(0.0);
    for (int k = 1; k <= 100; ++k) {
      const double cur = clearance_at(k / 100.0);
      lip = std::max(lip, std::abs(cur - prev) / 0.01);
      prev = cur;
    }
    prev = clearance_at(0.0);
    for (int k = 1; k <= 1000; ++k) {
      const double cur = clearance_at(k / 1000.0);
      CHECK(std::abs(cur - prev) <= 3.0 * lip * 0.001 + 1e-6);
      prev = cur;
    }
  }
}
