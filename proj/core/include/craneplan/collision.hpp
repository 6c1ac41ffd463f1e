#pragma once

#include <limits>
#include <variant>
#include <vector>

#include "craneplan/crane_model.hpp"

namespace craneplan {

/// Line segment inflated by a radius; p0 == p1 degenerates to a sphere.
struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
};

/// Oriented bounding box: center, orthonormal rotation, positive half extents.
struct Obb {
  Vec3 center = Vec3::Zero();
  Mat3 rot = Mat3::Identity();
  Vec3 half = Vec3::Zero();
};

using Shape = std::variant<Capsule, Obb>;

/// Throws std::invalid_argument when the shape invariants are violated
/// (radius/extents positive, rotation orthonormal to 1e-12).
void validate_shape(const Shape& s);

/// Signed distance between two shapes: separation distance when positive,
/// negated minimal-translation penetration depth when overlapping.
double signed_distance(const Shape& a, const Shape& b);

Shape transform_shape(const Eigen::Isometry3d& pose, const Shape& local);

/// Crane link collision template bound to a joint frame. Link ids follow the
/// chain: 1 column, 2 boom, 3 stick (length grows with the telescope
/// coordinate), 4 jaw, 5 carried log.
struct LinkTemplate {
  int link_id = 0;
  int joint_index = 0;  // chain index of the binding frame
  Shape local;
  bool telescopic = false;
};

struct PosedLink {
  int link_id = 0;
  Shape shape;
};

struct PairDistance {
  int link_id = 0;     // moving link
  int other = 0;       // obstacle index, or link id for log-crane pairs
  bool vs_obstacle = true;
  double sd = 0.0;
};

/// Static obstacle set plus the link templates; immutable once built.
class CollisionWorld {
 public:
  CollisionWorld(std::vector<LinkTemplate> links, std::vector<Shape> obstacles,
                 int n_truck);

  /// World with the log template attached (enables the log collision pairs).
  CollisionWorld with_log(const Capsule& log_local, int jaw_joint) const;

  const std::vector<LinkTemplate>& links() const { return links_; }
  const std::vector<Shape>& obstacles() const { return obstacles_; }
  int n_truck() const { return n_truck_; }
  int n_env() const { return static_cast<int>(obstacles_.size()) - n_truck_; }
  bool log_attached() const { return log_attached_; }

 private:
  std::vector<LinkTemplate> links_;
  std::vector<Shape> obstacles_;
  int n_truck_ = 0;
  bool log_attached_ = false;
};

/// Links posed by forward kinematics at the full configuration q.
std::vector<PosedLink> place_shapes(const CollisionWorld& world,
                                    const CraneModel& model,
                                    const Eigen::VectorXd& q_full);

/// Signed distances for every active collision pair: links {2,3,4,5} against
/// all obstacles, plus (5, {1,2,3}) when a log is attached.
std::vector<PairDistance> world_signed_distances(const CollisionWorld& world,
                                                 const CraneModel& model,
                                                 const Eigen::VectorXd& q_full);

inline double min_clearance(const std::vector<PairDistance>& dists) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& d : dists) m = std::min(m, d.sd);
  return m;
}

double min_clearance(const CollisionWorld& world, const CraneModel& model,
                     const Eigen::VectorXd& q_full);

}  // namespace craneplan
