#pragma once

#include <string>

#include "craneplan/collision.hpp"
#include "craneplan/crane_model.hpp"

namespace craneplan {

/// A crane model together with its link collision templates.
struct ModelBundle {
  CraneModel model;
  std::vector<LinkTemplate> links;
  std::string name;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Load / save the versioned model parameter file (JSON, SI units, radians).
ModelBundle load_model(const std::string& path);
void save_model(const ModelBundle& bundle, const std::string& path);

/// Built-in parameter sets.
///
/// The synthetic "desk crane": a 5-actuated / 2-passive chain with ~8 m
/// reach, a shared pump sized so the flow limit binds on coordinated
/// multi-joint motion, and link collision templates. The published machine
/// parameters are proprietary, so these values are stand-ins with realistic
/// magnitudes; the cylinder attachment geometries are equally synthetic.
ModelBundle desk_crane();

/// Reduced planar model: one actuated and one passive revolute joint in the
/// x-z plane. Used by the dynamics oracles.
CraneModel planar_test_model();

}  // namespace craneplan
