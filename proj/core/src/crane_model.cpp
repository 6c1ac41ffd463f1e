#include "craneplan/crane_model.hpp"

#include <cmath>
#include <set>

namespace craneplan {

double CylinderGeom::displacement(double q) const {
  switch (kind) {
    case Kind::Linear:
      return gain * q;
    case Kind::Linkage:
      return std::sqrt(a * a + b * b - 2.0 * a * b * std::cos(q + phi0)) - d0;
  }
  return 0.0;
}

double CylinderGeom::derivative(double q) const {
  switch (kind) {
    case Kind::Linear:
      return gain;
    case Kind::Linkage: {
      const double len =
          std::sqrt(a * a + b * b - 2.0 * a * b * std::cos(q + phi0));
      return a * b * std::sin(q + phi0) / len;
    }
  }
  return 0.0;
}

double CylinderGeom::second_derivative(double q) const {
  switch (kind) {
    case Kind::Linear:
      return 0.0;
    case Kind::Linkage: {
      const double th = q + phi0;
      const double len = std::sqrt(a * a + b * b - 2.0 * a * b * std::cos(th));
      const double d1 = a * b * std::sin(th) / len;
      return a * b * std::cos(th) / len - d1 * d1 / len;
    }
  }
  return 0.0;
}

Eigen::MatrixXd DynamicsEval::full_mass() const {
  const auto n_A = D_A.rows();
  const auto n_P = D_P.rows();
  Eigen::MatrixXd D(n_A + n_P, n_A + n_P);
  D.topLeftCorner(n_A, n_A) = D_A;
  D.topRightCorner(n_A, n_P) = D_M.transpose();
  D.bottomLeftCorner(n_P, n_A) = D_M;
  D.bottomRightCorner(n_P, n_P) = D_P;
  return D;
}

Eigen::MatrixXd DynamicsEval::full_coriolis() const {
  Eigen::MatrixXd C(C_A.rows() + C_P.rows(), C_A.cols());
  C << C_A, C_P;
  return C;
}

Eigen::VectorXd DynamicsEval::full_gravity() const {
  Eigen::VectorXd g(g_A.size() + g_P.size());
  g << g_A, g_P;
  return g;
}

namespace {

void validate(const CraneModelParams& p) {
  const int n = static_cast<int>(p.joints.size());
  if (n == 0) throw std::invalid_argument("model has no joints");
  if (p.bodies.size() != p.joints.size())
    throw std::invalid_argument("one body per joint required");
  if (p.n_actuated < 1 || p.n_actuated > n)
    throw std::invalid_argument("invalid actuated count");
  if (static_cast<int>(p.cylinders.size()) != p.n_actuated)
    throw std::invalid_argument("one cylinder per actuated coordinate required");

  std::set<int> coords;
  for (const auto& j : p.joints) {
    if (j.coord < 0 || j.coord >= n)
      throw std::invalid_argument("joint coordinate index out of range");
    if (!coords.insert(j.coord).second)
      throw std::invalid_argument("duplicate joint coordinate index");
    if (std::abs(j.axis.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("joint axis must be a unit vector");
  }

  const auto& lim = p.limits;
  if (lim.q_min.size() != n || lim.q_max.size() != n)
    throw std::invalid_argument("q limits must have length n");
  if (lim.qd_max.size() != p.n_actuated || lim.u_max.size() != p.n_actuated)
    throw std::invalid_argument("qd/u limits must have length n_A");
  if (((lim.q_max - lim.q_min).array() <= 0.0).any())
    throw std::invalid_argument("q_min < q_max required componentwise");
  if ((lim.qd_max.array() <= 0.0).any() || (lim.u_max.array() <= 0.0).any())
    throw std::invalid_argument("qd_max and u_max must be positive");
  if (lim.flow_max <= 0.0) throw std::invalid_argument("Q_max must be positive");

  for (const auto& c : p.cylinders) {
    if (c.area_pos <= 0.0 || c.area_neg <= 0.0)
      throw std::invalid_argument("cylinder areas must be positive");
    if (c.kind == CylinderGeom::Kind::Linkage && (c.a <= 0.0 || c.b <= 0.0))
      throw std::invalid_argument("linkage cylinder needs positive arm lengths");
  }
  if (p.telescope_ratio < 1.0)
    throw std::invalid_argument("telescope ratio must be >= 1");
}

}  // namespace

CraneModel::CraneModel(CraneModelParams params) : params_(std::move(params)) {
  validate(params_);
}

CraneModel CraneModel::with_payload(const PayloadParams& payload) const {
  if (params_.jaw_joint < 0 || params_.jaw_joint >= n())
    throw std::invalid_argument("model has no jaw body to merge a payload into");
  if (payload.mass <= 0.0)
    throw std::invalid_argument("payload mass must be positive");

  CraneModelParams p = params_;
  BodyDesc& jaw = p.bodies[p.jaw_joint];

  const double m0 = jaw.mass;
  const double m1 = payload.mass;
  const double m = m0 + m1;
  const Vec3 com = (m0 * jaw.com + m1 * payload.com) / m;

  auto shift = [](double mass, const Vec3& r) -> Mat3 {
    // parallel axis term for moving an inertia by r
    return mass * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
  };
  const Mat3 inertia = jaw.inertia + shift(m0, jaw.com - com) +
                       payload.inertia + shift(m1, payload.com - com);

  jaw.mass = m;
  jaw.com = com;
  jaw.inertia = inertia;
  return CraneModel(std::move(p));
}

double pump_flow(const CraneModel& model, const Eigen::VectorXd& ddot) {
  if (ddot.size() != model.n_actuated())
    throw std::invalid_argument("pump_flow: ddot dimension mismatch");
  double q = 0.0;
  for (int l = 0; l < ddot.size(); ++l) {
    const auto& cyl = model.cylinders()[l];
    const double area = ddot[l] >= 0.0 ? cyl.area_pos : cyl.area_neg;
    q += area * std::abs(ddot[l]);
  }
  return q;
}

std::pair<CylinderState, Eigen::VectorXd> cylinder_state(
    const CraneModel& model, const Eigen::VectorXd& q_A,
    const Eigen::VectorXd& qd_A) {
  const int n_A = model.n_actuated();
  if (q_A.size() != n_A || qd_A.size() != n_A)
    throw std::invalid_argument("cylinder_state: dimension mismatch");

  CylinderState st;
  st.d.resize(n_A);
  st.J_C = Eigen::MatrixXd::Zero(n_A, n_A);
  for (int l = 0; l < n_A; ++l) {
    const auto& cyl = model.cylinders()[l];
    st.d[l] = cyl.displacement(q_A[l]);
    st.J_C(l, l) = cyl.derivative(q_A[l]);
  }
  Eigen::VectorXd ddot = st.J_C * qd_A;
  return {std::move(st), std::move(ddot)};
}

}  // namespace craneplan
