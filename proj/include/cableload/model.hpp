#pragma once

// Parameter, state and input types for n quadrotors carrying a rigid payload
// through cables made of serially connected rigid links.
//
// Conventions: e3 points down along gravity. Link direction q_ij points from
// the quadrotor toward the payload; link j = 1 is the one next to the
// quadrotor and link j = n_i ends at the payload attachment point.

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "cableload/errors.hpp"
#include "cableload/manifold.hpp"

namespace cableload {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct LinkParams {
  double mass = 0.0;    // kg
  double length = 0.0;  // m
};

struct QuadrotorParams {
  double mass = 0.0;                  // kg
  Mat3 inertia = Mat3::Identity();    // kg m^2, body frame
  Vec3 attachment = Vec3::Zero();     // m, payload body frame
  std::vector<LinkParams> links;
};

struct SystemParams {
  double payload_mass = 0.0;               // kg
  Mat3 payload_inertia = Mat3::Identity();  // kg m^2, body frame
  double gravity = 9.81;                   // m/s^2
  std::vector<QuadrotorParams> quadrotors;

  std::size_t num_quadrotors() const { return quadrotors.size(); }
  std::size_t num_links() const {
    std::size_t n = 0;
    for (const auto& q : quadrotors) n += q.links.size();
    return n;
  }
  /// Size of the stacked acceleration vector [x0'', Omega0', q''...].
  std::size_t full_dim() const { return 6 + 3 * num_links(); }
  /// Size of the reduced linearized configuration [dx0, eta0, C^T xi...].
  std::size_t reduced_dim() const { return 6 + 2 * num_links(); }
};

namespace detail {
inline bool is_spd(const Mat3& J) {
  if ((J - J.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, J.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<Mat3> llt(J);
  return llt.info() == Eigen::Success;
}
}  // namespace detail

/// Throws InvalidParams naming the first violated field.
inline void validate(const SystemParams& p) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidParams, field + ": " + why);
  };
  if (!(p.payload_mass > 0.0)) fail("payload.mass", "must be positive");
  if (!detail::is_spd(p.payload_inertia)) fail("payload.inertia", "must be symmetric positive definite");
  if (!(p.gravity > 0.0)) fail("gravity", "must be positive");
  if (p.quadrotors.empty()) fail("quadrotors", "need at least one quadrotor");
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& q = p.quadrotors[i];
    const std::string base = "quadrotors[" + std::to_string(i) + "]";
    if (!(q.mass > 0.0)) fail(base + ".mass", "must be positive");
    if (!detail::is_spd(q.inertia)) fail(base + ".inertia", "must be symmetric positive definite");
    if (q.links.empty()) fail(base + ".links", "need at least one link");
    for (std::size_t j = 0; j < q.links.size(); ++j) {
      const std::string lb = base + ".links[" + std::to_string(j) + "]";
      if (!(q.links[j].mass > 0.0)) fail(lb + ".mass", "must be positive");
      if (!(q.links[j].length > 0.0)) fail(lb + ".length", "must be positive");
    }
  }
}

struct DerivedMasses {
  double total = 0.0;                       // M_T
  std::vector<double> quad_total;           // M_iT
  std::vector<std::vector<double>> above;   // M_0ij: quadrotor plus links a < j
  Mat3 payload_inertia_bar = Mat3::Zero();  // J0 - sum M_iT hat(rho_i)^2
};

inline DerivedMasses derived_masses(const SystemParams& p) {
  DerivedMasses d;
  d.total = p.payload_mass;
  d.payload_inertia_bar = p.payload_inertia;
  for (const auto& q : p.quadrotors) {
    double quad_total = q.mass;
    std::vector<double> above;
    above.reserve(q.links.size());
    double running = q.mass;
    for (const auto& link : q.links) {
      above.push_back(running);
      running += link.mass;
      quad_total += link.mass;
    }
    d.quad_total.push_back(quad_total);
    d.above.push_back(std::move(above));
    d.total += quad_total;
    const Mat3 rh = hat(q.attachment);
    d.payload_inertia_bar -= quad_total * rh * rh;
  }
  return d;
}

struct LinkState {
  UnitVector q;                      // direction, quadrotor -> payload
  Vec3 omega = Vec3::Zero();         // rad/s, inertial, q . omega = 0
};

struct QuadrotorState {
  Rotation R;
  Vec3 Omega = Vec3::Zero();  // rad/s, body frame
  std::vector<LinkState> links;
};

struct SystemState {
  Vec3 x0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  Rotation R0;
  Vec3 Omega0 = Vec3::Zero();  // body frame
  std::vector<QuadrotorState> quadrotors;
};

struct ControlInput {
  std::vector<double> thrust;  // f_i, N
  std::vector<Vec3> moment;    // M_i, N m, body frame

  static ControlInput zero(std::size_t n) {
    return ControlInput{std::vector<double>(n, 0.0), std::vector<Vec3>(n, Vec3::Zero())};
  }
};

/// Checks shape against params plus manifold invariants of every component.
inline void validate(const SystemParams& p, const SystemState& s, double tol = kOrthTol) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidState, what); };
  if (s.quadrotors.size() != p.quadrotors.size()) fail("quadrotor count mismatch");
  auto check_rot = [&](const Rotation& R, const std::string& name) {
    const Mat3& m = R.matrix();
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(orth <= tol) || !(std::abs(m.determinant() - 1.0) <= tol)) fail(name + " is not a rotation");
  };
  check_rot(s.R0, "R0");
  for (std::size_t i = 0; i < s.quadrotors.size(); ++i) {
    const auto& qs = s.quadrotors[i];
    check_rot(qs.R, "R[" + std::to_string(i) + "]");
    if (qs.links.size() != p.quadrotors[i].links.size()) {
      fail("link count mismatch on quadrotor " + std::to_string(i));
    }
    for (std::size_t j = 0; j < qs.links.size(); ++j) {
      const auto& l = qs.links[j];
      const std::string name = "link[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (!(std::abs(l.q.vector().norm() - 1.0) <= kUnitTol)) fail(name + " direction not unit");
      if (!(std::abs(l.q.vector().dot(l.omega)) <= kTangentTol)) fail(name + " omega not tangent");
    }
  }
}

/// Hanging equilibrium: R0 = I, every link along e3, quadrotors level, at rest.
inline SystemState hanging_state(const SystemParams& p, const Vec3& x0) {
  SystemState s;
  s.x0 = x0;
  for (const auto& q : p.quadrotors) {
    QuadrotorState qs;
    qs.links.assign(q.links.size(), LinkState{UnitVector::unchecked(e3()), Vec3::Zero()});
    s.quadrotors.push_back(std::move(qs));
  }
  return s;
}

inline void check_index(const SystemParams& p, std::size_t i) {
  if (i >= p.quadrotors.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "quadrotor index " + std::to_string(i));
  }
}

inline void check_index(const SystemParams& p, std::size_t i, std::size_t j) {
  check_index(p, i);
  if (j >= p.quadrotors[i].links.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "link index " + std::to_string(j) + " on quadrotor " + std::to_string(i));
  }
}

}  // namespace cableload
