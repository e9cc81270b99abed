#pragma once

// Physical parameters and initial states of the two reference scenarios.

#include <cmath>
#include <cstddef>
#include <vector>

#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload {

/// Uniform-density box, dimensions along body axes 1, 2, 3.
inline Mat3 box_inertia(double mass, double d1, double d2, double d3) {
  return (mass / 12.0 * Vec3(d2 * d2 + d3 * d3, d1 * d1 + d3 * d3, d1 * d1 + d2 * d2)).asDiagonal();
}

inline std::vector<Vec3> reference_attachments() {
  return {Vec3(0.3, -0.4, -0.1), Vec3(0.3, 0.4, -0.1), Vec3(-0.3, -0.4, -0.1), Vec3(-0.3, 0.4, -0.1)};
}

namespace detail {
inline SystemParams reference_params(double payload_mass, const Mat3& payload_inertia) {
  SystemParams p;
  p.payload_mass = payload_mass;
  p.payload_inertia = payload_inertia;
  p.gravity = 9.81;
  for (const Vec3& rho : reference_attachments()) {
    QuadrotorParams q;
    q.mass = 0.755;
    q.inertia = Vec3(0.557e-2, 0.557e-2, 1.05e-2).asDiagonal();
    q.attachment = rho;
    q.links.assign(5, LinkParams{0.01, 0.15});
    p.quadrotors.push_back(std::move(q));
  }
  return p;
}
}  // namespace detail

inline SystemParams case1_params() { return detail::reference_params(0.5, box_inertia(0.5, 0.6, 0.8, 0.2)); }
inline SystemParams case2_params() { return detail::reference_params(1.0, box_inertia(1.0, 1.0, 1.2, 0.2)); }

inline Vec3 reference_target() { return Vec3(0.44, 0.78, -0.5); }

inline SystemState case1_initial_state() { return hanging_state(case1_params(), Vec3(1.0, 4.8, 0.0)); }

/// Link directions of a cable bent in the e1-e3 plane: `top_angle` off
/// vertical at the quadrotor end, vertical at the payload end, linear in
/// between. side = +1 puts the quadrotor on the +e1 side of its attachment.
inline std::vector<Vec3> arc_directions(std::size_t n_links, double top_angle, double side = 1.0) {
  std::vector<Vec3> q;
  for (std::size_t j = 0; j < n_links; ++j) {
    const double th = n_links > 1 ? top_angle * static_cast<double>(n_links - 1 - j) / static_cast<double>(n_links - 1)
                                  : top_angle;
    q.emplace_back(-side * std::sin(th), 0.0, std::cos(th));
  }
  return q;
}

inline SystemState case2_initial_state() {
  const SystemParams p = case2_params();
  SystemState s = hanging_state(p, Vec3(2.4, 0.8, -1.0));
  s.R0 = rot_axis(Axis::X, deg2rad(30.0));
  for (std::size_t i : {std::size_t{0}, std::size_t{2}}) {
    s.quadrotors[i].R = rot_axis(Axis::Y, deg2rad(-35.0));
    // bent outward, away from the payload centre
    const double side = p.quadrotors[i].attachment.x() > 0.0 ? 1.0 : -1.0;
    const auto q = arc_directions(p.quadrotors[i].links.size(), deg2rad(60.0), side);
    for (std::size_t j = 0; j < q.size(); ++j) s.quadrotors[i].links[j].q = UnitVector::unchecked(q[j]);
  }
  return s;
}

}  // namespace cableload
