#pragma once

// Full coordinate-free equations of motion, N * X'' = P, with
// X = [x0'', Omega0', q_11'', ..., q_{n n_n}''], together with derived
// positions/velocities and the primitive energy sums.
//
// Two printed block formulas are replaced by what the Lagrangian actually
// yields (both confirmed against the constrained-particle oracle):
//  * the (j, k) off-diagonal block of N_qqi is M_0i,min(j,k) l_ik hat(q_ij)^2,
//    i.e. the projection uses the row link's q_ij and the mass above the
//    upper of the two links;
//  * the centripetal term of P_ij carries the link length:
//    M_0ij l_ij |q_ij'|^2 q_ij.
// The rotor equation is J_i Omega_i' + Omega_i x J_i Omega_i = M_i.

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "cableload/errors.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload {

/// Thrust expressed as inertial force vectors u_i; the physical input maps
/// to u_i = -f_i R_i e3. The linear design works directly with u_i.
struct ForceInput {
  std::vector<Vec3> force;   // N, inertial
  std::vector<Vec3> moment;  // N m, body frame
};

inline ForceInput to_force_input(const SystemState& s, const ControlInput& u) {
  if (u.thrust.size() != s.quadrotors.size() || u.moment.size() != s.quadrotors.size()) {
    throw Error(ErrorCode::InvalidArgument, "control input size does not match quadrotor count");
  }
  ForceInput f;
  for (std::size_t i = 0; i < s.quadrotors.size(); ++i) {
    f.force.push_back(-u.thrust[i] * (s.quadrotors[i].R.matrix() * e3()));
    f.moment.push_back(u.moment[i]);
  }
  return f;
}

struct Derivative {
  Vec3 v0_dot = Vec3::Zero();
  Vec3 Omega0_dot = Vec3::Zero();
  std::vector<Vec3> q_ddot;     // flat, cable-major
  std::vector<Vec3> omega_dot;  // flat, cable-major
  std::vector<Vec3> Omega_dot;  // per quadrotor
};

namespace detail {

// Plain-matrix view of the state. RK4 stages live here, where rotations and
// directions are only approximately on the manifold.
struct RawState {
  Vec3 x0 = Vec3::Zero(), v0 = Vec3::Zero();
  Mat3 R0 = Mat3::Identity();
  Vec3 Omega0 = Vec3::Zero();
  std::vector<Mat3> R;
  std::vector<Vec3> Omega;
  std::vector<Vec3> q, omega;  // flat, cable-major
};

inline std::vector<std::size_t> link_offsets(const SystemParams& p) {
  std::vector<std::size_t> off;
  std::size_t k = 0;
  for (const auto& quad : p.quadrotors) {
    off.push_back(k);
    k += quad.links.size();
  }
  return off;
}

inline RawState to_raw(const SystemState& s) {
  RawState r;
  r.x0 = s.x0;
  r.v0 = s.v0;
  r.R0 = s.R0.matrix();
  r.Omega0 = s.Omega0;
  for (const auto& qs : s.quadrotors) {
    r.R.push_back(qs.R.matrix());
    r.Omega.push_back(qs.Omega);
    for (const auto& l : qs.links) {
      r.q.push_back(l.q.vector());
      r.omega.push_back(l.omega);
    }
  }
  return r;
}

/// Projects every manifold component back onto its constraint set.
inline SystemState from_raw_projected(const SystemParams& p, const RawState& r) {
  SystemState s;
  s.x0 = r.x0;
  s.v0 = r.v0;
  s.R0 = project_rotation(r.R0);
  s.Omega0 = r.Omega0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    QuadrotorState qs;
    qs.R = project_rotation(r.R[i]);
    qs.Omega = r.Omega[i];
    for (std::size_t j = 0; j < p.quadrotors[i].links.size(); ++j, ++k) {
      const Vec3 q = r.q[k].normalized();
      const Vec3 w = r.omega[k] - q.dot(r.omega[k]) * q;
      qs.links.push_back(LinkState{UnitVector::unchecked(q), w});
    }
    s.quadrotors.push_back(std::move(qs));
  }
  return s;
}

inline MatX assemble_N(const SystemParams& p, const DerivedMasses& dm, const RawState& s) {
  const std::size_t D = p.full_dim();
  MatX N = MatX::Zero(D, D);
  const Mat3 I3 = Mat3::Identity();
  const Mat3& R0 = s.R0;
  N.block<3, 3>(0, 0) = dm.total * I3;
  N.block<3, 3>(3, 3) = dm.payload_inertia_bar;
  Mat3 x0_Om0 = Mat3::Zero();
  std::size_t col = 6;
  std::size_t flat = 0;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    const Mat3 rho_hat = hat(quad.attachment);
    const double MiT = dm.quad_total[i];
    x0_Om0 -= MiT * R0 * rho_hat;
    const std::size_t ni = quad.links.size();
    const std::size_t base = col;
    for (std::size_t j = 0; j < ni; ++j) {
      const double Mj = dm.above[i][j];
      const double lj = quad.links[j].length;
      const std::size_t cj = base + 3 * j;
      N.block<3, 3>(0, cj) = -Mj * lj * I3;
      N.block<3, 3>(3, cj) = -Mj * lj * rho_hat * R0.transpose();
      const Mat3 qh = hat(s.q[flat + j]);
      const Mat3 qh2 = qh * qh;
      N.block<3, 3>(cj, 0) = -Mj * qh2;
      N.block<3, 3>(cj, 3) = Mj * qh2 * R0 * rho_hat;
      for (std::size_t k = 0; k < ni; ++k) {
        const std::size_t ck = base + 3 * k;
        const double lk = quad.links[k].length;
        if (k == j) {
          N.block<3, 3>(cj, ck) = -Mj * lj * I3;
        } else {
          N.block<3, 3>(cj, ck) = dm.above[i][std::min(j, k)] * lk * qh2;
        }
      }
    }
    col += 3 * ni;
    flat += ni;
  }
  N.block<3, 3>(0, 3) = x0_Om0;
  N.block<3, 3>(3, 0) = x0_Om0.transpose();
  return N;
}

inline VecX assemble_P(const SystemParams& p, const DerivedMasses& dm, const RawState& s,
                       const std::vector<Vec3>& u) {
  const std::size_t D = p.full_dim();
  VecX P = VecX::Zero(D);
  const double g = p.gravity;
  const Mat3& R0 = s.R0;
  const Mat3 W2 = hat(s.Omega0) * hat(s.Omega0);
  Vec3 Px0 = dm.total * g * e3();
  Vec3 POm0 = -hat(s.Omega0) * (dm.payload_inertia_bar * s.Omega0);
  std::size_t row = 6;
  std::size_t flat = 0;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    const double MiT = dm.quad_total[i];
    const Vec3 centripetal = R0 * W2 * quad.attachment;
    Px0 += u[i] - MiT * centripetal;
    POm0 += hat(quad.attachment) * R0.transpose() * (MiT * g * e3() + u[i]);
    for (std::size_t j = 0; j < quad.links.size(); ++j, ++flat) {
      const double Mj = dm.above[i][j];
      const double lj = quad.links[j].length;
      const Vec3& q = s.q[flat];
      const Mat3 qh2 = hat(q) * hat(q);
      const Vec3 qdot = s.omega[flat].cross(q);
      P.segment<3>(row) =
          -qh2 * (u[i] + Mj * g * e3()) + Mj * qh2 * centripetal + Mj * lj * qdot.squaredNorm() * q;
      row += 3;
    }
  }
  P.segment<3>(0) = Px0;
  P.segment<3>(3) = POm0;
  return P;
}

/// Dense LU with partial pivoting; a pivot below 1e-12 means the
/// configuration is degenerate.
inline VecX solve_accelerations(const MatX& N, const VecX& P) {
  Eigen::PartialPivLU<MatX> lu(N);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot >= 1e-12)) {
    throw Error(ErrorCode::SingularMassMatrix, "LU pivot " + std::to_string(min_pivot));
  }
  return lu.solve(P);
}

inline Derivative derivative_from_solution(const SystemParams& p, const RawState& s, const VecX& X,
                                           const std::vector<Vec3>& moments) {
  Derivative d;
  d.v0_dot = X.segment<3>(0);
  d.Omega0_dot = X.segment<3>(3);
  const std::size_t L = p.num_links();
  d.q_ddot.resize(L);
  d.omega_dot.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    d.q_ddot[k] = X.segment<3>(6 + 3 * k);
    // q'' = w' x q - |w|^2 q with q . w' = 0, hence w' = q x q''.
    d.omega_dot[k] = s.q[k].cross(d.q_ddot[k]);
  }
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const Mat3& J = p.quadrotors[i].inertia;
    const Vec3& W = s.Omega[i];
    d.Omega_dot.push_back(J.ldlt().solve(moments[i] - W.cross(J * W)));
  }
  return d;
}

inline Derivative forward_dynamics(const SystemParams& p, const DerivedMasses& dm, const RawState& s,
                                   const ForceInput& u) {
  const MatX N = assemble_N(p, dm, s);
  const VecX P = assemble_P(p, dm, s, u.force);
  return derivative_from_solution(p, s, solve_accelerations(N, P), u.moment);
}

}  // namespace detail

inline Vec3 quad_position(const SystemParams& p, const SystemState& s, std::size_t i) {
  check_index(p, i);
  Vec3 x = s.x0 + s.R0.matrix() * p.quadrotors[i].attachment;
  const auto& links = p.quadrotors[i].links;
  for (std::size_t a = 0; a < links.size(); ++a) {
    x -= links[a].length * s.quadrotors[i].links[a].q.vector();
  }
  return x;
}

/// Position of the mass of link j (0-based); the last link sits at the
/// payload attachment point.
inline Vec3 link_position(const SystemParams& p, const SystemState& s, std::size_t i, std::size_t j) {
  check_index(p, i, j);
  Vec3 x = s.x0 + s.R0.matrix() * p.quadrotors[i].attachment;
  const auto& links = p.quadrotors[i].links;
  for (std::size_t a = j + 1; a < links.size(); ++a) {
    x -= links[a].length * s.quadrotors[i].links[a].q.vector();
  }
  return x;
}

inline Vec3 attachment_velocity(const SystemParams& p, const SystemState& s, std::size_t i) {
  return s.v0 + s.R0.matrix() * s.Omega0.cross(p.quadrotors[i].attachment);
}

inline Vec3 quad_velocity(const SystemParams& p, const SystemState& s, std::size_t i) {
  check_index(p, i);
  Vec3 v = attachment_velocity(p, s, i);
  const auto& links = p.quadrotors[i].links;
  for (std::size_t a = 0; a < links.size(); ++a) {
    const auto& l = s.quadrotors[i].links[a];
    v -= links[a].length * l.omega.cross(l.q.vector());
  }
  return v;
}

inline Vec3 link_velocity(const SystemParams& p, const SystemState& s, std::size_t i, std::size_t j) {
  check_index(p, i, j);
  Vec3 v = attachment_velocity(p, s, i);
  const auto& links = p.quadrotors[i].links;
  for (std::size_t a = j + 1; a < links.size(); ++a) {
    const auto& l = s.quadrotors[i].links[a];
    v -= links[a].length * l.omega.cross(l.q.vector());
  }
  return v;
}

inline MatX assemble_N(const SystemParams& p, const SystemState& s) {
  return detail::assemble_N(p, derived_masses(p), detail::to_raw(s));
}

inline VecX assemble_P(const SystemParams& p, const SystemState& s, const ControlInput& u) {
  return detail::assemble_P(p, derived_masses(p), detail::to_raw(s), to_force_input(s, u).force);
}

inline Derivative forward_dynamics(const SystemParams& p, const SystemState& s, const ForceInput& u) {
  validate(p, s);
  return detail::forward_dynamics(p, derived_masses(p), detail::to_raw(s), u);
}

inline Derivative forward_dynamics(const SystemParams& p, const SystemState& s, const ControlInput& u) {
  return forward_dynamics(p, s, to_force_input(s, u));
}

/// Primitive form: point masses at x_i and x_ij plus the rigid-body terms.
inline double kinetic_energy(const SystemParams& p, const SystemState& s) {
  double T = 0.5 * p.payload_mass * s.v0.squaredNorm() +
             0.5 * s.Omega0.dot(p.payload_inertia * s.Omega0);
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    T += 0.5 * quad.mass * quad_velocity(p, s, i).squaredNorm();
    T += 0.5 * s.quadrotors[i].Omega.dot(quad.inertia * s.quadrotors[i].Omega);
    for (std::size_t j = 0; j < quad.links.size(); ++j) {
      T += 0.5 * quad.links[j].mass * link_velocity(p, s, i, j).squaredNorm();
    }
  }
  return T;
}

inline double potential_energy(const SystemParams& p, const SystemState& s) {
  const double g = p.gravity;
  double V = -p.payload_mass * g * e3().dot(s.x0);
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    V -= quad.mass * g * e3().dot(quad_position(p, s, i));
    for (std::size_t j = 0; j < quad.links.size(); ++j) {
      V -= quad.links[j].mass * g * e3().dot(link_position(p, s, i, j));
    }
  }
  return V;
}

inline double total_energy(const SystemParams& p, const SystemState& s) {
  return kinetic_energy(p, s) + potential_energy(p, s);
}

/// Sum of point-mass momenta (payload, links, quadrotors).
inline Vec3 linear_momentum(const SystemParams& p, const SystemState& s) {
  Vec3 P = p.payload_mass * s.v0;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    P += quad.mass * quad_velocity(p, s, i);
    for (std::size_t j = 0; j < quad.links.size(); ++j) {
      P += quad.links[j].mass * link_velocity(p, s, i, j);
    }
  }
  return P;
}

}  // namespace cableload
