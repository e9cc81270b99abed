#pragma once

// Classical RK4 on the embedding (rotations as 3x3 matrices, link directions
// as 3-vectors) followed by projection back onto SO(3) and S^2.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cableload/dynamics.hpp"
#include "cableload/errors.hpp"

namespace cableload {

namespace detail {

inline RawState raw_rate(const RawState& s, const Derivative& d) {
  RawState r;
  r.x0 = s.v0;
  r.v0 = d.v0_dot;
  r.R0 = s.R0 * hat(s.Omega0);
  r.Omega0 = d.Omega0_dot;
  r.R.resize(s.R.size());
  r.Omega = d.Omega_dot;
  for (std::size_t i = 0; i < s.R.size(); ++i) r.R[i] = s.R[i] * hat(s.Omega[i]);
  r.q.resize(s.q.size());
  r.omega = d.omega_dot;
  for (std::size_t k = 0; k < s.q.size(); ++k) r.q[k] = s.omega[k].cross(s.q[k]);
  return r;
}

inline RawState axpy(const RawState& s, double h, const RawState& k) {
  RawState r = s;
  r.x0 += h * k.x0;
  r.v0 += h * k.v0;
  r.R0 += h * k.R0;
  r.Omega0 += h * k.Omega0;
  for (std::size_t i = 0; i < s.R.size(); ++i) {
    r.R[i] += h * k.R[i];
    r.Omega[i] += h * k.Omega[i];
  }
  for (std::size_t j = 0; j < s.q.size(); ++j) {
    r.q[j] += h * k.q[j];
    r.omega[j] += h * k.omega[j];
  }
  return r;
}

// Body-frame moments stay fixed over the step; thrust force vectors are
// recomputed from the stage attitude when given as magnitudes.
struct StageInput {
  const ControlInput* control = nullptr;
  const ForceInput* force = nullptr;

  ForceInput at(const RawState& s) const {
    if (force) return *force;
    ForceInput f;
    for (std::size_t i = 0; i < s.R.size(); ++i) {
      f.force.push_back(-control->thrust[i] * (s.R[i] * e3()));
      f.moment.push_back(control->moment[i]);
    }
    return f;
  }
};

inline SystemState rk4_step(const SystemParams& p, const SystemState& state, const StageInput& in, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const DerivedMasses dm = derived_masses(p);
  const RawState s0 = to_raw(state);
  auto rate = [&](const RawState& s) { return raw_rate(s, forward_dynamics(p, dm, s, in.at(s))); };
  const RawState k1 = rate(s0);
  const RawState k2 = rate(axpy(s0, 0.5 * dt, k1));
  const RawState k3 = rate(axpy(s0, 0.5 * dt, k2));
  const RawState k4 = rate(axpy(s0, dt, k3));
  RawState out = axpy(s0, dt / 6.0, k1);
  out = axpy(out, dt / 3.0, k2);
  out = axpy(out, dt / 3.0, k3);
  out = axpy(out, dt / 6.0, k4);
  return from_raw_projected(p, out);
}

}  // namespace detail

/// One RK4 step with the physical inputs (f_i, M_i) held constant.
inline SystemState integrate_step(const SystemParams& p, const SystemState& s, const ControlInput& u, double dt) {
  if (u.thrust.size() != p.num_quadrotors() || u.moment.size() != p.num_quadrotors()) {
    throw Error(ErrorCode::InvalidArgument, "control input size does not match quadrotor count");
  }
  return detail::rk4_step(p, s, detail::StageInput{&u, nullptr}, dt);
}

/// One RK4 step with inertial thrust force vectors held constant.
inline SystemState integrate_step(const SystemParams& p, const SystemState& s, const ForceInput& u, double dt) {
  if (u.force.size() != p.num_quadrotors() || u.moment.size() != p.num_quadrotors()) {
    throw Error(ErrorCode::InvalidArgument, "force input size does not match quadrotor count");
  }
  return detail::rk4_step(p, s, detail::StageInput{nullptr, &u}, dt);
}

/// Isolated rigid rotor J W' + W x J W = M, RK4 with fixed body moment.
struct RotorState {
  Rotation R;
  Vec3 Omega = Vec3::Zero();
};

inline RotorState integrate_rotor(const Mat3& J, const RotorState& s, const Vec3& M, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const auto Jinv = J.inverse();
  auto wdot = [&](const Vec3& W) -> Vec3 { return Jinv * (M - W.cross(J * W)); };
  const Mat3 R0 = s.R.matrix();
  const Vec3 W0 = s.Omega;
  const Mat3 kR1 = R0 * hat(W0);
  const Vec3 kW1 = wdot(W0);
  const Mat3 R2 = R0 + 0.5 * dt * kR1;
  const Vec3 W2 = W0 + 0.5 * dt * kW1;
  const Mat3 kR2 = R2 * hat(W2);
  const Vec3 kW2 = wdot(W2);
  const Mat3 R3 = R0 + 0.5 * dt * kR2;
  const Vec3 W3 = W0 + 0.5 * dt * kW2;
  const Mat3 kR3 = R3 * hat(W3);
  const Vec3 kW3 = wdot(W3);
  const Mat3 R4 = R0 + dt * kR3;
  const Vec3 W4 = W0 + dt * kW3;
  const Mat3 kR4 = R4 * hat(W4);
  const Vec3 kW4 = wdot(W4);
  RotorState out;
  out.R = project_rotation(R0 + dt / 6.0 * (kR1 + 2 * kR2 + 2 * kR3 + kR4));
  out.Omega = W0 + dt / 6.0 * (kW1 + 2 * kW2 + 2 * kW3 + kW4);
  return out;
}

/// Largest constraint violation in a state: unit norm, tangency, orthogonality.
struct ConstraintResidual {
  double unit = 0.0;
  double tangent = 0.0;
  double orthogonality = 0.0;

  double max() const { return std::max({unit, tangent, orthogonality}); }
};

inline ConstraintResidual constraint_residual(const SystemState& s) {
  ConstraintResidual r;
  auto orth = [](const Mat3& R) { return (R.transpose() * R - Mat3::Identity()).norm(); };
  r.orthogonality = orth(s.R0.matrix());
  for (const auto& qs : s.quadrotors) {
    r.orthogonality = std::max(r.orthogonality, orth(qs.R.matrix()));
    for (const auto& l : qs.links) {
      r.unit = std::max(r.unit, std::abs(l.q.vector().norm() - 1.0));
      r.tangent = std::max(r.tangent, std::abs(l.q.vector().dot(l.omega)));
    }
  }
  return r;
}

}  // namespace cableload
