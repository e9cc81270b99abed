#pragma once

// Geometric controller: reduced-coordinate feedback produces the ideal
// thrust vector A_i, which fixes the desired body axis b3; the attitude loop
// on SO(3) then tracks the resulting R_ic.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cableload/dynamics.hpp"
#include "cableload/errors.hpp"
#include "cableload/integrator.hpp"
#include "cableload/linearization.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload {

using HeadingCommand = std::function<Vec3(double t, std::size_t quad)>;

inline HeadingCommand constant_heading(const Vec3& b1 = e1()) {
  return [b1](double, std::size_t) { return b1; };
}

struct ControllerConfig {
  MatX Kx, Kv;            // 3n x D
  double k_R = 8.0;
  double k_Omega = 2.0;
  HeadingCommand b1 = constant_heading();
  double period = 1e-3;   // s
  double eps_A = 1e-6;    // N
};

inline void validate(const ControllerConfig& cfg, const SystemParams& p) {
  if (!(cfg.k_R > 0.0)) throw Error(ErrorCode::InvalidArgument, "k_R must be positive");
  if (!(cfg.k_Omega > 0.0)) throw Error(ErrorCode::InvalidArgument, "k_Omega must be positive");
  if (!(cfg.period > 0.0)) throw Error(ErrorCode::InvalidArgument, "controller period must be positive");
  if (!(cfg.eps_A > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps_A must be positive");
  const auto rows = static_cast<Eigen::Index>(3 * p.num_quadrotors());
  const auto cols = static_cast<Eigen::Index>(p.reduced_dim());
  if (cfg.Kx.rows() != rows || cfg.Kx.cols() != cols || cfg.Kv.rows() != rows || cfg.Kv.cols() != cols) {
    throw Error(ErrorCode::InvalidArgument, "gain matrices must be " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

struct AttitudeCommand {
  Rotation R;
  Vec3 Omega = Vec3::Zero();
  Vec3 Omega_dot = Vec3::Zero();
};

struct ReducedState {
  VecX x, xd;
};

/// [dx0; log R0; C^T (e3 x q)...] and the matching rates.
inline ReducedState reduced_state(const SystemParams& p, const Equilibrium& eq, const SystemState& s) {
  const double psi0 = config_error_psi(s.R0, Rotation::identity());
  if (!(psi0 < 2.0 - 1e-6)) {
    throw Error(ErrorCode::AttitudeOutOfChart, "payload attitude error Psi0 = " + std::to_string(psi0));
  }
  const auto D = static_cast<Eigen::Index>(p.reduced_dim());
  ReducedState r{VecX(D), VecX(D)};
  r.x.segment<3>(0) = s.x0 - eq.x0d;
  r.xd.segment<3>(0) = s.v0;
  r.x.segment<3>(3) = log_so3(s.R0);
  r.xd.segment<3>(3) = s.Omega0;
  Eigen::Index k = 6;
  for (const auto& qs : s.quadrotors) {
    for (const auto& l : qs.links) {
      const Vec3 xi = e3().cross(l.q.vector());
      r.x.segment<2>(k) = xi.head<2>();
      r.xd.segment<2>(k) = l.omega.head<2>();
      k += 2;
    }
  }
  return r;
}

/// A_i = -K_xi x - K_vi x' + u_i*
inline Vec3 ideal_thrust(const ControllerConfig& cfg, const Equilibrium& eq, const VecX& x, const VecX& xd,
                         std::size_t i) {
  const auto r = static_cast<Eigen::Index>(3 * i);
  return -cfg.Kx.middleRows(r, 3) * x - cfg.Kv.middleRows(r, 3) * xd + eq.force[i];
}

/// R_c = [b1c, b3 x b1c, b3] with b3 = -A/|A| and b1c the projection of b1
/// onto the plane normal to b3.
inline Rotation desired_attitude(const Vec3& A, const Vec3& b1, double eps_A = 1e-6) {
  const double nA = A.norm();
  if (!(nA > eps_A)) throw Error(ErrorCode::DegenerateThrust, "|A| = " + std::to_string(nA));
  const Vec3 b3 = -A / nA;
  const Vec3 b3xb1 = b3.cross(b1);
  const double s = b3xb1.norm();
  if (!(s > 1e-6)) throw Error(ErrorCode::DegenerateHeading, "heading command parallel to thrust axis");
  const Vec3 c2 = b3xb1 / s;
  const Vec3 c1 = -b3.cross(b3xb1) / s;
  Mat3 R;
  R.col(0) = c1;
  R.col(1) = c2;
  R.col(2) = b3;
  return Rotation::unchecked(R);
}

/// Backward-difference command rates across controller ticks.
class AttitudeCommandHistory {
 public:
  explicit AttitudeCommandHistory(double period = 1e-3) : period_(period) {
    if (!(period > 0.0)) throw Error(ErrorCode::InvalidArgument, "controller period must be positive");
  }

  /// First call: Omega_c = Omega_c' = 0. Second call: Omega_c from the
  /// difference, Omega_c' still 0 (no earlier rate to difference against).
  AttitudeCommand update(const Rotation& Rc) {
    AttitudeCommand cmd{Rc, Vec3::Zero(), Vec3::Zero()};
    if (prev_R_) {
      cmd.Omega = log_so3(prev_R_->matrix().transpose() * Rc.matrix()) / period_;
      if (prev_Omega_) cmd.Omega_dot = (cmd.Omega - *prev_Omega_) / period_;
      prev_Omega_ = cmd.Omega;
    }
    prev_R_ = Rc;
    return cmd;
  }

  void reset() {
    prev_R_.reset();
    prev_Omega_.reset();
  }

 private:
  double period_;
  std::optional<Rotation> prev_R_;
  std::optional<Vec3> prev_Omega_;
};

inline AttitudeCommand attitude_command(const Vec3& A, const Vec3& b1, AttitudeCommandHistory& history,
                                        double eps_A = 1e-6) {
  return history.update(desired_attitude(A, b1, eps_A));
}

/// f = -A . R e3
inline double thrust_magnitude(const Vec3& A, const Rotation& R) { return -A.dot(R.matrix() * e3()); }

inline Vec3 moment_command(double k_R, double k_Omega, const Rotation& R, const Vec3& Omega,
                           const AttitudeCommand& cmd, const Mat3& J) {
  const Vec3 eR = attitude_error(R, cmd.R);
  const Vec3 eW = angular_velocity_error(R, cmd.R, Omega, cmd.Omega);
  const Mat3 RtRc = R.matrix().transpose() * cmd.R.matrix();
  const Vec3 w = RtRc * cmd.Omega;
  return -k_R * eR - k_Omega * eW + w.cross(J * w) + J * (RtRc * cmd.Omega_dot);
}

inline Vec3 moment_command(const ControllerConfig& cfg, const Rotation& R, const Vec3& Omega,
                           const AttitudeCommand& cmd, const Mat3& J) {
  return moment_command(cfg.k_R, cfg.k_Omega, R, Omega, cmd, J);
}

/// Full control law evaluated at controller ticks.
class Controller {
 public:
  Controller(SystemParams p, Equilibrium eq, ControllerConfig cfg)
      : p_(std::move(p)), eq_(std::move(eq)), cfg_(std::move(cfg)) {
    validate(cfg_, p_);
    history_.assign(p_.num_quadrotors(), AttitudeCommandHistory(cfg_.period));
    commands_.resize(p_.num_quadrotors());
    thrust_vectors_.resize(p_.num_quadrotors());
  }

  ControlInput compute(const SystemState& s, double t) {
    const ReducedState r = reduced_state(p_, eq_, s);
    ControlInput u = ControlInput::zero(p_.num_quadrotors());
    for (std::size_t i = 0; i < p_.num_quadrotors(); ++i) {
      const Vec3 A = ideal_thrust(cfg_, eq_, r.x, r.xd, i);
      thrust_vectors_[i] = A;
      commands_[i] = attitude_command(A, cfg_.b1(t, i), history_[i], cfg_.eps_A);
      const auto& qs = s.quadrotors[i];
      u.thrust[i] = thrust_magnitude(A, qs.R);
      u.moment[i] = moment_command(cfg_, qs.R, qs.Omega, commands_[i], p_.quadrotors[i].inertia);
    }
    return u;
  }

  void reset() {
    for (auto& h : history_) h.reset();
  }

  const std::vector<AttitudeCommand>& commands() const { return commands_; }
  const std::vector<Vec3>& thrust_vectors() const { return thrust_vectors_; }
  const ControllerConfig& config() const { return cfg_; }
  const SystemParams& params() const { return p_; }
  const Equilibrium& equilibrium() const { return eq_; }

 private:
  SystemParams p_;
  Equilibrium eq_;
  ControllerConfig cfg_;
  std::vector<AttitudeCommandHistory> history_;
  std::vector<AttitudeCommand> commands_;
  std::vector<Vec3> thrust_vectors_;
};

/// Controller plus integrator with zero-order hold between ticks.
class ClosedLoop {
 public:
  ClosedLoop(SystemParams p, Equilibrium eq, ControllerConfig cfg, double dt)
      : ctrl_(std::move(p), std::move(eq), std::move(cfg)), dt_(dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    const double ratio = ctrl_.config().period / dt;
    ratio_ = static_cast<long>(std::llround(ratio));
    if (ratio_ < 1 || std::abs(ratio - static_cast<double>(ratio_)) > 1e-9 * ratio) {
      throw Error(ErrorCode::InvalidArgument, "controller period must be an integer multiple of dt");
    }
  }

  /// Applies the held input over one integrator step; returns it with the new state.
  std::pair<ControlInput, SystemState> step(const SystemState& s) {
    if (steps_ % ratio_ == 0) held_ = ctrl_.compute(s, time());
    const SystemState next = integrate_step(ctrl_.params(), s, held_, dt_);
    ++steps_;
    return {held_, next};
  }

  double time() const { return static_cast<double>(steps_) * dt_; }
  long steps() const { return steps_; }
  bool at_tick() const { return steps_ % ratio_ == 0; }
  const Controller& controller() const { return ctrl_; }
  const ControlInput& held() const { return held_; }

 private:
  Controller ctrl_;
  double dt_;
  long ratio_ = 1;
  long steps_ = 0;
  ControlInput held_;
};

inline std::pair<ControlInput, SystemState> closed_loop_step(ClosedLoop& loop, const SystemState& s) {
  return loop.step(s);
}

}  // namespace cableload
