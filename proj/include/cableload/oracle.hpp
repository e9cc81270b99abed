#pragma once

// Independent reference for the equations of motion. The payload is a rigid
// body (Newton-Euler), every link mass and every quadrotor is a point mass,
// and the cable geometry is imposed through holonomic constraints:
//   |p_a - p_b| = l   between consecutive cable nodes,
//   p = x0 + R0 rho_i for the node sitting on the payload.
// Accelerations come from the KKT system [M G^T; G 0][a; lambda] = [F; gamma].
// Nothing here shares code with the N/P assembly in dynamics.hpp.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cableload/dynamics.hpp"
#include "cableload/errors.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload::oracle {

struct Particle {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double mass = 0.0;
};

struct DistanceConstraint {
  std::size_t a = 0, b = 0;
  double length = 0.0;
};

struct AttachConstraint {
  std::size_t particle = 0;
  Vec3 body_point = Vec3::Zero();  // payload frame
};

struct ParticleSystem {
  double gravity = 9.81;
  double payload_mass = 0.0;
  Mat3 payload_inertia = Mat3::Identity();
  Vec3 x0 = Vec3::Zero(), v0 = Vec3::Zero();
  Mat3 R0 = Mat3::Identity();
  Vec3 Omega0 = Vec3::Zero();
  std::vector<Particle> particles;
  std::vector<DistanceConstraint> distances;
  std::vector<AttachConstraint> attachments;
  // node[i][0] is quadrotor i, node[i][j] is the mass of link j (1-based).
  std::vector<std::vector<std::size_t>> node;
  std::vector<Mat3> quad_R;
  std::vector<Vec3> quad_Omega;
  std::vector<Mat3> quad_inertia;

  std::size_t dof() const { return 6 + 3 * particles.size(); }
  std::size_t num_constraints() const { return distances.size() + 3 * attachments.size(); }
};

inline ParticleSystem from_manifold(const SystemParams& p, const SystemState& s) {
  ParticleSystem sys;
  sys.gravity = p.gravity;
  sys.payload_mass = p.payload_mass;
  sys.payload_inertia = p.payload_inertia;
  sys.x0 = s.x0;
  sys.v0 = s.v0;
  sys.R0 = s.R0.matrix();
  sys.Omega0 = s.Omega0;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& quad = p.quadrotors[i];
    const auto& qs = s.quadrotors[i];
    const std::size_t ni = quad.links.size();
    // Walk up from the attachment point: node ni sits on the payload and
    // node j-1 = node j - l_j q_j.
    std::vector<Vec3> pos(ni + 1), vel(ni + 1);
    pos[ni] = s.x0 + s.R0.matrix() * quad.attachment;
    vel[ni] = s.v0 + s.R0.matrix() * s.Omega0.cross(quad.attachment);
    for (std::size_t j = ni; j >= 1; --j) {
      const auto& l = qs.links[j - 1];
      pos[j - 1] = pos[j] - quad.links[j - 1].length * l.q.vector();
      vel[j - 1] = vel[j] - quad.links[j - 1].length * l.omega.cross(l.q.vector());
    }
    std::vector<std::size_t> idx(ni + 1);
    for (std::size_t j = 0; j <= ni; ++j) {
      idx[j] = sys.particles.size();
      const double m = j == 0 ? quad.mass : quad.links[j - 1].mass;
      sys.particles.push_back(Particle{pos[j], vel[j], m});
    }
    for (std::size_t j = 1; j <= ni; ++j) {
      sys.distances.push_back(DistanceConstraint{idx[j - 1], idx[j], quad.links[j - 1].length});
    }
    sys.attachments.push_back(AttachConstraint{idx[ni], quad.attachment});
    sys.node.push_back(std::move(idx));
    sys.quad_R.push_back(qs.R.matrix());
    sys.quad_Omega.push_back(qs.Omega);
    sys.quad_inertia.push_back(quad.inertia);
  }
  return sys;
}

struct ConstraintResiduals {
  double position = 0.0;
  double velocity = 0.0;
};

inline ConstraintResiduals constraint_residuals(const ParticleSystem& sys) {
  ConstraintResiduals r;
  for (const auto& c : sys.distances) {
    const Vec3 d = sys.particles[c.a].position - sys.particles[c.b].position;
    const Vec3 dv = sys.particles[c.a].velocity - sys.particles[c.b].velocity;
    r.position = std::max(r.position, std::abs(d.norm() - c.length));
    r.velocity = std::max(r.velocity, std::abs(d.dot(dv)));
  }
  for (const auto& c : sys.attachments) {
    const Vec3 d = sys.particles[c.particle].position - (sys.x0 + sys.R0 * c.body_point);
    const Vec3 dv = sys.particles[c.particle].velocity - (sys.v0 + sys.R0 * sys.Omega0.cross(c.body_point));
    r.position = std::max(r.position, d.norm());
    r.velocity = std::max(r.velocity, dv.norm());
  }
  return r;
}

struct Accelerations {
  Vec3 payload_linear = Vec3::Zero();
  Vec3 payload_angular = Vec3::Zero();  // body frame
  std::vector<Vec3> particle;
  std::vector<Vec3> quad_angular;
  Eigen::VectorXd multipliers;
  double kkt_residual = 0.0;
};

inline Accelerations constrained_accel(const ParticleSystem& sys, const std::vector<Vec3>& thrust_force,
                                       const std::vector<Vec3>& moment) {
  const std::size_t n = sys.dof();
  const std::size_t m = sys.num_constraints();
  const std::size_t np = sys.particles.size();
  MatX K = MatX::Zero(n + m, n + m);
  VecX rhs = VecX::Zero(n + m);

  const Vec3 ge3 = sys.gravity * e3();
  K.block<3, 3>(0, 0) = sys.payload_mass * Mat3::Identity();
  K.block<3, 3>(3, 3) = sys.payload_inertia;
  rhs.segment<3>(0) = sys.payload_mass * ge3;
  rhs.segment<3>(3) = -sys.Omega0.cross(sys.payload_inertia * sys.Omega0);
  for (std::size_t k = 0; k < np; ++k) {
    K.block<3, 3>(6 + 3 * k, 6 + 3 * k) = sys.particles[k].mass * Mat3::Identity();
    rhs.segment<3>(6 + 3 * k) = sys.particles[k].mass * ge3;
  }
  for (std::size_t i = 0; i < sys.node.size(); ++i) {
    rhs.segment<3>(6 + 3 * sys.node[i][0]) += thrust_force[i];
  }

  // Constraint Jacobian G and acceleration-level right-hand side gamma.
  MatX G = MatX::Zero(m, n);
  VecX gamma = VecX::Zero(m);
  std::size_t row = 0;
  for (const auto& c : sys.distances) {
    const Vec3 d = sys.particles[c.a].position - sys.particles[c.b].position;
    const Vec3 dv = sys.particles[c.a].velocity - sys.particles[c.b].velocity;
    G.block<1, 3>(row, 6 + 3 * c.a) = d.transpose();
    G.block<1, 3>(row, 6 + 3 * c.b) = -d.transpose();
    gamma(row) = -dv.squaredNorm();
    ++row;
  }
  for (const auto& c : sys.attachments) {
    // p'' - x0'' + R0 hat(rho) Omega0' - R0 hat(Omega0)^2 rho = 0
    G.block<3, 3>(row, 0) = -Mat3::Identity();
    G.block<3, 3>(row, 3) = sys.R0 * hat(c.body_point);
    G.block<3, 3>(row, 6 + 3 * c.particle) = Mat3::Identity();
    gamma.segment<3>(row) = sys.R0 * (hat(sys.Omega0) * hat(sys.Omega0) * c.body_point);
    row += 3;
  }
  K.block(0, n, n, m) = G.transpose();
  K.block(n, 0, m, n) = G;
  rhs.segment(n, m) = gamma;

  Eigen::FullPivLU<MatX> lu(K);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularSaddle, "KKT matrix rank " + std::to_string(lu.rank()) + " of " +
                                               std::to_string(n + m));
  }
  const VecX sol = lu.solve(rhs);

  Accelerations acc;
  acc.payload_linear = sol.segment<3>(0);
  acc.payload_angular = sol.segment<3>(3);
  for (std::size_t k = 0; k < np; ++k) acc.particle.push_back(sol.segment<3>(6 + 3 * k));
  acc.multipliers = sol.segment(n, m);
  acc.kkt_residual = (K * sol - rhs).norm();
  for (std::size_t i = 0; i < sys.quad_R.size(); ++i) {
    const Mat3& J = sys.quad_inertia[i];
    const Vec3& W = sys.quad_Omega[i];
    acc.quad_angular.push_back(J.inverse() * (moment[i] - W.cross(J * W)));
  }
  return acc;
}

inline Accelerations constrained_accel(const ParticleSystem& sys, const ControlInput& u) {
  std::vector<Vec3> force;
  for (std::size_t i = 0; i < sys.quad_R.size(); ++i) force.push_back(-u.thrust[i] * (sys.quad_R[i] * e3()));
  return constrained_accel(sys, force, u.moment);
}

inline Accelerations constrained_accel(const ParticleSystem& sys, const ForceInput& u) {
  return constrained_accel(sys, u.force, u.moment);
}

/// Second derivative of |p_a - p_b|^2 / 2 for every distance constraint.
inline double distance_accel_residual(const ParticleSystem& sys, const Accelerations& acc) {
  double worst = 0.0;
  for (const auto& c : sys.distances) {
    const Vec3 d = sys.particles[c.a].position - sys.particles[c.b].position;
    const Vec3 dv = sys.particles[c.a].velocity - sys.particles[c.b].velocity;
    const Vec3 da = acc.particle[c.a] - acc.particle[c.b];
    worst = std::max(worst, std::abs(d.dot(da) + dv.squaredNorm()));
  }
  return worst;
}

/// Link accelerations q_ij'' = (p_j'' - p_{j-1}'') / l_ij, flat cable-major.
inline std::vector<Vec3> link_accelerations(const SystemParams& p, const ParticleSystem& sys,
                                            const Accelerations& acc) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < p.quadrotors.size(); ++i) {
    const auto& links = p.quadrotors[i].links;
    for (std::size_t j = 1; j <= links.size(); ++j) {
      out.push_back((acc.particle[sys.node[i][j]] - acc.particle[sys.node[i][j - 1]]) / links[j - 1].length);
    }
  }
  return out;
}

/// Stacked [x0'', Omega0', q''...] in the same order as the N P solve.
inline VecX stacked_accelerations(const SystemParams& p, const ParticleSystem& sys, const Accelerations& acc) {
  const auto qdd = link_accelerations(p, sys, acc);
  VecX X(6 + 3 * qdd.size());
  X.segment<3>(0) = acc.payload_linear;
  X.segment<3>(3) = acc.payload_angular;
  for (std::size_t k = 0; k < qdd.size(); ++k) X.segment<3>(6 + 3 * k) = qdd[k];
  return X;
}

inline double energy(const ParticleSystem& sys) {
  double T = 0.5 * sys.payload_mass * sys.v0.squaredNorm() + 0.5 * sys.Omega0.dot(sys.payload_inertia * sys.Omega0);
  double V = -sys.payload_mass * sys.gravity * sys.x0.z();
  for (const auto& pt : sys.particles) {
    T += 0.5 * pt.mass * pt.velocity.squaredNorm();
    V -= pt.mass * sys.gravity * pt.position.z();
  }
  for (std::size_t i = 0; i < sys.quad_R.size(); ++i) {
    T += 0.5 * sys.quad_Omega[i].dot(sys.quad_inertia[i] * sys.quad_Omega[i]);
  }
  return T + V;
}

struct PendulumTrajectory {
  std::vector<double> t, theta, theta_dot;
};

/// Planar pendulum theta'' = -(g / l) sin(theta), RK4 with fixed step.
inline PendulumTrajectory minimal_pendulum(double mass, double length, double theta0, double theta_dot0,
                                           double duration, double dt, double gravity = 9.81) {
  (void)mass;  // the planar pendulum is mass independent
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidArgument, "pendulum length must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const double w2 = gravity / length;
  auto f = [w2](double th, double thd) { return std::array<double, 2>{thd, -w2 * std::sin(th)}; };
  PendulumTrajectory out;
  double th = theta0, thd = theta_dot0;
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  out.t.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    out.t.push_back(k * dt);
    out.theta.push_back(th);
    out.theta_dot.push_back(thd);
    if (k == steps) break;
    const auto k1 = f(th, thd);
    const auto k2 = f(th + 0.5 * dt * k1[0], thd + 0.5 * dt * k1[1]);
    const auto k3 = f(th + 0.5 * dt * k2[0], thd + 0.5 * dt * k2[1]);
    const auto k4 = f(th + dt * k3[0], thd + dt * k3[1]);
    th += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    thd += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
  }
  return out;
}

/// Mean period from upward zero crossings (linear interpolation).
inline double estimate_period(const std::vector<double>& t, const std::vector<double>& x) {
  std::vector<double> crossings;
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (x[k - 1] < 0.0 && x[k] >= 0.0) {
      const double frac = -x[k - 1] / (x[k] - x[k - 1]);
      crossings.push_back(t[k - 1] + frac * (t[k] - t[k - 1]));
    }
  }
  if (crossings.size() < 2) return std::nan("");
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

}  // namespace cableload::oracle
