#pragma once

// Hover equilibrium, the linearized model M x'' + G x = B du about it, a
// finite-difference cross-check through the manifold charts, and LQR gains.
//
// Reduced coordinates: x = [dx0; eta0; xi_11 ... xi_n,nn], where the payload
// attitude is R0 = exp(eta0^) and each link direction q = exp((C xi)^) e3
// with C = [e1, e2], so that to first order dq = (C xi) x e3.
//
// Link rows of the closed-form blocks are scaled by l_ij so M is symmetric.
// Relative to the printed blocks this fixes three things, each confirmed by
// fd_linearize: the eta-xi coupling is M_0a l_a hat(rho_i) hat(e3) C, the
// link-link block is M_0,min(a,b) l_a l_b I2, and the link stiffness is
// +l_a (M_iT + m0/n - M_0a) g I2.

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "cableload/dynamics.hpp"
#include "cableload/errors.hpp"
#include "cableload/linalg.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload {

struct Equilibrium {
  Vec3 x0d = Vec3::Zero();
  std::vector<double> thrust;     // f_i*
  std::vector<Vec3> force;        // u_i* = -f_i* e3
  std::vector<Vec3> quad_target;  // x_id
  SystemState state;

  ControlInput control() const { return ControlInput{thrust, std::vector<Vec3>(thrust.size(), Vec3::Zero())}; }
  ForceInput force_input() const { return ForceInput{force, std::vector<Vec3>(force.size(), Vec3::Zero())}; }
};

inline Equilibrium build_equilibrium(const SystemParams& p, const Vec3& x0d) {
  validate(p);
  const DerivedMasses dm = derived_masses(p);
  const double share = p.payload_mass / static_cast<double>(p.num_quadrotors());
  Equilibrium eq;
  eq.x0d = x0d;
  eq.state = hanging_state(p, x0d);
  for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
    const double f = (dm.quad_total[i] + share) * p.gravity;
    eq.thrust.push_back(f);
    eq.force.push_back(-f * e3());
    eq.quad_target.push_back(quad_position(p, eq.state, i));
  }
  return eq;
}

/// Largest acceleration at the equilibrium; nonzero only when the
/// attachment points are not balanced about the payload's vertical axis.
inline double equilibrium_residual(const SystemParams& p, const Equilibrium& eq) {
  const Derivative d = forward_dynamics(p, eq.state, eq.force_input());
  double r = std::max(d.v0_dot.cwiseAbs().maxCoeff(), d.Omega0_dot.cwiseAbs().maxCoeff());
  for (const auto& a : d.q_ddot) r = std::max(r, a.cwiseAbs().maxCoeff());
  return r;
}

struct LinearModel {
  MatX M, G, B;
  Equilibrium eq;

  Eigen::Index dim() const { return M.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  /// First-order pair: d/dt [x; x'] = A [x; x'] + B du.
  MatX state_matrix() const {
    const Eigen::Index D = dim();
    MatX A = MatX::Zero(2 * D, 2 * D);
    A.topRightCorner(D, D).setIdentity();
    A.bottomLeftCorner(D, D) = -M.ldlt().solve(G);
    return A;
  }
  MatX input_matrix() const {
    const Eigen::Index D = dim();
    MatX Bs = MatX::Zero(2 * D, inputs());
    Bs.bottomRows(D) = M.ldlt().solve(B);
    return Bs;
  }
};

namespace detail {
inline Eigen::Matrix<double, 3, 2> C_matrix() {
  Eigen::Matrix<double, 3, 2> C;
  C << 1, 0, 0, 1, 0, 0;
  return C;
}
}  // namespace detail

inline LinearModel assemble_linear_model(const SystemParams& p, const Equilibrium& eq) {
  validate(p);
  const DerivedMasses dm = derived_masses(p);
  const std::size_t n = p.num_quadrotors();
  const Eigen::Index D = static_cast<Eigen::Index>(p.reduced_dim());
  const double g = p.gravity;
  const double share = p.payload_mass / static_cast<double>(n);
  const auto C = detail::C_matrix();
  const Mat3 E = hat(e3());
  const Mat3 I3 = Mat3::Identity();

  LinearModel lm;
  lm.eq = eq;
  lm.M = MatX::Zero(D, D);
  lm.G = MatX::Zero(D, D);
  lm.B = MatX::Zero(D, 3 * static_cast<Eigen::Index>(n));

  lm.M.block<3, 3>(0, 0) = dm.total * I3;
  lm.M.block<3, 3>(3, 3) = dm.payload_inertia_bar;
  Eigen::Index col = 6;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& quad = p.quadrotors[i];
    const Mat3 rh = hat(quad.attachment);
    const double MiT = dm.quad_total[i];
    lm.M.block<3, 3>(0, 3) -= MiT * rh;
    lm.G.block<3, 3>(3, 3) += share * g * rh * E;
    const Eigen::Index in = 3 * static_cast<Eigen::Index>(i);
    lm.B.block<3, 3>(0, in) = I3;
    lm.B.block<3, 3>(3, in) = rh;
    const std::size_t ni = quad.links.size();
    for (std::size_t a = 0; a < ni; ++a) {
      const Eigen::Index ca = col + 2 * static_cast<Eigen::Index>(a);
      const double la = quad.links[a].length;
      const double Ma = dm.above[i][a];
      lm.M.block<3, 2>(0, ca) = Ma * la * E * C;
      lm.M.block<3, 2>(3, ca) = Ma * la * rh * E * C;
      for (std::size_t b = 0; b < ni; ++b) {
        const Eigen::Index cb = col + 2 * static_cast<Eigen::Index>(b);
        lm.M.block<2, 2>(ca, cb) = dm.above[i][std::min(a, b)] * la * quad.links[b].length * Eigen::Matrix2d::Identity();
      }
      lm.G.block<2, 2>(ca, ca) = la * (MiT + share - Ma) * g * Eigen::Matrix2d::Identity();
      lm.B.block<2, 3>(ca, in) = -la * C.transpose() * E;
    }
    col += 2 * static_cast<Eigen::Index>(ni);
  }
  // lower-left blocks by symmetry
  lm.M.block<3, 3>(3, 0) = lm.M.block<3, 3>(0, 3).transpose();
  lm.M.bottomLeftCorner(D - 6, 6) = lm.M.topRightCorner(6, D - 6).transpose();
  return lm;
}

// ------------------------------------------------------------ chart maps

/// Nonlinear state from reduced coordinates (x, x') about the equilibrium.
inline SystemState state_from_reduced(const SystemParams& p, const Equilibrium& eq, const VecX& x, const VecX& xd) {
  const auto C = detail::C_matrix();
  SystemState s = eq.state;
  s.x0 = eq.x0d + x.segment<3>(0);
  s.v0 = xd.segment<3>(0);
  s.R0 = exp_so3(x.segment<3>(3));
  s.Omega0 = xd.segment<3>(3);
  Eigen::Index k = 6;
  for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
    for (auto& l : s.quadrotors[i].links) {
      const Vec3 w = C * x.segment<2>(k);
      const Vec3 q = exp_so3(w).matrix() * e3();
      const Vec3 om = C * xd.segment<2>(k);
      l.q = UnitVector::unchecked(q);
      l.omega = om - q.dot(om) * q;
      k += 2;
    }
  }
  return s;
}

/// Reduced accelerations [dx0''; Omega0'; C^T (e3 x q'')].
inline VecX reduced_accelerations(const SystemParams& p, const Derivative& d) {
  const auto C = detail::C_matrix();
  VecX a(static_cast<Eigen::Index>(p.reduced_dim()));
  a.segment<3>(0) = d.v0_dot;
  a.segment<3>(3) = d.Omega0_dot;
  for (std::size_t k = 0; k < d.q_ddot.size(); ++k) {
    a.segment<2>(6 + 2 * static_cast<Eigen::Index>(k)) = C.transpose() * e3().cross(d.q_ddot[k]);
  }
  return a;
}

struct FdLinearization {
  MatX stiffness;  // d x''/d x, compare with -M^-1 G
  MatX damping;    // d x''/d x', zero at the hover equilibrium
  MatX input;      // d x''/d du, compare with M^-1 B
  MatX A, B;       // assembled first-order pair
};

inline FdLinearization fd_linearize(const SystemParams& p, const Equilibrium& eq, double h = 1e-6) {
  const Eigen::Index D = static_cast<Eigen::Index>(p.reduced_dim());
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(p.num_quadrotors());
  const ForceInput u0 = eq.force_input();
  auto accel = [&](const VecX& x, const VecX& xd, const ForceInput& u) {
    return reduced_accelerations(p, forward_dynamics(p, state_from_reduced(p, eq, x, xd), u));
  };
  FdLinearization out;
  out.stiffness.resize(D, D);
  out.damping.resize(D, D);
  out.input.resize(D, m);
  const VecX zero = VecX::Zero(D);
  for (Eigen::Index k = 0; k < D; ++k) {
    VecX dx = zero;
    dx(k) = h;
    out.stiffness.col(k) = (accel(dx, zero, u0) - accel(-dx, zero, u0)) / (2 * h);
    out.damping.col(k) = (accel(zero, dx, u0) - accel(zero, -dx, u0)) / (2 * h);
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    ForceInput up = u0, um = u0;
    up.force[static_cast<std::size_t>(k / 3)](k % 3) += h;
    um.force[static_cast<std::size_t>(k / 3)](k % 3) -= h;
    out.input.col(k) = (accel(zero, zero, up) - accel(zero, zero, um)) / (2 * h);
  }
  out.A = MatX::Zero(2 * D, 2 * D);
  out.A.topRightCorner(D, D).setIdentity();
  out.A.bottomLeftCorner(D, D) = out.stiffness;
  out.A.bottomRightCorner(D, D) = out.damping;
  out.B = MatX::Zero(2 * D, m);
  out.B.bottomRows(D) = out.input;
  return out;
}

/// Largest entrywise relative deviation over entries with |ref| above
/// `floor` times the Frobenius norm of ref. Entries below the floor must
/// agree to within floor * norm in absolute terms.
inline double max_relative_deviation(const MatX& test, const MatX& ref, double floor = 1e-8) {
  const double cut = floor * ref.norm();
  double worst = 0.0;
  for (Eigen::Index r = 0; r < ref.rows(); ++r) {
    for (Eigen::Index c = 0; c < ref.cols(); ++c) {
      const double diff = std::abs(test(r, c) - ref(r, c));
      if (std::abs(ref(r, c)) > cut) {
        worst = std::max(worst, diff / std::abs(ref(r, c)));
      } else if (diff > cut) {
        worst = std::max(worst, diff / std::max(cut, 1e-300));
      }
    }
  }
  return worst;
}

// ------------------------------------------------------------ gains

inline Eigen::Index controllability_rank(const LinearModel& lm) {
  return linalg::controllable_dimension(lm.state_matrix(), lm.input_matrix());
}

struct GainSet {
  MatX Kx, Kv;  // 3n x D each
  MatX P;       // CARE solution
  double care_residual = 0.0;
  double spectral_abscissa = 0.0;

  Eigen::Matrix<double, 3, Eigen::Dynamic> Kx_i(std::size_t i) const {
    return Kx.middleRows(3 * static_cast<Eigen::Index>(i), 3);
  }
  Eigen::Matrix<double, 3, Eigen::Dynamic> Kv_i(std::size_t i) const {
    return Kv.middleRows(3 * static_cast<Eigen::Index>(i), 3);
  }
  MatX K() const {
    MatX k(Kx.rows(), Kx.cols() + Kv.cols());
    k << Kx, Kv;
    return k;
  }
};

/// Closed-loop first-order matrix for du = -Kx x - Kv x'.
inline MatX closed_loop_matrix(const LinearModel& lm, const GainSet& gains) {
  return lm.state_matrix() - lm.input_matrix() * gains.K();
}

inline GainSet lqr_gains(const LinearModel& lm, const MatX& Qw, const MatX& Rw) {
  const MatX A = lm.state_matrix();
  const MatX B = lm.input_matrix();
  const auto res = linalg::care(A, B, Qw, Rw);
  GainSet gs;
  gs.P = res.P;
  gs.care_residual = res.residual;
  const MatX K = Rw.llt().solve(B.transpose() * res.P);
  const Eigen::Index D = lm.dim();
  gs.Kx = K.leftCols(D);
  gs.Kv = K.rightCols(D);
  gs.spectral_abscissa = linalg::spectral_abscissa(A - B * K);
  if (!(gs.spectral_abscissa < 0.0)) {
    throw Error(ErrorCode::NotStabilizable,
                "closed-loop spectral abscissa " + std::to_string(gs.spectral_abscissa));
  }
  return gs;
}

inline GainSet lqr_gains(const LinearModel& lm) {
  const Eigen::Index D = lm.dim();
  return lqr_gains(lm, MatX::Identity(2 * D, 2 * D), MatX::Identity(lm.inputs(), lm.inputs()));
}

inline MatX lyapunov_solve(const MatX& A_cl, const MatX& Q) { return linalg::lyapunov(A_cl, Q); }

}  // namespace cableload
