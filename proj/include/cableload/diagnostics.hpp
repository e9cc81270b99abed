#pragma once

// Error metrics, Lyapunov candidates and the gain inequalities of the
// stability argument, evaluated numerically on recorded trajectories.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cableload/controller.hpp"
#include "cableload/linearization.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"
#include "cableload/trajectory.hpp"

namespace cableload {

struct LinkErrors {
  double e_q = 0.0;      // sum ||q_ij - e3||
  double e_omega = 0.0;  // sum ||omega_ij||
};

inline LinkErrors link_errors(const SystemState& s) {
  LinkErrors e;
  for (const auto& qs : s.quadrotors) {
    for (const auto& l : qs.links) {
      e.e_q += (l.q.vector() - e3()).norm();
      e.e_omega += l.omega.norm();
    }
  }
  return e;
}

inline LinkErrors link_errors(const SystemParams& p, const SystemState& s) {
  (void)p;
  return link_errors(s);
}

/// ||2J - tr(J) I||_2
inline double inertia_disturbance_factor(const Mat3& J) {
  const Mat3 D = 2.0 * J - J.trace() * Mat3::Identity();
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (D + D.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double attitude_disturbance_bound(const Mat3& J, const std::vector<Vec3>& Omega_c) {
  double w = 0.0;
  for (const auto& v : Omega_c) w = std::max(w, v.norm());
  return inertia_disturbance_factor(J) * w;
}

inline std::pair<double, double> inertia_extremes(const Mat3& J) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(J, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

/// min{ sqrt(k_R lm) / lM, 4 k_R k_W / (8 k_R lM + (k_W + B2)^2) }
inline double c2_bound(double k_R, double k_Omega, const Mat3& J, double B2) {
  if (!(k_R > 0.0) || !(k_Omega > 0.0)) throw Error(ErrorCode::InvalidArgument, "gains must be positive");
  const auto [lm, lM] = inertia_extremes(J);
  const double a = std::sqrt(k_R * lm) / lM;
  const double b = 4.0 * k_R * k_Omega / (8.0 * k_R * lM + (k_Omega + B2) * (k_Omega + B2));
  return std::min(a, b);
}

inline Eigen::Matrix2d w2_matrix(double c2, double k_R, double k_Omega, double B2, double lambda_M) {
  Eigen::Matrix2d W;
  const double off = -0.5 * c2 * (k_Omega + B2);
  W << c2 * k_R, off, off, k_Omega - 2.0 * c2 * lambda_M;
  return W;
}

inline Eigen::Vector2d sym2_eigenvalues(const Eigen::Matrix2d& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(W, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Lower and upper sandwich matrices for V2_i in z = [|e_R|, |e_W|].
inline std::pair<Eigen::Matrix2d, Eigen::Matrix2d> v2_sandwich(double c2, double k_R, const Mat3& J, double psi2) {
  const auto [lm, lM] = inertia_extremes(J);
  Eigen::Matrix2d lo, hi;
  lo << k_R, -c2 * lM, -c2 * lM, lm;
  hi << 2.0 * k_R / (2.0 - psi2), c2 * lM, c2 * lM, lM;
  return {0.5 * lo, 0.5 * hi};
}

/// V2_i = 1/2 eW.J eW + k_R Psi + c2 eR.J eW
inline double lyapunov_v2_term(const Rotation& R, const Vec3& Omega, const AttitudeCommand& cmd, const Mat3& J,
                               double k_R, double c2) {
  const Vec3 eR = attitude_error(R, cmd.R);
  const Vec3 eW = angular_velocity_error(R, cmd.R, Omega, cmd.Omega);
  return 0.5 * eW.dot(J * eW) + k_R * config_error_psi(R, cmd.R) + c2 * eR.dot(J * eW);
}

inline double lyapunov_v2(const SystemParams& p, const SystemState& s, const std::vector<AttitudeCommand>& cmds,
                          double k_R, const std::vector<double>& c2) {
  double V = 0.0;
  for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
    V += lyapunov_v2_term(s.quadrotors[i].R, s.quadrotors[i].Omega, cmds[i], p.quadrotors[i].inertia, k_R, c2[i]);
  }
  return V;
}

inline double lyapunov_v1(const VecX& z1, const MatX& P) { return z1.dot(P * z1); }

/// ||(e3^T Rc^T R e3) R e3 - Rc e3||, bounded by ||e_R|| when Psi < 1.
inline double thrust_axis_error(const Rotation& R, const Rotation& Rc) {
  const Vec3 b = R.matrix() * e3();
  const Vec3 bc = Rc.matrix() * e3();
  return (bc.dot(b) * b - bc).norm();
}

struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least squares fit of log(y) against t over samples with y above `floor`.
inline LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& y, double floor = 1e-14) {
  LogLinearFit fit;
  double st = 0, sy = 0, stt = 0, sty = 0, syy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(y[k] > floor)) continue;
    const double ly = std::log(y[k]);
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
    syy += ly * ly;
    ++n;
  }
  fit.points = n;
  if (n < 2) return fit;
  const double N = static_cast<double>(n);
  const double vt = stt - st * st / N, vy = syy - sy * sy / N, cty = sty - st * sy / N;
  if (!(vt > 0.0)) return fit;
  fit.slope = cty / vt;
  fit.intercept = (sy - fit.slope * st) / N;
  fit.r_squared = vy > 0.0 ? cty * cty / (vt * vy) : 1.0;
  return fit;
}

struct QuadReport {
  double B2 = 0.0;
  double c2_bound = 0.0;
  double c2 = 0.0;
  Eigen::Vector2d W2_eigenvalues = Eigen::Vector2d::Zero();
  double psi_max = 0.0;
  double psi1 = 0.0;
  double psi2 = 0.0;
  double alpha = 0.0;
  double B1 = 0.0;
  bool W2_positive = false;
  bool final_condition = false;  // lambda_m(W2) > n (c3 B1 / 2)^2 / (lambda_min(Q) - 2 c3 Kmax alpha)
  double final_condition_rhs = 0.0;
};

struct StabilityReport {
  std::vector<QuadReport> quads;
  double lambda_min_Q = 1.0;
  bool P_valid = false;  // closed loop Hurwitz, P from the Lyapunov solve
  double P_min_eigenvalue = 0.0;
  double P_max_eigenvalue = 0.0;
  double c3 = 0.0;
  double K_max = 0.0;
  double alpha = 0.0;
  double translational_margin = 0.0;  // lambda_min(Q) - 2 c3 Kmax alpha
  bool gains_ok = false;              // every W2_i positive definite
  bool final_condition_ok = false;
  // trajectory certificate
  double transient_end = 0.0;
  bool monotone = false;
  double max_increase = 0.0;  // largest V(k+1) - V(k) after the transient, relative to V at its start
  bool decreased = false;
  LogLinearFit x0_decay;
  LogLinearFit eq_decay;
  bool trivial = false;  // every error series identically ~0
  bool certified = false;
};

struct CertifyOptions {
  double transient_fraction = 0.2;
  double monotone_tolerance = 1e-6;  // relative to V at the end of the transient
  double c2_fraction = 0.9;
  double k_R = 8.0;
  double k_Omega = 2.0;
};

struct CertificateSeries {
  std::vector<double> t, V1, V2, psi0, x0_error, e_q, e_omega;
  std::vector<std::vector<double>> psi;  // per quadrotor
};

struct Certificate {
  StabilityReport report;
  CertificateSeries series;
};

inline Certificate certify_trajectory(const SystemParams& p, const Equilibrium& eq, const LinearModel& lm,
                                      const GainSet& gains, const TrajectoryRecord& rec, const CertifyOptions& opt) {
  const std::size_t n = p.num_quadrotors();
  const std::size_t N = rec.samples.size();
  Certificate out;
  StabilityReport& rep = out.report;
  CertificateSeries& ser = out.series;

  // translational Lyapunov matrix
  const MatX Acl = closed_loop_matrix(lm, gains);
  const Eigen::Index Z = Acl.rows();
  const MatX Q = MatX::Identity(Z, Z);
  MatX P = MatX::Identity(Z, Z);
  try {
    P = lyapunov_solve(Acl, Q);
    rep.P_valid = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotHurwitz) throw;
    rep.P_valid = false;
  }
  Eigen::SelfAdjointEigenSolver<MatX> pes(P, Eigen::EigenvaluesOnly);
  rep.P_min_eigenvalue = pes.eigenvalues().minCoeff();
  rep.P_max_eigenvalue = pes.eigenvalues().maxCoeff();
  rep.lambda_min_Q = 1.0;
  {
    MatX BB = MatX::Zero(Z, lm.inputs());
    BB.bottomRows(lm.dim()) = lm.M.ldlt().solve(lm.B);
    rep.c3 = 2.0 * Eigen::JacobiSVD<MatX>(P * BB).singularValues()(0);
  }
  const double nKx = gains.Kx.size() ? Eigen::JacobiSVD<MatX>(gains.Kx).singularValues()(0) : 0.0;
  const double nKv = gains.Kv.size() ? Eigen::JacobiSVD<MatX>(gains.Kv).singularValues()(0) : 0.0;
  rep.K_max = std::max(nKx, nKv);

  // per-quadrotor attitude quantities from the recorded commands
  rep.quads.resize(n);
  ser.psi.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    QuadReport& q = rep.quads[i];
    std::vector<Vec3> Wc;
    for (const auto& s : rec.samples) {
      Wc.push_back(s.commands[i].Omega);
      q.psi_max = std::max(q.psi_max, config_error_psi(s.state.quadrotors[i].R, s.commands[i].R));
    }
    const Mat3& J = p.quadrotors[i].inertia;
    q.B2 = attitude_disturbance_bound(J, Wc);
    q.c2_bound = c2_bound(opt.k_R, opt.k_Omega, J, q.B2);
    q.c2 = opt.c2_fraction * q.c2_bound;
    q.W2_eigenvalues = sym2_eigenvalues(w2_matrix(q.c2, opt.k_R, opt.k_Omega, q.B2, inertia_extremes(J).second));
    q.W2_positive = q.W2_eigenvalues.minCoeff() > 0.0;
    q.psi1 = std::min(1.1 * q.psi_max, 1.0 - 1e-6);
    q.psi2 = std::min(1.1 * q.psi_max, 2.0 - 1e-6);
    q.alpha = std::sqrt(q.psi1 * (2.0 - q.psi1));
    q.B1 = eq.force[i].norm();
    rep.alpha += q.alpha;
  }
  rep.translational_margin = rep.lambda_min_Q - 2.0 * rep.c3 * rep.K_max * rep.alpha;
  rep.gains_ok = true;
  rep.final_condition_ok = rep.translational_margin > 0.0;
  for (auto& q : rep.quads) {
    rep.gains_ok = rep.gains_ok && q.W2_positive;
    const double h = 0.5 * rep.c3 * q.B1;
    q.final_condition_rhs = rep.translational_margin > 0.0 ? static_cast<double>(n) * h * h / rep.translational_margin
                                                            : std::numeric_limits<double>::infinity();
    q.final_condition = rep.translational_margin > 0.0 && q.W2_eigenvalues.minCoeff() > q.final_condition_rhs;
    rep.final_condition_ok = rep.final_condition_ok && q.final_condition;
  }

  // series
  std::vector<double> c2(n);
  for (std::size_t i = 0; i < n; ++i) c2[i] = rep.quads[i].c2;
  for (const auto& s : rec.samples) {
    const ReducedState r = reduced_state(p, eq, s.state);
    VecX z(Z);
    z << r.x, r.xd;
    ser.t.push_back(s.t);
    ser.V1.push_back(lyapunov_v1(z, P));
    ser.V2.push_back(lyapunov_v2(p, s.state, s.commands, opt.k_R, c2));
    ser.psi0.push_back(config_error_psi(s.state.R0, Rotation::identity()));
    ser.x0_error.push_back((s.state.x0 - eq.x0d).norm());
    const LinkErrors le = link_errors(s.state);
    ser.e_q.push_back(le.e_q);
    ser.e_omega.push_back(le.e_omega);
    for (std::size_t i = 0; i < n; ++i) ser.psi[i].push_back(config_error_psi(s.state.quadrotors[i].R, s.commands[i].R));
  }

  // certificate
  if (N == 0) return out;
  const double T = ser.t.back() - ser.t.front();
  rep.transient_end = ser.t.front() + opt.transient_fraction * T;
  std::size_t k0 = 0;
  while (k0 < N && ser.t[k0] < rep.transient_end) ++k0;
  k0 = std::min(k0, N - 1);
  std::vector<double> V(N);
  double Vmax = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    V[k] = ser.V1[k] + ser.V2[k];
    Vmax = std::max(Vmax, std::abs(V[k]));
  }
  rep.trivial = Vmax < 1e-20;
  const double scale = std::max(V[k0], 1e-300);
  rep.max_increase = 0.0;
  for (std::size_t k = k0 + 1; k < N; ++k) rep.max_increase = std::max(rep.max_increase, (V[k] - V[k - 1]) / scale);
  rep.monotone = rep.trivial || rep.max_increase <= opt.monotone_tolerance;
  rep.decreased = rep.trivial || V.back() < V.front();

  std::vector<double> tt(ser.t.begin() + static_cast<long>(k0), ser.t.end());
  std::vector<double> xe(ser.x0_error.begin() + static_cast<long>(k0), ser.x0_error.end());
  std::vector<double> qe(ser.e_q.begin() + static_cast<long>(k0), ser.e_q.end());
  rep.x0_decay = fit_log_linear(tt, xe);
  rep.eq_decay = fit_log_linear(tt, qe);
  rep.certified = rep.trivial || (rep.monotone && rep.decreased && rep.x0_decay.points >= 2 && rep.x0_decay.slope < 0.0);
  return out;
}

}  // namespace cableload
