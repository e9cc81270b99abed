#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cableload/controller.hpp"
#include "cableload/diagnostics.hpp"
#include "cableload/integrator.hpp"
#include "cableload/linalg.hpp"
#include "cableload/linearization.hpp"
#include "cableload/presets.hpp"
#include "cableload/random.hpp"
#include "cableload/trajectory.hpp"

using namespace cableload;

namespace {

constexpr double kPi = std::numbers::pi;

MatX scalar(double v) { return MatX::Constant(1, 1, v); }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

struct Case1Fixture {
  SystemParams p = case1_params();
  Equilibrium eq = build_equilibrium(p, reference_target());
  LinearModel lm = assemble_linear_model(p, eq);
};

const Case1Fixture& case1() {
  static const Case1Fixture f;
  return f;
}

const GainSet& case1_identity_gains() {
  static const GainSet g = lqr_gains(case1().lm);
  return g;
}

ControllerConfig config_from(const GainSet& g) {
  ControllerConfig cfg;
  cfg.Kx = g.Kx;
  cfg.Kv = g.Kv;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------- linalg

TEST(Linalg, LyapunovExamples) {
  EXPECT_NEAR(linalg::lyapunov(scalar(-1.0), scalar(2.0))(0, 0), 1.0, 1e-14);
  const MatX A = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
  const MatX P = linalg::lyapunov(A, MatX::Identity(2, 2));
  EXPECT_NEAR(P(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(P(1, 1), 0.25, 1e-14);
  EXPECT_NEAR(P(0, 1), 0.0, 1e-14);
  EXPECT_EQ(code_of([] { linalg::lyapunov(scalar(0.5), scalar(1.0)); }), ErrorCode::NotHurwitz);
}

TEST(Linalg, LyapunovRandomPositiveDefinite) {
  RandomSource rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = 12;
    MatX A(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) A(r, c) = rng.normal();
    A -= (linalg::spectral_abscissa(A) + 0.5) * MatX::Identity(n, n);
    const MatX Q = MatX::Identity(n, n);
    const MatX P = linalg::lyapunov(A, Q);
    EXPECT_LT((A.transpose() * P + P * A + Q).norm(), 1e-8 * Q.norm());
    EXPECT_LT((P - P.transpose()).norm(), 1e-12 * P.norm());
    for (int k = 0; k < 100; ++k) {
      VecX z(n);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
      EXPECT_GT(z.dot(P * z), 0.0);
    }
  }
}

TEST(Linalg, CareScalarExamples) {
  auto r = linalg::care(scalar(0.0), scalar(1.0), scalar(1.0), scalar(1.0));
  EXPECT_NEAR(r.P(0, 0), 1.0, 1e-12);
  r = linalg::care(scalar(-1.0), scalar(1.0), scalar(0.0), scalar(1.0));
  EXPECT_NEAR(r.P(0, 0), 0.0, 1e-12);
  EXPECT_EQ(code_of([] { linalg::care(scalar(1.0), scalar(0.0), scalar(1.0), scalar(1.0)); }),
            ErrorCode::NotStabilizable);
}

TEST(Linalg, SchurOrderingPutsStableFirst) {
  RandomSource rng(11);
  MatX A(8, 8);
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < 8; ++c) A(r, c) = rng.normal();
  auto S = linalg::complex_schur(A);
  const Eigen::Index stable = linalg::order_stable_first(S);
  for (Eigen::Index k = 0; k < 8; ++k) EXPECT_EQ(S.T(k, k).real() < 0.0, k < stable);
  const Eigen::MatrixXcd back = S.U * S.T * S.U.adjoint();
  EXPECT_LT((back - A.cast<std::complex<double>>()).norm(), 1e-10 * A.norm());
}

TEST(Linalg, ControllabilityWellScaledAgreesWithExplicitMatrix) {
  RandomSource rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    MatX A(6, 6), B(6, 1);
    for (Eigen::Index r = 0; r < 6; ++r) {
      for (Eigen::Index c = 0; c < 6; ++c) A(r, c) = rng.normal(0.5);
      B(r, 0) = rng.normal();
    }
    if (trial % 2) A.row(5).setZero(), A.col(5).setZero(), B(5, 0) = 0.0;  // decoupled mode
    EXPECT_EQ(linalg::controllable_dimension(A, B), linalg::numerical_rank(linalg::controllability_matrix(A, B)));
  }
  EXPECT_EQ(linalg::controllable_dimension(MatX::Identity(4, 4), MatX::Zero(4, 2)), 0);
}

TEST(Linalg, ControllabilityAgreesWithPbh) {
  // the explicit [B AB ...] matrix spans ~1e24 here and misreports its rank
  RandomSource rng(5);
  const SystemParams p = random_params(rng, 2, 1, true);
  const Equilibrium eq = build_equilibrium(p, Vec3::Zero());
  const LinearModel lm = assemble_linear_model(p, eq);
  const MatX A = lm.state_matrix(), B = lm.input_matrix();
  EXPECT_FALSE(linalg::has_unstabilizable_mode(A, B));
  EXPECT_EQ(linalg::controllable_dimension(A, B), A.rows());
}

// ---------------------------------------------------------------- linearization

TEST(Linearization, Case1Equilibrium) {
  const auto& f = case1();
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(f.eq.thrust[i], 9.1233, 1e-12);
    EXPECT_LE((f.eq.force[i] + 9.1233 * e3()).norm(), 1e-12);
  }
  EXPECT_LE((f.eq.quad_target[0] - Vec3(0.74, 0.38, -1.35)).norm(), 1e-12);
  EXPECT_LE(equilibrium_residual(f.p, f.eq), 1e-10);
}

TEST(Linearization, Case1Blocks) {
  const auto& f = case1();
  EXPECT_LE((f.lm.M.topLeftCorner(3, 3) - 3.72 * Mat3::Identity()).norm(), 1e-12);
  EXPECT_EQ(f.lm.G.topLeftCorner(3, 3).norm(), 0.0);
  EXPECT_LE((f.lm.M - f.lm.M.transpose()).norm(), 1e-12 * f.lm.M.norm());
  EXPECT_EQ(Eigen::LLT<MatX>(f.lm.M).info(), Eigen::Success);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto c = static_cast<Eigen::Index>(3 * i);
    EXPECT_EQ((f.lm.B.block(0, c, 3, 3) - MatX::Identity(3, 3)).norm(), 0.0);
    EXPECT_LE((f.lm.B.block(3, c, 3, 3) - MatX(hat(f.p.quadrotors[i].attachment))).norm(), 1e-15);
  }
}

TEST(Linearization, MatchesFiniteDifferencesCase1) {
  const auto& f = case1();
  const FdLinearization fd = fd_linearize(f.p, f.eq);
  const MatX Minv = f.lm.M.inverse();
  EXPECT_LT(max_relative_deviation(-Minv * f.lm.G, fd.stiffness), 1e-4);
  EXPECT_LT(max_relative_deviation(Minv * f.lm.B, fd.input), 1e-4);
  EXPECT_LT(fd.damping.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Linearization, MatchesFiniteDifferencesRandom) {
  RandomSource rng(42);
  const std::pair<std::size_t, std::size_t> shapes[] = {{1, 1}, {1, 3}, {2, 2}, {3, 2}, {4, 3}};
  for (auto [n, ni] : shapes) {
    const SystemParams p = random_params(rng, n, ni, true);
    const Equilibrium eq = build_equilibrium(p, rng.normal3());
    ASSERT_LE(equilibrium_residual(p, eq), 1e-10);
    const LinearModel lm = assemble_linear_model(p, eq);
    const FdLinearization fd = fd_linearize(p, eq);
    const MatX Minv = lm.M.inverse();
    EXPECT_LT(max_relative_deviation(-Minv * lm.G, fd.stiffness), 1e-4) << n << "," << ni;
    EXPECT_LT(max_relative_deviation(Minv * lm.B, fd.input), 1e-4) << n << "," << ni;
  }
}

TEST(Linearization, UnbalancedAttachmentIsNotAnEquilibrium) {
  SystemParams p = case1_params();
  p.quadrotors[0].attachment.x() += 0.2;
  EXPECT_GT(equilibrium_residual(p, build_equilibrium(p, Vec3::Zero())), 1e-3);
}

TEST(Linearization, ControllabilityCase1Full) { EXPECT_EQ(controllability_rank(case1().lm), 92); }

TEST(Linearization, ControllabilitySingleQuadrotorLosesYaw) {
  SystemParams p = case1_params();
  p.quadrotors.resize(1);
  p.quadrotors[0].attachment = Vec3(0.0, 0.0, -0.1);
  p.payload_inertia = 0.05 * Mat3::Identity();
  const Equilibrium eq = build_equilibrium(p, Vec3::Zero());
  const LinearModel lm = assemble_linear_model(p, eq);
  // 32 states; payload yaw angle and rate are unreachable
  EXPECT_EQ(lm.state_matrix().rows(), 32);
  EXPECT_EQ(controllability_rank(lm), 30);
  EXPECT_TRUE(linalg::has_unstabilizable_mode(lm.state_matrix(), lm.input_matrix()));
}

TEST(Linearization, LqrCase1IdentityWeights) {
  const GainSet& g = case1_identity_gains();
  EXPECT_LT(g.care_residual, 1e-8 * g.P.norm());
  EXPECT_LT(g.spectral_abscissa, 0.0);
  EXPECT_LT(linalg::spectral_abscissa(closed_loop_matrix(case1().lm, g)), 0.0);
  EXPECT_EQ(g.Kx.rows(), 12);
  EXPECT_EQ(g.Kx.cols(), 46);
  EXPECT_LE((g.Kx_i(2) - g.Kx.middleRows(6, 3)).norm(), 0.0);
}

TEST(Linearization, LqrHomogeneity) {
  RandomSource rng(8);
  const SystemParams p = random_params(rng, 2, 2, true);
  const Equilibrium eq = build_equilibrium(p, Vec3::Zero());
  const LinearModel lm = assemble_linear_model(p, eq);
  const Eigen::Index D = lm.dim();
  const GainSet a = lqr_gains(lm);
  const GainSet b = lqr_gains(lm, 7.5 * MatX::Identity(2 * D, 2 * D), 7.5 * MatX::Identity(6, 6));
  EXPECT_LT((a.K() - b.K()).norm(), 1e-10 * a.K().norm());
}

TEST(Linearization, LyapunovCase1ClosedLoop) {
  const MatX Acl = closed_loop_matrix(case1().lm, case1_identity_gains());
  const MatX Q = MatX::Identity(Acl.rows(), Acl.cols());
  const MatX P = lyapunov_solve(Acl, Q);
  EXPECT_LT((Acl.transpose() * P + P * Acl + Q).norm(), 1e-8 * Q.norm());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatX>(P).eigenvalues().minCoeff(), 0.0);
}

TEST(Linearization, ChartRoundTrip) {
  const auto& f = case1();
  RandomSource rng(4);
  const auto D = static_cast<Eigen::Index>(f.p.reduced_dim());
  VecX x(D), xd(D);
  for (Eigen::Index k = 0; k < D; ++k) {
    x(k) = rng.normal(1e-3);
    xd(k) = rng.normal(1e-3);
  }
  const ReducedState r = reduced_state(f.p, f.eq, state_from_reduced(f.p, f.eq, x, xd));
  // the link chart agrees with e3 x q to second order
  EXPECT_LT((r.x - x).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((r.xd - xd).cwiseAbs().maxCoeff(), 1e-8);
}

// ---------------------------------------------------------------- controller

TEST(Controller, ReducedStateExamples) {
  const auto& f = case1();
  const ReducedState z = reduced_state(f.p, f.eq, f.eq.state);
  EXPECT_EQ(z.x.norm() + z.xd.norm(), 0.0);

  SystemState s = f.eq.state;
  s.x0 += Vec3(0.1, 0.0, 0.0);
  const ReducedState r = reduced_state(f.p, f.eq, s);
  EXPECT_NEAR(r.x(0), 0.1, 1e-15);
  EXPECT_LE(r.x.tail(r.x.size() - 1).norm(), 1e-15);

  s = f.eq.state;
  s.quadrotors[0].links[0].q = UnitVector::unchecked(exp_so3(0.1 * e1()) * e3());
  const ReducedState t = reduced_state(f.p, f.eq, s);
  EXPECT_NEAR(t.x(6), std::sin(0.1), 1e-15);
  EXPECT_NEAR(t.x(7), 0.0, 1e-15);

  s = f.eq.state;
  s.R0 = rot_axis(Axis::X, kPi);
  EXPECT_EQ(code_of([&] { reduced_state(f.p, f.eq, s); }), ErrorCode::AttitudeOutOfChart);
}

TEST(Controller, IdealThrust) {
  const auto& f = case1();
  ControllerConfig cfg = config_from(case1_identity_gains());
  const VecX zero = VecX::Zero(46);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_LE((ideal_thrust(cfg, f.eq, zero, zero, i) + 9.1233 * e3()).norm(), 1e-12);
  VecX x = zero;
  x(0) = 1.0;
  const Vec3 expect = f.eq.force[1] - cfg.Kx.block(3, 0, 3, 1);
  EXPECT_LE((ideal_thrust(cfg, f.eq, x, zero, 1) - expect).norm(), 1e-12);
  cfg.Kx.setZero();
  cfg.Kv.setZero();
  RandomSource rng(1);
  VecX y(46);
  for (Eigen::Index k = 0; k < 46; ++k) y(k) = rng.normal();
  EXPECT_EQ((ideal_thrust(cfg, f.eq, y, y, 3) - f.eq.force[3]).norm(), 0.0);
}

TEST(Controller, DesiredAttitudeExamples) {
  EXPECT_LE((desired_attitude(-3.0 * e3(), e1()).matrix() - Mat3::Identity()).norm(), 1e-15);
  EXPECT_EQ(code_of([] { desired_attitude(-2.0 * e1(), e1()); }), ErrorCode::DegenerateHeading);
  EXPECT_EQ(code_of([] { desired_attitude(Vec3(1e-7, 0, 0), e1()); }), ErrorCode::DegenerateThrust);
}

TEST(Controller, DesiredAttitudeProperties) {
  RandomSource rng(21);
  for (int k = 0; k < 500; ++k) {
    const Vec3 A = rng.normal3(5.0);
    const Vec3 b1 = rng.unit();
    if (A.normalized().cross(b1).norm() < 1e-3) continue;
    const Rotation Rc = desired_attitude(A, b1);
    EXPECT_LT((Rc.matrix().transpose() * Rc.matrix() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(Rc.matrix().determinant(), 1.0, 1e-12);
    EXPECT_LE((Rc.matrix().col(2) + A / A.norm()).norm(), 1e-15);
    // first axis lies in the plane of b1 and b3
    EXPECT_LE(std::abs(Rc.matrix().col(0).dot(Rc.matrix().col(2).cross(b1))), 1e-12);
    EXPECT_NEAR(thrust_magnitude(A, Rc), A.norm(), 1e-12 * A.norm());
  }
}

TEST(Controller, CommandRateStartup) {
  AttitudeCommandHistory h(0.01);
  const Vec3 A = -9.0 * e3();
  auto c = attitude_command(A, e1(), h);
  EXPECT_EQ(c.Omega.norm() + c.Omega_dot.norm(), 0.0);
  c = attitude_command(A, e1(), h);
  EXPECT_LE(c.Omega.norm(), 1e-12);
  // rotating heading at 0.5 rad/s about e3
  h.reset();
  std::vector<AttitudeCommand> cmds;
  for (int k = 0; k < 4; ++k) {
    const double th = 0.5 * 0.01 * k;
    cmds.push_back(attitude_command(A, Vec3(std::cos(th), std::sin(th), 0.0), h));
  }
  EXPECT_EQ(cmds[0].Omega.norm(), 0.0);
  EXPECT_LE((cmds[1].Omega - 0.5 * e3()).norm(), 1e-12);
  EXPECT_EQ(cmds[1].Omega_dot.norm(), 0.0);
  EXPECT_LE(cmds[2].Omega_dot.norm(), 1e-9);
  EXPECT_LE((cmds[3].Omega - 0.5 * e3()).norm(), 1e-12);
}

TEST(Controller, ThrustMagnitudeExamples) {
  EXPECT_NEAR(thrust_magnitude(-9.1233 * e3(), Rotation::identity()), 9.1233, 1e-15);
  EXPECT_NEAR(thrust_magnitude(e1(), Rotation::identity()), 0.0, 1e-15);
}

TEST(Controller, MomentExamples) {
  const Mat3 J = Vec3(0.557e-2, 0.557e-2, 1.05e-2).asDiagonal();
  AttitudeCommand cmd{rot_axis(Axis::Y, 0.3), Vec3::Zero(), Vec3::Zero()};
  EXPECT_EQ(moment_command(8.0, 2.0, cmd.R, Vec3::Zero(), cmd, J).norm(), 0.0);

  cmd.R = rot_axis(Axis::X, deg2rad(30.0));
  const Vec3 M = moment_command(8.0, 2.0, Rotation::identity(), Vec3::Zero(), cmd, J);
  // e_R = -sin(30 deg) e1
  EXPECT_LE((M - 8.0 * 0.5 * e1()).norm(), 1e-14);

  const Vec3 w(0.3, -1.2, 0.7);
  cmd = AttitudeCommand{rot_axis(Axis::Z, 1.0), w, Vec3::Zero()};
  EXPECT_LE((moment_command(8.0, 2.0, cmd.R, w, cmd, J) - w.cross(J * w)).norm(), 1e-14);
}

TEST(Controller, ConfigValidation) {
  ControllerConfig cfg = config_from(case1_identity_gains());
  const SystemParams& p = case1().p;
  EXPECT_NO_THROW(validate(cfg, p));
  cfg.k_R = 0.0;
  EXPECT_EQ(code_of([&] { validate(cfg, p); }), ErrorCode::InvalidArgument);
  cfg = config_from(case1_identity_gains());
  cfg.Kx = MatX::Zero(12, 40);
  EXPECT_EQ(code_of([&] { validate(cfg, p); }), ErrorCode::InvalidArgument);
  cfg = config_from(case1_identity_gains());
  cfg.period = 1.5e-3;
  EXPECT_EQ(code_of([&] { ClosedLoop(p, case1().eq, cfg, 1e-3); }), ErrorCode::InvalidArgument);
}

TEST(Controller, EquilibriumStartStaysPut) {
  const auto& f = case1();
  ClosedLoop loop(f.p, f.eq, config_from(case1_identity_gains()), 1e-3);
  SystemState s = f.eq.state;
  for (int k = 0; k < 200; ++k) {
    auto [u, next] = closed_loop_step(loop, s);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(u.thrust[i], 9.1233, 1e-9);
      EXPECT_LE(u.moment[i].norm(), 1e-9);
    }
    s = next;
  }
  EXPECT_LE((s.x0 - f.eq.x0d).norm(), 1e-9);
}

TEST(Controller, ZeroOrderHold) {
  const auto& f = case1();
  ControllerConfig cfg = config_from(case1_identity_gains());
  cfg.period = 5e-3;
  ClosedLoop loop(f.p, f.eq, cfg, 1e-3);
  SystemState s = case1_initial_state();
  std::vector<ControlInput> held;
  for (int k = 0; k < 20; ++k) {
    auto [u, next] = loop.step(s);
    held.push_back(u);
    s = next;
  }
  for (int k = 0; k < 20; ++k) {
    const ControlInput& ref = held[static_cast<std::size_t>(k - k % 5)];
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(held[static_cast<std::size_t>(k)].thrust[i], ref.thrust[i]);
      EXPECT_EQ((held[static_cast<std::size_t>(k)].moment[i] - ref.moment[i]).norm(), 0.0);
    }
  }
  EXPECT_NE(held[0].thrust[0], held[5].thrust[0]);
}

// ---------------------------------------------------------------- diagnostics

TEST(Diagnostics, LinkErrorExamples) {
  const SystemParams p = case1_params();
  SystemState s = case1_initial_state();
  LinkErrors e = link_errors(p, s);
  EXPECT_EQ(e.e_q, 0.0);
  EXPECT_EQ(e.e_omega, 0.0);
  s.quadrotors[2].links[3].q = UnitVector::unchecked(e1());
  EXPECT_NEAR(link_errors(p, s).e_q, std::sqrt(2.0), 1e-15);
  s.quadrotors[0].links[0].omega = Vec3(0.0, 3.0, 4.0);
  EXPECT_NEAR(link_errors(p, s).e_omega, 5.0, 1e-15);
}

TEST(Diagnostics, DisturbanceBoundExamples) {
  const Mat3 J = Vec3(0.557e-2, 0.557e-2, 1.05e-2).asDiagonal();
  EXPECT_EQ(attitude_disturbance_bound(J, {Vec3::Zero(), Vec3::Zero()}), 0.0);
  EXPECT_NEAR(attitude_disturbance_bound(0.3 * Mat3::Identity(), {Vec3(1, 2, 2), Vec3(0, 1, 0)}), 0.9, 1e-15);
  // largest |2 j_k - tr J| is on the roll/pitch axes
  EXPECT_NEAR(inertia_disturbance_factor(J), 0.0105, 1e-15);
}

TEST(Diagnostics, C2BoundExamples) {
  EXPECT_NEAR(c2_bound(1.0, 1.0, Mat3::Identity(), 0.0), 4.0 / 9.0, 1e-15);
  const Mat3 J = Vec3(0.557e-2, 0.557e-2, 1.05e-2).asDiagonal();
  double prev = c2_bound(1.0, 1.0, Mat3::Identity(), 0.0);
  for (double B2 : {0.5, 1.0, 2.0, 4.0}) {
    const double v = c2_bound(1.0, 1.0, Mat3::Identity(), B2);
    EXPECT_LT(v, prev);
    prev = v;
  }
  const double B2 = inertia_disturbance_factor(J) * 0.5;
  const double bound = c2_bound(8.0, 2.0, J, B2);
  const Eigen::Vector2d ev = sym2_eigenvalues(w2_matrix(0.99 * bound, 8.0, 2.0, B2, 1.05e-2));
  EXPECT_GT(ev.minCoeff(), 0.0);
  EXPECT_EQ(code_of([&] { c2_bound(0.0, 2.0, J, B2); }), ErrorCode::InvalidArgument);
}

TEST(Diagnostics, W2Examples) {
  const Eigen::Matrix2d W = w2_matrix(0.0, 8.0, 2.0, 0.3, 0.01);
  EXPECT_EQ(W(0, 0), 0.0);
  EXPECT_EQ(W(0, 1), 0.0);
  EXPECT_EQ(W(1, 1), 2.0);
  EXPECT_EQ(W(0, 1), W(1, 0));
  // counterexample at 1.01x and 1.1x of a binding second argument
  const double bound = c2_bound(1.0, 1.0, Mat3::Identity(), 0.0);
  EXPECT_LE(sym2_eigenvalues(w2_matrix(1.01 * bound, 1.0, 1.0, 0.0, 1.0)).minCoeff(), 0.0);
  EXPECT_LE(sym2_eigenvalues(w2_matrix(1.1 * bound, 1.0, 1.0, 0.0, 1.0)).minCoeff(), 0.0);
}

TEST(Diagnostics, W2PositivityMatchesBoundByBisection) {
  RandomSource rng(17);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 25; ++trial) {
    const double kR = rng.uniform(0.5, 10.0), kW = rng.uniform(0.5, 5.0), B2 = rng.uniform(0.0, 2.0);
    const Mat3 J = rng.inertia(0.5, 2.0);
    const double lM = inertia_extremes(J).second;
    const double bound = c2_bound(kR, kW, J, B2);
    const double second = 4.0 * kR * kW / (8.0 * kR * lM + (kW + B2) * (kW + B2));
    if (std::abs(bound - second) > 0.0) continue;  // first argument binding
    double lo = 0.0, hi = 10.0 * bound;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sym2_eigenvalues(w2_matrix(mid, kR, kW, B2, lM)).minCoeff() > 0.0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(lo, bound, 1e-6 * bound);
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Diagnostics, V2Examples) {
  const Mat3 J = Vec3(1.0, 2.0, 3.0).asDiagonal();
  const AttitudeCommand cmd{rot_axis(Axis::Z, 0.4), Vec3(0.1, 0.2, 0.3), Vec3::Zero()};
  EXPECT_NEAR(lyapunov_v2_term(cmd.R, cmd.Omega, cmd, J, 8.0, 0.5), 0.0, 1e-15);
  const Vec3 v(0.5, -1.0, 2.0);
  EXPECT_NEAR(lyapunov_v2_term(cmd.R, cmd.Omega + v, cmd, J, 8.0, 0.5), 0.5 * v.dot(J * v), 1e-12);
}

TEST(Diagnostics, V2SandwichOnD2) {
  RandomSource rng(23);
  const double kR = 8.0, psi2 = 1.9;
  int used = 0;
  for (int k = 0; k < 3000 && used < 1000; ++k) {
    const Mat3 J = rng.inertia(0.004, 0.012);
    const Rotation R = rng.rotation(1.5), Rc = rng.rotation(1.5);
    if (!(config_error_psi(R, Rc) < psi2)) continue;
    const AttitudeCommand cmd{Rc, rng.normal3(), Vec3::Zero()};
    const Vec3 W = rng.normal3(2.0);
    const double c2 = rng.uniform(0.0, 20.0);
    const double V = lyapunov_v2_term(R, W, cmd, J, kR, c2);
    const Eigen::Vector2d z(attitude_error(R, Rc).norm(), angular_velocity_error(R, Rc, W, cmd.Omega).norm());
    const auto [lo, hi] = v2_sandwich(c2, kR, J, psi2);
    EXPECT_LE(z.dot(lo * z), V + 1e-12);
    EXPECT_LE(V, z.dot(hi * z) + 1e-12);
    ++used;
  }
  EXPECT_EQ(used, 1000);
}

TEST(Diagnostics, PsiAndThrustAxisBounds) {
  RandomSource rng(29);
  const double psi1 = 0.9;
  int used = 0;
  for (int k = 0; k < 3000; ++k) {
    const Rotation R = rng.rotation(1.0), Rc = rng.rotation(1.0);
    const double psi = config_error_psi(R, Rc);
    const double eR = attitude_error(R, Rc).norm();
    EXPECT_GE(psi + 1e-14, 0.5 * eR * eR);
    if (psi < psi1) {
      EXPECT_LE(psi, eR * eR / (2.0 - psi1) + 1e-14);
      ++used;
    }
    if (psi < 1.0) EXPECT_LE(thrust_axis_error(R, Rc), eR + 1e-14);
  }
  EXPECT_GT(used, 500);
}

TEST(Diagnostics, V1Examples) {
  const VecX z = VecX::LinSpaced(5, -1.0, 1.0);
  EXPECT_EQ(lyapunov_v1(VecX::Zero(5), MatX::Identity(5, 5)), 0.0);
  EXPECT_NEAR(lyapunov_v1(z, MatX::Identity(5, 5)), z.squaredNorm(), 1e-15);
}

TEST(Diagnostics, LogLinearFit) {
  std::vector<double> t, y;
  for (int k = 0; k < 50; ++k) {
    t.push_back(0.1 * k);
    y.push_back(3.0 * std::exp(-1.7 * 0.1 * k));
  }
  const LogLinearFit f = fit_log_linear(t, y);
  EXPECT_NEAR(f.slope, -1.7, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Diagnostics, CertificateTrivialAtEquilibrium) {
  const auto& f = case1();
  const GainSet& g = case1_identity_gains();
  ClosedLoop loop(f.p, f.eq, config_from(g), 1e-3);
  const TrajectoryRecord rec = simulate(loop, f.eq.state, 1e-3, 0.5, 10);
  const Certificate c = certify_trajectory(f.p, f.eq, f.lm, g, rec, CertifyOptions{});
  EXPECT_EQ(rec.samples.size(), 51u);
  EXPECT_TRUE(c.report.trivial);
  EXPECT_TRUE(c.report.certified);
  EXPECT_TRUE(c.report.P_valid);
  EXPECT_TRUE(c.report.gains_ok);
  for (double v : c.series.e_q) EXPECT_LE(v, 1e-12);
}

TEST(Diagnostics, ReportFlagsMatchNumbers) {
  const auto& f = case1();
  const GainSet& g = case1_identity_gains();
  ClosedLoop loop(f.p, f.eq, config_from(g), 1e-3);
  const TrajectoryRecord rec = simulate(loop, case1_initial_state(), 1e-3, 1.0, 10);
  const Certificate c = certify_trajectory(f.p, f.eq, f.lm, g, rec, CertifyOptions{});
  const StabilityReport& r = c.report;
  bool all_w2 = true, all_final = r.translational_margin > 0.0;
  for (const auto& q : r.quads) {
    EXPECT_EQ(q.W2_positive, q.W2_eigenvalues.minCoeff() > 0.0);
    EXPECT_NEAR(q.c2, 0.9 * q.c2_bound, 1e-15 * q.c2_bound);
    EXPECT_LT(q.psi1, 1.0);
    EXPECT_LT(q.psi2, 2.0);
    EXPECT_EQ(q.final_condition, r.translational_margin > 0.0 && q.W2_eigenvalues.minCoeff() > q.final_condition_rhs);
    all_w2 = all_w2 && q.W2_positive;
    all_final = all_final && q.final_condition;
  }
  EXPECT_EQ(r.gains_ok, all_w2);
  EXPECT_EQ(r.final_condition_ok, all_final);
  EXPECT_EQ(r.monotone, r.max_increase <= CertifyOptions{}.monotone_tolerance);
  EXPECT_NEAR(r.translational_margin, r.lambda_min_Q - 2.0 * r.c3 * r.K_max * r.alpha, 1e-12);
}

TEST(Diagnostics, ZeroGainsFailCertificate) {
  const auto& f = case1();
  GainSet g;
  g.Kx = MatX::Zero(12, 46);
  g.Kv = MatX::Zero(12, 46);
  ClosedLoop loop(f.p, f.eq, config_from(g), 1e-3);
  const TrajectoryRecord rec = simulate(loop, case1_initial_state(), 1e-3, 1.0, 10);
  const Certificate c = certify_trajectory(f.p, f.eq, f.lm, g, rec, CertifyOptions{});
  EXPECT_FALSE(c.report.P_valid);
  EXPECT_FALSE(c.report.decreased);
  EXPECT_FALSE(c.report.certified);
}

TEST(Diagnostics, RotorTrackingDecaysLogLinearly) {
  const Mat3 J = Vec3(0.557e-2, 0.557e-2, 1.05e-2).asDiagonal();
  const double kR = 8.0, kW = 2.0, dt = 1e-3;
  const AttitudeCommand cmd{rot_axis(Axis::X, deg2rad(40.0)) * rot_axis(Axis::Z, 0.5), Vec3::Zero(), Vec3::Zero()};
  const double c2 = 0.9 * c2_bound(kR, kW, J, 0.0);
  RotorState s;
  s.Omega = Vec3(0.2, -0.1, 0.3);
  std::vector<double> t, eR, V;
  for (int k = 0; k <= 3000; ++k) {
    t.push_back(k * dt);
    eR.push_back(attitude_error(s.R, cmd.R).norm());
    V.push_back(lyapunov_v2_term(s.R, s.Omega, cmd, J, kR, c2));
    s = integrate_rotor(J, s, moment_command(kR, kW, s.R, s.Omega, cmd, J), dt);
  }
  const LogLinearFit fit = fit_log_linear(std::vector<double>(t.begin() + 500, t.end()),
                                          std::vector<double>(eR.begin() + 500, eR.end()));
  EXPECT_LT(fit.slope, 0.0);
  EXPECT_GT(fit.r_squared, 0.95);
  for (std::size_t k = 1; k < V.size(); ++k) EXPECT_LE(V[k], V[k - 1] * (1.0 + 1e-9)) << k;
}
