#pragma once

// Self-check harness behind `sim verify`: oracle equivalence, finite
// difference linearization, energy and constraint suites.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cableload/dynamics.hpp"
#include "cableload/integrator.hpp"
#include "cableload/linearization.hpp"
#include "cableload/oracle.hpp"
#include "cableload/presets.hpp"
#include "cableload/random.hpp"

namespace cableload {

using DynamicsFn = std::function<Derivative(const SystemParams&, const SystemState&, const ForceInput&)>;

enum class VerifyLevel { Fast, Full };

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::Fast;
  std::uint64_t seed = 20240601;
  std::size_t samples = 100;
  // dynamics under test in the oracle suite; replaced by mutants in tests
  DynamicsFn dynamics = [](const SystemParams& p, const SystemState& s, const ForceInput& u) {
    return forward_dynamics(p, s, u);
  };
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string note;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool passed() const {
    for (const auto& s : suites)
      if (!s.passed) return false;
    return !suites.empty();
  }
};

namespace verify_detail {

using Shape = std::pair<std::size_t, std::size_t>;

inline VecX stack(const Derivative& d) {
  VecX X(6 + 3 * static_cast<Eigen::Index>(d.q_ddot.size()));
  X.segment<3>(0) = d.v0_dot;
  X.segment<3>(3) = d.Omega0_dot;
  for (std::size_t k = 0; k < d.q_ddot.size(); ++k) X.segment<3>(6 + 3 * static_cast<Eigen::Index>(k)) = d.q_ddot[k];
  return X;
}

inline ForceInput random_force(RandomSource& rng, std::size_t n) {
  ForceInput u;
  for (std::size_t i = 0; i < n; ++i) {
    u.force.push_back(rng.normal3(5.0));
    u.moment.push_back(rng.normal3(0.1));
  }
  return u;
}

inline std::string shape_name(const Shape& s) {
  return "(" + std::to_string(s.first) + "," + std::to_string(s.second) + ")";
}

template <class F>
SuiteResult timed(const std::string& name, double tol, F&& body) {
  SuiteResult r;
  r.name = name;
  r.tolerance = tol;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.value = body(r);
    r.passed = r.value < tol;
  } catch (const Error& e) {
    r.passed = false;
    r.note = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline SuiteResult oracle_suite(const Shape& shape, const VerifyOptions& opt) {
  return timed("oracle equivalence " + shape_name(shape), 1e-8, [&](SuiteResult&) {
    RandomSource rng(opt.seed + 1000 * shape.first + shape.second);
    double worst = 0.0;
    for (std::size_t k = 0; k < opt.samples; ++k) {
      const SystemParams p = random_params(rng, shape.first, shape.second);
      const SystemState s = random_state(rng, p);
      const ForceInput u = random_force(rng, shape.first);
      const Derivative d = opt.dynamics(p, s, u);
      const auto sys = oracle::from_manifold(p, s);
      const auto acc = oracle::constrained_accel(sys, u);
      const VecX Y = oracle::stacked_accelerations(p, sys, acc);
      worst = std::max(worst, (stack(d) - Y).norm() / std::max(Y.norm(), 1e-12));
      for (std::size_t i = 0; i < shape.first; ++i) {
        worst = std::max(worst, (d.Omega_dot[i] - acc.quad_angular[i]).norm() /
                                    std::max(acc.quad_angular[i].norm(), 1.0));
      }
    }
    return worst;
  });
}

inline SuiteResult linearization_suite(const std::string& label, const SystemParams& p) {
  return timed("linearization " + label, 1e-4, [&](SuiteResult& r) {
    const Equilibrium eq = build_equilibrium(p, Vec3(0.1, -0.2, 0.3));
    const LinearModel lm = assemble_linear_model(p, eq);
    const FdLinearization fd = fd_linearize(p, eq);
    const MatX Minv = lm.M.inverse();
    const double ds = max_relative_deviation(-Minv * lm.G, fd.stiffness);
    const double di = max_relative_deviation(Minv * lm.B, fd.input);
    const double dd = fd.damping.cwiseAbs().maxCoeff();
    char buf[96];
    std::snprintf(buf, sizeof buf, "stiffness %.2e, input %.2e, damping %.2e", ds, di, dd);
    r.note = buf;
    return std::max({ds, di, dd});
  });
}

// Zero-input rollout from a perturbed state; returns the relative energy drift.
inline SuiteResult energy_suite(const Shape& shape, double duration, const VerifyOptions& opt) {
  char label[96];
  std::snprintf(label, sizeof label, "energy %s, %.3g s", shape_name(shape).c_str(), duration);
  return timed(label, 1e-5, [&](SuiteResult& r) {
    RandomSource rng(opt.seed + 77 * shape.first + shape.second);
    const SystemParams p = random_params(rng, shape.first, shape.second);
    SystemState s = random_state(rng, p, 0.5);
    const ForceInput zero{std::vector<Vec3>(shape.first, Vec3::Zero()), std::vector<Vec3>(shape.first, Vec3::Zero())};
    const double dt = 1e-4;
    const double E0 = total_energy(p, s);
    const auto steps = static_cast<long>(std::llround(duration / dt));
    double drift = 0.0;
    for (long k = 0; k < steps; ++k) {
      s = integrate_step(p, s, zero, dt);
      if (k % 100 == 99 || k == steps - 1) drift = std::max(drift, std::abs(total_energy(p, s) - E0));
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "E0 = %.6g J", E0);
    r.note = buf;
    return drift / std::abs(E0);
  });
}

inline SuiteResult constraint_suite(const Shape& shape, double duration, const VerifyOptions& opt) {
  return timed("constraints " + shape_name(shape), 1e-9, [&](SuiteResult&) {
    RandomSource rng(opt.seed + 31 * shape.first + shape.second);
    const SystemParams p = random_params(rng, shape.first, shape.second);
    SystemState s = random_state(rng, p, 1.0);
    const double dt = 1e-3;
    const auto steps = static_cast<long>(std::llround(duration / dt));
    double worst = 0.0;
    for (long k = 0; k < steps; ++k) {
      ForceInput u = random_force(rng, shape.first);
      s = integrate_step(p, s, u, dt);
      worst = std::max(worst, constraint_residual(s).max());
    }
    return worst;
  });
}

inline SuiteResult equilibrium_suite() {
  return timed("equilibrium hold, case 1", 1e-8, [&](SuiteResult&) {
    const SystemParams p = case1_params();
    const Equilibrium eq = build_equilibrium(p, reference_target());
    SystemState s = eq.state;
    for (int k = 0; k < 1000; ++k) s = integrate_step(p, s, eq.control(), 1e-3);
    double d = (s.x0 - eq.state.x0).norm() + s.v0.norm() + s.Omega0.norm();
    for (const auto& qs : s.quadrotors) {
      d = std::max(d, qs.Omega.norm());
      for (const auto& l : qs.links) d = std::max({d, (l.q.vector() - e3()).norm(), l.omega.norm()});
    }
    return d;
  });
}

}  // namespace verify_detail

inline VerifyReport verify(const VerifyOptions& opt = {}) {
  using namespace verify_detail;
  const bool full = opt.level == VerifyLevel::Full;
  VerifyReport rep;
  std::vector<Shape> shapes{{1, 1}, {1, 3}};
  if (full) shapes.insert(shapes.end(), {{2, 2}, {4, 5}});
  VerifyOptions oracle_opt = opt;
  if (full) oracle_opt.samples = std::max<std::size_t>(opt.samples, 1000);
  for (const auto& s : shapes) rep.suites.push_back(oracle_suite(s, oracle_opt));

  RandomSource rng(opt.seed);
  rep.suites.push_back(linearization_suite("(1,3) random", random_params(rng, 1, 3, true)));
  rep.suites.push_back(linearization_suite("case 1", case1_params()));
  if (full) rep.suites.push_back(linearization_suite("(2,2) random", random_params(rng, 2, 2, true)));

  rep.suites.push_back(energy_suite({1, 3}, full ? 20.0 : 1.0, opt));
  if (full) rep.suites.push_back(energy_suite({2, 2}, 20.0, opt));
  for (const auto& s : shapes) rep.suites.push_back(constraint_suite(s, full ? 10.0 : 1.0, opt));
  rep.suites.push_back(equilibrium_suite());
  return rep;
}

inline void print_report(std::ostream& os, const VerifyReport& rep) {
  char line[256];
  std::snprintf(line, sizeof line, "%-34s %-6s %12s %10s %8s\n", "suite", "result", "value", "tolerance", "time_s");
  os << line;
  for (const auto& s : rep.suites) {
    std::snprintf(line, sizeof line, "%-34s %-6s %12.3e %10.1e %8.2f", s.name.c_str(), s.passed ? "PASS" : "FAIL",
                  s.value, s.tolerance, s.seconds);
    os << line;
    if (!s.note.empty()) os << "  " << s.note;
    os << "\n";
  }
  os << (rep.passed() ? "all suites passed" : "FAILURES present") << "\n";
}

/// Forward dynamics with the sign of one off-diagonal block of N flipped;
/// the block is picked from `seed`. Used to check that the oracle suite
/// catches a corrupted mass matrix.
inline DynamicsFn mutated_dynamics(std::uint64_t seed) {
  return [seed](const SystemParams& p, const SystemState& s, const ForceInput& u) {
    const DerivedMasses dm = derived_masses(p);
    const detail::RawState r = detail::to_raw(s);
    MatX N = detail::assemble_N(p, dm, r);
    const Eigen::Index blocks = N.rows() / 3;
    RandomSource rng(seed);
    Eigen::Index a = 0, b = 0;
    // pick a nonzero off-diagonal block
    for (int tries = 0; tries < 1000; ++tries) {
      a = static_cast<Eigen::Index>(rng.uniform(0.0, static_cast<double>(blocks)));
      b = static_cast<Eigen::Index>(rng.uniform(0.0, static_cast<double>(blocks)));
      if (a != b && N.block<3, 3>(3 * a, 3 * b).norm() > 1e-12) break;
    }
    N.block<3, 3>(3 * a, 3 * b) *= -1.0;
    const VecX P = detail::assemble_P(p, dm, r, u.force);
    return detail::derivative_from_solution(p, r, detail::solve_accelerations(N, P), u.moment);
  };
}

}  // namespace cableload
