#pragma once

// Scenario pipeline: equilibrium, linear model, gains, closed-loop run,
// certificate, and the trajectory / report / summary files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cableload/controller.hpp"
#include "cableload/diagnostics.hpp"
#include "cableload/dynamics.hpp"
#include "cableload/linalg.hpp"
#include "cableload/linearization.hpp"
#include "cableload/scenario.hpp"
#include "cableload/trajectory.hpp"

namespace cableload {

inline constexpr double kPositionTolerance = 0.02;  // m
inline constexpr double kLinkTolerance = 0.05;
inline constexpr double kPayloadPsiTolerance = 0.01;

/// LQR from the configured weights, or the explicit gains with their
/// closed-loop abscissa.
inline GainSet synthesize_gains(const ScenarioConfig& c, const LinearModel& lm) {
  if (c.controller.lqr) {
    const auto [Q, R] = lqr_weight_matrices(c.system, *c.controller.lqr);
    return lqr_gains(lm, Q, R);
  }
  GainSet g;
  g.Kx = *c.controller.Kx;
  g.Kv = *c.controller.Kv;
  g.care_residual = std::numeric_limits<double>::quiet_NaN();
  g.spectral_abscissa = linalg::spectral_abscissa(closed_loop_matrix(lm, g));
  return g;
}

inline ControllerConfig controller_config(const ScenarioConfig& c, const GainSet& g) {
  ControllerConfig cfg;
  cfg.Kx = g.Kx;
  cfg.Kv = g.Kv;
  cfg.k_R = c.controller.k_R;
  cfg.k_Omega = c.controller.k_Omega;
  cfg.b1 = constant_heading(c.controller.b1);
  cfg.period = c.controller_period();
  return cfg;
}

struct RunSummary {
  double final_position_error = 0.0;
  double final_e_q = 0.0;
  double final_e_omega = 0.0;
  double final_psi0 = 0.0;
  double max_quad_psi = 0.0;  // over the whole run
  double settle_position = 0.0;  // NaN when never settled
  double settle_e_q = 0.0;
  double settle_psi0 = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
};

struct RunResult {
  ScenarioConfig config;
  Equilibrium eq;
  LinearModel lm;
  GainSet gains;
  TrajectoryRecord record;
  Certificate certificate;
  RunSummary summary;
};

/// First sampled time after which `y` stays below `tol`; NaN if the last sample is above.
inline double settling_time(const std::vector<double>& t, const std::vector<double>& y, double tol) {
  if (y.empty() || !(y.back() < tol)) return std::numeric_limits<double>::quiet_NaN();
  std::size_t k = y.size();
  while (k > 0 && y[k - 1] < tol) --k;
  return t[k < t.size() ? k : t.size() - 1];
}

namespace detail {

inline void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void put_row(std::string& out, const std::vector<double>& row) {
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (k) out += ',';
    put(out, row[k]);
  }
  out += '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "never";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Column names; indices are 1-based for quadrotors and links.
inline std::vector<std::string> csv_columns(const SystemParams& p) {
  std::vector<std::string> c{"t"};
  auto vec = [&](const std::string& base) {
    for (int k = 1; k <= 3; ++k) c.push_back(base + "_" + std::to_string(k));
  };
  auto rot = [&](const std::string& base) {
    for (int r = 1; r <= 3; ++r)
      for (int k = 1; k <= 3; ++k) c.push_back(base + "_" + std::to_string(r) + std::to_string(k));
  };
  vec("x0");
  vec("v0");
  rot("r0");
  vec("omega0");
  vec("r0_axis_angle");
  for (std::size_t i = 1; i <= p.num_quadrotors(); ++i) {
    const std::string q = std::to_string(i);
    rot("r" + q);
    vec("omega" + q);
    vec("r" + q + "_axis_angle");
    c.push_back("f" + q);
    vec("m" + q);
  }
  for (std::size_t i = 1; i <= p.num_quadrotors(); ++i) {
    for (std::size_t j = 1; j <= p.quadrotors[i - 1].links.size(); ++j) {
      const std::string s = std::to_string(i) + "_" + std::to_string(j);
      vec("q" + s);
      vec("w" + s);
    }
  }
  c.push_back("psi0");
  for (std::size_t i = 1; i <= p.num_quadrotors(); ++i) c.push_back("psi" + std::to_string(i));
  for (const char* n : {"e_x0", "e_q", "e_omega", "kinetic", "potential", "energy", "v1", "v2"}) c.emplace_back(n);
  return c;
}

inline std::string trajectory_csv(const SystemParams& p, const TrajectoryRecord& rec, const CertificateSeries& ser) {
  std::string out;
  const auto cols = csv_columns(p);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (k) out += ',';
    out += cols[k];
  }
  out += '\n';
  std::vector<double> row;
  row.reserve(cols.size());
  auto vec = [&](const Vec3& v) { row.insert(row.end(), {v.x(), v.y(), v.z()}); };
  auto rot = [&](const Mat3& R) {
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) row.push_back(R(r, k));
  };
  for (std::size_t n = 0; n < rec.samples.size(); ++n) {
    const TrajectorySample& smp = rec.samples[n];
    const SystemState& s = smp.state;
    row.clear();
    row.push_back(smp.t);
    vec(s.x0);
    vec(s.v0);
    rot(s.R0.matrix());
    vec(s.Omega0);
    vec(log_so3(s.R0));
    for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
      rot(s.quadrotors[i].R.matrix());
      vec(s.quadrotors[i].Omega);
      vec(log_so3(s.quadrotors[i].R));
      row.push_back(smp.control.thrust[i]);
      vec(smp.control.moment[i]);
    }
    for (const auto& qs : s.quadrotors) {
      for (const auto& l : qs.links) {
        vec(l.q.vector());
        vec(l.omega);
      }
    }
    row.push_back(ser.psi0[n]);
    for (std::size_t i = 0; i < p.num_quadrotors(); ++i) row.push_back(ser.psi[i][n]);
    const double T = kinetic_energy(p, s), V = potential_energy(p, s);
    row.insert(row.end(), {ser.x0_error[n], ser.e_q[n], ser.e_omega[n], T, V, T + V, ser.V1[n], ser.V2[n]});
    detail::put_row(out, row);
  }
  return out;
}

inline nlohmann::json report_json(const RunResult& r) {
  using nlohmann::json;
  using detail::json_number;
  const StabilityReport& rep = r.certificate.report;
  json quads = json::array();
  for (const auto& q : rep.quads) {
    quads.push_back({{"B2", q.B2},
                     {"c2_bound", q.c2_bound},
                     {"c2", q.c2},
                     {"W2_eigenvalues", {q.W2_eigenvalues(0), q.W2_eigenvalues(1)}},
                     {"W2_positive_definite", q.W2_positive},
                     {"psi_max", q.psi_max},
                     {"psi1", q.psi1},
                     {"psi2", q.psi2},
                     {"alpha", q.alpha},
                     {"B1", q.B1},
                     {"final_condition_rhs", json_number(q.final_condition_rhs)},
                     {"final_condition", q.final_condition}});
  }
  json j;
  j["scenario"] = r.config.name;
  j["gains"] = {{"care_residual", json_number(r.gains.care_residual)},
                {"spectral_abscissa", r.gains.spectral_abscissa},
                {"Kx_norm", r.gains.Kx.norm()},
                {"Kv_norm", r.gains.Kv.norm()}};
  j["translational"] = {{"lambda_min_Q", rep.lambda_min_Q},
                        {"P_valid", rep.P_valid},
                        {"P_min_eigenvalue", rep.P_min_eigenvalue},
                        {"P_max_eigenvalue", rep.P_max_eigenvalue},
                        {"c3", rep.c3},
                        {"K_max", rep.K_max},
                        {"alpha", rep.alpha},
                        {"margin", rep.translational_margin}};
  j["quadrotors"] = std::move(quads);
  j["conditions"] = {{"gains_ok", rep.gains_ok}, {"final_condition_ok", rep.final_condition_ok}};
  j["certificate"] = {{"transient_end", rep.transient_end},
                      {"monotone", rep.monotone},
                      {"max_relative_increase", rep.max_increase},
                      {"decreased", rep.decreased},
                      {"x0_log_slope", rep.x0_decay.slope},
                      {"x0_log_r_squared", rep.x0_decay.r_squared},
                      {"e_q_log_slope", rep.eq_decay.slope},
                      {"e_q_log_r_squared", rep.eq_decay.r_squared},
                      {"trivial", rep.trivial},
                      {"certified", rep.certified}};
  return j;
}

inline std::string summary_text(const RunResult& r) {
  using detail::fmt;
  const RunSummary& s = r.summary;
  std::ostringstream o;
  o << "scenario: " << r.config.name << "\n"
    << "steps: " << s.steps << "\n"
    << "final_position_error_m: " << fmt(s.final_position_error) << "\n"
    << "final_e_q: " << fmt(s.final_e_q) << "\n"
    << "final_e_omega: " << fmt(s.final_e_omega) << "\n"
    << "final_psi0: " << fmt(s.final_psi0) << "\n"
    << "max_quad_psi: " << fmt(s.max_quad_psi) << "\n"
    << "settling_time_position_s: " << fmt(s.settle_position) << "\n"
    << "settling_time_e_q_s: " << fmt(s.settle_e_q) << "\n"
    << "settling_time_psi0_s: " << fmt(s.settle_psi0) << "\n"
    << "converged: " << (s.converged ? "yes" : "no") << "\n"
    << "certified: " << (r.certificate.report.certified ? "yes" : "no") << "\n"
    << "wall_clock_s: " << fmt(s.wall_seconds) << "\n";
  return o.str();
}

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  detail::write_text(dir / "trajectory.csv", trajectory_csv(r.config.system, r.record, r.certificate.series));
  detail::write_text(dir / "report.txt", report_json(r).dump(2) + "\n");
  detail::write_text(dir / "summary.txt", summary_text(r));
  detail::write_text(dir / "resolved_config.json", serialize(r.config));
}

struct RunOptions {
  bool write_files = true;
  CertifyOptions certify;
};

/// Runs one scenario; lower-level errors are rethrown with the scenario name
/// and the simulation time attached.
inline RunResult run(const ScenarioConfig& config, const RunOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.config = config;
  const SystemParams& p = config.system;
  auto context = [&](const Error& e, const std::string& where) {
    return Error(e.code(), "scenario " + config.name + ", " + where + ": " + e.message());
  };
  SystemState s0;
  try {
    validate(p);
    s0 = initial_state(config);
    r.eq = build_equilibrium(p, config.target);
    r.lm = assemble_linear_model(p, r.eq);
    r.gains = synthesize_gains(config, r.lm);
  } catch (const Error& e) {
    throw context(e, "setup");
  }
  ControllerConfig cc = controller_config(config, r.gains);
  CertifyOptions co = opt.certify;
  co.k_R = cc.k_R;
  co.k_Omega = cc.k_Omega;
  ClosedLoop loop(p, r.eq, std::move(cc), config.simulation.dt);
  try {
    r.record = simulate(loop, s0, config.simulation.dt, config.simulation.duration, config.output.stride);
  } catch (const Error& e) {
    throw context(e, "t = " + detail::fmt(loop.time()) + " s");
  }
  r.certificate = certify_trajectory(p, r.eq, r.lm, r.gains, r.record, co);

  const CertificateSeries& ser = r.certificate.series;
  RunSummary& sm = r.summary;
  sm.steps = static_cast<std::size_t>(loop.steps());
  sm.final_position_error = ser.x0_error.back();
  sm.final_e_q = ser.e_q.back();
  sm.final_e_omega = ser.e_omega.back();
  sm.final_psi0 = ser.psi0.back();
  for (const auto& series : ser.psi)
    for (double v : series) sm.max_quad_psi = std::max(sm.max_quad_psi, v);
  sm.settle_position = settling_time(ser.t, ser.x0_error, kPositionTolerance);
  sm.settle_e_q = settling_time(ser.t, ser.e_q, kLinkTolerance);
  sm.settle_psi0 = settling_time(ser.t, ser.psi0, kPayloadPsiTolerance);
  sm.converged = sm.final_position_error < kPositionTolerance && sm.final_e_q < kLinkTolerance &&
                 sm.final_psi0 < kPayloadPsiTolerance;
  sm.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (opt.write_files && !config.output.directory.empty()) write_outputs(r, config.output.directory);
  return r;
}

}  // namespace cableload
