// Command-line front end: scenario runs, gain synthesis and self-checks.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "cableload/cableload.hpp"

using namespace cableload;

namespace {

struct Overrides {
  std::optional<std::string> out;
  std::optional<double> dt;
  std::optional<double> duration;
};

ScenarioConfig apply(ScenarioConfig c, const Overrides& o) {
  if (o.out) c.output.directory = *o.out;
  if (o.dt) {
    if (!(*o.dt > 0.0)) throw Error(ErrorCode::ValidationError, "--dt: must be positive");
    c.simulation.dt = *o.dt;
  }
  if (o.duration) {
    if (!(*o.duration >= 0.0)) throw Error(ErrorCode::ValidationError, "--duration: must be non-negative");
    c.simulation.duration = *o.duration;
  }
  return c;
}

int run_scenario(const ScenarioConfig& c) {
  std::cout << "running " << c.name << ": dt " << c.simulation.dt << " s, duration " << c.simulation.duration
            << " s, output " << c.output.directory << "\n";
  const RunResult r = run(c);
  std::cout << summary_text(r);
  return 0;
}

int print_gains(const ScenarioConfig& c) {
  const Equilibrium eq = build_equilibrium(c.system, c.target);
  const LinearModel lm = assemble_linear_model(c.system, eq);
  const GainSet g = synthesize_gains(c, lm);
  const Eigen::IOFormat f(Eigen::FullPrecision, 0, ", ", "\n", "  [", "]");
  std::cout << "Kx (" << g.Kx.rows() << "x" << g.Kx.cols() << "):\n" << g.Kx.format(f) << "\n";
  std::cout << "Kv (" << g.Kv.rows() << "x" << g.Kv.cols() << "):\n" << g.Kv.format(f) << "\n";
  std::cout.precision(6);
  std::cout << "care_residual: " << g.care_residual << "\n";
  if (g.P.size()) std::cout << "P_frobenius_norm: " << g.P.norm() << "\n";
  std::cout << "spectral_abscissa: " << g.spectral_abscissa << "\n";
  std::cout << "controllability_rank: " << controllability_rank(lm) << " of " << 2 * lm.dim() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cable-suspended payload simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides ov;
  app.add_option("--out", ov.out, "output directory");
  app.add_option("--dt", ov.dt, "integrator step [s]");
  app.add_option("--duration", ov.duration, "simulated time [s]");

  std::string run_path, gains_path;
  auto* run_cmd = app.add_subcommand("run", "run a scenario config");
  run_cmd->add_option("config", run_path, "config file")->required();
  auto* c1 = app.add_subcommand("case1", "run the level-start reference scenario");
  auto* c2 = app.add_subcommand("case2", "run the tilted-start reference scenario");
  auto* gains_cmd = app.add_subcommand("gains", "print LQR gains for a config");
  gains_cmd->add_option("config", gains_path, "config file")->required();
  bool full = false;
  auto* verify_cmd = app.add_subcommand("verify", "run the self-check suites");
  verify_cmd->add_flag("--full", full, "include the larger shapes and long-horizon energy");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_scenario(apply(load_config(run_path), ov));
    if (*c1) return run_scenario(apply(preset_case1(), ov));
    if (*c2) return run_scenario(apply(preset_case2(), ov));
    if (*gains_cmd) return print_gains(apply(load_config(gains_path), ov));
    if (*verify_cmd) {
      VerifyOptions opt;
      opt.level = full ? VerifyLevel::Full : VerifyLevel::Fast;
      const VerifyReport rep = verify(opt);
      print_report(std::cout, rep);
      return rep.passed() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
