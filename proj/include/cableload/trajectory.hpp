#pragma once

// Sampled closed-loop trajectory and the driver that produces it.

#include <cmath>
#include <cstddef>
#include <vector>

#include "cableload/controller.hpp"
#include "cableload/errors.hpp"
#include "cableload/model.hpp"

namespace cableload {

struct TrajectorySample {
  double t = 0.0;
  SystemState state;
  ControlInput control;                   // input held from t onward
  std::vector<AttitudeCommand> commands;  // latest controller commands
};

struct TrajectoryRecord {
  double dt = 0.0;
  std::size_t stride = 1;
  std::vector<TrajectorySample> samples;
};

/// Runs the closed loop for round(duration / dt) steps, sampling every
/// `stride` steps; the first sample is the initial state.
inline TrajectoryRecord simulate(ClosedLoop& loop, const SystemState& initial, double dt, double duration,
                                 std::size_t stride) {
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "sample stride must be positive");
  if (!(duration >= 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be non-negative");
  const auto steps = static_cast<long>(std::llround(duration / dt));
  TrajectoryRecord rec;
  rec.dt = dt;
  rec.stride = stride;
  rec.samples.reserve(static_cast<std::size_t>(steps) / stride + 2);
  SystemState s = initial;
  for (long k = 0; k < steps; ++k) {
    const double t = loop.time();
    auto [u, next] = loop.step(s);
    if (k % static_cast<long>(stride) == 0) {
      rec.samples.push_back(TrajectorySample{t, std::move(s), u, loop.controller().commands()});
    }
    s = std::move(next);
  }
  if (steps % static_cast<long>(stride) == 0) {
    // final state; its input is what the controller would apply next
    ClosedLoop probe = loop;
    auto [u, next] = probe.step(s);
    (void)next;
    rec.samples.push_back(TrajectorySample{loop.time(), s, u, probe.controller().commands()});
  }
  return rec;
}

}  // namespace cableload
