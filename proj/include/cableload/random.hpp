#pragma once

// Seeded generators for random parameter sets and consistent states, shared
// by the property tests and the `verify` harness.

#include <cstdint>
#include <random>
#include <vector>

#include "cableload/manifold.hpp"
#include "cableload/model.hpp"

namespace cableload {

class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(gen_); }
  Vec3 normal3(double sigma = 1.0) { return Vec3(normal(sigma), normal(sigma), normal(sigma)); }

  Rotation rotation(double sigma = 1.0) { return exp_so3(normal3(sigma)); }

  Vec3 unit() {
    Vec3 v;
    do v = normal3(); while (v.norm() < 1e-6);
    return v.normalized();
  }

  Vec3 tangent(const Vec3& q, double sigma = 1.0) {
    const Vec3 w = normal3(sigma);
    return w - q.dot(w) * q;
  }

  /// Symmetric positive definite inertia with principal values in [lo, hi].
  Mat3 inertia(double lo, double hi) {
    const Mat3 Q = rotation().matrix();
    const Vec3 d(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi));
    const Mat3 J = Q * d.asDiagonal() * Q.transpose();
    return 0.5 * (J + J.transpose());
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Random physically valid parameters with n quadrotors carrying n_links
/// links each. When `balanced` is set the attachment points sum to a purely
/// vertical vector, so the hanging configuration is an equilibrium.
inline SystemParams random_params(RandomSource& rng, std::size_t n, std::size_t n_links, bool balanced = false) {
  SystemParams p;
  p.payload_mass = rng.uniform(0.3, 1.5);
  p.payload_inertia = rng.inertia(0.02, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    QuadrotorParams q;
    q.mass = rng.uniform(0.3, 1.0);
    q.inertia = rng.inertia(0.004, 0.012);
    q.attachment = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.15, 0.0));
    for (std::size_t j = 0; j < n_links; ++j) q.links.push_back(LinkParams{rng.uniform(0.005, 0.05), rng.uniform(0.1, 0.3)});
    p.quadrotors.push_back(std::move(q));
  }
  if (balanced) {
    Vec3 mean = Vec3::Zero();
    for (const auto& q : p.quadrotors) mean += q.attachment;
    mean /= static_cast<double>(n);
    for (auto& q : p.quadrotors) {
      q.attachment.x() -= mean.x();
      q.attachment.y() -= mean.y();
    }
  }
  return p;
}

/// Random state on the configuration manifold with unit-scale velocities.
inline SystemState random_state(RandomSource& rng, const SystemParams& p, double velocity_scale = 1.0) {
  SystemState s;
  s.x0 = rng.normal3();
  s.v0 = rng.normal3(velocity_scale);
  s.R0 = rng.rotation();
  s.Omega0 = rng.normal3(velocity_scale);
  for (const auto& quad : p.quadrotors) {
    QuadrotorState qs;
    qs.R = rng.rotation();
    qs.Omega = rng.normal3(velocity_scale);
    for (std::size_t j = 0; j < quad.links.size(); ++j) {
      const Vec3 q = rng.unit();
      qs.links.push_back(LinkState{UnitVector::unchecked(q), rng.tangent(q, velocity_scale)});
    }
    s.quadrotors.push_back(std::move(qs));
  }
  return s;
}

}  // namespace cableload
