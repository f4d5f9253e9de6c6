#pragma once

// Models shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hlab/hlab.hpp"

namespace hlab::testing {

inline Matrix five_state_base_rates(double scale = 1.0) {
  Matrix J0(5, 5);
  J0 << 0, 1, 0, 0.5, 1,
        1, 0, 1, 0, 0.5,
        0, 1, 0, 1, 0,
        0.5, 0, 1, 0, 1,
        1, 0.5, 0, 1, 0;
  return scale * J0;
}

inline ReversibleModel five_state_model(double scale = 1.0) {
  Vector U(5);
  U << 0.0, 0.3, -0.2, 0.5, 0.1;
  return build_metropolis(StateSpace::indexed(5), five_state_base_rates(scale), Vector::Ones(5), U);
}

// base + amplitude·sin(2π·frequency·t), per state.
inline PotentialField five_state_potential(const TimeGrid& grid, double amplitude = 0.3, double frequency = 1.0) {
  const double base[5] = {0.5, 1.0, 0.2, 0.8, 0.3};
  const double shape[5] = {1.0, -0.7, 1.3, 0.3, -1.0};
  return PotentialField::sampled(grid, 5, [&](double t, int x) {
    return base[x] + amplitude * shape[x] * std::sin(2.0 * M_PI * frequency * t);
  });
}

inline ReversibleModel four_state_model(double scale = 1.0) {
  Matrix J0(4, 4);
  J0 << 0, 1, 0, 1,
        1, 0, 1, 0,
        0, 1, 0, 1,
        1, 0, 1, 0;
  Vector U(4);
  U << 0.0, -0.25, 0.4, 0.1;
  return build_metropolis(StateSpace::indexed(4), scale * J0, Vector::Ones(4), U);
}

inline ReversibleModel two_state_model(double a, double b) {
  Matrix J(2, 2);
  J << 0, a, b, 0;
  Vector m(2);
  m << b, a;
  return ReversibleModel(StateSpace::indexed(2), J, m / (a + b));
}

inline ReversibleModel three_state_model(double scale = 1.0) {
  Matrix J0(3, 3);
  J0 << 0, 1, 0.5,
        1, 0, 1,
        0.5, 1, 0;
  Vector U(3);
  U << 0.0, 0.2, -0.1;
  return build_metropolis(StateSpace::indexed(3), scale * J0, Vector::Ones(3), U);
}

inline Vector random_vector(int n, std::uint64_t seed, std::uint64_t stream, double lo = -1.0, double hi = 1.0) {
  Engine rng = make_engine(seed, stream);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = lo + (hi - lo) * uniform01(rng);
  return v;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace hlab::testing
