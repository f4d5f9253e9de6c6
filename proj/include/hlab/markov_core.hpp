#pragma once

// Finite-state reversible Markov jump processes: Metropolis construction,
// generator action, transition matrices by uniformization, Gillespie paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hlab/error.hpp"
#include "hlab/rng.hpp"

namespace hlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// TimeGrid: uniform discretization t_k = k/N of [0,1].
// ---------------------------------------------------------------------------
class TimeGrid {
 public:
  explicit TimeGrid(int steps) : steps_(steps) {
    if (steps < 2) throw validation_error("grid_too_coarse", "TimeGrid needs N >= 2");
  }

  int steps() const noexcept { return steps_; }
  int nodes() const noexcept { return steps_ + 1; }
  double dt() const noexcept { return 1.0 / steps_; }
  double time(int k) const noexcept { return static_cast<double>(k) / steps_; }

  // Index of the grid node equal to t (to 1e-9 of a step), else throws.
  int index_of(double t) const {
    const double scaled = t * steps_;
    const double k = std::round(scaled);
    if (std::abs(scaled - k) > 1e-9 || k < 0 || k > steps_)
      throw validation_error("off_grid_time", "time " + std::to_string(t) + " is not a grid node");
    return static_cast<int>(k);
  }

  // Cell containing t; the last cell is closed on the right.
  int cell_of(double t) const noexcept {
    const int k = static_cast<int>(std::floor(t * steps_));
    return std::clamp(k, 0, steps_ - 1);
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  int steps_;
};

// ---------------------------------------------------------------------------
// StateSpace: opaque labels mapped to dense indices.
// ---------------------------------------------------------------------------
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw validation_error("state_space_too_small", "need at least 2 states");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
        throw validation_error("duplicate_state_label", "label '" + labels_[i] + "' repeated");
    }
  }

  // Labels "0", "1", ..., "n-1".
  static StateSpace indexed(int n) {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    return StateSpace(std::move(labels));
  }

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  int index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw validation_error("unknown_state", "no state labelled '" + label + "'");
    return it->second;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// JumpKernel validation helpers.
// ---------------------------------------------------------------------------

// True iff the directed graph {x -> y : J(x,y) > 0} is strongly connected.
inline bool check_irreducibility(const Matrix& rates) {
  const Eigen::Index n = rates.rows();
  if (n == 0 || rates.cols() != n) return false;
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const Eigen::Index x = stack.back();
      stack.pop_back();
      for (Eigen::Index y = 0; y < n; ++y) {
        const double r = transpose ? rates(y, x) : rates(x, y);
        if (r > 0.0 && !seen[static_cast<std::size_t>(y)]) {
          seen[static_cast<std::size_t>(y)] = 1;
          stack.push_back(y);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reaches_all(false) && reaches_all(true);
}

inline void validate_jump_kernel(const Matrix& rates) {
  if (rates.rows() != rates.cols())
    throw validation_error("dimension_mismatch", "jump kernel must be square");
  for (Eigen::Index x = 0; x < rates.rows(); ++x) {
    if (rates(x, x) != 0.0)
      throw validation_error("nonzero_diagonal", "jump kernel diagonal must be exactly 0");
    double row = 0.0;
    for (Eigen::Index y = 0; y < rates.cols(); ++y) {
      const double r = rates(x, y);
      if (!std::isfinite(r) || r < 0.0)
        throw validation_error("negative_rate", "jump rates must be finite and nonnegative");
      row += r;
    }
    if (!(row > 0.0))
      throw validation_error("absorbing_state", "state " + std::to_string(x) + " has zero total jump rate");
  }
}

// max_{x,y} |m(x)J(x,y) - m(y)J(y,x)|
inline double detailed_balance_violation(const Vector& m, const Matrix& rates) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < rates.rows(); ++x)
    for (Eigen::Index y = x + 1; y < rates.cols(); ++y)
      worst = std::max(worst, std::abs(m(x) * rates(x, y) - m(y) * rates(y, x)));
  return worst;
}

// ---------------------------------------------------------------------------
// ReversibleModel
// ---------------------------------------------------------------------------
class ReversibleModel {
 public:
  // Relative detailed-balance tolerance for accepted inputs.
  static constexpr double kBalanceTolerance = 1e-10;

  // Validates all invariants; m is normalized to a probability vector.
  ReversibleModel(StateSpace space, Matrix rates, Vector m, Vector potential = {})
      : space_(std::move(space)), rates_(std::move(rates)), m_(std::move(m)), potential_(std::move(potential)) {
    const Eigen::Index n = space_.size();
    if (rates_.rows() != n || m_.size() != n)
      throw validation_error("dimension_mismatch", "states, J and m must have the same size");
    validate_jump_kernel(rates_);
    if (!check_irreducibility(rates_))
      throw validation_error("not_irreducible", "jump kernel does not induce an irreducible chain");
    if ((m_.array() <= 0.0).any() || !m_.allFinite())
      throw validation_error("nonpositive_measure", "reversing measure must be strictly positive");
    m_ /= m_.sum();
    const double scale = (m_.asDiagonal() * rates_).cwiseAbs().maxCoeff();
    if (detailed_balance_violation(m_, rates_) > kBalanceTolerance * scale)
      throw validation_error("detailed_balance_violation", "m(x)J(x,y) != m(y)J(y,x)");
    exit_rates_ = rates_.rowwise().sum();
    generator_ = rates_;
    generator_.diagonal() = -exit_rates_;
  }

  int size() const noexcept { return space_.size(); }
  const StateSpace& space() const noexcept { return space_; }
  const Matrix& rates() const noexcept { return rates_; }
  const Vector& measure() const noexcept { return m_; }
  const Vector& potential() const noexcept { return potential_; }
  const Matrix& generator() const noexcept { return generator_; }
  const Vector& exit_rates() const noexcept { return exit_rates_; }

 private:
  StateSpace space_;
  Matrix rates_;
  Vector m_;
  Vector potential_;
  Vector exit_rates_;
  Matrix generator_;
};

inline double check_detailed_balance(const ReversibleModel& model) {
  return detailed_balance_violation(model.measure(), model.rates());
}

// Metropolis dynamics: J(x,y) = exp(-[U(y)-U(x)]) J0(x,y), m ∝ exp(-2U) m0.
inline ReversibleModel build_metropolis(StateSpace space, const Matrix& base_rates, const Vector& base_weights,
                                        const Vector& potential) {
  const Eigen::Index n = space.size();
  if (base_rates.rows() != n || base_rates.cols() != n || base_weights.size() != n || potential.size() != n)
    throw validation_error("dimension_mismatch", "states, J0, m0 and U must have the same size");
  validate_jump_kernel(base_rates);
  if ((base_weights.array() <= 0.0).any())
    throw validation_error("nonpositive_measure", "m0 must be strictly positive");
  const Vector m0 = base_weights / base_weights.sum();
  const double scale = (m0.asDiagonal() * base_rates).cwiseAbs().maxCoeff();
  if (detailed_balance_violation(m0, base_rates) > ReversibleModel::kBalanceTolerance * scale)
    throw validation_error("detailed_balance_violation", "(m0, J0) violate detailed balance");
  if (!check_irreducibility(base_rates))
    throw validation_error("not_irreducible", "J0 does not induce an irreducible chain");

  Matrix rates = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (x != y) rates(x, y) = std::exp(-(potential(y) - potential(x))) * base_rates(x, y);
  // Shift by min U before exponentiating so large potentials do not underflow.
  const double shift = potential.minCoeff();
  Vector m = (m0.array() * (-2.0 * (potential.array() - shift)).exp()).matrix();
  return ReversibleModel(std::move(space), std::move(rates), std::move(m), potential);
}

// (Lu)(x) = Σ_y J(x,y)(u(y) - u(x))
inline Vector generator_apply(const ReversibleModel& model, const Vector& u) {
  if (u.size() != model.size())
    throw validation_error("dimension_mismatch", "u must have one entry per state");
  return model.rates() * u - model.exit_rates().cwiseProduct(u);
}

// e^{tQ} for a generator Q (rows sum to 0) by uniformization. The time span is
// split so that each Poisson mixture has mean ≤ 32, which keeps e^{-Λt} away
// from underflow; every piece is a nonnegative matrix.
inline Matrix uniformized_exponential(const Matrix& generator, double t) {
  const Eigen::Index n = generator.rows();
  if (t < 0.0) throw validation_error("negative_time", "transition time must be >= 0");
  double max_exit = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) max_exit = std::max(max_exit, -generator(x, x));
  if (t == 0.0 || max_exit == 0.0) return Matrix::Identity(n, n);

  const double lambda = 1.05 * max_exit;
  const Matrix jump = Matrix::Identity(n, n) + generator / lambda;
  constexpr double kMaxMean = 32.0;
  const int pieces = std::max(1, static_cast<int>(std::ceil(lambda * t / kMaxMean)));
  const double mean = lambda * t / pieces;

  Matrix piece = Matrix::Zero(n, n);
  Matrix power = Matrix::Identity(n, n);
  double weight = std::exp(-mean);
  double accumulated = 0.0;
  for (int k = 0;; ++k) {
    piece += weight * power;
    accumulated += weight;
    if (1.0 - accumulated < 1e-14 && k >= mean) break;
    if (k > 100000) break;
    power = power * jump;
    weight *= mean / (k + 1);
  }
  Matrix result = piece;
  for (int i = 1; i < pieces; ++i) result = result * piece;
  return result;
}

inline Matrix transition_matrix(const ReversibleModel& model, double t) {
  return uniformized_exponential(model.generator(), t);
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------
struct Jump {
  double time;
  int state;
  bool operator==(const Jump&) const = default;
};

// Right-continuous step path on [0,1].
struct PathSample {
  int initial_state = 0;
  std::vector<Jump> jumps;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // State at time t; at a jump time returns the post-jump state.
  int state_at(double t) const {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                               [](double value, const Jump& j) { return value < j.time; });
    return it == jumps.begin() ? initial_state : std::prev(it)->state;
  }

  int final_state() const { return jumps.empty() ? initial_state : jumps.back().state; }

  bool operator==(const PathSample&) const = default;
};

// Inverse-CDF draw from a probability vector.
inline int sample_categorical(const Vector& probabilities, Engine& rng) {
  const double total = probabilities.sum();
  double u = uniform01(rng) * total;
  const Eigen::Index n = probabilities.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    u -= probabilities(i);
    if (u < 0.0) return static_cast<int>(i);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i)
    if (probabilities(i) > 0.0) return static_cast<int>(i);
  return 0;
}

namespace detail {

inline void gillespie_fill(const ReversibleModel& model, PathSample& path, Engine& rng) {
  const Matrix& rates = model.rates();
  const Vector& exits = model.exit_rates();
  int x = path.initial_state;
  double t = 0.0;
  for (;;) {
    t += exponential1(rng) / exits(x);
    if (t > 1.0) break;
    double u = uniform01(rng) * exits(x);
    int next = x;
    for (int y = 0; y < model.size(); ++y) {
      if (y == x || rates(x, y) == 0.0) continue;
      next = y;
      u -= rates(x, y);
      if (u < 0.0) break;
    }
    path.jumps.push_back({t, next});
    x = next;
  }
}

}  // namespace detail

// Gillespie path of R on [0,1] from a fixed initial state. `stream` selects an
// independent substream of `seed` (e.g. the path index).
inline PathSample sample_path_R(const ReversibleModel& model, int initial_state, std::uint64_t seed,
                                std::uint64_t stream = 0) {
  if (initial_state < 0 || initial_state >= model.size())
    throw validation_error("invalid_state", "initial state out of range");
  Engine rng = make_engine(seed, stream);
  PathSample path{initial_state, {}, seed, stream};
  detail::gillespie_fill(model, path, rng);
  return path;
}

// Same, with the initial state drawn from `initial_law` on the same stream.
inline PathSample sample_path_R(const ReversibleModel& model, const Vector& initial_law, std::uint64_t seed,
                                std::uint64_t stream = 0) {
  if (initial_law.size() != model.size())
    throw validation_error("dimension_mismatch", "initial law must have one entry per state");
  Engine rng = make_engine(seed, stream);
  PathSample path{sample_categorical(initial_law, rng), {}, seed, stream};
  detail::gillespie_fill(model, path, rng);
  return path;
}

inline Vector empirical_marginal(std::span<const PathSample> paths, double t, int states) {
  if (paths.empty()) throw validation_error("empty_path_list", "need at least one path");
  if (t < 0.0 || t > 1.0) throw validation_error("time_out_of_range", "t must lie in [0,1]");
  Vector counts = Vector::Zero(states);
  for (const auto& p : paths) counts(p.state_at(t)) += 1.0;
  return counts / static_cast<double>(paths.size());
}

}  // namespace hlab
