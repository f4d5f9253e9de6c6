#pragma once

// Feynman-Kac propagators and the functions
//   g(t,x) = E_R[exp(-∫_t^1 V) γ(X_1) | X_t = x]
//   f(t,y) = E_R[f0(X_0) exp(-∫_0^t V) | X_t = y]
// on a uniform time grid, plus residual checks of the backward equation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hlab/markov_core.hpp"

namespace hlab {

// V(t_k, x) on grid nodes; linear in t between nodes.
class PotentialField {
 public:
  PotentialField(TimeGrid grid, Matrix values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid_.nodes())
      throw validation_error("dimension_mismatch", "potential needs one row per grid node");
    if (!values_.allFinite()) throw validation_error("nonfinite_potential", "potential values must be finite");
    lower_bound_ = std::max(0.0, -values_.minCoeff());
  }

  static PotentialField zero(TimeGrid grid, int states) {
    return PotentialField(grid, Matrix::Zero(grid.nodes(), states));
  }
  static PotentialField constant(TimeGrid grid, int states, double c) {
    return PotentialField(grid, Matrix::Constant(grid.nodes(), states, c));
  }
  // Time-independent, one value per state.
  static PotentialField stationary(TimeGrid grid, const Vector& per_state) {
    Matrix values(grid.nodes(), per_state.size());
    values.rowwise() = per_state.transpose();
    return PotentialField(grid, std::move(values));
  }
  // V(t,x) = fn(t, x) sampled on the nodes.
  template <typename Fn>
  static PotentialField sampled(TimeGrid grid, int states, Fn&& fn) {
    Matrix values(grid.nodes(), states);
    for (int k = 0; k < grid.nodes(); ++k)
      for (int x = 0; x < states; ++x) values(k, x) = fn(grid.time(k), x);
    return PotentialField(grid, std::move(values));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  int states() const noexcept { return static_cast<int>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }
  // lo >= 0 with V >= -lo everywhere.
  double lower_bound() const noexcept { return lower_bound_; }

  Vector node(int k) const { return values_.row(k).transpose(); }

  // Linear interpolation in t.
  Vector at(double t) const {
    const int k = grid_.cell_of(t);
    const double w = (t - grid_.time(k)) / grid_.dt();
    return ((1.0 - w) * values_.row(k) + w * values_.row(k + 1)).transpose();
  }

  // ∫_a^b V(s, x) ds for a fixed state x, exact for the piecewise-linear field.
  double integral(int x, double a, double b) const {
    if (b <= a) return 0.0;
    double total = 0.0;
    int k = grid_.cell_of(a);
    double lo = a;
    while (lo < b) {
      const double cell_end = grid_.time(k + 1);
      const double hi = std::min(b, cell_end);
      const double va = value_at(x, k, lo);
      const double vb = value_at(x, k, hi);
      total += 0.5 * (va + vb) * (hi - lo);
      lo = hi;
      if (++k >= grid_.steps()) break;
    }
    return total;
  }

 private:
  double value_at(int x, int cell, double t) const {
    const double w = (t - grid_.time(cell)) / grid_.dt();
    return (1.0 - w) * values_(cell, x) + w * values_(cell + 1, x);
  }

  TimeGrid grid_;
  Matrix values_;
  double lower_bound_ = 0.0;
};

inline void validate_weight(const Vector& w, int states, const char* what) {
  if (w.size() != states)
    throw validation_error("dimension_mismatch", std::string(what) + " must have one entry per state");
  if (!w.allFinite() || (w.array() < 0.0).any())
    throw validation_error("negative_weight", std::string(what) + " entries must be finite and >= 0");
  if (!(w.maxCoeff() > 0.0))
    throw validation_error("zero_weight", std::string(what) + " must not vanish identically");
}

// Φ(t_k, t_l)(x,y) = E_R[exp(-∫_{t_k}^{t_l} V) 1{X_{t_l}=y} | X_{t_k}=x].
// One RK4 factor per cell for dΦ/dt = Φ (Q - diag V_t); Φ(t_k,t_l) is the
// ordered product of the factors of cells k..l-1.
class FKPropagator {
 public:
  FKPropagator(const ReversibleModel& model, const PotentialField& potential) : grid_(potential.grid()) {
    if (potential.states() != model.size())
      throw validation_error("dimension_mismatch", "potential and model disagree on the number of states");
    const int n = model.size();
    const double h = grid_.dt();
    const Matrix& Q = model.generator();
    const Matrix I = Matrix::Identity(n, n);
    factors_.reserve(static_cast<std::size_t>(grid_.steps()));
    for (int k = 0; k < grid_.steps(); ++k) {
      const Vector v0 = potential.node(k);
      const Vector v1 = potential.node(k + 1);
      const Vector vm = 0.5 * (v0 + v1);
      const Matrix a0 = Q - Matrix(v0.asDiagonal());
      const Matrix am = Q - Matrix(vm.asDiagonal());
      const Matrix a1 = Q - Matrix(v1.asDiagonal());
      const Matrix k1 = a0;
      const Matrix k2 = (I + 0.5 * h * k1) * am;
      const Matrix k3 = (I + 0.5 * h * k2) * am;
      const Matrix k4 = (I + h * k3) * a1;
      factors_.push_back(I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  int states() const noexcept { return static_cast<int>(factors_.front().rows()); }
  const Matrix& step(int k) const { return factors_.at(static_cast<std::size_t>(k)); }

  Matrix between(int k, int l) const {
    if (k < 0 || l > grid_.steps() || k > l)
      throw validation_error("invalid_interval", "need 0 <= k <= l <= N");
    Matrix result = Matrix::Identity(states(), states());
    for (int i = k; i < l; ++i) result = result * factors_[static_cast<std::size_t>(i)];
    return result;
  }

  Matrix between_times(double s, double t) const { return between(grid_.index_of(s), grid_.index_of(t)); }

 private:
  TimeGrid grid_;
  std::vector<Matrix> factors_;
};

inline FKPropagator fk_propagator(const ReversibleModel& model, const PotentialField& potential) {
  return FKPropagator(model, potential);
}

// ‖Φ(s,u) - Φ(s,t)Φ(t,u)‖_∞ (max-row-sum norm) for grid times s ≤ t ≤ u.
inline double check_semigroup(const FKPropagator& phi, double s, double t, double u) {
  const TimeGrid& grid = phi.grid();
  const int i = grid.index_of(s), j = grid.index_of(t), k = grid.index_of(u);
  if (!(i <= j && j <= k)) throw validation_error("invalid_interval", "need s <= t <= u");
  if (i == j || j == k) return 0.0;
  const Matrix diff = phi.between(i, k) - phi.between(i, j) * phi.between(j, k);
  return diff.cwiseAbs().rowwise().sum().maxCoeff();
}

// g on the grid: row k is g(t_k, ·). g(1,·) = γ; g(t_k) = Φ(t_k,t_{k+1}) g(t_{k+1}).
inline Matrix solve_g(const FKPropagator& phi, const Vector& terminal) {
  validate_weight(terminal, phi.states(), "gamma1");
  const int N = phi.grid().steps();
  Matrix g(N + 1, phi.states());
  g.row(N) = terminal.transpose();
  for (int k = N - 1; k >= 0; --k) {
    g.row(k) = (phi.step(k) * g.row(k + 1).transpose()).transpose();
  }
  // RK4 factors are nonnegative for resolved step sizes; flush rounding noise.
  return g.cwiseMax(0.0);
}

inline Matrix solve_g(const ReversibleModel& model, const PotentialField& potential, const Vector& terminal) {
  return solve_g(FKPropagator(model, potential), terminal);
}

// f(t,y) = [Σ_x m(x) f0(x) Φ(0,t)(x,y)] / m(y).
inline Matrix solve_f(const FKPropagator& phi, const Vector& measure, const Vector& initial) {
  validate_weight(initial, phi.states(), "f0");
  const int N = phi.grid().steps();
  Matrix f(N + 1, phi.states());
  Eigen::RowVectorXd mass = measure.cwiseProduct(initial).transpose();
  f.row(0) = initial.transpose();
  for (int k = 0; k < N; ++k) {
    mass = mass * phi.step(k);
    f.row(k + 1) = mass.cwiseQuotient(measure.transpose());
  }
  return f.cwiseMax(0.0);
}

inline Matrix solve_f(const ReversibleModel& model, const PotentialField& potential, const Vector& initial) {
  return solve_f(FKPropagator(model, potential), model.measure(), initial);
}

struct FKSolution {
  TimeGrid grid;
  Matrix g;
  Matrix f;
};

// Residual statistics over the finite entries of a (nodes × states) matrix.
// Undefined entries (grid endpoints for centered differences, masked points)
// are NaN and excluded.
struct ResidualReport {
  Matrix residual;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  int grid_N = 0;
  long evaluated = 0;
};

inline ResidualReport summarize_residual(Matrix residual, int grid_N) {
  ResidualReport report{std::move(residual), 0.0, 0.0, grid_N, 0};
  double sum = 0.0;
  for (Eigen::Index i = 0; i < report.residual.size(); ++i) {
    const double r = report.residual.data()[i];
    if (std::isnan(r)) continue;
    report.max_residual = std::max(report.max_residual, r);
    sum += r;
    ++report.evaluated;
  }
  report.mean_residual = report.evaluated > 0 ? sum / static_cast<double>(report.evaluated) : 0.0;
  return report;
}

// Signed backward-equation residual ∂̂_t g + Qg - Vg at interior nodes, with a
// centered time difference; rows 0 and N are NaN.
inline Matrix fk_signed_residual(const ReversibleModel& model, const PotentialField& potential, const Matrix& g) {
  const TimeGrid& grid = potential.grid();
  const int N = grid.steps();
  const Matrix& Q = model.generator();
  Matrix residual = Matrix::Constant(N + 1, model.size(), std::numeric_limits<double>::quiet_NaN());
  for (int k = 1; k < N; ++k) {
    const Vector gk = g.row(k).transpose();
    const Vector dt = (g.row(k + 1) - g.row(k - 1)).transpose() / (2.0 * grid.dt());
    residual.row(k) = (dt + Q * gk - potential.node(k).cwiseProduct(gk)).transpose();
  }
  return residual;
}

inline ResidualReport check_fk_generator(const ReversibleModel& model, const PotentialField& potential,
                                         const Matrix& g) {
  if (g.rows() != potential.grid().nodes() || g.cols() != model.size())
    throw validation_error("dimension_mismatch", "g must be (N+1) x n");
  return summarize_residual(fk_signed_residual(model, potential, g).cwiseAbs(), potential.grid().steps());
}

struct GridPoint {
  int k;
  int state;
  bool operator==(const GridPoint&) const = default;
};

// Grid points where g ≤ threshold (division by g unsafe there).
inline std::vector<GridPoint> positivity_report(const Matrix& g, double threshold = 1e-300) {
  std::vector<GridPoint> flagged;
  for (Eigen::Index k = 0; k < g.rows(); ++k)
    for (Eigen::Index x = 0; x < g.cols(); ++x)
      if (!(g(k, x) > threshold)) flagged.push_back({static_cast<int>(k), static_cast<int>(x)});
  return flagged;
}

}  // namespace hlab
