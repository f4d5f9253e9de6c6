#pragma once

// One-dimensional Kolmogorov diffusion dX = -U'(X) dt + dW on [x_min, x_max]
// with reflecting ends.
//
// Space is discretized by the nearest-neighbour Metropolis chain
//   rate(i -> i±1) = c_i± exp(-[U_{i±1} - U_i]) / (2 Δx²),
// where c = 2 on the inward rate of the two end nodes (ghost-point Neumann
// closure) and 1 elsewhere. The chain is reversible for m_i ∝ w_i e^{-2U_i}
// with trapezoid weights w, and its generator equals ½u'' - U'u' + O(Δx²).
// Time stepping is Crank-Nicolson; the forward (f) solver is the m-adjoint of
// the backward (g) solver, so Σ f g m is conserved to rounding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hlab/markov_core.hpp"

namespace hlab {

class Diffusion1DModel {
 public:
  Diffusion1DModel(double x_min, double x_max, int cells, Vector potential, Vector potential_slope = {})
      : x_min_(x_min), x_max_(x_max), cells_(cells), U_(std::move(potential)), dU_(std::move(potential_slope)) {
    if (!(x_min < x_max)) throw validation_error("invalid_domain", "need x_min < x_max");
    if (cells < 16) throw validation_error("grid_too_coarse", "need at least 16 spatial cells");
    if (U_.size() != cells + 1) throw validation_error("dimension_mismatch", "U needs one value per node");
    if (!U_.allFinite()) throw validation_error("nonfinite_potential", "U must be finite");
    const double dx = this->dx();
    if (dU_.size() == 0) {
      dU_.resize(cells + 1);
      for (int i = 0; i <= cells; ++i) {
        const int lo = std::max(0, i - 1), hi = std::min(cells, i + 1);
        dU_(i) = (U_(hi) - U_(lo)) / ((hi - lo) * dx);
      }
    } else if (dU_.size() != cells + 1 || !dU_.allFinite()) {
      throw validation_error("dimension_mismatch", "U' needs one finite value per node");
    }
    const double base = 1.0 / (2.0 * dx * dx);
    up_ = Vector::Zero(cells + 1);
    down_ = Vector::Zero(cells + 1);
    for (int i = 0; i < cells; ++i) up_(i) = (i == 0 ? 2.0 : 1.0) * base * std::exp(-(U_(i + 1) - U_(i)));
    for (int i = 1; i <= cells; ++i) down_(i) = (i == cells ? 2.0 : 1.0) * base * std::exp(-(U_(i - 1) - U_(i)));
    const double shift = U_.minCoeff();
    m_ = Vector(cells + 1);
    for (int i = 0; i <= cells; ++i) m_(i) = ((i == 0 || i == cells) ? 0.5 : 1.0) * std::exp(-2.0 * (U_(i) - shift));
    m_ /= m_.sum();
  }

  template <typename Fn, typename DFn>
  static Diffusion1DModel from_functions(double x_min, double x_max, int cells, Fn&& U, DFn&& dU) {
    Vector u(cells + 1), du(cells + 1);
    const double dx = (x_max - x_min) / cells;
    for (int i = 0; i <= cells; ++i) {
      u(i) = U(x_min + i * dx);
      du(i) = dU(x_min + i * dx);
    }
    return Diffusion1DModel(x_min, x_max, cells, std::move(u), std::move(du));
  }

  static Diffusion1DModel free(double x_min, double x_max, int cells) {
    return Diffusion1DModel(x_min, x_max, cells, Vector::Zero(cells + 1), Vector::Zero(cells + 1));
  }

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  int cells() const noexcept { return cells_; }
  int nodes() const noexcept { return cells_ + 1; }
  double dx() const noexcept { return (x_max_ - x_min_) / cells_; }
  double x(int i) const noexcept { return x_min_ + i * dx(); }
  const Vector& potential() const noexcept { return U_; }
  const Vector& potential_slope() const noexcept { return dU_; }
  // Node masses of the discrete reversing measure (sum to 1).
  const Vector& measure() const noexcept { return m_; }
  const Vector& rate_up() const noexcept { return up_; }
  const Vector& rate_down() const noexcept { return down_; }

  // (A u)_i = up_i (u_{i+1} - u_i) + down_i (u_{i-1} - u_i)
  Vector generator_apply(const Vector& u) const {
    Vector out = Vector::Zero(nodes());
    for (int i = 0; i <= cells_; ++i) {
      if (i < cells_) out(i) += up_(i) * (u(i + 1) - u(i));
      if (i > 0) out(i) += down_(i) * (u(i - 1) - u(i));
    }
    return out;
  }

  // Dense rate matrix of the spatial chain, for cross-checks on small grids.
  Matrix rate_matrix() const {
    Matrix J = Matrix::Zero(nodes(), nodes());
    for (int i = 0; i < cells_; ++i) J(i, i + 1) = up_(i);
    for (int i = 1; i <= cells_; ++i) J(i, i - 1) = down_(i);
    return J;
  }

 private:
  double x_min_, x_max_;
  int cells_;
  Vector U_, dU_, up_, down_, m_;
};

// Values on (time grid) × (spatial nodes): row k is t_k.
struct GridFunction {
  TimeGrid grid;
  Matrix values;
};

inline GridFunction constant_grid_function(const TimeGrid& grid, int nodes, double c) {
  return {grid, Matrix::Constant(grid.nodes(), nodes, c)};
}

namespace detail {

// Tridiagonal system lower(i) x_{i-1} + diag(i) x_i + upper(i) x_{i+1} = rhs(i).
inline Vector thomas_solve(const Vector& lower, const Vector& diag, const Vector& upper, const Vector& rhs) {
  const Eigen::Index n = diag.size();
  Vector c(n), d(n), x(n);
  double pivot = diag(0);
  if (!(std::abs(pivot) > 1e-14 * (std::abs(diag(0)) + std::abs(upper(0)))) || !std::isfinite(pivot))
    throw numerical_error("tridiagonal_conditioning", "zero pivot in tridiagonal solve");
  c(0) = upper(0) / pivot;
  d(0) = rhs(0) / pivot;
  for (Eigen::Index i = 1; i < n; ++i) {
    pivot = diag(i) - lower(i) * c(i - 1);
    const double scale = std::abs(diag(i)) + std::abs(lower(i)) + std::abs(upper(i));
    if (!(std::abs(pivot) > 1e-14 * scale) || !std::isfinite(pivot))
      throw numerical_error("tridiagonal_conditioning", "zero pivot in tridiagonal solve");
    c(i) = upper(i) / pivot;
    d(i) = (rhs(i) - lower(i) * d(i - 1)) / pivot;
  }
  x(n - 1) = d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
  return x;
}

// (I + s (A - diag v)) u for the spatial chain.
inline Vector apply_shifted(const Diffusion1DModel& model, double s, const Vector& v, const Vector& u) {
  return u + s * (model.generator_apply(u) - v.cwiseProduct(u));
}

// Solve (I - s (A - diag v)) x = rhs.
inline Vector solve_shifted(const Diffusion1DModel& model, double s, const Vector& v, const Vector& rhs) {
  const int n = model.nodes();
  Vector lower = Vector::Zero(n), diag(n), upper = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    diag(i) = 1.0 + s * (model.rate_up()(i) + model.rate_down()(i) + v(i));
    if (i > 0) lower(i) = -s * model.rate_down()(i);
    if (i + 1 < n) upper(i) = -s * model.rate_up()(i);
  }
  return thomas_solve(lower, diag, upper, rhs);
}

inline void validate_space_weight(const Vector& w, int nodes, const char* what) {
  if (w.size() != nodes) throw validation_error("dimension_mismatch", std::string(what) + " needs one value per node");
  if (!w.allFinite() || (w.array() < 0.0).any())
    throw validation_error("negative_weight", std::string(what) + " must be finite and >= 0");
  if (!(w.maxCoeff() > 0.0)) throw validation_error("zero_weight", std::string(what) + " must not vanish identically");
}

inline void validate_potential(const GridFunction& V, const TimeGrid& grid, int nodes) {
  if (V.values.rows() != grid.nodes() || V.values.cols() != nodes)
    throw validation_error("dimension_mismatch", "V must be (N+1) x (M+1)");
}

}  // namespace detail

struct PDESolution {
  GridFunction values;
  long clipped = 0;  // negative values flushed to 0
};

// Backward Crank-Nicolson for ∂_t g + A g - V g = 0, g(1) = γ:
//   (I - Δt/2 (A - V_k)) g_k = (I + Δt/2 (A - V_{k+1})) g_{k+1}.
inline PDESolution solve_g_pde(const Diffusion1DModel& model, const GridFunction& V, const Vector& gamma1,
                               bool clip = true) {
  const TimeGrid& grid = V.grid;
  detail::validate_space_weight(gamma1, model.nodes(), "gamma1");
  detail::validate_potential(V, grid, model.nodes());
  const double s = 0.5 * grid.dt();
  PDESolution out{{grid, Matrix(grid.nodes(), model.nodes())}, 0};
  Vector g = gamma1;
  out.values.values.row(grid.steps()) = g.transpose();
  for (int k = grid.steps() - 1; k >= 0; --k) {
    const Vector vk = V.values.row(k).transpose(), vk1 = V.values.row(k + 1).transpose();
    g = detail::solve_shifted(model, s, vk, detail::apply_shifted(model, s, vk1, g));
    out.values.values.row(k) = g.transpose();
  }
  if (clip) {
    Matrix& values = out.values.values;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values.data()[i] < 0.0) {
        values.data()[i] = 0.0;
        ++out.clipped;
      }
  }
  return out;
}

// Forward solver, the m-adjoint of solve_g_pde:
//   f_{k+1} = (I + Δt/2 (A - V_{k+1})) (I - Δt/2 (A - V_k))^{-1} f_k.
inline PDESolution solve_f_pde(const Diffusion1DModel& model, const GridFunction& V, const Vector& f0,
                               bool clip = true) {
  const TimeGrid& grid = V.grid;
  detail::validate_space_weight(f0, model.nodes(), "f0");
  detail::validate_potential(V, grid, model.nodes());
  const double s = 0.5 * grid.dt();
  PDESolution out{{grid, Matrix(grid.nodes(), model.nodes())}, 0};
  Vector f = f0;
  out.values.values.row(0) = f.transpose();
  for (int k = 0; k < grid.steps(); ++k) {
    const Vector vk = V.values.row(k).transpose(), vk1 = V.values.row(k + 1).transpose();
    f = detail::apply_shifted(model, s, vk1, detail::solve_shifted(model, s, vk, f));
    out.values.values.row(k + 1) = f.transpose();
  }
  if (clip) {
    Matrix& values = out.values.values;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values.data()[i] < 0.0) {
        values.data()[i] = 0.0;
        ++out.clipped;
      }
  }
  return out;
}

struct PsiDrift {
  GridFunction psi;    // log g; -inf where g ≤ 0
  GridFunction drift;  // -U' + ∂_x ψ; NaN where ψ is masked
};

// ψ = log g and the transformed drift -U'(x) + ∂̂_x ψ (central differences,
// one-sided at the two ends).
inline PsiDrift psi_and_drift(const Diffusion1DModel& model, const GridFunction& g) {
  const int nodes = model.nodes();
  if (g.values.cols() != nodes) throw validation_error("dimension_mismatch", "g must have one column per node");
  PsiDrift out{{g.grid, Matrix(g.values.rows(), nodes)}, {g.grid, Matrix(g.values.rows(), nodes)}};
  const double dx = model.dx();
  for (Eigen::Index k = 0; k < g.values.rows(); ++k) {
    for (int i = 0; i < nodes; ++i) {
      const double v = g.values(k, i);
      out.psi.values(k, i) = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
    }
    for (int i = 0; i < nodes; ++i) {
      const int lo = std::max(0, i - 1), hi = std::min(nodes - 1, i + 1);
      const double a = out.psi.values(k, lo), b = out.psi.values(k, hi);
      out.drift.values(k, i) = (std::isfinite(a) && std::isfinite(b))
                                   ? -model.potential_slope()(i) + (b - a) / ((hi - lo) * dx)
                                   : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

// Reference drift -U' on a time grid.
inline GridFunction reference_drift(const Diffusion1DModel& model, const TimeGrid& grid) {
  GridFunction d{grid, Matrix(grid.nodes(), model.nodes())};
  d.values.rowwise() = (-model.potential_slope()).transpose();
  return d;
}

namespace detail {

inline double interpolate_drift(const Diffusion1DModel& model, const GridFunction& drift, double t, double x) {
  const TimeGrid& grid = drift.grid;
  const int k = grid.cell_of(t);
  const double wt = std::clamp((t - grid.time(k)) / grid.dt(), 0.0, 1.0);
  const double pos = std::clamp((x - model.x_min()) / model.dx(), 0.0, static_cast<double>(model.cells()));
  const int i = std::min(static_cast<int>(pos), model.cells() - 1);
  const double wx = pos - i;
  const Matrix& v = drift.values;
  const double value = (1 - wt) * ((1 - wx) * v(k, i) + wx * v(k, i + 1)) +
                       wt * ((1 - wx) * v(k + 1, i) + wx * v(k + 1, i + 1));
  if (!std::isfinite(value)) throw numerical_error("masked_drift", "drift undefined where the path is");
  return value;
}

}  // namespace detail

// Euler-Maruyama X_{j+1} = X_j + b(t_j, X_j) Δt + √Δt ξ_j on [0, 1] (or up to
// t_end), reflected at the domain ends. Returns steps+1 positions.
inline std::vector<double> sample_em(const Diffusion1DModel& model, const GridFunction& drift, double x0,
                                     std::uint64_t seed, std::uint64_t stream, int steps, double t_end = 1.0) {
  if (steps < 100) throw validation_error("too_few_steps", "Euler-Maruyama needs at least 100 steps");
  if (drift.values.cols() != model.nodes())
    throw validation_error("dimension_mismatch", "drift must have one column per node");
  Engine rng = make_engine(seed, stream);
  NormalDistribution normal;
  const double dt = t_end / steps, sq = std::sqrt(dt);
  const double a = model.x_min(), b = model.x_max(), width = b - a;
  std::vector<double> path(static_cast<std::size_t>(steps) + 1);
  double x = x0;
  path[0] = x;
  for (int j = 0; j < steps; ++j) {
    const double t = j * dt;
    x += detail::interpolate_drift(model, drift, t, x) * dt + sq * normal(rng);
    if (x < a - 0.5 * width || x > b + 0.5 * width)
      throw numerical_error("path_left_padded_domain", "Euler-Maruyama step left the 2x padded domain");
    if (x < a) x = 2 * a - x;
    if (x > b) x = 2 * b - x;
    path[static_cast<std::size_t>(j) + 1] = x;
  }
  return path;
}

inline std::vector<double> sample_em_reference(const Diffusion1DModel& model, double x0, std::uint64_t seed,
                                               std::uint64_t stream, int steps) {
  return sample_em(model, reference_drift(model, TimeGrid(2)), x0, seed, stream, steps);
}

// ∂̂_t u - U' ∂̂_x u + ½ ∂̂_xx u with centered differences, at interior
// (time, space) points; other entries NaN.
namespace detail {
template <typename Extra>
Matrix centered_operator(const Diffusion1DModel& model, const GridFunction& u, Extra&& extra) {
  const TimeGrid& grid = u.grid;
  const int N = grid.steps(), M = model.cells();
  const double dt = grid.dt(), dx = model.dx();
  Matrix out = Matrix::Constant(N + 1, M + 1, std::numeric_limits<double>::quiet_NaN());
  const Matrix& v = u.values;
  for (int k = 1; k < N; ++k)
    for (int i = 1; i < M; ++i) {
      const double ut = (v(k + 1, i) - v(k - 1, i)) / (2 * dt);
      const double ux = (v(k, i + 1) - v(k, i - 1)) / (2 * dx);
      const double uxx = (v(k, i + 1) - 2 * v(k, i) + v(k, i - 1)) / (dx * dx);
      out(k, i) = ut - model.potential_slope()(i) * ux + 0.5 * uxx + extra(k, i, ux);
    }
  return out;
}
}  // namespace detail

// ∂̂_tψ - U'∂̂_xψ + ½∂̂_xxψ + ½(∂̂_xψ)² - V; NaN where ψ is not finite.
inline GridFunction diffusion_hjb_residual(const GridFunction& psi, const Diffusion1DModel& model,
                                           const GridFunction& V) {
  Matrix r = detail::centered_operator(model, psi, [&](int k, int i, double ux) {
    return 0.5 * ux * ux - V.values(k, i);
  });
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (!std::isfinite(r.data()[i])) r.data()[i] = std::numeric_limits<double>::quiet_NaN();
  return {psi.grid, std::move(r)};
}

// ∂̂_t g - U'∂̂_x g + ½∂̂_xx g - V g.
inline GridFunction diffusion_fk_residual(const GridFunction& g, const Diffusion1DModel& model,
                                          const GridFunction& V) {
  Matrix r = detail::centered_operator(model, g, [&](int k, int i, double) { return -V.values(k, i) * g.values(k, i); });
  return {g.grid, std::move(r)};
}

// Total variation between a sample histogram and the FK marginal f g m on
// `bins` equal bins. Each node's mass is spread uniformly over its dual cell.
struct MarginalComparison {
  double total_variation = 0.0;
  Vector empirical;
  Vector predicted;
};

inline Vector bin_node_masses(const Diffusion1DModel& model, const Vector& node_mass, int bins) {
  Vector out = Vector::Zero(bins);
  const double a = model.x_min(), width = model.x_max() - model.x_min(), dx = model.dx();
  const double bw = width / bins;
  for (int i = 0; i < model.nodes(); ++i) {
    const double lo = std::max(a, model.x(i) - 0.5 * dx), hi = std::min(model.x_max(), model.x(i) + 0.5 * dx);
    const int first = std::clamp(static_cast<int>((lo - a) / bw), 0, bins - 1);
    const int last = std::clamp(static_cast<int>((hi - a) / bw), 0, bins - 1);
    for (int b = first; b <= last; ++b) {
      const double overlap = std::min(hi, a + (b + 1) * bw) - std::max(lo, a + b * bw);
      if (overlap > 0.0) out(b) += node_mass(i) * overlap / (hi - lo);
    }
  }
  return out;
}

struct DiffusionBundle {
  GridFunction g;
  GridFunction f;
  GridFunction drift;
};

inline MarginalComparison empirical_vs_fk_marginal(const Diffusion1DModel& model, const DiffusionBundle& bundle,
                                                   double t, int n_paths, std::uint64_t seed, int bins = 64) {
  const TimeGrid& grid = bundle.g.grid;
  const int k = grid.index_of(t);
  const Vector m = model.measure();
  const Vector initial = (bundle.f.values.row(0).transpose().array() * bundle.g.values.row(0).transpose().array() *
                          m.array()).matrix();
  Vector target = (bundle.f.values.row(k).transpose().array() * bundle.g.values.row(k).transpose().array() *
                   m.array()).matrix();
  target /= target.sum();

  MarginalComparison out;
  out.predicted = bin_node_masses(model, target, bins);
  out.empirical = Vector::Zero(bins);
  const double a = model.x_min(), width = model.x_max() - model.x_min(), dx = model.dx();
  for (int p = 0; p < n_paths; ++p) {
    Engine rng = make_engine(seed, 0x5eedULL + static_cast<std::uint64_t>(p));
    const int node = sample_categorical(initial, rng);
    const double lo = std::max(a, model.x(node) - 0.5 * dx), hi = std::min(model.x_max(), model.x(node) + 0.5 * dx);
    const double x0 = lo + (hi - lo) * uniform01(rng);
    double x = x0;
    if (k > 0) {
      const int steps = std::max(100, k);
      x = sample_em(model, bundle.drift, x0, seed, static_cast<std::uint64_t>(p), steps, t).back();
    }
    const int b = std::clamp(static_cast<int>((x - a) / width * bins), 0, bins - 1);
    out.empirical(b) += 1.0;
  }
  out.empirical /= static_cast<double>(n_paths);
  out.total_variation = 0.5 * (out.empirical - out.predicted).cwiseAbs().sum();
  return out;
}

}  // namespace hlab
