#pragma once

// Finite-difference stochastic derivatives from exact transition matrices,
// carré du champ, and the generator identities they are checked against.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hlab/h_transform.hpp"

namespace hlab {

struct DerivativeEstimate {
  Vector value;                   // plain quotient at the smallest step
  std::vector<double> h_sequence; // strictly decreasing, each half the previous
  Vector extrapolated;            // two-level Richardson
  double observed_order = std::numeric_limits<double>::quiet_NaN();  // of the plain quotient
};

inline std::vector<double> default_h_sequence() { return {1e-2, 5e-3, 2.5e-3}; }

// h0 ≈ 1e-2 rounded to a multiple of 4Δt (at least 4Δt), then halved twice,
// so every step is a whole number of grid cells.
inline std::vector<double> grid_h_sequence(const TimeGrid& grid) {
  const double unit = 4.0 * grid.dt();
  const double h0 = unit * std::max(1.0, std::round(1e-2 / unit));
  return {h0, h0 / 2, h0 / 4};
}

// D(h) = a + b h + c h² + ...; eliminates the first two error terms.
inline DerivativeEstimate richardson(const std::function<Vector(double)>& quotient, const std::vector<double>& hs) {
  if (hs.size() != 3) throw validation_error("invalid_h_sequence", "need exactly three steps");
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] >= 1e-8)) throw validation_error("step_too_small", "finite-difference step below 1e-8");
    if (i > 0 && std::abs(hs[i - 1] - 2.0 * hs[i]) > 1e-12 * hs[i - 1])
      throw validation_error("invalid_h_sequence", "steps must halve");
  }
  const Vector d0 = quotient(hs[0]), d1 = quotient(hs[1]), d2 = quotient(hs[2]);
  const Vector r0 = 2.0 * d1 - d0;
  const Vector r1 = 2.0 * d2 - d1;
  DerivativeEstimate est;
  est.value = d2;
  est.h_sequence = hs;
  est.extrapolated = (4.0 * r1 - r0) / 3.0;
  const double coarse = (d0 - d1).cwiseAbs().maxCoeff();
  const double fine = (d1 - d2).cwiseAbs().maxCoeff();
  if (coarse > 0.0 && fine > 0.0) est.observed_order = std::log2(coarse / fine);
  return est;
}

// T^P(s,t): ordered product of per-cell RK4 propagators of dM/dτ = M Q^P(τ).
inline Matrix transition_matrix_P_cells(const HProcess& hp, int ks, int kt) {
  const TimeGrid& grid = hp.grid();
  if (ks < 0 || kt > grid.steps() || ks > kt) throw validation_error("invalid_interval", "need s <= t");
  const int n = hp.size();
  const double h = grid.dt();
  const Matrix I = Matrix::Identity(n, n);
  for (int k = ks; k < kt; ++k)
    for (int x = 0; x < n; ++x)
      if (!(hp.g()(k, x) > 0.0))
        throw numerical_error("nonpositive_g", "g vanishes inside the requested interval");
  Matrix result = I;
  for (int k = ks; k < kt; ++k) {
    const Matrix a0 = generator_P(hp, grid.time(k));
    const Matrix am = generator_P(hp, grid.time(k) + 0.5 * h);
    const Matrix a1 = generator_P(hp, grid.time(k + 1));
    const Matrix k1 = a0;
    const Matrix k2 = (I + 0.5 * h * k1) * am;
    const Matrix k3 = (I + 0.5 * h * k2) * am;
    const Matrix k4 = (I + h * k3) * a1;
    result = result * (I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  return result;
}

inline Matrix transition_matrix_P(const HProcess& hp, double s, double t) {
  return transition_matrix_P_cells(hp, hp.grid().index_of(s), hp.grid().index_of(t));
}

// (1/h)(E_R[u(X_{t+h}) | X_t = x] - u(x)) with e^{Qh} exact; R is homogeneous
// so t only enters the t + h ≤ 1 check.
inline DerivativeEstimate stochastic_derivative(const ReversibleModel& model, const Vector& u, double t,
                                                const std::vector<double>& hs = default_h_sequence()) {
  if (u.size() != model.size()) throw validation_error("dimension_mismatch", "u must have one entry per state");
  if (t + hs.front() > 1.0 + 1e-12) throw validation_error("step_past_horizon", "t + h exceeds 1");
  return richardson([&](double h) -> Vector { return (transition_matrix(model, h) * u - u) / h; }, hs);
}

inline DerivativeEstimate stochastic_derivative(const HProcess& hp, const Vector& u, double t,
                                                std::vector<double> hs = {}) {
  if (u.size() != hp.size()) throw validation_error("dimension_mismatch", "u must have one entry per state");
  if (hs.empty()) hs = grid_h_sequence(hp.grid());
  const int k = hp.grid().index_of(t);
  if (t + hs.front() > 1.0 + 1e-12) throw validation_error("step_past_horizon", "t + h exceeds 1");
  for (double h : hs) hp.grid().index_of(h);  // must be whole cells
  return richardson(
      [&](double h) -> Vector {
        const int steps = hp.grid().index_of(h);
        return (transition_matrix_P_cells(hp, k, k + steps) * u - u) / h;
      },
      hs);
}

// Γ(φ,u)(x) = Σ_y J(x,y)(φ(y)-φ(x))(u(y)-u(x))
inline Vector carre_du_champ_jump(const Matrix& rates, const Vector& phi, const Vector& u) {
  const Eigen::Index n = rates.rows();
  Vector out = Vector::Zero(n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (y != x) out(x) += rates(x, y) * ((phi(y) - phi(x)) * (u(y) - u(x)));  // symmetric in (φ,u) bit for bit
  return out;
}

// Q(φu) - φ Qu - u Qφ
inline Vector carre_du_champ_product_rule(const Matrix& generator, const Vector& phi, const Vector& u) {
  const Vector prod = phi.cwiseProduct(u);
  return generator * prod - phi.cwiseProduct(generator * u) - u.cwiseProduct(generator * phi);
}

// Jump-difference form, cross-checked against the product rule. The two agree
// up to cancellation error in the product-rule form, bounded here by
// 64 eps times the magnitude of its terms.
inline Vector carre_du_champ(const ReversibleModel& model, const Vector& phi, const Vector& u) {
  if (phi.size() != model.size() || u.size() != model.size())
    throw validation_error("dimension_mismatch", "phi and u must have one entry per state");
  const Vector jump = carre_du_champ_jump(model.rates(), phi, u);
  const Vector rule = carre_du_champ_product_rule(model.generator(), phi, u);
  const Matrix absQ = model.generator().cwiseAbs();
  const Vector scale = absQ * phi.cwiseProduct(u).cwiseAbs() + phi.cwiseAbs().cwiseProduct(absQ * u.cwiseAbs()) +
                       u.cwiseAbs().cwiseProduct(absQ * phi.cwiseAbs());
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index x = 0; x < jump.size(); ++x)
    if (std::abs(jump(x) - rule(x)) > 64.0 * eps * scale(x))
      throw inconsistency_error("carre_du_champ_mismatch", "jump and product-rule forms disagree");
  return jump;
}

struct TheoremResidual {
  Vector residual;  // NaN on states with P_t ≤ mass_threshold
  double max_residual = 0.0;
  DerivativeEstimate estimate;
};

// |L^P u - (Qu + Γ(g_t, u)/g_t)| on states charged by P_t.
inline TheoremResidual check_main_theorem(const HProcess& hp, const Vector& u, double t,
                                          std::vector<double> hs = {}, double mass_threshold = 1e-12) {
  const int k = hp.grid().index_of(t);
  const Vector gt = hp.g_node(k);
  const Vector pt = marginal_at(hp, k);
  TheoremResidual out;
  out.estimate = stochastic_derivative(hp, u, t, std::move(hs));
  const Vector gamma = carre_du_champ(hp.model(), gt, u);
  const Vector Qu = generator_apply(hp.model(), u);
  out.residual = Vector::Constant(hp.size(), std::numeric_limits<double>::quiet_NaN());
  for (int x = 0; x < hp.size(); ++x) {
    if (!(pt(x) > mass_threshold)) continue;
    if (!(gt(x) > 0.0)) throw numerical_error("nonpositive_g", "g_t(x) = 0 on a charged state");
    out.residual(x) = std::abs(out.estimate.extrapolated(x) - (Qu(x) + gamma(x) / gt(x)));
    out.max_residual = std::max(out.max_residual, out.residual(x));
  }
  return out;
}

struct FKDerivativeResidual {
  Vector residual;
  double max_residual = 0.0;
  DerivativeEstimate estimate;
};

// |(1/h)(e^{Qh} g(t+h) - g(t)) - V_t g_t| with extrapolation in h.
inline FKDerivativeResidual check_fk_stochastic_derivative(const ReversibleModel& model,
                                                           const PotentialField& potential, const Matrix& g,
                                                           double t, std::vector<double> hs = {}) {
  const TimeGrid& grid = potential.grid();
  if (hs.empty()) hs = grid_h_sequence(grid);
  const int k = grid.index_of(t);
  if (t + hs.front() > 1.0 + 1e-12) throw validation_error("step_past_horizon", "t + h exceeds 1");
  const Vector gt = g.row(k).transpose();
  FKDerivativeResidual out;
  out.estimate = richardson(
      [&](double h) -> Vector {
        const int steps = grid.index_of(h);
        const Vector ahead = g.row(k + steps).transpose();
        return (transition_matrix(model, h) * ahead - gt) / h;
      },
      hs);
  out.residual = (out.estimate.extrapolated - potential.node(k).cwiseProduct(gt)).cwiseAbs();
  out.max_residual = out.residual.maxCoeff();
  return out;
}

}  // namespace hlab
