#pragma once

// Young functions, Luxemburg norms, the Orlicz-Hölder inequality and
// hypothesis diagnostics for the h-transform inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hlab/feynman_kac.hpp"
#include "hlab/hjb_check.hpp"

namespace hlab {

class YoungFunction {
 public:
  enum class Kind { power, theta_exp, theta_star_llogl, sup_norm };

  static YoungFunction power(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw validation_error("invalid_exponent", "power Young function needs p >= 1");
    return YoungFunction(Kind::power, p);
  }
  static YoungFunction theta_exp() { return YoungFunction(Kind::theta_exp, 0.0); }
  static YoungFunction theta_star_llogl() { return YoungFunction(Kind::theta_star_llogl, 0.0); }
  static YoungFunction sup_norm() { return YoungFunction(Kind::sup_norm, 0.0); }

  Kind kind() const noexcept { return kind_; }
  double exponent() const noexcept { return p_; }

  // γ(a); +inf outside the effective domain.
  double operator()(double a) const {
    const double x = std::abs(a);
    switch (kind_) {
      case Kind::power: return std::pow(x, p_) / p_;
      case Kind::theta_exp: return theta(x);
      case Kind::theta_star_llogl: return theta_star(x);
      case Kind::sup_norm: return x <= 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  // power(p) ↔ power(q), 1/p + 1/q = 1; power(1) ↔ sup_norm; θ ↔ θ*.
  YoungFunction conjugate() const {
    switch (kind_) {
      case Kind::power: return p_ == 1.0 ? sup_norm() : power(p_ / (p_ - 1.0));
      case Kind::theta_exp: return theta_star_llogl();
      case Kind::theta_star_llogl: return theta_exp();
      case Kind::sup_norm: return power(1.0);
    }
    return *this;
  }

  // γ(2a) ≤ C γ(a) for large a.
  bool satisfies_delta2() const noexcept { return kind_ == Kind::power || kind_ == Kind::theta_star_llogl; }

  std::string name() const {
    switch (kind_) {
      case Kind::power: return "power(" + std::to_string(p_) + ")";
      case Kind::theta_exp: return "theta_exp";
      case Kind::theta_star_llogl: return "theta_star_llogl";
      case Kind::sup_norm: return "sup_norm";
    }
    return "";
  }

  bool operator==(const YoungFunction&) const = default;

 private:
  YoungFunction(Kind kind, double p) : kind_(kind), p_(p) {}
  Kind kind_;
  double p_;
};

inline double young_eval(const YoungFunction& gamma, double a) { return gamma(a); }
inline YoungFunction conjugate(const YoungFunction& gamma) { return gamma.conjugate(); }

inline void validate_measure(const Vector& m) {
  if ((m.array() <= 0.0).any() || std::abs(m.sum() - 1.0) > 1e-9)
    throw validation_error("not_a_probability", "weights must be positive and sum to 1");
}

// ∫ γ(|u|/α) dm
inline double modular(const Vector& u, const Vector& m, const YoungFunction& gamma, double alpha) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) total += m(i) * gamma(std::abs(u(i)) / alpha);
  return total;
}

// inf{α > 0 : ∫ γ(|u|/α) dm ≤ 1}, bisection to relative precision 1e-10.
inline double luxemburg_norm(const Vector& u, const Vector& m, const YoungFunction& gamma) {
  if (u.size() != m.size()) throw validation_error("dimension_mismatch", "u and m must have the same size");
  if (!u.allFinite()) throw validation_error("nonfinite_values", "u must be finite");
  const double sup = u.cwiseAbs().maxCoeff();
  if (sup == 0.0) return 0.0;
  if (gamma.kind() == YoungFunction::Kind::sup_norm) return sup;
  double hi = sup;
  while (modular(u, m, gamma, hi) > 1.0) hi *= 2.0;
  double lo = hi / 2.0;
  while (modular(u, m, gamma, lo) <= 1.0) {
    hi = lo;
    lo /= 2.0;
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    (modular(u, m, gamma, mid) > 1.0 ? lo : hi) = mid;
  }
  return hi;
}

struct HolderCheck {
  double lhs = 0.0;  // ‖uv‖_{L¹(m)}
  double rhs = 0.0;  // 2 ‖u‖_γ ‖v‖_γ*
  bool satisfied = false;
  // Power pairs only: classical Hölder ‖uv‖₁ ≤ ‖u‖_p ‖v‖_q. With γ_p = |a|^p/p the
  // Luxemburg norm is p^{-1/p}‖u‖_p, so this is lhs ≤ p^{1/p} q^{1/q} ‖u‖_γ ‖v‖_γ*,
  // a constant ≤ 2. Informational.
  double classical_rhs = std::numeric_limits<double>::quiet_NaN();
  bool classical_satisfied = false;
};

inline HolderCheck holder_check(const Vector& u, const Vector& v, const Vector& m, const YoungFunction& gamma) {
  HolderCheck r;
  r.lhs = m.dot(u.cwiseProduct(v).cwiseAbs());
  const double product = luxemburg_norm(u, m, gamma) * luxemburg_norm(v, m, gamma.conjugate());
  r.rhs = 2.0 * product;
  // Bisection leaves norms high by at most 1e-10 relative; no slack needed.
  r.satisfied = r.lhs <= r.rhs;
  if (gamma.kind() == YoungFunction::Kind::power && gamma.exponent() > 1.0) {
    const double p = gamma.exponent(), q = p / (p - 1.0);
    r.classical_rhs = std::pow(p, 1.0 / p) * std::pow(q, 1.0 / q) * product;
    r.classical_satisfied = r.lhs <= r.classical_rhs * (1.0 + 1e-9);
  }
  return r;
}

struct HypothesisReport {
  double potential_lower_bound = 0.0;  // lo with V ≥ -lo
  bool bounded_below = true;
  double gamma1_modular = 0.0;         // ∫ γ(γ̂) dm
  double f0_entropy_integral = 0.0;    // ∫ f0² log₊^p f0 dm
  double gamma1_entropy_integral = 0.0;
  double sup_conjugate_potential = 0.0;  // sup_t ∫ γ*(V_t) dm
  std::vector<double> g_norm_ratio;    // ‖g_t‖_γ / ‖γ̂‖_γ per node (when g given)
  bool satisfied = true;
  std::vector<std::string> verdicts;
};

inline HypothesisReport hypothesis_report(const Vector& f0, const Vector& gamma1, const PotentialField& V,
                                          const Vector& m, const YoungFunction& gamma, double p = 2.0,
                                          const Matrix* g = nullptr) {
  HypothesisReport r;
  r.potential_lower_bound = V.lower_bound();
  r.bounded_below = std::isfinite(V.values().minCoeff());
  r.verdicts.push_back(std::string("bounded below: ") + (r.bounded_below ? "yes" : "no") +
                       " (lo = " + std::to_string(r.potential_lower_bound) + ")");
  r.gamma1_modular = modular(gamma1, m, gamma, 1.0);
  r.verdicts.push_back("integral of gamma(gamma1) dm = " + std::to_string(r.gamma1_modular) +
                       (std::isfinite(r.gamma1_modular) ? " (finite)" : " (infinite)"));
  auto entropy_integral = [&](const Vector& w) {
    double total = 0.0;
    for (Eigen::Index x = 0; x < w.size(); ++x) {
      const double lp = std::max(0.0, std::log(w(x)));
      if (lp > 0.0) total += m(x) * w(x) * w(x) * std::pow(lp, p);
    }
    return total;
  };
  r.f0_entropy_integral = entropy_integral(f0);
  r.gamma1_entropy_integral = entropy_integral(gamma1);
  r.verdicts.push_back("f0^2 log+^p f0 integral = " + std::to_string(r.f0_entropy_integral));
  r.verdicts.push_back("gamma1^2 log+^p gamma1 integral = " + std::to_string(r.gamma1_entropy_integral));
  const YoungFunction conj = gamma.conjugate();
  for (int k = 0; k < V.grid().nodes(); ++k)
    r.sup_conjugate_potential = std::max(r.sup_conjugate_potential, modular(V.node(k), m, conj, 1.0));
  r.verdicts.push_back("sup_t integral of gamma*(V_t) dm = " + std::to_string(r.sup_conjugate_potential));
  if (g != nullptr) {
    const double base = luxemburg_norm(gamma1, m, gamma);
    for (Eigen::Index k = 0; k < g->rows(); ++k)
      r.g_norm_ratio.push_back(luxemburg_norm(g->row(k).transpose(), m, gamma) / base);
  }
  r.satisfied = r.bounded_below && std::isfinite(r.gamma1_modular) && std::isfinite(r.f0_entropy_integral) &&
                std::isfinite(r.gamma1_entropy_integral);
  r.verdicts.push_back(r.satisfied ? "satisfied (finite space)" : "violated");
  return r;
}

}  // namespace hlab
