#pragma once

// Schrödinger bridge between two marginals on a finite reversible model with
// V = 0: the product-form multipliers f0, γ are found by iterative
// proportional fitting on the two-time joint K(x,y) = m(x) (e^Q)(x,y).

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hlab/h_transform.hpp"

namespace hlab {

class BridgeProblem {
 public:
  BridgeProblem(ReversibleModel model, Vector mu0, Vector mu1)
      : model_(std::move(model)), mu0_(std::move(mu0)), mu1_(std::move(mu1)) {
    check_probability(mu0_, "mu0");
    check_probability(mu1_, "mu1");
    kernel_ = model_.measure().asDiagonal() * transition_matrix(model_, 1.0);
    const Vector rows = kernel_.rowwise().sum();
    const Vector cols = kernel_.colwise().sum().transpose();
    for (int x = 0; x < model_.size(); ++x)
      if ((mu0_(x) > 0.0 && !(rows(x) > 0.0)) || (mu1_(x) > 0.0 && !(cols(x) > 0.0)))
        throw validation_error("marginal_not_absolutely_continuous", "target charges a null state of K");
  }

  const ReversibleModel& model() const noexcept { return model_; }
  const Vector& mu0() const noexcept { return mu0_; }
  const Vector& mu1() const noexcept { return mu1_; }
  const Matrix& kernel() const noexcept { return kernel_; }

 private:
  void check_probability(const Vector& mu, const char* what) const {
    if (mu.size() != model_.size())
      throw validation_error("dimension_mismatch", std::string(what) + " must have one entry per state");
    if (!mu.allFinite() || (mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > 1e-12)
      throw validation_error("not_a_probability", std::string(what) + " must be a probability vector");
  }

  ReversibleModel model_;
  Vector mu0_, mu1_;
  Matrix kernel_;
};

struct IPFResult {
  Vector f0;      // a
  Vector gamma1;  // b; joint a(x) K(x,y) b(y)
  int iterations = 0;
  double final_error = 0.0;
  std::vector<double> error_log;  // max marginal ℓ1 error after each sweep
  bool support_restricted = false;
};

// Alternating a ← μ0 / (K b), b ← μ1 / (Kᵀ a) starting from b = 1. States
// outside a target's support keep a zero multiplier.
inline IPFResult ipf_solve(const BridgeProblem& problem, double tol = 1e-10, int max_iter = 10000) {
  const Matrix& K = problem.kernel();
  const Vector& mu0 = problem.mu0();
  const Vector& mu1 = problem.mu1();
  const Eigen::Index n = K.rows();
  IPFResult r;
  r.support_restricted = (mu0.array() == 0.0).any() || (mu1.array() == 0.0).any();
  Vector a = Vector::Zero(n);
  Vector b = Vector::Ones(n);
  auto scale = [](const Vector& target, const Vector& denom) {
    Vector out = Vector::Zero(target.size());
    for (Eigen::Index i = 0; i < target.size(); ++i)
      if (target(i) > 0.0) out(i) = target(i) / denom(i);
    return out;
  };
  for (int it = 1; it <= max_iter; ++it) {
    a = scale(mu0, K * b);
    b = scale(mu1, K.transpose() * a);
    const double row_err = (a.cwiseProduct(K * b) - mu0).cwiseAbs().sum();
    const double col_err = (b.cwiseProduct(K.transpose() * a) - mu1).cwiseAbs().sum();
    const double err = std::max(row_err, col_err);
    r.error_log.push_back(err);
    r.iterations = it;
    r.final_error = err;
    if (err < tol) {
      r.f0 = a;
      r.gamma1 = b;
      return r;
    }
  }
  throw numerical_error("ipf_not_converged",
                        "IPF did not reach tol after " + std::to_string(max_iter) +
                            " iterations; last error " + std::to_string(r.final_error));
}

// Σ q log(q / K) with 0 log 0 = 0.
inline double static_relative_entropy(const Matrix& joint, const Matrix& kernel) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < joint.size(); ++i) {
    const double q = joint.data()[i];
    if (q > 0.0) h += q * std::log(q / kernel.data()[i]);
  }
  return h;
}

inline Matrix ipf_joint(const BridgeProblem& problem, const IPFResult& r) {
  return r.f0.asDiagonal() * problem.kernel() * r.gamma1.asDiagonal();
}

// Largest error increase between consecutive sweeps (≤ 0 when monotone).
inline double ipf_max_increase(const IPFResult& r) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < r.error_log.size(); ++i)
    worst = std::max(worst, r.error_log[i] - r.error_log[i - 1]);
  return r.error_log.size() > 1 ? worst : 0.0;
}

inline HProcess bridge_to_hprocess(const BridgeProblem& problem, const Vector& f0, const Vector& gamma1,
                                   const TimeGrid& grid, double tol = 1e-10) {
  HProcess hp = build_h_process(problem.model(), f0, gamma1, PotentialField::zero(grid, problem.model().size()));
  const double err0 = (marginal_at(hp, 0) - problem.mu0()).cwiseAbs().maxCoeff();
  const double err1 = (marginal_at(hp, grid.steps()) - problem.mu1()).cwiseAbs().maxCoeff();
  if (err0 > 10 * tol || err1 > 10 * tol)
    throw inconsistency_error("bridge_marginal_mismatch",
                              "h-process endpoints miss the targets by " + std::to_string(std::max(err0, err1)));
  return hp;
}

}  // namespace hlab
