#pragma once

// The h-process P = f0(X_0) exp(-∫_0^1 V) γ(X_1) · R on a finite reversible
// model: marginals f_t g_t m, the time-dependent kernel J^P = (g_t(y)/g_t(x)) J,
// relative entropy, path densities and an exact thinning sampler.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hlab/feynman_kac.hpp"

namespace hlab {

class HProcess {
 public:
  HProcess(ReversibleModel model, PotentialField potential, FKPropagator propagator, Vector f0, Vector gamma1,
           FKSolution fk, double normalization)
      : model_(std::move(model)),
        potential_(std::move(potential)),
        propagator_(std::move(propagator)),
        f0_(std::move(f0)),
        gamma1_(std::move(gamma1)),
        fk_(std::move(fk)),
        normalization_(normalization) {}

  const ReversibleModel& model() const noexcept { return model_; }
  const PotentialField& potential() const noexcept { return potential_; }
  const FKPropagator& propagator() const noexcept { return propagator_; }
  const TimeGrid& grid() const noexcept { return fk_.grid; }
  // Normalized initial weight (Σ m f0 g0 = 1).
  const Vector& f0() const noexcept { return f0_; }
  const Vector& gamma1() const noexcept { return gamma1_; }
  const FKSolution& fk() const noexcept { return fk_; }
  const Matrix& g() const noexcept { return fk_.g; }
  const Matrix& f() const noexcept { return fk_.f; }
  // c = Σ m f0 g0 of the weight supplied by the caller.
  double normalization() const noexcept { return normalization_; }
  int size() const noexcept { return model_.size(); }

  Vector g_node(int k) const { return fk_.g.row(k).transpose(); }

  // g between nodes by cubic Hermite interpolation, with node slopes taken
  // from the backward equation ∂_t g = -Qg + Vg.
  Vector g_hermite(double t) const {
    const TimeGrid& grid = fk_.grid;
    const int k = grid.cell_of(t);
    const double h = grid.dt();
    const double s = (t - grid.time(k)) / h;
    if (s <= 0.0) return g_node(k);
    if (s >= 1.0) return g_node(k + 1);
    const Vector g0 = g_node(k), g1 = g_node(k + 1);
    const Vector d0 = slope(k, g0), d1 = slope(k + 1, g1);
    const double s2 = s * s, s3 = s2 * s;
    const Vector value = (2 * s3 - 3 * s2 + 1) * g0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * g1 +
                         (s3 - s2) * h * d1;
    return value.cwiseMax(0.0);
  }

  // g between nodes, linear in t.
  Vector g_linear(double t) const {
    const TimeGrid& grid = fk_.grid;
    const int k = grid.cell_of(t);
    const double w = (t - grid.time(k)) / grid.dt();
    return ((1.0 - w) * fk_.g.row(k) + w * fk_.g.row(k + 1)).transpose();
  }

 private:
  Vector slope(int k, const Vector& gk) const {
    return -model_.generator() * gk + potential_.node(k).cwiseProduct(gk);
  }

  ReversibleModel model_;
  PotentialField potential_;
  FKPropagator propagator_;
  Vector f0_;
  Vector gamma1_;
  FKSolution fk_;
  double normalization_;
};

// Normalization is folded into f0: f0 ← f0 / Σ m f0 g0.
inline HProcess build_h_process(const ReversibleModel& model, const Vector& f0, const Vector& gamma1,
                                const PotentialField& potential) {
  validate_weight(f0, model.size(), "f0");
  validate_weight(gamma1, model.size(), "gamma1");
  FKPropagator phi(model, potential);
  Matrix g = solve_g(phi, gamma1);
  const double c = (model.measure().array() * f0.array() * g.row(0).transpose().array()).sum();
  if (!(c > 0.0)) throw validation_error("degenerate_input", "Σ m f0 g0 = 0: the transform is the null measure");
  Vector f0_normalized = f0 / c;
  Matrix f = solve_f(phi, model.measure(), f0_normalized);
  FKSolution fk{potential.grid(), std::move(g), std::move(f)};
  return HProcess(model, potential, std::move(phi), std::move(f0_normalized), gamma1, std::move(fk), c);
}

// P_t(x) = f(t,x) g(t,x) m(x) at a grid node.
inline Vector marginal_at(const HProcess& hp, int k) {
  return (hp.f().row(k).transpose().array() * hp.g().row(k).transpose().array() * hp.model().measure().array())
      .matrix();
}

inline Vector marginal(const HProcess& hp, double t) { return marginal_at(hp, hp.grid().index_of(t)); }

// Rates J(x,y) g(y)/g(x); rows of states with g(x) = 0 are zero (unusable).
inline Matrix h_rates(const Matrix& rates, const Vector& g) {
  const Eigen::Index n = rates.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    if (!(g(x) > 0.0)) continue;
    for (Eigen::Index y = 0; y < n; ++y)
      if (y != x) out(x, y) = rates(x, y) * (g(y) / g(x));
  }
  return out;
}

inline Matrix h_generator(const Matrix& rates, const Vector& g) {
  Matrix q = h_rates(rates, g);
  q.diagonal() = -q.rowwise().sum();
  return q;
}

inline Matrix jump_kernel_at(const HProcess& hp, int k) {
  const Vector gk = hp.g_node(k);
  const Vector pk = marginal_at(hp, k);
  for (int x = 0; x < hp.size(); ++x)
    if (!(gk(x) > 0.0) && pk(x) > 0.0)
      throw inconsistency_error("positive_mass_at_zero_g", "P_t charges a state where g_t vanishes");
  return h_rates(hp.model().rates(), gk);
}

// J^P(t, ·, ·) at a grid node.
inline Matrix jump_kernel(const HProcess& hp, double t) { return jump_kernel_at(hp, hp.grid().index_of(t)); }

// Generator of P at an arbitrary time (Hermite-interpolated g).
inline Matrix generator_P(const HProcess& hp, double t) {
  return h_generator(hp.model().rates(), hp.g_hermite(t));
}

inline void require_positive_g_before_one(const HProcess& hp) {
  const int N = hp.grid().steps();
  for (const auto& p : positivity_report(hp.g().topRows(N)))
    throw numerical_error("nonpositive_g",
                          "g vanishes at t=" + std::to_string(hp.grid().time(p.k)) + ", state " +
                              std::to_string(p.state));
}

// Master equation dp/dt = p Q^P(t), p_0 = P_0, classical RK4 on the grid.
// Row k of the result is p(t_k).
inline Matrix forward_marginal_evolve(const HProcess& hp) {
  require_positive_g_before_one(hp);
  const TimeGrid& grid = hp.grid();
  const double h = grid.dt();
  Matrix p(grid.nodes(), hp.size());
  Eigen::RowVectorXd row = marginal_at(hp, 0).transpose();
  p.row(0) = row;
  Matrix q0 = generator_P(hp, 0.0);
  for (int k = 0; k < grid.steps(); ++k) {
    const Matrix qm = generator_P(hp, grid.time(k) + 0.5 * h);
    const Matrix q1 = generator_P(hp, grid.time(k + 1));
    const Eigen::RowVectorXd k1 = row * q0;
    const Eigen::RowVectorXd k2 = (row + 0.5 * h * k1) * qm;
    const Eigen::RowVectorXd k3 = (row + 0.5 * h * k2) * qm;
    const Eigen::RowVectorXd k4 = (row + h * k3) * q1;
    row += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p.row(k + 1) = row;
    q0 = q1;
  }
  return p;
}

// H(P|R) = E_P[log f0(X_0)] - ∫ E_P[V_t(X_t)] dt + E_P[log γ(X_1)], the time
// integral by the trapezoidal rule on the FK grid; 0·log 0 = 0.
inline double relative_entropy(const HProcess& hp) {
  const TimeGrid& grid = hp.grid();
  const int N = grid.steps();
  auto expected_log = [&](const Vector& p, const Vector& w) {
    double sum = 0.0;
    for (int x = 0; x < hp.size(); ++x) {
      if (!(p(x) > 0.0)) continue;
      if (!(w(x) > 0.0)) throw inconsistency_error("mass_outside_support", "P charges a zero of f0 or gamma1");
      sum += p(x) * std::log(w(x));
    }
    return sum;
  };
  double potential_term = 0.0;
  for (int k = 0; k <= N; ++k) {
    const double weight = (k == 0 || k == N) ? 0.5 : 1.0;
    potential_term += weight * marginal_at(hp, k).dot(hp.potential().node(k));
  }
  potential_term *= grid.dt();
  return expected_log(marginal_at(hp, 0), hp.f0()) - potential_term + expected_log(marginal_at(hp, N), hp.gamma1());
}

// dP_{[s,t]}/dR_{[s,t]} on a path: f_s(X_s) exp(-∫_s^t V(r, X_r) dr) g_t(X_t).
inline double path_density_ratio(const HProcess& hp, const PathSample& path, double s, double t) {
  const TimeGrid& grid = hp.grid();
  const int ks = grid.index_of(s), kt = grid.index_of(t);
  if (ks > kt) throw validation_error("invalid_interval", "need s <= t");
  const int xs = path.state_at(s);
  if (!(hp.g()(ks, xs) > 0.0)) throw numerical_error("division_by_zero_g", "g(s, X_s) = 0");

  double integral = 0.0;
  double cursor = s;
  int state = xs;
  for (const Jump& j : path.jumps) {
    if (j.time <= s) continue;
    if (j.time >= t) break;
    integral += hp.potential().integral(state, cursor, j.time);
    cursor = j.time;
    state = j.state;
  }
  integral += hp.potential().integral(state, cursor, t);
  return hp.f()(ks, xs) * std::exp(-integral) * hp.g()(kt, path.state_at(t));
}

// ---------------------------------------------------------------------------
// Thinning sampler for the time-inhomogeneous chain with rates J^P(t).
// Within a cell g is linear in t, so the exit rate of a fixed state is a
// linear-fractional function of t; the dominating rate is 1.1 × the larger
// endpoint value, checked at interior points and subdivided if exceeded.
// ---------------------------------------------------------------------------
class PathSamplerP {
 public:
  static constexpr int kMaxDepth = 20;

  explicit PathSamplerP(const HProcess& hp) : hp_(&hp), initial_law_(marginal_at(hp, 0)) {
    require_positive_g_before_one(hp);
    const Matrix& g = hp.g();
    const Matrix& rates = hp.model().rates();
    node_exit_ = Matrix(g.rows(), g.cols());
    for (Eigen::Index k = 0; k < g.rows(); ++k)
      for (Eigen::Index x = 0; x < g.cols(); ++x)
        node_exit_(k, x) = g(k, x) > 0.0 ? rates.row(x).dot(g.row(k)) / g(k, x)
                                          : std::numeric_limits<double>::infinity();
  }

  PathSample sample(std::uint64_t seed, std::uint64_t stream = 0) const {
    Engine rng = make_engine(seed, stream);
    PathSample path{sample_categorical(initial_law_, rng), {}, seed, stream};
    const TimeGrid& grid = hp_->grid();
    int x = path.initial_state;
    double budget = exponential1(rng);
    struct Segment {
      double a, b;
      int cell, depth;
    };
    std::vector<Segment> pending;
    for (int k = 0; k < grid.steps(); ++k) {
      pending.push_back({grid.time(k), grid.time(k + 1), k, 0});
      while (!pending.empty()) {
        Segment seg = pending.back();
        pending.pop_back();
        double a = seg.a;
        while (a < seg.b) {
          const double ra = exit_rate(x, seg.cell, a);
          const double rb = exit_rate(x, seg.cell, seg.b);
          double bound = 1.1 * std::max(ra, rb);
          bool split = !std::isfinite(bound);
          for (double frac : {0.25, 0.5, 0.75}) {
            if (split) break;
            if (exit_rate(x, seg.cell, a + frac * (seg.b - a)) > bound) split = true;
          }
          if (split) {
            if (seg.depth >= kMaxDepth)
              throw numerical_error("thinning_subdivision_depth", "rate bound not attained after 20 subdivisions");
            const double mid = 0.5 * (a + seg.b);
            pending.push_back({mid, seg.b, seg.cell, seg.depth + 1});
            pending.push_back({a, mid, seg.cell, seg.depth + 1});
            break;
          }
          if (bound <= 0.0 || budget >= bound * (seg.b - a)) {
            budget -= bound * (seg.b - a);
            a = seg.b;
            break;
          }
          const double proposal = a + budget / bound;
          budget = exponential1(rng);
          const double rate = exit_rate(x, seg.cell, proposal);
          if (rate > bound)
            throw numerical_error("thinning_bound_violated", "exit rate exceeds its dominating bound");
          if (uniform01(rng) * bound < rate) {
            x = choose_destination(x, seg.cell, proposal, rate, rng);
            path.jumps.push_back({proposal, x});
          }
          a = proposal;
        }
      }
    }
    return path;
  }

 private:
  // g(y) at time t in cell k, linear inside the cell.
  double g_at(int y, int k, double t) const {
    const TimeGrid& grid = hp_->grid();
    const double w = std::clamp((t - grid.time(k)) / grid.dt(), 0.0, 1.0);
    const Matrix& g = hp_->g();
    return (1.0 - w) * g(k, y) + w * g(k + 1, y);
  }

  // Exit rate of state x at time t in cell k, with g linear inside the cell.
  double exit_rate(int x, int k, double t) const {
    if (t == hp_->grid().time(k)) return node_exit_(k, x);
    if (t == hp_->grid().time(k + 1)) return node_exit_(k + 1, x);
    const double gx = g_at(x, k, t);
    if (!(gx > 0.0)) return std::numeric_limits<double>::infinity();
    const Matrix& rates = hp_->model().rates();
    double sum = 0.0;
    for (int y = 0; y < hp_->size(); ++y)
      if (rates(x, y) > 0.0) sum += rates(x, y) * g_at(y, k, t);
    return sum / gx;
  }

  int choose_destination(int x, int k, double t, double total, Engine& rng) const {
    const Matrix& rates = hp_->model().rates();
    double u = uniform01(rng) * total * g_at(x, k, t);
    int chosen = x;
    for (int y = 0; y < hp_->size(); ++y) {
      const double w = rates(x, y) * g_at(y, k, t);
      if (y == x || !(w > 0.0)) continue;
      chosen = y;
      u -= w;
      if (u < 0.0) break;
    }
    return chosen;
  }

  const HProcess* hp_;
  Vector initial_law_;
  Matrix node_exit_;
};

inline PathSample sample_path_P(const HProcess& hp, std::uint64_t seed, std::uint64_t stream = 0) {
  return PathSamplerP(hp).sample(seed, stream);
}

struct EntropySufficiency {
  double f0_integral = 0.0;      // ∫ f0² log₊^p f0 dm
  double gamma1_integral = 0.0;  // ∫ γ² log₊^p γ dm
  double exponent = 2.0;
  bool satisfied = false;
  std::string verdict;
};

inline EntropySufficiency entropy_sufficiency_report(const Vector& f0, const Vector& gamma1, const Vector& m,
                                                     double p) {
  if (!(p > 1.0)) throw validation_error("invalid_exponent", "p must exceed 1");
  auto integral = [&](const Vector& w) {
    double total = 0.0;
    for (Eigen::Index x = 0; x < w.size(); ++x) {
      const double lp = std::max(0.0, std::log(w(x)));
      if (lp > 0.0) total += m(x) * w(x) * w(x) * std::pow(lp, p);
    }
    return total;
  };
  EntropySufficiency r;
  r.exponent = p;
  r.f0_integral = integral(f0);
  r.gamma1_integral = integral(gamma1);
  r.satisfied = std::isfinite(r.f0_integral) && std::isfinite(r.gamma1_integral);
  r.verdict = r.satisfied ? "satisfied" : "violated";
  return r;
}

}  // namespace hlab
