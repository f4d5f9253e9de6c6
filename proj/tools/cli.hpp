#pragma once

// Subcommand implementations for the `hlab` command-line tool.
// Exit codes: 0 success, 2 validation failure, 3 check failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"

namespace hlab::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitCheckFailed = 3;

struct Options {
  fs::path out = ".";
  int threads = 1;
  bool verbose = false;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with a leading `# key=value ...` line recording grid parameters, then
// the column header.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& meta, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw validation_error("output_not_writable", "cannot write " + path.string());
    out_ << "# " << meta << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

  std::ofstream out_;
};

inline void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("output_not_writable", "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

inline ReversibleModel require_model(const RunConfig& c) {
  if (!c.has_model()) throw validation_error("missing_section", "this command needs a model section");
  return build_metropolis(*c.states, c.J0, c.m0, c.U);
}

inline HProcess require_h_process(const RunConfig& c, const ReversibleModel& model) {
  if (!c.has_transform()) throw validation_error("missing_section", "this command needs a transform section");
  const TimeGrid grid(c.N);
  return build_h_process(model, c.f0, c.gamma1, parse_potential(c.V, grid, model.size()));
}

inline std::string grid_meta(const TimeGrid& grid, int states) {
  return "N=" + std::to_string(grid.steps()) + " dt=" + format_number(grid.dt()) + " states=" + std::to_string(states);
}

// Runs fn(i) for i in [0, count) on `threads` workers; fn must only touch
// per-index state.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += threads) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------

inline int cmd_model(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  const Eigen::RowVectorXd stationarity = model.measure().transpose() * model.generator();
  json doc{{"states", model.space().labels()},
           {"J", to_json(model.rates())},
           {"m", to_json(model.measure())},
           {"Q", to_json(model.generator())},
           {"detailed_balance_violation", check_detailed_balance(model)},
           {"stationarity_residual", stationarity.cwiseAbs().maxCoeff()},
           {"irreducible", check_irreducibility(model.rates())}};
  write_json(o.out / "model.json", doc);
  return kExitOk;
}

inline int cmd_fk(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  if (!c.has_transform()) throw validation_error("missing_section", "fk needs a transform section");
  const TimeGrid grid(c.N);
  const PotentialField V = parse_potential(c.V, grid, model.size());
  const FKPropagator phi(model, V);
  const Matrix g = solve_g(phi, c.gamma1);
  const Matrix f = solve_f(phi, model.measure(), c.f0);
  CsvWriter csv(o.out / "fk.csv", grid_meta(grid, model.size()), {"t", "state", "g", "f"});
  for (int k = 0; k <= grid.steps(); ++k)
    for (int x = 0; x < model.size(); ++x) csv.row(grid.time(k), model.space().label(x), g(k, x), f(k, x));
  const ResidualReport r = check_fk_generator(model, V, g);
  json doc{{"max_residual", r.max_residual},
           {"mean_residual", r.mean_residual},
           {"grid_N", r.grid_N},
           {"semigroup_residual", check_semigroup(phi, 0.0, grid.time(grid.steps() / 2), 1.0)},
           {"positivity_flags", positivity_report(g).size()}};
  write_json(o.out / "fk_report.json", doc);
  return kExitOk;
}

inline int cmd_transform(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  const HProcess hp = require_h_process(c, model);
  const TimeGrid& grid = hp.grid();
  const std::string meta = grid_meta(grid, model.size());
  CsvWriter marg(o.out / "marginals.csv", meta, {"t", "state", "p"});
  CsvWriter kern(o.out / "kernel.csv", meta, {"t", "from", "to", "rate"});
  for (int k = 0; k <= grid.steps(); ++k) {
    const Vector p = marginal_at(hp, k);
    for (int x = 0; x < model.size(); ++x) marg.row(grid.time(k), model.space().label(x), p(x));
    const Matrix J = jump_kernel_at(hp, k);
    for (int x = 0; x < model.size(); ++x) {
      if (!(hp.g()(k, x) > 0.0)) continue;
      for (int y = 0; y < model.size(); ++y)
        if (y != x && model.rates()(x, y) > 0.0)
          kern.row(grid.time(k), model.space().label(x), model.space().label(y), J(x, y));
    }
  }
  std::ofstream ent(o.out / "entropy.txt", std::ios::binary);
  ent << "# " << meta << '\n'
      << "relative_entropy = " << format_number(relative_entropy(hp)) << '\n'
      << "normalization = " << format_number(hp.normalization()) << '\n';
  return kExitOk;
}

inline std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw validation_error("missing_seed", "sampling commands need an explicit seed");
  return *seed;
}

inline int cmd_sample(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  const std::uint64_t seed = require_seed(c.sampling.seed);
  const int n = c.sampling.n_paths;
  if (n < 1) throw validation_error("invalid_path_count", "n_paths must be >= 1");
  std::vector<PathSample> paths(static_cast<std::size_t>(n));
  std::string meta;
  if (c.sampling.process == "R") {
    meta = "process=R states=" + std::to_string(model.size());
    parallel_for(n, o.threads, [&](int i) {
      paths[static_cast<std::size_t>(i)] =
          sample_path_R(model, model.measure(), seed, static_cast<std::uint64_t>(i));
    });
  } else if (c.sampling.process == "P") {
    const HProcess hp = require_h_process(c, model);
    meta = "process=P " + grid_meta(hp.grid(), model.size());
    const PathSamplerP sampler(hp);
    parallel_for(n, o.threads, [&](int i) {
      paths[static_cast<std::size_t>(i)] = sampler.sample(seed, static_cast<std::uint64_t>(i));
    });
  } else {
    throw validation_error("config_type_error", "sampling.process must be 'R' or 'P'");
  }
  meta += " seed=" + std::to_string(seed) + " n_paths=" + std::to_string(n);
  CsvWriter csv(o.out / "paths.csv", meta, {"path_id", "time", "state"});
  for (int i = 0; i < n; ++i) {
    const PathSample& p = paths[static_cast<std::size_t>(i)];
    csv.row(i, 0.0, model.space().label(p.initial_state));
    for (const Jump& j : p.jumps) csv.row(i, j.time, model.space().label(j.state));
  }
  return kExitOk;
}

inline std::vector<Vector> test_vectors(const RunConfig& c, int n) {
  std::vector<Vector> us;
  for (int i = 0; i < c.checks.test_vectors; ++i) {
    Engine rng = make_engine(c.checks.vector_seed, static_cast<std::uint64_t>(i));
    Vector u(n);
    for (int x = 0; x < n; ++x) u(x) = 2.0 * uniform01(rng) - 1.0;
    us.push_back(u);
  }
  return us;
}

inline YoungFunction parse_young(const std::string& name) {
  if (name == "theta_exp") return YoungFunction::theta_exp();
  if (name == "theta_star_llogl") return YoungFunction::theta_star_llogl();
  if (name == "sup_norm") return YoungFunction::sup_norm();
  if (name.rfind("power", 0) == 0) {
    const auto open = name.find('(');
    return YoungFunction::power(open == std::string::npos ? 2.0 : std::stod(name.substr(open + 1)));
  }
  throw validation_error("config_type_error", "unknown Young function '" + name + "'");
}

struct CheckLine {
  std::string name;
  double value;
  double tolerance;
  double observed_order = std::numeric_limits<double>::quiet_NaN();
  bool pass() const { return value <= tolerance; }
};

inline json check_lines_to_json(const std::vector<CheckLine>& lines) {
  json arr = json::array();
  for (const auto& l : lines) {
    json item{{"name", l.name}, {"max_residual", l.value}, {"tolerance", l.tolerance}, {"pass", l.pass()}};
    item["observed_order"] = std::isfinite(l.observed_order) ? json(l.observed_order) : json(nullptr);
    arr.push_back(item);
  }
  return arr;
}

inline int cmd_check(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  const HProcess hp = require_h_process(c, model);
  const TimeGrid& grid = hp.grid();
  const Tolerances& tol = c.checks.tolerances;
  std::vector<CheckLine> lines;

  lines.push_back({"fk_semigroup", check_semigroup(hp.propagator(), 0.0, grid.time(grid.steps() / 2), 1.0),
                   tol.semigroup});

  const ResidualReport fk = check_fk_generator(model, hp.potential(), hp.g());
  {
    const TimeGrid fine(2 * grid.steps());
    const PotentialField Vfine = parse_potential(c.V, fine, model.size());
    const ResidualReport fk_fine = check_fk_generator(model, Vfine, solve_g(model, Vfine, c.gamma1));
    const double order = fk_fine.max_residual > 0 ? std::log2(fk.max_residual / fk_fine.max_residual)
                                                  : std::numeric_limits<double>::quiet_NaN();
    lines.push_back({"fk_generator_pde", fk.max_residual, tol.fk_generator, order});
  }

  std::vector<double> hs = c.checks.h;
  double fk_sd = 0.0, main = 0.0, order_sd = std::numeric_limits<double>::quiet_NaN(), order_main = order_sd;
  const auto us = test_vectors(c, model.size());
  for (double t : c.checks.times) {
    const auto sd = check_fk_stochastic_derivative(model, hp.potential(), hp.g(), t, hs);
    fk_sd = std::max(fk_sd, sd.max_residual);
    order_sd = sd.estimate.observed_order;
    for (const Vector& u : us) {
      const auto r = check_main_theorem(hp, u, t, hs);
      main = std::max(main, r.max_residual);
      order_main = r.estimate.observed_order;
    }
  }
  lines.push_back({"fk_stochastic_derivative", fk_sd, tol.fk_stochastic, order_sd});
  lines.push_back({"main_theorem", main, tol.main_theorem, order_main});

  const Matrix forward = forward_marginal_evolve(hp);
  double master = 0.0;
  for (int k = 0; k <= grid.steps(); ++k)
    master = std::max(master, (forward.row(k).transpose() - marginal_at(hp, k)).cwiseAbs().sum());
  lines.push_back({"master_equation_vs_marginal", master, tol.master_equation});

  double cdc = 0.0;
  for (std::size_t i = 0; i + 1 < us.size(); ++i)
    cdc = std::max(cdc, (carre_du_champ_jump(model.rates(), us[i], us[i + 1]) -
                         carre_du_champ_product_rule(model.generator(), us[i], us[i + 1]))
                            .cwiseAbs()
                            .maxCoeff());
  lines.push_back({"carre_du_champ_forms", cdc, tol.carre_du_champ});

  const YoungFunction young = parse_young(c.checks.young);
  const HolderCheck holder = holder_check(hp.f0(), hp.gamma1(), model.measure(), young);
  lines.push_back({"holder_inequality", holder.lhs - holder.rhs, 0.0});

  const HypothesisReport hyp =
      hypothesis_report(hp.f0(), hp.gamma1(), hp.potential(), model.measure(), young, c.checks.entropy_exponent,
                        &hp.g());
  const EntropySufficiency ent =
      entropy_sufficiency_report(hp.f0(), hp.gamma1(), model.measure(), c.checks.entropy_exponent);

  bool all = std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass(); });
  all = all && hyp.satisfied && ent.satisfied;
  const double ratio_max = hyp.g_norm_ratio.empty()
                               ? 0.0
                               : *std::max_element(hyp.g_norm_ratio.begin(), hyp.g_norm_ratio.end());
  json doc{{"grid_N", grid.steps()},
           {"checks", check_lines_to_json(lines)},
           {"holder",
            {{"lhs", holder.lhs},
             {"rhs", holder.rhs},
             {"young", young.name()},
             {"classical_rhs", std::isnan(holder.classical_rhs) ? json(nullptr) : json(holder.classical_rhs)}}},
           {"hypotheses",
            {{"lower_bound_lo", hyp.potential_lower_bound},
             {"gamma1_modular", hyp.gamma1_modular},
             {"sup_conjugate_potential", hyp.sup_conjugate_potential},
             {"max_g_norm_ratio", ratio_max},
             {"verdicts", hyp.verdicts}}},
           {"entropy_sufficiency",
            {{"f0_integral", ent.f0_integral}, {"gamma1_integral", ent.gamma1_integral}, {"verdict", ent.verdict}}},
           {"pass", all}};
  write_json(o.out / "check_report.json", doc);
  if (o.verbose)
    for (const auto& l : lines)
      std::cerr << (l.pass() ? "PASS " : "FAIL ") << l.name << " " << format_number(l.value) << '\n';
  return all ? kExitOk : kExitCheckFailed;
}

inline int cmd_hjb(const RunConfig& c, const Options& o) {
  bool pass = true;
  json summary;
  if (c.has_model() && c.has_transform()) {
    const ReversibleModel model = require_model(c);
    const HProcess hp = require_h_process(c, model);
    const TimeGrid& grid = hp.grid();
    const PsiField psi = psi_from_g(grid, hp.g());
    const HJBResidual plain = discrete_hjb_residual(psi, model, hp.potential());
    const HJBResidual matched = discrete_hjb_residual(psi, model, hp.potential(), PsiTimeDifference::matched_to_g);
    const Matrix fk = fk_signed_residual(model, hp.potential(), hp.g());
    double identity = 0.0, max_res = 0.0;
    for (int k = 1; k < grid.steps(); ++k)
      for (int x = 0; x < model.size(); ++x) {
        if (!std::isnan(matched.signed_residual(k, x)))
          identity = std::max(identity, std::abs(matched.signed_residual(k, x) * hp.g()(k, x) - fk(k, x)));
        if (hp.g()(k, x) > 1e-6 && !std::isnan(plain.signed_residual(k, x)))
          max_res = std::max(max_res, std::abs(plain.signed_residual(k, x)));
      }
    CsvWriter csv(o.out / "hjb.csv", grid_meta(grid, model.size()), {"t", "state", "residual"});
    for (int k = 0; k <= grid.steps(); ++k)
      for (int x = 0; x < model.size(); ++x)
        csv.row(grid.time(k), model.space().label(x), plain.signed_residual(k, x));
    summary["discrete"] = {{"max_residual", max_res},
                           {"mean_residual", plain.report.mean_residual},
                           {"grid_N", grid.steps()},
                           {"masked", plain.masked},
                           {"identity_error", identity},
                           {"tolerance", c.checks.tolerances.hjb}};
    pass = pass && max_res <= c.checks.tolerances.hjb;
  }
  if (c.diffusion) {
    const DiffusionConfig& d = *c.diffusion;
    const Diffusion1DModel model = parse_diffusion_model(d);
    const TimeGrid grid(d.steps);
    const GridFunction V = parse_diffusion_potential(d.V, grid, model.nodes());
    const PDESolution g = solve_g_pde(model, V, parse_profile(d.gamma1, model, "gamma1"));
    const PsiDrift pd = psi_and_drift(model, g.values);
    const GridFunction r = diffusion_hjb_residual(pd.psi, model, V);
    CsvWriter csv(o.out / "hjb_diffusion.csv",
                  "N=" + std::to_string(d.steps) + " M=" + std::to_string(d.cells) + " x_min=" +
                      format_number(d.x_min) + " x_max=" + format_number(d.x_max),
                  {"t", "x", "residual"});
    double mx = 0.0, sum = 0.0;
    long count = 0;
    for (int k = 0; k <= grid.steps(); ++k)
      for (int i = 0; i < model.nodes(); ++i) {
        const double v = r.values(k, i);
        csv.row(grid.time(k), model.x(i), v);
        if (!std::isnan(v)) {
          mx = std::max(mx, std::abs(v));
          sum += std::abs(v);
          ++count;
        }
      }
    summary["diffusion"] = {{"max_residual", mx},
                            {"mean_residual", count ? sum / static_cast<double>(count) : 0.0},
                            {"grid_N", d.steps},
                            {"grid_M", d.cells},
                            {"clipped", g.clipped}};
  }
  if (summary.is_null()) throw validation_error("missing_section", "hjb needs a model+transform or diffusion section");
  summary["pass"] = pass;
  write_json(o.out / "hjb_summary.json", summary);
  return pass ? kExitOk : kExitCheckFailed;
}

inline int cmd_bridge(const RunConfig& c, const Options& o) {
  const ReversibleModel model = require_model(c);
  if (!c.bridge) throw validation_error("missing_section", "bridge needs a bridge section");
  const BridgeProblem problem(model, c.bridge->mu0, c.bridge->mu1);
  const IPFResult r = ipf_solve(problem, c.bridge->tol, c.bridge->max_iter);
  const std::string meta = "states=" + std::to_string(model.size()) + " tol=" + format_number(c.bridge->tol);
  CsvWriter f0(o.out / "f0.csv", meta, {"state", "f0"});
  CsvWriter g1(o.out / "gamma1.csv", meta, {"state", "gamma1"});
  for (int x = 0; x < model.size(); ++x) {
    f0.row(model.space().label(x), r.f0(x));
    g1.row(model.space().label(x), r.gamma1(x));
  }
  CsvWriter log(o.out / "bridge_log.csv", meta, {"iteration", "error"});
  for (std::size_t i = 0; i < r.error_log.size(); ++i) log.row(static_cast<int>(i + 1), r.error_log[i]);

  const double increase = ipf_max_increase(r);
  const bool monotone = increase <= 1e-15;
  const HProcess hp = bridge_to_hprocess(problem, r.f0, r.gamma1, TimeGrid(c.N), c.bridge->tol);
  const double path_entropy = relative_entropy(hp);
  const double static_entropy = static_relative_entropy(ipf_joint(problem, r), problem.kernel());
  json doc{{"iterations", r.iterations},
           {"final_error", r.final_error},
           {"monotone", monotone},
           {"support_restricted", r.support_restricted},
           {"path_entropy", path_entropy},
           {"static_entropy", static_entropy}};
  write_json(o.out / "bridge_report.json", doc);
  return monotone ? kExitOk : kExitCheckFailed;
}

inline int cmd_diffusion(const RunConfig& c, const Options& o) {
  if (!c.diffusion) throw validation_error("missing_section", "diffusion needs a diffusion section");
  const DiffusionConfig& d = *c.diffusion;
  const Diffusion1DModel model = parse_diffusion_model(d);
  const TimeGrid grid(d.steps);
  const GridFunction V = parse_diffusion_potential(d.V, grid, model.nodes());
  const Vector gamma1 = parse_profile(d.gamma1, model, "gamma1");
  const Vector f0 = parse_profile(d.f0, model, "f0");
  const PDESolution g = solve_g_pde(model, V, gamma1);
  const PDESolution f = solve_f_pde(model, V, f0);
  const PsiDrift pd = psi_and_drift(model, g.values);
  const std::string meta = "N=" + std::to_string(d.steps) + " M=" + std::to_string(d.cells) +
                           " x_min=" + format_number(d.x_min) + " x_max=" + format_number(d.x_max);
  auto dump = [&](const char* name, const GridFunction& gf) {
    CsvWriter csv(o.out / name, meta, {"t", "x", "value"});
    for (int k = 0; k <= grid.steps(); ++k)
      for (int i = 0; i < model.nodes(); ++i) csv.row(grid.time(k), model.x(i), gf.values(k, i));
  };
  dump("g.csv", g.values);
  dump("psi.csv", pd.psi);
  dump("drift.csv", pd.drift);

  double duality = 0.0;
  const double first = (f.values.values.row(0).array() * g.values.values.row(0).array() *
                        model.measure().transpose().array()).sum();
  for (int k = 0; k <= grid.steps(); ++k)
    duality = std::max(duality, std::abs((f.values.values.row(k).array() * g.values.values.row(k).array() *
                                          model.measure().transpose().array()).sum() - first));

  if (d.n_paths > 0) {
    const std::uint64_t seed = require_seed(d.seed);
    std::vector<std::vector<double>> paths(static_cast<std::size_t>(d.n_paths));
    parallel_for(d.n_paths, o.threads, [&](int i) {
      paths[static_cast<std::size_t>(i)] =
          sample_em(model, pd.drift, d.x0, seed, static_cast<std::uint64_t>(i), d.em_steps);
    });
    CsvWriter csv(o.out / "paths.csv", meta + " seed=" + std::to_string(seed) + " em_steps=" + std::to_string(d.em_steps),
                  {"path_id", "time", "x"});
    const double dt = 1.0 / d.em_steps;
    for (int i = 0; i < d.n_paths; ++i)
      for (std::size_t j = 0; j < paths[static_cast<std::size_t>(i)].size(); ++j)
        csv.row(i, static_cast<double>(j) * dt, paths[static_cast<std::size_t>(i)][j]);
  }
  json doc{{"grid_N", d.steps},         {"grid_M", d.cells},        {"clipped_g", g.clipped},
           {"clipped_f", f.clipped},    {"duality_drift", duality}, {"dx", model.dx()}};
  write_json(o.out / "diffusion_report.json", doc);
  return kExitOk;
}

inline int cmd_report(const RunConfig& c, const Options& o);

inline int dispatch(const std::string& command, const RunConfig& c, const Options& o) {
  if (command == "model") return cmd_model(c, o);
  if (command == "fk") return cmd_fk(c, o);
  if (command == "transform") return cmd_transform(c, o);
  if (command == "sample") return cmd_sample(c, o);
  if (command == "check") return cmd_check(c, o);
  if (command == "hjb") return cmd_hjb(c, o);
  if (command == "bridge") return cmd_bridge(c, o);
  if (command == "diffusion") return cmd_diffusion(c, o);
  if (command == "report") return cmd_report(c, o);
  throw validation_error("unknown_command", command);
}

inline json error_json(const Error& e) { return json{{"error", e.reason()}, {"message", e.what()}}; }

inline int exit_code_for(const Error& e) {
  return e.category() == ErrorCategory::validation ? kExitValidation : kExitCheckFailed;
}

// Aggregate pass/fail over every command the config supports.
inline int cmd_report(const RunConfig& c, const Options& o) {
  std::vector<std::string> commands;
  if (c.has_model()) commands.push_back("model");
  if (c.has_model() && c.has_transform()) {
    commands.insert(commands.end(), {"fk", "transform", "check", "hjb"});
  } else if (c.diffusion) {
    commands.push_back("hjb");
  }
  if (c.has_model() && c.bridge) commands.push_back("bridge");
  if (c.diffusion) commands.push_back("diffusion");
  json results = json::object();
  int worst = kExitOk;
  for (const auto& name : commands) {
    int code = kExitOk;
    json entry;
    try {
      code = dispatch(name, c, o);
    } catch (const Error& e) {
      code = exit_code_for(e);
      entry = error_json(e);
    }
    entry["exit_code"] = code;
    entry["pass"] = code == kExitOk;
    results[name] = entry;
    worst = std::max(worst, code);
  }
  write_json(o.out / "report.json", json{{"commands", results}, {"pass", worst == kExitOk}});
  return worst;
}

// Entry point shared by main() and the tests. Machine-readable error reasons
// go to stderr as one JSON line.
inline int run(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
  CLI::App app{"h-transform laboratory"};
  std::string command, config_path;
  Options o;
  std::string out = ".";
  app.add_option("command", command, "model | fk | transform | sample | check | hjb | bridge | diffusion | report")
      ->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", o.threads, "worker threads for Monte Carlo");
  app.add_flag("--verbose", o.verbose, "progress on stderr");
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "invalid_arguments"}, {"message", e.what()}}.dump() << '\n';
    return kExitValidation;
  }
  o.out = out;
  try {
    fs::create_directories(o.out);
    const RunConfig c = load_config(config_path);
    return dispatch(command, c, o);
  } catch (const Error& e) {
    err << error_json(e).dump() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << json{{"error", "internal_error"}, {"message", e.what()}}.dump() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace hlab::cli
