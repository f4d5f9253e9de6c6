#pragma once

// Run configuration: a JSON document with `model`, `grid`, `transform`,
// `checks`, `sampling`, `bridge` and `diffusion` sections. The schema is
// documented in README.md.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlab/hlab.hpp"

namespace hlab::cli {

using json = nlohmann::json;

struct Tolerances {
  double semigroup = 1e-8;
  double fk_generator = 1e-6;
  double fk_stochastic = 1e-5;
  double main_theorem = 1e-5;
  double master_equation = 1e-6;
  double hjb = 1e-6;
  double carre_du_champ = 1e-13;
  double bridge = 1e-10;
};

struct ChecksConfig {
  Tolerances tolerances;
  std::vector<double> h;  // empty: grid-aligned default
  std::vector<double> times{0.25, 0.5, 0.75};
  int test_vectors = 5;
  std::uint64_t vector_seed = 0;
  std::string young = "theta_star_llogl";
  double entropy_exponent = 2.0;
};

struct SamplingConfig {
  int n_paths = 1000;
  std::optional<std::uint64_t> seed;
  std::string process = "P";
};

struct BridgeConfig {
  Vector mu0, mu1;
  double tol = 1e-10;
  int max_iter = 10000;
};

struct DiffusionConfig {
  double x_min = -2.0, x_max = 2.0;
  int cells = 256;
  int steps = 512;
  json potential = json{{"type", "zero"}};
  json V = json{{"type", "constant"}, {"value", 0.0}};
  json gamma1 = json{{"type", "constant"}, {"value", 1.0}};
  json f0 = json{{"type", "constant"}, {"value", 1.0}};
  double x0 = 0.0;
  int n_paths = 100;
  int em_steps = 512;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  json raw;
  std::optional<StateSpace> states;
  Matrix J0;
  Vector m0, U;
  int N = 1000;
  Vector f0, gamma1;
  json V;
  ChecksConfig checks;
  SamplingConfig sampling;
  std::optional<BridgeConfig> bridge;
  std::optional<DiffusionConfig> diffusion;

  bool has_model() const { return states.has_value(); }
  bool has_transform() const { return f0.size() > 0; }
};

namespace detail {

inline Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw validation_error("config_type_error", what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw validation_error("config_type_error", what + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix to_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw validation_error("config_type_error", what + " must be a list of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw validation_error("dimension_mismatch", what + " rows must have equal length");
    m.row(static_cast<Eigen::Index>(r)) = to_vector(j[r], what).transpose();
  }
  return m;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
  using namespace detail;
  RunConfig c;
  c.raw = doc;
  try {
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      c.states = StateSpace(m.at("states").get<std::vector<std::string>>());
      c.J0 = to_matrix(m.at("J0"), "model.J0");
      c.m0 = m.contains("m0") ? to_vector(m.at("m0"), "model.m0") : Vector::Ones(c.states->size());
      c.U = m.contains("U") ? to_vector(m.at("U"), "model.U") : Vector::Zero(c.states->size());
    }
    if (doc.contains("grid")) c.N = get_or<int>(doc.at("grid"), "N", 1000);
    if (doc.contains("transform")) {
      const json& t = doc.at("transform");
      const int n = c.states ? c.states->size() : 0;
      c.f0 = t.contains("f0") ? to_vector(t.at("f0"), "transform.f0") : Vector::Ones(n);
      c.gamma1 = t.contains("gamma1") ? to_vector(t.at("gamma1"), "transform.gamma1") : Vector::Ones(n);
      c.V = t.contains("V") ? t.at("V") : json(0.0);
    }
    if (doc.contains("checks")) {
      const json& k = doc.at("checks");
      if (k.contains("h")) c.checks.h = k.at("h").get<std::vector<double>>();
      if (k.contains("times")) c.checks.times = k.at("times").get<std::vector<double>>();
      c.checks.test_vectors = get_or<int>(k, "test_vectors", c.checks.test_vectors);
      c.checks.vector_seed = get_or<std::uint64_t>(k, "vector_seed", 0);
      c.checks.young = get_or<std::string>(k, "young", c.checks.young);
      c.checks.entropy_exponent = get_or<double>(k, "entropy_exponent", 2.0);
      if (k.contains("tolerances")) {
        const json& tol = k.at("tolerances");
        Tolerances& t = c.checks.tolerances;
        t.semigroup = get_or<double>(tol, "semigroup", t.semigroup);
        t.fk_generator = get_or<double>(tol, "fk_generator", t.fk_generator);
        t.fk_stochastic = get_or<double>(tol, "fk_stochastic", t.fk_stochastic);
        t.main_theorem = get_or<double>(tol, "main_theorem", t.main_theorem);
        t.master_equation = get_or<double>(tol, "master_equation", t.master_equation);
        t.hjb = get_or<double>(tol, "hjb", t.hjb);
        t.carre_du_champ = get_or<double>(tol, "carre_du_champ", t.carre_du_champ);
        t.bridge = get_or<double>(tol, "bridge", t.bridge);
      }
    }
    if (doc.contains("sampling")) {
      const json& s = doc.at("sampling");
      c.sampling.n_paths = get_or<int>(s, "n_paths", c.sampling.n_paths);
      if (s.contains("seed")) c.sampling.seed = s.at("seed").get<std::uint64_t>();
      c.sampling.process = get_or<std::string>(s, "process", "P");
    }
    if (doc.contains("bridge")) {
      const json& b = doc.at("bridge");
      BridgeConfig bc;
      bc.mu0 = to_vector(b.at("mu0"), "bridge.mu0");
      bc.mu1 = to_vector(b.at("mu1"), "bridge.mu1");
      bc.tol = get_or<double>(b, "tol", bc.tol);
      bc.max_iter = get_or<int>(b, "max_iter", bc.max_iter);
      c.bridge = bc;
    }
    if (doc.contains("diffusion")) {
      const json& d = doc.at("diffusion");
      DiffusionConfig dc;
      dc.x_min = get_or<double>(d, "x_min", dc.x_min);
      dc.x_max = get_or<double>(d, "x_max", dc.x_max);
      dc.cells = get_or<int>(d, "M", dc.cells);
      dc.steps = get_or<int>(d, "N", dc.steps);
      if (d.contains("U")) dc.potential = d.at("U");
      if (d.contains("V")) dc.V = d.at("V");
      if (d.contains("gamma1")) dc.gamma1 = d.at("gamma1");
      if (d.contains("f0")) dc.f0 = d.at("f0");
      dc.x0 = get_or<double>(d, "x0", dc.x0);
      dc.n_paths = get_or<int>(d, "n_paths", dc.n_paths);
      dc.em_steps = get_or<int>(d, "em_steps", dc.steps);
      if (d.contains("seed")) dc.seed = d.at("seed").get<std::uint64_t>();
      c.diffusion = dc;
    }
  } catch (const json::exception& e) {
    throw validation_error("config_parse_error", e.what());
  }
  if (c.has_transform() && !c.has_model())
    throw validation_error("missing_section", "transform requires a model section");
  if (c.has_model()) {
    const int n = c.states->size();
    if (c.J0.rows() != n || c.J0.cols() != n || c.m0.size() != n || c.U.size() != n)
      throw validation_error("dimension_mismatch", "model vectors must match the number of states");
    if (c.has_transform() && (c.f0.size() != n || c.gamma1.size() != n))
      throw validation_error("dimension_mismatch", "f0 and gamma1 must match the number of states");
    if (c.bridge && (c.bridge->mu0.size() != n || c.bridge->mu1.size() != n))
      throw validation_error("dimension_mismatch", "bridge marginals must match the number of states");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config_not_found", "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw validation_error("config_parse_error", e.what());
  }
  return parse_config(doc);
}

// V as a number (constant), a per-state list (constant in time), a list of
// N+1 per-state rows, or {"base": [...], "amplitude": [...], "frequency": f}
// meaning base + amplitude sin(2π f t).
inline PotentialField parse_potential(const json& desc, const TimeGrid& grid, int n) {
  using detail::to_matrix;
  using detail::to_vector;
  try {
    if (desc.is_number()) return PotentialField::constant(grid, n, desc.get<double>());
    if (desc.is_array() && !desc.empty() && desc[0].is_array()) return PotentialField(grid, to_matrix(desc, "V"));
    if (desc.is_array()) {
      const Vector v = to_vector(desc, "V");
      if (v.size() != n) throw validation_error("dimension_mismatch", "V needs one value per state");
      return PotentialField::stationary(grid, v);
    }
    if (desc.is_object()) {
      const Vector base = to_vector(desc.at("base"), "V.base");
      const Vector amp = desc.contains("amplitude") ? to_vector(desc.at("amplitude"), "V.amplitude") : Vector::Zero(n);
      const double freq = desc.value("frequency", 1.0);
      if (base.size() != n || amp.size() != n)
        throw validation_error("dimension_mismatch", "V.base and V.amplitude need one value per state");
      constexpr double two_pi = 6.283185307179586476925286766559;
      return PotentialField::sampled(grid, n, [&](double t, int x) {
        return base(x) + amp(x) * std::sin(two_pi * freq * t);
      });
    }
  } catch (const json::exception& e) {
    throw validation_error("config_parse_error", e.what());
  }
  throw validation_error("config_type_error", "unsupported V specification");
}

// Spatial profile: {"type": "constant", "value": c}, {"type": "gaussian",
// "center": y0, "width": eps} (normal density), or {"values": [...]}.
inline Vector parse_profile(const json& desc, const Diffusion1DModel& model, const std::string& what) {
  try {
    if (desc.contains("values")) {
      Vector v = detail::to_vector(desc.at("values"), what);
      if (v.size() != model.nodes()) throw validation_error("dimension_mismatch", what + " needs M+1 values");
      return v;
    }
    const std::string type = desc.value("type", "constant");
    Vector v(model.nodes());
    if (type == "constant") {
      v.setConstant(desc.value("value", 1.0));
    } else if (type == "gaussian") {
      const double y0 = desc.value("center", 0.0), eps = desc.value("width", 0.05);
      if (!(eps > 0.0)) throw validation_error("invalid_width", what + " width must be positive");
      constexpr double inv_sqrt_two_pi = 0.39894228040143267793994605993438;
      for (int i = 0; i < model.nodes(); ++i) {
        const double z = (model.x(i) - y0) / eps;
        v(i) = inv_sqrt_two_pi / eps * std::exp(-0.5 * z * z);
      }
    } else {
      throw validation_error("config_type_error", "unknown profile type '" + type + "'");
    }
    return v;
  } catch (const json::exception& e) {
    throw validation_error("config_parse_error", e.what());
  }
}

// U: {"type": "zero"}, {"type": "quadratic", "k": k} (k x²/2), or
// {"type": "double_well", "a": a} (a (x² - 1)²).
inline Diffusion1DModel parse_diffusion_model(const DiffusionConfig& d) {
  const std::string type = d.potential.value("type", "zero");
  if (type == "zero") return Diffusion1DModel::free(d.x_min, d.x_max, d.cells);
  if (type == "quadratic") {
    const double k = d.potential.value("k", 1.0);
    return Diffusion1DModel::from_functions(
        d.x_min, d.x_max, d.cells, [k](double x) { return 0.5 * k * x * x; }, [k](double x) { return k * x; });
  }
  if (type == "double_well") {
    const double a = d.potential.value("a", 1.0);
    return Diffusion1DModel::from_functions(
        d.x_min, d.x_max, d.cells, [a](double x) { return a * (x * x - 1) * (x * x - 1); },
        [a](double x) { return 4 * a * x * (x * x - 1); });
  }
  throw validation_error("config_type_error", "unknown diffusion potential '" + type + "'");
}

inline GridFunction parse_diffusion_potential(const json& desc, const TimeGrid& grid, int nodes) {
  if (desc.is_number()) return constant_grid_function(grid, nodes, desc.get<double>());
  const std::string type = desc.value("type", "constant");
  if (type != "constant") throw validation_error("config_type_error", "diffusion V supports type 'constant'");
  return constant_grid_function(grid, nodes, desc.value("value", 0.0));
}

}  // namespace hlab::cli
