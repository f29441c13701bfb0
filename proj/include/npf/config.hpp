#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "npf/pde.hpp"
#include "npf/problems.hpp"

namespace npf {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

struct GridConfig {
  double t0 = 0.0;
  double horizon = 1.0;
  int steps = 100;
};

struct McConfig {
  std::size_t n_paths = 1000;
  std::uint64_t seed = 42;
};

struct ExperimentConfig {
  std::string problem_name;  // built-in name, or "inline"
  nlohmann::json inline_problem;  // raw inline spec when problem_name == "inline"
  GridConfig grid;
  McConfig mc;
  std::vector<int> penalty_levels{4, 16, 64, 256};
  RegressionConfig regression;
  std::vector<problems::Query> queries;  // empty: the problem's default queries
  std::string output_dir = "out";

  double dt() const { return (grid.horizon - grid.t0) / grid.steps; }
};

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

inline const Json& require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  return j;
}

inline double get_number(const Json& obj, const char* key, const std::string& where, double fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

inline std::int64_t get_integer(const Json& obj, const char* key, const std::string& where, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return v.get<std::int64_t>();
}

inline Vector get_vector(const Json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a number or a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (!v[j].is_number()) throw ConfigError(where + " must contain numbers only");
    out[static_cast<Eigen::Index>(j)] = v[j].get<double>();
  }
  return out;
}

inline Domain parse_domain(const Json& j) {
  require_object(j, "problem.domain");
  const std::string type = j.value("type", "");
  const double cutoff = get_number(j, "normal_cutoff", "problem.domain", 1.0);
  if (type == "interval") {
    reject_unknown(j, "problem.domain", {"type", "lo", "hi", "normal_cutoff"});
    return Domain::interval(get_number(j, "lo", "problem.domain", 0.0), get_number(j, "hi", "problem.domain", 1.0),
                            cutoff);
  }
  if (type == "box") {
    reject_unknown(j, "problem.domain", {"type", "lo", "hi", "normal_cutoff"});
    if (!j.contains("lo") || !j.contains("hi")) throw ConfigError("problem.domain box needs lo and hi");
    return Domain::box(get_vector(j.at("lo"), "problem.domain.lo"), get_vector(j.at("hi"), "problem.domain.hi"),
                       cutoff);
  }
  if (type == "ball") {
    reject_unknown(j, "problem.domain", {"type", "center", "radius", "normal_cutoff"});
    if (!j.contains("center")) throw ConfigError("problem.domain ball needs center");
    return Domain::ball(get_vector(j.at("center"), "problem.domain.center"),
                        get_number(j, "radius", "problem.domain", 1.0), cutoff);
  }
  throw ConfigError("problem.domain.type must be one of interval, box, ball");
}

}  // namespace detail

/// Inline problem with constant coefficients:
///   {"domain": {...}, "drift": [..], "sigma": [[..], ..],
///    "driver": {"a": a, "c": c},    f = a + c y
///    "boundary": {"a": a, "c": c},  h = a + c y
///    "terminal": {"type": "constant", "value": v} | {"type": "cos", "frequency": w}}
inline PdeProblem build_inline_problem(const nlohmann::json& j, double horizon) {
  using detail::get_number;
  detail::require_object(j, "problem");
  detail::reject_unknown(j, "problem", {"domain", "drift", "sigma", "driver", "boundary", "terminal"});
  if (!j.contains("domain")) throw ConfigError("problem.domain is required");
  Domain domain = detail::parse_domain(j.at("domain"));
  const int d = domain.dim();

  Vector b = j.contains("drift") ? detail::get_vector(j.at("drift"), "problem.drift") : Vector::Zero(d);
  if (b.size() != d) throw ConfigError("problem.drift must have the domain dimension");
  Matrix sigma = Matrix::Identity(d, d);
  if (j.contains("sigma")) {
    const auto& s = j.at("sigma");
    if (s.is_number()) {
      sigma = s.get<double>() * Matrix::Identity(d, d);
    } else {
      if (!s.is_array() || s.size() != static_cast<std::size_t>(d)) {
        throw ConfigError("problem.sigma must be a number or d rows");
      }
      Vector row0 = detail::get_vector(s[0], "problem.sigma[0]");
      sigma.resize(d, row0.size());
      for (int r = 0; r < d; ++r) {
        const Vector row = detail::get_vector(s[static_cast<std::size_t>(r)], "problem.sigma");
        if (row.size() != sigma.cols()) throw ConfigError("problem.sigma rows must have equal length");
        sigma.row(r) = row.transpose();
      }
    }
  }
  ForwardCoefficients fc = ForwardCoefficients::constant(b, sigma);

  auto affine = [&](const char* key) -> std::pair<double, double> {
    if (!j.contains(key)) return {0.0, 0.0};
    const auto& a = detail::require_object(j.at(key), std::string("problem.") + key);
    detail::reject_unknown(a, std::string("problem.") + key, {"a", "c"});
    return {get_number(a, "a", std::string("problem.") + key, 0.0), get_number(a, "c", std::string("problem.") + key, 0.0)};
  };
  const auto [fa, fc_] = affine("driver");
  const auto [ha, hc] = affine("boundary");

  BackwardCoefficients bc;
  bc.m = 1;
  bc.driver = [fa, fc_](double, const Vector&, const Vector& y, const Matrix&) {
    return Vector::Constant(1, fa + fc_ * y[0]);
  };
  bc.boundary_driver = [ha, hc](double, const Vector&, const Vector& y) { return Vector::Constant(1, ha + hc * y[0]); };
  bc.mu_f = fc_;
  bc.l_f = 0.0;
  bc.beta = hc;
  if (bc.beta > 0.0) throw ConfigError("problem.boundary.c must be ≤ 0");
  double growth = std::max({std::abs(fa), std::abs(fc_), std::abs(ha), std::abs(hc)});

  if (!j.contains("terminal")) throw ConfigError("problem.terminal is required");
  const auto& t = detail::require_object(j.at("terminal"), "problem.terminal");
  const std::string type = t.value("type", "");
  if (type == "constant") {
    detail::reject_unknown(t, "problem.terminal", {"type", "value"});
    const double v = get_number(t, "value", "problem.terminal", 0.0);
    bc.terminal = [v](const Vector&) { return Vector::Constant(1, v); };
    growth = std::max(growth, std::abs(v));
  } else if (type == "cos") {
    detail::reject_unknown(t, "problem.terminal", {"type", "frequency"});
    const double w = get_number(t, "frequency", "problem.terminal", 1.0);
    bc.terminal = [w](const Vector& x) { return Vector::Constant(1, std::cos(w * x[0])); };
    growth = std::max(growth, 1.0);
  } else {
    throw ConfigError("problem.terminal.type must be constant or cos");
  }
  bc.growth_const = growth;
  PdeProblem pb{"inline", std::move(domain), std::move(fc), std::move(bc), horizon};
  pb.validate();
  return pb;
}

namespace detail {

inline ExperimentConfig parse_config_object(const Json& root);

}  // namespace detail

/// Parses a JSON experiment document; unknown keys and out-of-range values
/// are rejected with a message naming the field.
inline ExperimentConfig parse_config(const std::string& text) {
  using detail::Json;
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return detail::parse_config_object(root);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config has a field of the wrong type: ") + e.what());
  }
}

namespace detail {

inline ExperimentConfig parse_config_object(const Json& root) {
  detail::require_object(root, "config");
  detail::reject_unknown(root, "",
                         {"problem", "grid", "mc", "penalty_levels", "regression", "queries", "output_dir"});

  ExperimentConfig cfg;
  if (!root.contains("problem")) throw ConfigError("problem is required");
  const Json& problem = root.at("problem");
  if (problem.is_string()) {
    cfg.problem_name = problem.get<std::string>();
    const auto& names = problems::builtin_names();
    if (std::find(names.begin(), names.end(), cfg.problem_name) == names.end()) {
      throw ConfigError("unknown problem '" + cfg.problem_name + "'");
    }
  } else if (problem.is_object()) {
    cfg.problem_name = "inline";
    cfg.inline_problem = problem;
  } else {
    throw ConfigError("problem must be a built-in name or an inline object");
  }

  if (root.contains("grid")) {
    const Json& g = detail::require_object(root.at("grid"), "grid");
    detail::reject_unknown(g, "grid", {"t0", "T", "steps"});
    cfg.grid.t0 = detail::get_number(g, "t0", "grid", cfg.grid.t0);
    cfg.grid.horizon = detail::get_number(g, "T", "grid", cfg.grid.horizon);
    const auto steps = detail::get_integer(g, "steps", "grid", cfg.grid.steps);
    if (steps < 1) throw ConfigError("grid.steps must be ≥ 1");
    if (steps > 10'000'000) throw ConfigError("grid.steps must be ≤ 10000000");
    cfg.grid.steps = static_cast<int>(steps);
  }
  if (!(cfg.grid.t0 >= 0.0)) throw ConfigError("grid.t0 must be ≥ 0");
  if (!(cfg.grid.horizon > cfg.grid.t0)) throw ConfigError("grid.T must be > grid.t0");

  if (root.contains("mc")) {
    const Json& m = detail::require_object(root.at("mc"), "mc");
    detail::reject_unknown(m, "mc", {"n_paths", "seed"});
    const auto n = detail::get_integer(m, "n_paths", "mc", static_cast<std::int64_t>(cfg.mc.n_paths));
    if (n < 1) throw ConfigError("mc.n_paths must be ≥ 1");
    cfg.mc.n_paths = static_cast<std::size_t>(n);
    if (m.contains("seed")) {
      if (!m.at("seed").is_number_unsigned()) throw ConfigError("mc.seed must be a non-negative integer");
      cfg.mc.seed = m.at("seed").get<std::uint64_t>();
    }
  }

  if (root.contains("penalty_levels")) {
    const Json& p = root.at("penalty_levels");
    if (!p.is_array() || p.empty()) throw ConfigError("penalty_levels must be a non-empty array of integers");
    cfg.penalty_levels.clear();
    for (const auto& v : p) {
      if (!v.is_number_integer()) throw ConfigError("penalty_levels must contain integers only");
      const auto n = v.get<std::int64_t>();
      if (n < 1 || n > 1'000'000'000) throw ConfigError("penalty_levels entries must be in [1, 1e9]");
      if (!cfg.penalty_levels.empty() && n <= cfg.penalty_levels.back()) {
        throw ConfigError("penalty_levels must be strictly increasing");
      }
      cfg.penalty_levels.push_back(static_cast<int>(n));
    }
  }

  if (root.contains("regression")) {
    const Json& r = detail::require_object(root.at("regression"), "regression");
    detail::reject_unknown(r, "regression", {"basis_degree", "ridge", "picard_iters", "picard_tol", "clamp_bound"});
    const auto degree = detail::get_integer(r, "basis_degree", "regression", cfg.regression.basis_degree);
    if (degree < 0 || degree > 10) throw ConfigError("regression.basis_degree must be in [0, 10]");
    cfg.regression.basis_degree = static_cast<int>(degree);
    cfg.regression.ridge = detail::get_number(r, "ridge", "regression", cfg.regression.ridge);
    if (cfg.regression.ridge < 0.0) throw ConfigError("regression.ridge must be ≥ 0");
    const auto iters = detail::get_integer(r, "picard_iters", "regression", cfg.regression.picard_iters);
    if (iters < 1 || iters > 1000) throw ConfigError("regression.picard_iters must be in [1, 1000]");
    cfg.regression.picard_iters = static_cast<int>(iters);
    cfg.regression.picard_tol = detail::get_number(r, "picard_tol", "regression", cfg.regression.picard_tol);
    if (!(cfg.regression.picard_tol > 0.0)) throw ConfigError("regression.picard_tol must be > 0");
    if (r.contains("clamp_bound")) {
      const double c = detail::get_number(r, "clamp_bound", "regression", 0.0);
      if (!(c > 0.0)) throw ConfigError("regression.clamp_bound must be > 0");
      cfg.regression.clamp_bound = c;
    }
  }

  if (root.contains("queries")) {
    const Json& q = root.at("queries");
    if (!q.is_array()) throw ConfigError("queries must be an array");
    for (const auto& item : q) {
      detail::require_object(item, "queries[]");
      detail::reject_unknown(item, "queries[]", {"t", "x"});
      if (!item.contains("x")) throw ConfigError("queries[].x is required");
      problems::Query query{detail::get_number(item, "t", "queries[]", cfg.grid.t0),
                            detail::get_vector(item.at("x"), "queries[].x")};
      if (!(query.t >= cfg.grid.t0 && query.t < cfg.grid.horizon)) {
        throw ConfigError("queries[].t must satisfy grid.t0 ≤ t < grid.T");
      }
      cfg.queries.push_back(std::move(query));
    }
  }

  if (root.contains("output_dir")) {
    if (!root.at("output_dir").is_string()) throw ConfigError("output_dir must be a string");
    cfg.output_dir = root.at("output_dir").get<std::string>();
  }

  // Resolve the problem once so inline specs and queries are checked here.
  try {
    const PdeProblem pb = cfg.problem_name == "inline"
                              ? build_inline_problem(cfg.inline_problem, cfg.grid.horizon)
                              : problems::make_builtin(cfg.problem_name, cfg.grid.horizon).problem;
    for (const auto& q : cfg.queries) {
      if (q.x.size() != pb.domain.dim()) throw ConfigError("queries[].x has the wrong dimension");
      if (!pb.domain.contains(q.x, 1e-12)) throw ConfigError("queries[].x must lie in the closed domain");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace detail

/// Problem and queries the config refers to.
inline problems::BuiltinProblem resolve_problem(const ExperimentConfig& cfg) {
  if (cfg.problem_name == "inline") {
    problems::BuiltinProblem b{build_inline_problem(cfg.inline_problem, cfg.grid.horizon), {}, std::nullopt, {}};
    const auto [lo, hi] = b.problem.domain.bounding_box();
    b.default_queries.push_back({cfg.grid.t0, b.problem.domain.project(0.5 * (lo + hi))});
    if (!cfg.queries.empty()) b.default_queries = cfg.queries;
    return b;
  }
  problems::BuiltinProblem b = problems::make_builtin(cfg.problem_name, cfg.grid.horizon);
  if (!cfg.queries.empty()) b.default_queries = cfg.queries;
  for (auto& q : b.default_queries) q.t = std::max(q.t, cfg.grid.t0);
  return b;
}

/// Resolved config as JSON (defaults filled in), for the manifest.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["problem"] = cfg.problem_name == "inline" ? cfg.inline_problem : nlohmann::json(cfg.problem_name);
  j["grid"] = {{"t0", cfg.grid.t0}, {"T", cfg.grid.horizon}, {"steps", cfg.grid.steps}};
  j["mc"] = {{"n_paths", cfg.mc.n_paths}, {"seed", cfg.mc.seed}};
  j["penalty_levels"] = cfg.penalty_levels;
  j["regression"] = {{"basis_degree", cfg.regression.basis_degree},
                     {"ridge", cfg.regression.ridge},
                     {"picard_iters", cfg.regression.picard_iters},
                     {"picard_tol", cfg.regression.picard_tol}};
  if (cfg.regression.clamp_bound) j["regression"]["clamp_bound"] = *cfg.regression.clamp_bound;
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : cfg.queries) {
    queries.push_back({{"t", q.t}, {"x", std::vector<double>(q.x.data(), q.x.data() + q.x.size())}});
  }
  j["queries"] = queries;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace npf
