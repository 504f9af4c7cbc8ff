#include "run_config.hpp"

#include "bsrg/errors.hpp"

#include <fstream>
#include <sstream>

namespace bsrg::cli {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& prefix = "") {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(prefix + key, e.what());
  }
}

void require_object(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object()) throw ValidationError(name, "must be an object");
}

CouplingLaw merged_law(const CouplingLaw& base, const nlohmann::json& overrides) {
  nlohmann::json j = law_to_json(base);
  j.update(overrides);
  return law_from_json(j);
}

}  // namespace

Interaction RunConfig::build_interaction() const {
  nlohmann::json j = interaction;
  if (!j.contains("lambda_n") && !j.contains("r_n") && j.value("kind", "local") != "kernel")
    j["lambda_n"] = params.lambda_n;
  if (j.value("kind", "local") == "smeared" && !j.contains("dims")) j["dims"] = spatial_dim + 1;
  return interaction_from_json(j);
}

CouplingLaw RunConfig::experiment_law(ExperimentKind kind) const {
  return merged_law(default_experiment_law(kind), law_overrides);
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_object(j, "config");
  RunConfig c;
  c.raw = j;

  if (j.contains("law")) {
    require_object(j["law"], "law");
    c.law_overrides = j["law"];
    c.law = merged_law(CouplingLaw{}, c.law_overrides);
    c.has_law = true;
  }
  if (j.contains("params")) require_object(j["params"], "params");
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  FlowParams base;
  if (c.has_law) base = c.law.at(params.value("v0", base.v0));
  c.params = params_from_json(params, base);
  c.params.validate();

  if (j.contains("lattice")) {
    const auto& l = j["lattice"];
    require_object(l, "lattice");
    read_key(l, "spatial_dim", c.spatial_dim, "lattice.");
    read_key(l, "unit_extents", c.unit_extents, "lattice.");
    if (c.spatial_dim < 1) throw ValidationError("lattice.spatial_dim", "must be at least 1");
    if (static_cast<int>(c.unit_extents.size()) != c.spatial_dim + 1)
      throw ValidationError("lattice.unit_extents", "needs one extent per direction");
  }
  if (j.contains("interaction")) {
    require_object(j["interaction"], "interaction");
    c.interaction = j["interaction"];
    try {
      (void)c.build_interaction();
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError("interaction", e.what());
    }
  }

  read_key(j, "output_dir", c.output_dir);
  read_key(j, "samples", c.samples);
  read_key(j, "delta", c.delta);
  read_key(j, "seed", c.seed);
  if (c.samples <= 0) throw ValidationError("samples", "must be positive");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ValidationError("delta", "must lie in (0, 1)");

  c.grid = default_coupling_grid();
  read_key(j, "grid", c.grid);
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    if (!(c.grid[i] > 0.0)) throw ValidationError("grid", "couplings must be positive");
    if (i > 0 && !(c.grid[i] < c.grid[i - 1])) throw ValidationError("grid", "must be strictly decreasing");
  }

  if (j.contains("experiments")) {
    if (!j["experiments"].is_array()) throw ValidationError("experiments", "must be an array");
    for (const auto& e : j["experiments"]) {
      ExperimentSpec s;
      std::string kind = to_string(s.kind);
      read_key(e, "kind", kind, "experiments.");
      try {
        s.kind = experiment_kind_from_string(kind);
      } catch (const std::exception& ex) {
        throw ValidationError("experiments.kind", ex.what());
      }
      read_key(e, "budget", s.budget, "experiments.");
      read_key(e, "seed", s.seed, "experiments.");
      if (s.budget <= 0) throw ValidationError("experiments.budget", "must be positive");
      c.experiments.push_back(s);
    }
  }
  // Every law-generated parameter set must satisfy the same invariants.
  for (const auto& e : c.experiments)
    for (double v0 : c.grid) {
      try {
        c.experiment_law(e.kind).at(v0).validate();
      } catch (const ValidationError& ex) {
        throw ValidationError("law." + ex.field(), std::string(ex.what()) + " at v0 = " + std::to_string(v0));
      }
    }

  if (j.contains("stokes")) {
    const auto& s = j["stokes"];
    require_object(s, "stokes");
    read_key(s, "active", c.stokes.active, "stokes.");
    read_key(s, "unit_extents", c.stokes.unit_extents, "stokes.");
    read_key(s, "radius", c.stokes.radius, "stokes.");
    read_key(s, "lambda_scale", c.stokes.lambda_scale, "stokes.");
    read_key(s, "tolerance", c.stokes.tolerance, "stokes.");
    read_key(s, "broken_branch", c.stokes.broken_branch, "stokes.");
    read_key(s, "order", c.stokes.order, "stokes.");
    read_key(s, "n_angle", c.stokes.n_angle, "stokes.");
    read_key(s, "panels", c.stokes.panels, "stokes.");
    read_key(s, "wall_samples", c.stokes.wall_samples, "stokes.");
    read_key(s, "theta", c.stokes.theta, "stokes.");
    if (c.stokes.active.empty() || c.stokes.active.size() > 2)
      throw ValidationError("stokes.active", "needs one or two sites");
    if (c.stokes.radius < 0.0) throw ValidationError("stokes.radius", "must be non-negative");
    if (!(c.stokes.tolerance > 0.0)) throw ValidationError("stokes.tolerance", "must be positive");
    if (c.stokes.lambda_scale < 0.0) throw ValidationError("stokes.lambda_scale", "must be non-negative");
    if (c.stokes.order < 2 || c.stokes.n_angle < 2 || c.stokes.panels < 1)
      throw ValidationError("stokes.order", "quadrature sizes too small");
    if (c.stokes.theta.size() % 2 != 0) throw ValidationError("stokes.theta", "needs re, im pairs");
  }
  if (j.contains("rg_step")) {
    const auto& r = j["rg_step"];
    require_object(r, "rg_step");
    read_key(r, "no_cutoffs", c.rg_step.no_cutoffs, "rg_step.");
    read_key(r, "budget", c.rg_step.budget, "rg_step.");
    if (c.rg_step.budget <= 0) throw ValidationError("rg_step.budget", "must be positive");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace bsrg::cli
