#pragma once

#include "bsrg/experiments.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsrg::cli {

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Step2;
  long budget = 200000;
  std::uint64_t seed = 1;
};

struct StokesSpec {
  std::vector<int> active = {0, 2};
  std::vector<int> unit_extents = {8, 2};
  double radius = 1.5;       // 0: c0^{1/4} kappa'(n)
  double lambda_scale = 1.0; // lambda_n multiplier; 0 gives the exactly Gaussian case
  double tolerance = 1e-6;
  bool broken_branch = false;
  int order = 12;
  int n_angle = 16;
  int panels = 2;
  int wall_samples = 1000;
  std::vector<double> theta = {0.4, 0.1, -0.2, 0.3};  // re, im per coarse site
};

struct RgStepSpec {
  bool no_cutoffs = false;
  long budget = 100000;
};

struct RunConfig {
  FlowParams params;
  CouplingLaw law;
  bool has_law = false;
  nlohmann::json law_overrides = nlohmann::json::object();
  int spatial_dim = 1;
  std::vector<int> unit_extents = {4, 4};
  nlohmann::json interaction = nlohmann::json::object();
  std::vector<ExperimentSpec> experiments;
  std::vector<double> grid;
  std::string output_dir = "out";
  int samples = 1000;
  double delta = 0.1;
  std::uint64_t seed = 1;
  StokesSpec stokes;
  RgStepSpec rg_step;
  nlohmann::json raw = nlohmann::json::object();

  Interaction build_interaction() const;
  // Law for an experiment kind: the kind default with the config's law keys applied.
  CouplingLaw experiment_law(ExperimentKind kind) const;
};

// Throws ValidationError naming the field, UsageError for malformed input.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace bsrg::cli
