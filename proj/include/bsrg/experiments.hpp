#pragma once

#include "bsrg/stokes.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bsrg {

enum class ExperimentKind { Step1, Step2, Step3Wall, Corollary };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
const std::vector<ExperimentKind>& all_experiment_kinds();

// Regression of log(-log error) on log(1/v0): -log error ~ prefactor * v0^-exponent.
struct DecayFit {
  std::vector<double> grid;  // strictly decreasing
  std::vector<double> log_errors;
  double fitted_exponent = 0.0;
  double fitted_prefactor = 0.0;
  double r_squared = 0.0;
};
DecayFit fit_decay(const std::vector<double>& grid, const std::vector<double>& log_errors);

// Six log-spaced couplings from 3e-3 down to 1e-4.
std::vector<double> default_coupling_grid();

// 1-site model: unit lattice (1,1), d_s = 1.
OperatorSet one_site_model(const FlowParams& p);
// 16-site model: unit lattice (8,2) at n = 0 over a (2,1) coarse lattice.
OperatorSet active_site_model(const FlowParams& p);
// Non-constant coarse field used with the active-site model.
Field active_site_theta(const Lattice& coarse, double scale);

struct DecayPoint {
  double v0 = 0.0;
  double log_kept = 0.0;
  double log_discarded = 0.0;
  double log_ratio = 0.0;
  double rel_error = 0.0;  // quadrature error of the ratio, relative
  double extra = 0.0;      // step1: the Gaussian bound exp(-a r^(-2 eps))
  long evaluations = 0;
  double seconds = 0.0;
};

struct ExperimentOptions {
  long budget = 200000;  // evaluations per grid point
  std::uint64_t seed = 1;
  double corollary_c = 0.5;
  double min_r_squared = 0.95;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::Step2;
  CouplingLaw law;
  std::vector<DecayPoint> points;
  DecayFit fit;
  std::vector<double> local_slopes;  // d log ratio / d log v0 between neighbours
  bool monotone = false;
  int offending_index = -1;
  bool super_polynomial = false;
  bool fit_ok = false;
  bool passed() const { return monotone && super_polynomial && fit_ok; }
};

// Law with the cutoffs and couplings used for each experiment kind.
CouplingLaw default_experiment_law(ExperimentKind k);

ExperimentResult error_scaling_experiment(ExperimentKind kind, const CouplingLaw& law,
                                          const std::vector<double>& grid, const ExperimentOptions& opts = {});
// A single grid point.
DecayPoint decay_point(ExperimentKind kind, const CouplingLaw& law, double v0, const ExperimentOptions& opts);

void write_experiment_csv(std::ostream& os, const ExperimentResult& r);
nlohmann::json experiment_to_json(const ExperimentResult& r);

// Full theta/psi integral against det C e^{cC} cF integrated over theta in the
// checked interior, on the 1-site model; both divided by the theta Gaussian
// normalization. no_cutoffs drops every domain restriction (needs mu < 0 at lambda = 0).
struct RgStepOptions {
  long budget = 100000;
  bool no_cutoffs = false;
  StokesQuadrature quad;
};
struct RgStepReport {
  double v0 = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  bool no_cutoffs = false;
  double normalization = 0.0;  // measured theta Gaussian normalization
  cplx full = 0.0;
  double full_error = 0.0;
  cplx approx = 0.0;
  double approx_error = 0.0;
  double relative_difference = 0.0;
  double quadrature_error = 0.0;  // relative, combined
  double perturbative_scale = 0.0;
};
RgStepReport rg_step_comparison(const FlowParams& p, const Interaction& v, const RgStepOptions& opts = {});
nlohmann::json rg_step_to_json(const RgStepReport& r);

// Hash of a config's canonical JSON dump (FNV-1a, 64 bit, hex).
std::string config_hash(const nlohmann::json& config);

}  // namespace bsrg
