#include "commands.hpp"

#include "bsrg/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace bsrg::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t seed_of(const RunConfig& c, const Overrides& o) { return o.seed.value_or(c.seed); }

fs::path output_dir(const RunConfig& c, const Overrides& o) {
  fs::path dir = o.out.value_or(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw UsageError("cannot write '" + p.string() + "'");
  f << std::setprecision(17);
  return f;
}

struct Manifest {
  nlohmann::json j;
  fs::path dir;

  Manifest(const std::string& command, const RunConfig& c, const Overrides& o, const fs::path& d) : dir(d) {
    j["command"] = command;
    j["config_hash"] = effective_config_hash(c, o);
    j["seed"] = seed_of(c, o);
    j["files"] = nlohmann::json::array();
    j["config"] = c.raw;
  }
  void file(const std::string& name) { j["files"].push_back(name); }
  int finish(int status, double seconds) {
    j["exit_status"] = status;
    j["runtime_seconds"] = seconds;
    auto f = open_out(dir / (j["command"].get<std::string>() + "_manifest.json"));
    f << j.dump(2) << "\n";
    return status;
  }
};

DeskLattices lattices_for(const FlowParams& p, int spatial_dim, const std::vector<int>& extents) {
  return desk_lattices(spatial_dim, extents, p.L, p.n);
}

}  // namespace

std::string effective_config_hash(const RunConfig& c, const Overrides& o) {
  nlohmann::json j = {{"config", c.raw}};
  if (o.seed) j["seed"] = *o.seed;
  if (o.budget) j["budget"] = *o.budget;
  if (o.samples) j["samples"] = *o.samples;
  if (!o.kinds.empty()) j["kinds"] = o.kinds;
  return config_hash(j);
}

int cmd_verify_bounds(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto t0 = Clock::now();
  const int samples = o.samples.value_or(c.samples);
  if (samples <= 0) throw UsageError("--samples must be positive");
  const fs::path dir = output_dir(c, o);
  Manifest m("verify-bounds", c, o, dir);

  const DeskLattices d = lattices_for(c.params, c.spatial_dim, c.unit_extents);
  const OperatorSet ops(c.params, d.unit, d.fine, d.coarse);
  const Interaction v = c.build_interaction();

  const SymbolFit fit = fit_gamma(ops);
  const bool symbol_ok = fit.min_re_nonzero > 0.0 && fit.zero_mode < 1e-10 && fit.gamma > 0.0;
  {
    auto f = open_out(dir / "symbol.csv");
    f << "gamma,gamma_tilde,min_re_nonzero,zero_mode,max_abs_im_over_k0,passed\n"
      << fit.gamma << ',' << fit.gamma_tilde << ',' << fit.min_re_nonzero << ',' << fit.zero_mode << ','
      << fit.max_abs_im_over_k0 << ',' << (symbol_ok ? 1 : 0) << '\n';
    m.file("symbol.csv");
  }

  const Proposition1Scan scan = proposition1_scan(ops, v, c.delta, samples, seed_of(c, o), fit);
  {
    auto f = open_out(dir / "bounds.csv");
    write_bounds_csv(f, scan.rows);
    m.file("bounds.csv");
  }
  m.j["samples"] = samples;
  m.j["delta"] = c.delta;
  m.j["violations"] = scan.violations;
  m.j["min_margin"] = scan.min_margin;
  m.j["symbol_ok"] = symbol_ok;

  log << "symbol: gamma " << fit.gamma << ", gamma_tilde " << fit.gamma_tilde << (symbol_ok ? "" : " (FAILED)") << "\n"
      << "sandwich: " << scan.violations << " violations in " << samples << " samples, min margin " << scan.min_margin
      << "\n";
  const int status = (symbol_ok && scan.violations == 0) ? kPass : kViolation;
  return m.finish(status, seconds_since(t0));
}

int cmd_stokes(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto t0 = Clock::now();
  const StokesSpec& s = c.stokes;
  const fs::path dir = output_dir(c, o);
  Manifest m("stokes", c, o, dir);

  FlowParams p = c.params;
  p.n = 0;
  p.validate();
  const int spatial_dim = static_cast<int>(s.unit_extents.size()) - 1;
  const DeskLattices d = desk_lattices(spatial_dim, s.unit_extents, p.L, 0);
  const OperatorSet ops(p, d.unit, d.fine, d.coarse);
  for (int site : s.active)
    if (site < 0 || site >= d.unit.sites()) throw ValidationError("stokes.active", "site out of range");

  const Interaction base = c.build_interaction();
  const Interaction v =
      s.lambda_scale == 0.0 ? Interaction::local(0.0) : base.with_coupling(s.lambda_scale * coupling_rn(base));

  Field theta(d.coarse);
  const int pairs = static_cast<int>(s.theta.size() / 2);
  for (int y = 0; y < d.coarse.sites() && pairs > 0; ++y)
    theta[y] = cplx(s.theta[2 * (y % pairs)], s.theta[2 * (y % pairs) + 1]);
  const CriticalFields cf = solve_critical_fields(theta.conj(), theta, ops, v);
  const ReducedModel model = reduce_to_sites(ops, cf.rho_n, s.active);

  StokesOptions so;
  so.radius = s.radius;
  so.tolerance = coupling_rn(v) == 0.0 ? std::min(s.tolerance, 1e-8) : s.tolerance;
  so.top_branch = s.broken_branch ? SqrtBranch::FlipSmallest : SqrtBranch::Principal;
  so.quad.panels = s.panels;
  so.quad.order = s.order;
  so.quad.n_angle = s.n_angle;
  if (o.budget) so.quad.order = std::clamp(static_cast<int>(std::pow(static_cast<double>(*o.budget), 0.25)), 4, 40);
  so.quad.t_order = so.quad.order;
  const StokesReport r = stokes_identity_check(fluctuation_integrand(theta.conj(), theta, cf, model, ops, v), model, p, so);
  {
    auto f = open_out(dir / "stokes.csv");
    f << "m,radius,lambda_n,top_re,top_im,bottom_re,bottom_im,wall_re,wall_im,mismatch,quad_error,tolerance,"
         "broken_branch,inconclusive,passed\n"
      << model.m() << ',' << r.radius << ',' << coupling_rn(v) << ',' << r.top.real() << ',' << r.top.imag() << ','
      << r.bottom.real() << ',' << r.bottom.imag() << ',' << r.wall.real() << ',' << r.wall.imag() << ','
      << r.mismatch << ',' << r.quad_error << ',' << r.tolerance << ',' << (r.broken_branch ? 1 : 0) << ','
      << (r.inconclusive ? 1 : 0) << ',' << (r.passed ? 1 : 0) << '\n';
    m.file("stokes.csv");
  }

  const std::vector<double> ts = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto wall = wall_positivity_scan(ops, cf.rho_n, ts, o.samples.value_or(s.wall_samples), seed_of(c, o));
  int wall_violations = 0;
  {
    auto f = open_out(dir / "wall.csv");
    f << "t,samples,violations,constant,min_slack\n";
    for (const auto& w : wall) {
      f << w.t << ',' << w.samples << ',' << w.violations << ',' << w.constant << ',' << w.min_slack << '\n';
      wall_violations += w.violations;
    }
    m.file("wall.csv");
  }
  m.j["report"] = stokes_to_json(r);
  m.j["wall_violations"] = wall_violations;
  m.j["quadrature"] = {{"panels", so.quad.panels}, {"order", so.quad.order}, {"n_angle", so.quad.n_angle}};

  log << "stokes: m=" << model.m() << " mismatch " << r.mismatch << " (tolerance " << r.tolerance << ", quad error "
      << r.quad_error << ")" << (r.inconclusive ? " inconclusive" : "") << "\n"
      << "wall positivity: " << wall_violations << " violations\n";
  int status = kPass;
  if (r.inconclusive) status = kInconclusive;
  else if (!r.passed || wall_violations > 0) status = kViolation;
  return m.finish(status, seconds_since(t0));
}

int cmd_scaling(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto t0 = Clock::now();
  if (c.grid.size() < 2) throw UsageError("scaling needs at least two grid points to fit a decay");

  std::vector<ExperimentSpec> specs;
  if (!o.kinds.empty()) {
    for (const auto& k : o.kinds) {
      if (k == "all") {
        for (auto kind : all_experiment_kinds()) specs.push_back({kind, 200000, c.seed});
      } else {
        specs.push_back({experiment_kind_from_string(k), 200000, c.seed});
      }
    }
  } else if (!c.experiments.empty()) {
    specs = c.experiments;
  } else {
    for (auto kind : all_experiment_kinds()) specs.push_back({kind, 200000, c.seed});
  }
  for (auto& s : specs) {
    if (o.budget) s.budget = *o.budget;
    if (o.seed) s.seed = *o.seed;
    if (s.budget <= 0) throw UsageError("--budget must be positive");
    for (double v0 : c.grid) c.experiment_law(s.kind).at(v0).validate();
  }

  const fs::path dir = output_dir(c, o);
  Manifest m("scaling", c, o, dir);
  m.j["grid"] = c.grid;
  m.j["experiments"] = nlohmann::json::array();

  auto fits = open_out(dir / "scaling_fit.csv");
  fits << "kind,points,fitted_exponent,fitted_prefactor,r_squared,monotone,super_polynomial,offending_v0,passed\n";
  bool all_passed = true;
  for (const auto& s : specs) {
    const auto t1 = Clock::now();
    ExperimentOptions eo;
    eo.budget = s.budget;
    eo.seed = s.seed;
    const ExperimentResult r = error_scaling_experiment(s.kind, c.experiment_law(s.kind), c.grid, eo);
    const std::string name = "scaling_" + to_string(s.kind) + ".csv";
    {
      auto f = open_out(dir / name);
      write_experiment_csv(f, r);
      m.file(name);
    }
    const double offending = r.offending_index >= 0 ? c.grid[r.offending_index] : 0.0;
    fits << to_string(s.kind) << ',' << r.points.size() << ',' << r.fit.fitted_exponent << ','
         << r.fit.fitted_prefactor << ',' << r.fit.r_squared << ',' << (r.monotone ? 1 : 0) << ','
         << (r.super_polynomial ? 1 : 0) << ',' << offending << ',' << (r.passed() ? 1 : 0) << '\n';
    nlohmann::json e = experiment_to_json(r);
    e["budget"] = s.budget;
    e["seed"] = s.seed;
    e["csv"] = name;
    e["runtime_seconds"] = seconds_since(t1);
    m.j["experiments"].push_back(e);

    log << to_string(s.kind) << ": exponent " << r.fit.fitted_exponent << ", r^2 " << r.fit.r_squared
        << (r.monotone ? "" : ", not monotone") << (r.super_polynomial ? "" : ", not super-polynomial");
    if (r.offending_index >= 0) log << ", offending grid point v0 = " << offending << " (index " << r.offending_index << ")";
    log << (r.passed() ? "  PASS" : "  FAIL") << "\n";
    all_passed = all_passed && r.passed();
  }
  fits.close();
  m.file("scaling_fit.csv");
  return m.finish(all_passed ? kPass : kViolation, seconds_since(t0));
}

int cmd_rg_step(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto t0 = Clock::now();
  const fs::path dir = output_dir(c, o);
  Manifest m("rg-step", c, o, dir);

  RgStepOptions ro;
  ro.no_cutoffs = c.rg_step.no_cutoffs;
  ro.budget = o.budget.value_or(c.rg_step.budget);
  if (ro.budget <= 0) throw UsageError("--budget must be positive");
  // Without explicit physics the 1-site comparison runs on the experiment law.
  FlowParams p = c.params;
  if (!c.raw.contains("law") && !c.raw.contains("params")) p = default_experiment_law(ExperimentKind::Step2).at(p.v0);
  const Interaction v = c.raw.contains("interaction") ? c.build_interaction() : Interaction::local(p.lambda_n);
  const RgStepReport r = rg_step_comparison(p, v, ro);
  {
    auto f = open_out(dir / "rg_step.csv");
    f << "v0,lambda_n,mu_n,no_cutoffs,normalization,full_re,full_im,approx_re,approx_im,relative_difference,"
         "quadrature_error,perturbative_scale\n"
      << r.v0 << ',' << r.lambda << ',' << r.mu << ',' << (r.no_cutoffs ? 1 : 0) << ',' << r.normalization << ','
      << r.full.real() << ',' << r.full.imag() << ',' << r.approx.real() << ',' << r.approx.imag() << ','
      << r.relative_difference << ',' << r.quadrature_error << ',' << r.perturbative_scale << '\n';
    m.file("rg_step.csv");
  }
  m.j["report"] = rg_step_to_json(r);
  m.j["budget"] = ro.budget;

  // Exact case: agreement up to the quadrature error. Otherwise the perturbative scale.
  const bool exact = r.lambda == 0.0;
  const double tol = exact ? std::max(r.quadrature_error, 1e-10) : r.perturbative_scale;
  int status = r.relative_difference <= tol ? kPass : kViolation;
  if (!exact && r.quadrature_error > 0.1 * r.perturbative_scale) status = kInconclusive;
  log << "rg-step: relative difference " << r.relative_difference << " (tolerance " << tol << ", quad error "
      << r.quadrature_error << ")\n";
  return m.finish(status, seconds_since(t0));
}

int cmd_export_operators(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto t0 = Clock::now();
  const fs::path dir = output_dir(c, o);
  Manifest m("export-operators", c, o, dir);
  const DeskLattices d = lattices_for(c.params, c.spatial_dim, c.unit_extents);
  const OperatorSet ops(c.params, d.unit, d.fine, d.coarse);
  const std::vector<std::pair<std::string, LinOp>> out = {
      {"Q", ops.Q()},         {"Qn", ops.Qn()},         {"Qn_adj", ops.Qn_adj()}, {"fQn", ops.fQn()},
      {"Dn", ops.Dn()},       {"Delta", ops.Delta()},   {"C1", ops.C(1.0)},       {"C1_inverse", ops.C_inverse(1.0)}};
  for (const auto& [name, op] : out) {
    auto f = open_out(dir / (name + ".op"));
    write_operator(f, op);
    m.file(name + ".op");
  }
  m.j["lattices"] = {{"unit", lattice_to_json(d.unit)}, {"fine", lattice_to_json(d.fine)},
                     {"coarse", lattice_to_json(d.coarse)}};
  m.j["params"] = params_to_json(c.params);
  log << "exported " << out.size() << " operators to " << dir.string() << "\n";
  return m.finish(kPass, seconds_since(t0));
}

}  // namespace bsrg::cli
