#include "bsrg/experiments.hpp"

#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace bsrg {

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Step1: return "step1";
    case ExperimentKind::Step2: return "step2";
    case ExperimentKind::Step3Wall: return "step3-wall";
    case ExperimentKind::Corollary: return "corollary";
  }
  return "step2";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (ExperimentKind k : all_experiment_kinds())
    if (to_string(k) == s) return k;
  throw UsageError("unknown experiment kind '" + s + "'");
}

const std::vector<ExperimentKind>& all_experiment_kinds() {
  static const std::vector<ExperimentKind> kinds = {ExperimentKind::Step1, ExperimentKind::Step2,
                                                    ExperimentKind::Step3Wall, ExperimentKind::Corollary};
  return kinds;
}

DecayFit fit_decay(const std::vector<double>& grid, const std::vector<double>& log_errors) {
  if (grid.size() < 2) throw UsageError("fit_decay: need at least two grid points");
  if (grid.size() != log_errors.size()) throw ShapeError("fit_decay: grid and errors differ in length");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] < grid[i - 1])) throw UsageError("fit_decay: grid must be strictly decreasing");
  DecayFit f;
  f.grid = grid;
  f.log_errors = log_errors;
  const size_t n = grid.size();
  std::vector<double> x(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    if (!(grid[i] > 0.0)) throw ValidationError("grid", "couplings must be positive");
    x[i] = std::log(1.0 / grid[i]);
    y[i] = log_errors[i] < 0.0 ? std::log(-log_errors[i]) : std::numeric_limits<double>::quiet_NaN();
  }
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.fitted_exponent = sxy / sxx;
  f.fitted_prefactor = std::exp(my - f.fitted_exponent * mx);
  if (std::isfinite(my)) {
    const double res = syy - f.fitted_exponent * sxy;
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - res / syy, 0.0, 1.0) : 1.0;
  }
  return f;
}

std::vector<double> default_coupling_grid() {
  std::vector<double> g;
  const double hi = 3e-3, lo = 1e-4;
  for (int i = 0; i < 6; ++i) g.push_back(hi * std::pow(lo / hi, i / 5.0));
  return g;
}

OperatorSet one_site_model(const FlowParams& p) {
  const DeskLattices d = desk_lattices(1, {1, 1}, p.L, p.n);
  return OperatorSet(p, d.unit, d.fine, d.coarse);
}

OperatorSet active_site_model(const FlowParams& p) {
  if (p.n != 0) throw UsageError("active_site_model: defined at n = 0");
  const DeskLattices d = desk_lattices(1, {8, 2}, p.L, 0);
  return OperatorSet(p, d.unit, d.fine, d.coarse);
}

Field active_site_theta(const Lattice& coarse, double scale) {
  Field th(coarse);
  for (int i = 0; i < th.size(); ++i)
    th[i] = scale * (i % 2 == 0 ? cplx(0.4, 0.1) : cplx(-0.2, 0.3)) * (1.0 + 0.25 * (i / 2));
  return th;
}

CouplingLaw default_experiment_law(ExperimentKind k) {
  CouplingLaw law;
  law.kappa_coeff = 4.0;
  law.lambda_ratio = 0.25;
  law.mu_frac = 0.02;
  if (k == ExperimentKind::Step3Wall) {
    law.n = 0;
    law.kappa_prime_ratio = 0.1;
  }
  return law;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Integrals over the 1-site model of psi_weight(psi) * coupling(theta - psi),
// with psi = |psi| (common phase fixed), eta = theta - psi = |eta| e^{i beta}.
// The theta restriction |theta| in [t_lo, t_hi) becomes an arc in beta.
struct OneSite {
  OperatorSet ops;
  Interaction v;
  double wv = 0.0;  // a L^-2 times the coarse cell volume

  OneSite(const FlowParams& p, const Interaction& inter) : ops(one_site_model(p)), v(inter) {
    if (std::abs(ops.Q().matrix()(0, 0) - 1.0) > 1e-14) throw UsageError("1-site model expects Q = 1");
    wv = p.a / (static_cast<double>(p.L) * p.L) * ops.coarse().cell_volume();
  }

  cplx action(double psi) const {
    Field f(ops.unit());
    f[0] = psi;
    return eval_An_at_background(f.conj(), f, ops, v);
  }
};

struct Range {
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
};

// The eta Gaussian exp(-wv |eta|^2) is negligible (< e^-100) beyond this width.
double eta_width(double wv) { return std::sqrt(100.0 / wv); }

double log_sum_exp(const std::vector<double>& t) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : t) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  std::vector<cplx> e(t.size());
  for (size_t i = 0; i < t.size(); ++i) e[i] = std::exp(t[i] - mx);
  return mx + std::log(pairwise_sum(e).real());
}

using LogWeight = std::function<double(double)>;

// Logarithm of the integral.
double theta_psi_sum(const OneSite& m, const LogWeight& log_weight, Range psi, Range eta, Range theta, int panels,
                     int order, bool graded, long& evals) {
  const GaussRule rs = graded ? graded_rule(psi.lo * psi.lo, psi.hi * psi.hi, panels, order)
                              : composite_rule(psi.lo * psi.lo, psi.hi * psi.hi, panels, order);
  std::vector<double> outer(rs.x.size(), -std::numeric_limits<double>::infinity());
  parallel_for(static_cast<long>(rs.x.size()), [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const double r = std::sqrt(rs.x[i]);
      const double e_lo = std::max({eta.lo, r - theta.hi, theta.lo - r, 0.0});
      const double e_hi = std::min({eta.hi, r + theta.hi, e_lo + eta_width(m.wv)});
      if (!(e_hi > e_lo)) continue;
      const GaussRule re = composite_rule(e_lo * e_lo, e_hi * e_hi, 4, order);
      double inner = 0.0;
      for (size_t j = 0; j < re.x.size(); ++j) {
        const double e = std::sqrt(re.x[j]);
        // cos(beta) in [c_lo, c_hi) keeps |theta| in [theta.lo, theta.hi).
        double c_lo = -1.0, c_hi = 1.0;
        if (r > 0.0 && e > 0.0) {
          c_lo = std::clamp((theta.lo * theta.lo - r * r - e * e) / (2.0 * r * e), -1.0, 1.0);
          if (std::isfinite(theta.hi))
            c_hi = std::clamp((theta.hi * theta.hi - r * r - e * e) / (2.0 * r * e), -1.0, 1.0);
        } else {
          const double t = r + e;
          if (t < theta.lo || t >= theta.hi) continue;
        }
        const double b_lo = std::acos(c_hi), b_hi = std::acos(c_lo);
        if (!(b_hi > b_lo)) continue;
        // both arcs +-beta; the coupling depends on |theta - psi| only
        inner += re.w[j] * 2.0 * (b_hi - b_lo) * std::exp(-m.wv * (e * e - e_lo * e_lo)) / (2.0 * kPi);
      }
      if (inner > 0.0) outer[i] = std::log(rs.w[i]) + log_weight(r) - m.wv * e_lo * e_lo + std::log(inner);
    }
  });
  evals += static_cast<long>(rs.x.size()) * (1 + 4 * order);
  return log_sum_exp(outer);
}

struct Estimate {
  double log_value = 0.0;
  double rel_error = 0.0;
};

Estimate from_log_levels(double fine, double coarse) {
  return {fine, std::isfinite(fine) ? std::abs(std::expm1(coarse - fine)) : 0.0};
}

Estimate from_integral(const IntegralEstimate& e) {
  return {std::log(std::abs(e.value)), e.abs_error / std::abs(e.value)};
}

Estimate theta_psi_integral(const OneSite& m, const LogWeight& log_weight, Range psi, Range eta, Range theta,
                            long budget, bool graded, long& evals) {
  // panels * order * (1 + 4 order) ~ budget
  const int panels = graded ? 12 : 6;
  const int order = std::max(6, static_cast<int>(std::sqrt(static_cast<double>(budget) / (4.0 * panels))));
  const double fine = theta_psi_sum(m, log_weight, psi, eta, theta, panels, order, graded, evals);
  const double coarse = theta_psi_sum(m, log_weight, psi, eta, theta, panels, std::max(4, (2 * order) / 3), graded, evals);
  return from_log_levels(fine, coarse);
}

Estimate psi_integral(const LogWeight& log_weight, Range psi, long budget, bool graded, long& evals) {
  const int panels = graded ? 16 : 8;
  const int order = std::max(8, static_cast<int>(std::min<long>(budget / (2 * panels), 64)));
  auto run = [&](int ord) {
    const GaussRule rs = graded ? graded_rule(psi.lo * psi.lo, psi.hi * psi.hi, panels, ord)
                                : composite_rule(psi.lo * psi.lo, psi.hi * psi.hi, panels, ord);
    std::vector<double> t(rs.x.size());
    parallel_for(static_cast<long>(rs.x.size()), [&](long lo, long hi) {
      for (long i = lo; i < hi; ++i) t[i] = std::log(rs.w[i]) + log_weight(std::sqrt(rs.x[i]));
    });
    evals += static_cast<long>(rs.x.size());
    return log_sum_exp(t);
  };
  const double fine = run(order);
  return from_log_levels(fine, run(std::max(4, (2 * order) / 3)));
}

double checked_interior_radius(const FlowParams& p) {
  return p.c0 * p.kappa_next() / std::pow(static_cast<double>(p.L), 1.5);
}

}  // namespace

DecayPoint decay_point(ExperimentKind kind, const CouplingLaw& law, double v0, const ExperimentOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const FlowParams p = law.at(v0);
  p.validate();
  const Interaction v = Interaction::local(p.lambda_n);
  DecayPoint pt;
  pt.v0 = v0;
  Estimate kept, disc;

  if (kind == ExperimentKind::Step3Wall) {
    const OperatorSet ops = active_site_model(p);
    const Field th = active_site_theta(ops.coarse(), 1.0);
    const CriticalFields cf = solve_critical_fields(th.conj(), th, ops, v);
    const ReducedModel model = reduce_to_sites(ops, cf.rho_n, {0, 2});
    const HoloFn f = fluctuation_integrand(th.conj(), th, cf, model, ops, v);
    StokesQuadrature q;
    q.order = std::clamp(static_cast<int>(std::pow(static_cast<double>(o.budget) / 12.0, 0.25)), 8, 24);
    q.t_order = q.order;
    q.n_angle = 2 * q.order;
    const IntegralEstimate wall = integrate_cylinder_wall(f, model, cylinder_radius(p), q);
    const IntegralEstimate sbot =
        integrate_slice_ball(f, slice_geometry(model, 0.0), std::min(p.r_n, cylinder_radius(p)), q);
    kept = from_integral(sbot);
    disc = from_integral(wall);
    pt.evaluations = wall.evaluations + sbot.evaluations;
  } else {
    const OneSite m(p, v);
    const double kappa = p.kappa_n;
    const double r_check = checked_interior_radius(p);
    // A is real on the real slice of the 1-site model.
    auto weight = [&](double psi) { return -m.action(psi).real(); };
    long evals = 0;
    switch (kind) {
      case ExperimentKind::Step2:
        kept = theta_psi_integral(m, weight, {0.0, p.c0 * kappa}, {}, {0.0, r_check}, o.budget, false, evals);
        disc = theta_psi_integral(m, weight, {p.c0 * kappa, kappa}, {}, {0.0, r_check}, o.budget, true, evals);
        break;
      case ExperimentKind::Step1: {
        const double vol = m.ops.coarse().cell_volume();
        const double rc = coupling_rn(v);
        const double d0 = p.L * std::pow(rc, -p.eps) / std::sqrt(vol);
        kept = theta_psi_integral(m, weight, {0.0, p.c0 * kappa}, {}, {0.0, r_check}, o.budget, false, evals);
        disc = theta_psi_integral(m, weight, {0.0, p.c0 * kappa}, {d0, std::numeric_limits<double>::infinity()},
                                  {r_check, std::numeric_limits<double>::infinity()}, o.budget, false, evals);
        pt.extra = std::exp(-p.a * std::pow(rc, -2.0 * p.eps));
        break;
      }
      case ExperimentKind::Corollary: {
        kept = psi_integral(weight, {0.0, p.c0 * kappa}, o.budget, false, evals);
        disc = psi_integral(weight, {o.corollary_c * kappa, kappa}, o.budget, true, evals);
        break;
      }
      default: break;
    }
    pt.evaluations = evals;
  }
  pt.log_kept = kept.log_value;
  pt.log_discarded = disc.log_value;
  if (!std::isfinite(pt.log_kept) || !std::isfinite(pt.log_discarded))
    throw DomainError("decay_point: " + to_string(kind) + " integral vanished or underflowed at v0 = " +
                      std::to_string(v0));
  pt.log_ratio = pt.log_discarded - pt.log_kept;
  pt.rel_error = disc.rel_error + kept.rel_error;
  pt.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return pt;
}

ExperimentResult error_scaling_experiment(ExperimentKind kind, const CouplingLaw& law,
                                          const std::vector<double>& grid, const ExperimentOptions& o) {
  if (grid.size() < 2) throw UsageError("error_scaling_experiment: the fit needs at least two grid points");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] < grid[i - 1])) throw UsageError("error_scaling_experiment: grid must be strictly decreasing");
  ExperimentResult r;
  r.kind = kind;
  r.law = law;
  std::vector<double> logs;
  for (double v0 : grid) {
    r.points.push_back(decay_point(kind, law, v0, o));
    logs.push_back(r.points.back().log_ratio);
  }
  r.fit = fit_decay(grid, logs);
  r.monotone = true;
  for (size_t i = 1; i < logs.size(); ++i)
    if (!(logs[i] < logs[i - 1])) {
      r.monotone = false;
      r.offending_index = static_cast<int>(i);
      break;
    }
  for (size_t i = 1; i < logs.size(); ++i)
    r.local_slopes.push_back((logs[i] - logs[i - 1]) / (std::log(grid[i]) - std::log(grid[i - 1])));
  r.super_polynomial = r.local_slopes.size() >= 2;
  for (size_t i = 1; i < r.local_slopes.size(); ++i)
    if (!(r.local_slopes[i] > r.local_slopes[i - 1])) r.super_polynomial = false;
  r.fit_ok = r.fit.r_squared >= o.min_r_squared;
  return r;
}

void write_experiment_csv(std::ostream& os, const ExperimentResult& r) {
  os << "kind,v0,log_kept,log_discarded,log_ratio,rel_error,extra,evaluations\n" << std::setprecision(17);
  for (const auto& p : r.points)
    os << to_string(r.kind) << ',' << p.v0 << ',' << p.log_kept << ',' << p.log_discarded << ',' << p.log_ratio << ','
       << p.rel_error << ',' << p.extra << ',' << p.evaluations << '\n';
}

nlohmann::json experiment_to_json(const ExperimentResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"v0", p.v0},
                   {"log_kept", p.log_kept},
                   {"log_discarded", p.log_discarded},
                   {"log_ratio", p.log_ratio},
                   {"rel_error", p.rel_error},
                   {"extra", p.extra},
                   {"evaluations", p.evaluations},
                   {"seconds", p.seconds}});
  return {{"kind", to_string(r.kind)},
          {"law", law_to_json(r.law)},
          {"points", pts},
          {"fit",
           {{"grid", r.fit.grid},
            {"log_errors", r.fit.log_errors},
            {"fitted_exponent", r.fit.fitted_exponent},
            {"fitted_prefactor", r.fit.fitted_prefactor},
            {"r_squared", r.fit.r_squared}}},
          {"local_slopes", r.local_slopes},
          {"monotone", r.monotone},
          {"offending_index", r.offending_index},
          {"super_polynomial", r.super_polynomial},
          {"fit_ok", r.fit_ok},
          {"passed", r.passed()}};
}

RgStepReport rg_step_comparison(const FlowParams& p, const Interaction& v, const RgStepOptions& o) {
  const OneSite m(p, v);
  RgStepReport r;
  r.v0 = p.v0;
  r.lambda = p.lambda_n;
  r.mu = p.mu_n;
  r.no_cutoffs = o.no_cutoffs;
  r.perturbative_scale = p.v0;
  const double inf = std::numeric_limits<double>::infinity();
  long evals = 0;

  TensorOptions g;
  g.u1_reduce = true;
  g.order = 32;
  const IntegralEstimate norm =
      integrate_polar_tensor([&](const Vec& z) { return cplx(std::exp(-m.wv * std::norm(z[0]))); }, {RadialRange{}}, g);
  r.normalization = norm.value.real();

  // Full: theta over C, psi over Int(n) (or C).
  const Range psi_range = o.no_cutoffs ? Range{0.0, inf} : Range{0.0, p.c0 * p.kappa_n};
  auto weight = [&](double psi) { return -m.action(psi).real(); };
  Range psi_full = psi_range;
  if (!std::isfinite(psi_full.hi)) {
    // exp(-A) with A ~ c |psi|^2 at lambda = 0: cut where A exceeds 100.
    double hi = 1.0;
    while (std::real(m.action(hi)) < 100.0 && hi < 1e6) hi *= 1.5;
    psi_full.hi = hi;
  }
  const Estimate full = theta_psi_integral(m, weight, psi_full, {}, {0.0, inf}, o.budget, false, evals);
  r.full = std::exp(full.log_value) / r.normalization;
  r.full_error = full.rel_error * std::abs(r.full);

  // Three-step approximation: theta restricted to the checked interior, stationary
  // phase at each theta, fluctuation integral over S_Bot.
  const double sbot = o.no_cutoffs ? 8.0 : p.r_n;
  CriticalOptions copts;
  copts.check_domain = !o.no_cutoffs;
  double theta_hi = checked_interior_radius(p);
  if (o.no_cutoffs) {
    // cut where the critical exponent exceeds 100
    auto exponent_at = [&](double t) {
      Field th(m.ops.coarse());
      th[0] = t;
      const CriticalFields cf = solve_critical_fields(th.conj(), th, m.ops, v, copts);
      return effective_exponent(th.conj(), th, cf.psi_star_n, cf.psi_n, m.ops, v).real();
    };
    theta_hi = 1.0;
    while (exponent_at(theta_hi) < 100.0 && theta_hi < 1e6) theta_hi *= 1.5;
  }
  const int theta_panels = std::max(4, static_cast<int>(std::ceil(std::log2(std::max(theta_hi * theta_hi, 1.0)))) + 2);
  auto approx_at = [&](int order) {
    const GaussRule rt = o.no_cutoffs ? graded_rule(0.0, theta_hi * theta_hi, theta_panels, order)
                                      : composite_rule(0.0, theta_hi * theta_hi, 4, order);
    std::vector<cplx> t(rt.x.size());
    for (size_t i = 0; i < rt.x.size(); ++i) {
      Field th(m.ops.coarse());
      th[0] = std::sqrt(rt.x[i]);
      const StationaryPhase sp = stationary_phase_eval(th.conj(), th, m.ops, v, sbot, o.quad, {}, copts);
      t[i] = rt.w[i] * sp.det_C * std::exp(sp.cC) * sp.cF;
    }
    return pairwise_sum(t);
  };
  const int order = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(o.budget) / (o.no_cutoffs ? 2000.0 : 400.0))));
  const cplx a1 = approx_at(order);
  const cplx a2 = approx_at(std::max(4, (2 * order) / 3));
  r.approx = a1 / r.normalization;
  r.approx_error = std::abs(a1 - a2) / r.normalization;
  r.relative_difference = std::abs(r.full - r.approx) / std::abs(r.full);
  r.quadrature_error = (r.full_error + r.approx_error) / std::abs(r.full) + norm.abs_error / r.normalization;
  return r;
}

nlohmann::json rg_step_to_json(const RgStepReport& r) {
  auto c = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
  return {{"v0", r.v0},
          {"lambda", r.lambda},
          {"mu", r.mu},
          {"no_cutoffs", r.no_cutoffs},
          {"normalization", r.normalization},
          {"full", c(r.full)},
          {"full_error", r.full_error},
          {"approx", c(r.approx)},
          {"approx_error", r.approx_error},
          {"relative_difference", r.relative_difference},
          {"quadrature_error", r.quadrature_error},
          {"perturbative_scale", r.perturbative_scale}};
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace bsrg
