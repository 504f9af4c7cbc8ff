// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "bsrg/action.hpp"
#include "bsrg/background.hpp"
#include "bsrg/domains.hpp"
#include "bsrg/experiments.hpp"
#include "bsrg/stokes.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace bsrg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Field random_field(const Lattice& lat, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Field f(lat);
  for (int i = 0; i < lat.sites(); ++i) f[i] = scale * cplx(g(rng), g(rng));
  return f;
}

struct Desk {
  FlowParams p;
  DeskLattices d;
  OperatorSet ops;
  Desk(const FlowParams& params, std::vector<int> ext)
      : p(params), d(desk_lattices(1, ext, params.L, params.n)), ops(p, d.unit, d.fine, d.coarse) {}
};

FlowParams law_params(double v0, double mu_frac = 0.0) {
  CouplingLaw law;
  law.mu_frac = mu_frac;
  return law.at(v0);
}

double op_norm(const Mat& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / x.size();
    my += std::log(y[i]) / y.size();
  }
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s:%s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.str().c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

void operator_suite(Outcome& o) {
  const auto t0 = Clock::now();
  const Desk k(law_params(1e-3), {8, 4});
  const OperatorSet& ops = k.ops;
  const int N = ops.unit().sites();

  const double q_dev = sup_norm(ops.Qn()(Field::constant(ops.fine(), 1.0)) - Field::constant(ops.unit(), 1.0));
  o.require(q_dev == 0.0, "Q_n constants");

  double resolvent = 0.0;
  const Mat S0 = ops.Sn(0.0).matrix();
  for (cplx mu : {cplx(0.05), cplx(-0.1, 0.03), cplx(0.02, -0.04)}) {
    const Mat S = ops.Sn(mu).matrix();
    resolvent = std::max(resolvent, op_norm(S - S0 - mu * S0 * S));
  }
  o.require(resolvent < 1e-10, "resolvent identity");

  double sqrt_res = 0.0, herm_min = 1e300;
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    const Mat C = ops.C(t).matrix();
    const Mat D = principal_sqrt(C);
    sqrt_res = std::max(sqrt_res, (D * D - C).norm() / C.norm());
    herm_min = std::min(herm_min, min_hermitian_eigenvalue(ops.C_inverse(t).matrix()));
  }
  o.require(sqrt_res < 1e-10, "D D = C");
  o.require(herm_min > 0.0, "Herm C(t)^{-1} > 0");
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime");
  o.detail << " unit sites " << N << ", |Q_n 1 - 1| " << q_dev << ", resolvent " << resolvent << ", |DD-C|/|C| "
           << sqrt_res << ", min eig Herm C(t)^-1 " << herm_min;
}

void symbol_suite(Outcome& o) {
  const Desk k(law_params(1e-3), {8, 4});
  const SymbolFit fit = fit_gamma(k.ops);
  o.require(fit.gamma > 0.0 && std::isfinite(fit.gamma_tilde), "fitted gamma");
  o.require(fit.zero_mode < 1e-12 && fit.min_re_nonzero > 0.0, "Re symbol zero only at k = 0");
  int sandwich_fail = 0;
  const LinOp& Dl = k.ops.Delta();
  for (int m = 1; m < k.d.unit.sites(); ++m) {
    const std::vector<double> q = momentum(k.d.unit, m);
    const double re = symbol(Dl, q).real();
    const double k2 = lattice_k2(k.d.unit, q);
    if (!(8.0 * fit.gamma * k2 <= re * (1 + 1e-12) && re <= 0.5 * fit.gamma_tilde * k2 * (1 + 1e-12))) ++sandwich_fail;
  }
  o.require(sandwich_fail == 0, "sandwich over the zone");

  // Small-k structure on a time-long lattice.
  const Desk l(law_params(1e-3), {32, 4});
  auto S = [&](double a, double b) { return symbol(l.ops.Delta(), {a, b}); };
  const double h = 1e-3;
  const cplx d0 = (S(h, 0.0) - S(-h, 0.0)) / (2 * h);
  const double c00 = (S(h, 0.0) + S(-h, 0.0) - 2.0 * S(0.0, 0.0)).real() / (2 * h * h);
  const double H = (S(0.0, h) + S(0.0, -h) - 2.0 * S(0.0, 0.0)).real() / (h * h);
  auto rem = [&](double s) {
    const double k0 = 0.5 * s * s, k1 = s;
    return std::abs(S(k0, k1) - cplx(c00 * k0 * k0 + 0.5 * H * k1 * k1, -k0));
  };
  const double slope = std::log(rem(0.2) / rem(0.1)) / std::log(2.0);
  o.require(std::abs(d0.imag() + 1.0) < 1e-3, "-i k0 term");
  o.require(H > 0.0, "positive spatial quadratic form");
  o.require(slope >= 3.0, "cubic remainder");
  o.detail << " gamma " << fit.gamma << ", gamma~ " << fit.gamma_tilde << ", Im dS/dk0 " << d0.imag()
           << ", remainder slope " << slope;
}

void background_suite(Outcome& o) {
  const Desk k(law_params(1e-3), {4, 4});
  NewtonOptions nt;
  nt.tol = 1e-14;

  const Interaction v = Interaction::local(0.05);
  const Field psi = random_field(k.d.unit, 2, 0.8);
  const Field psi_star = psi.conj() + random_field(k.d.unit, 3, 0.05);
  const BackgroundSolution bg = solve_background(psi_star, psi, k.ops, v);
  const double residual = background_residual(psi_star, psi, bg.phi_star, bg.phi, k.ops, v).sup();
  o.require(residual < 1e-10, "background residual");

  double euler = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Field a = random_field(k.d.fine, 10 + s);
    const Field b = random_field(k.d.fine, 40 + s);
    const cplx rhs = 2.0 * eval_V(a, b, v);
    euler = std::max(euler, std::abs(pairing(a, eval_V_prime(b, a, b, v)) - rhs) / std::abs(rhs));
  }
  o.require(euler < 1e-14, "Euler identity");

  const Interaction vs = Interaction::local(0.3);
  const Field base = random_field(k.d.unit, 5, 1.0);
  std::vector<double> ts, n1, n3, n5;
  for (double t : {0.1, 0.07, 0.05, 0.035, 0.025, 0.018, 0.013, 0.01}) {
    const Field tp = cplx(t) * base;
    const BackgroundSolution b = solve_background(tp.conj(), tp, k.ops, vs, nt);
    const DegreeParts dp = degree_expansion(tp.conj(), tp, k.ops, vs, b);
    ts.push_back(t);
    n1.push_back(sup_norm(b.phi));
    n3.push_back(sup_norm(dp.phi3));
    n5.push_back(sup_norm(dp.phi5));
  }
  const double s1 = loglog_slope(ts, n1), s3 = loglog_slope(ts, n3), s5 = loglog_slope(ts, n5);
  o.require(std::abs(s1 - 1.0) <= 0.05 && std::abs(s3 - 3.0) <= 0.05 && std::abs(s5 - 5.0) <= 0.05, "degree slopes");

  // Two coarse time sites, so the reality defect is not identically zero.
  const Desk r(law_params(1e-3), {8, 4});
  const Interaction vl = Interaction::local(r.p.lambda_n);
  const double bound = std::sqrt(r.p.c0) * r.p.kappa_prime_n;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u01(0.05, 0.99);
  int accepted = 0, over = 0;
  double max_rho = 0.0;
  for (std::uint64_t s = 0; accepted < 100 && s < 10000; ++s) {
    Field th = random_field(r.d.coarse, 1000 + s);
    th *= u01(rng) * r.p.c0 * r.p.kappa_next() / std::pow(r.p.L, 1.5) / sup_norm(th);
    if (!in_checkInt(th, r.p)) continue;
    ++accepted;
    const CriticalFields cf = solve_critical_fields(th.conj(), th, r.ops, vl);
    max_rho = std::max(max_rho, sup_norm(cf.rho_n));
    if (!(sup_norm(cf.rho_n) <= bound)) ++over;
  }
  o.require(accepted == 100, "100 theta samples in checkInt");
  o.require(over == 0, "|rho_n| bound");
  o.detail << " residual " << residual << ", Euler " << euler << ", slopes " << s1 << "/" << s3 << "/" << s5
           << ", max |rho_n| " << max_rho << " <= " << bound;
}

void proposition1(Outcome& o) {
  const auto t0 = Clock::now();
  for (double v0 : {1e-3, 1e-4}) {
    const Desk k(law_params(v0, 0.5), {4, 4});
    const SymbolFit fit = fit_gamma(k.ops);
    const Proposition1Scan scan =
        proposition1_scan(k.ops, Interaction::local(k.p.lambda_n), 0.1, 1000, 2024, fit);
    o.require(scan.violations == 0, "violations at v0 " + std::to_string(v0));
    o.require(static_cast<int>(scan.rows.size()) == 1000, "sample count");
    o.detail << " v0 " << v0 << ": " << scan.rows.size() << " samples, " << scan.violations
             << " violations, min margin " << scan.min_margin << ";";
  }
  o.require(seconds_since(t0) < 300.0, "runtime");
}

void step1_inclusion(Outcome& o) {
  const FlowParams p = law_params(1e-3);
  const DeskLattices d = desk_lattices(1, {4, 4}, p.L, p.n);
  const InclusionReport r = step1_inclusion_check(p, d.unit, d.coarse, p.lambda_n, 10000, 5);
  o.require(r.accepted == 10000, "10^4 accepted pairs");
  o.require(r.violations == 0, "memberships in Int(n,c)");
  o.require(r.min_slack > 0.0, "positive slack");
  o.detail << " c " << r.c << ", pairs " << r.accepted << " (" << r.value_bullets << " value, " << r.gradient_bullets
           << " gradient), violations " << r.violations << ", min slack " << r.min_slack;
}

void stokes_suite(Outcome& o) {
  FlowParams p;
  p.n = 0;
  const OperatorSet ops = active_site_model(p);
  const Field th = active_site_theta(ops.coarse(), 1.0);
  for (double lam : {0.0, p.lambda_n}) {
    const Interaction v = Interaction::local(lam);
    const CriticalFields cf = solve_critical_fields(th.conj(), th, ops, v);
    for (std::vector<int> active : {std::vector<int>{0}, std::vector<int>{0, 2}}) {
      const ReducedModel model = reduce_to_sites(ops, cf.rho_n, active);
      StokesOptions so;
      so.radius = 1.5;
      so.tolerance = lam == 0.0 ? 1e-8 : 1e-6;
      so.quad.panels = 2;
      so.quad.order = 12;
      so.quad.n_angle = 16;
      so.quad.t_order = 12;
      const StokesReport r =
          stokes_identity_check(fluctuation_integrand(th.conj(), th, cf, model, ops, v), model, p, so);
      o.require(r.passed, "Stokes m=" + std::to_string(model.m()) + " lambda=" + std::to_string(lam));
      o.detail << " lambda " << lam << " m " << model.m() << ": mismatch " << r.mismatch << ";";
    }
  }
  const CriticalFields cf = solve_critical_fields(th.conj(), th, ops, Interaction::local(p.lambda_n));
  int violations = 0;
  double cmin = 1e300;
  for (const WallScanRow& w : wall_positivity_scan(ops, cf.rho_n, {0.0, 0.25, 0.5, 0.75, 1.0}, 1000, 9)) {
    violations += w.violations;
    cmin = std::min(cmin, w.constant);
  }
  o.require(violations == 0 && cmin > 0.0, "wall positivity");
  o.detail << " wall: 5000 samples, " << violations << " violations, min constant " << cmin;
}

void decay(Outcome& o) {
  const auto t0 = Clock::now();
  const std::vector<double> grid = default_coupling_grid();
  for (ExperimentKind kind : all_experiment_kinds()) {
    const ExperimentResult r = error_scaling_experiment(kind, default_experiment_law(kind), grid);
    o.require(r.monotone, to_string(kind) + " monotone");
    o.require(r.super_polynomial, to_string(kind) + " convexity");
    o.require(r.fit.r_squared >= 0.95, to_string(kind) + " r^2");
    o.detail << " " << to_string(kind) << ": log10 ratio " << r.points.front().log_ratio / std::log(10.0) << " -> "
             << r.points.back().log_ratio / std::log(10.0) << ", r^2 " << r.fit.r_squared << ";";
  }
  o.require(seconds_since(t0) < 1800.0, "runtime");
}

void rg_step(Outcome& o) {
  CouplingLaw g = default_experiment_law(ExperimentKind::Step2);
  g.lambda_ratio = 0.0;
  g.mu_frac = -0.25;
  RgStepOptions exact;
  exact.no_cutoffs = true;
  const RgStepReport z = rg_step_comparison(g.at(1e-3), Interaction::local(0.0), exact);
  o.require(z.relative_difference <= std::max(z.quadrature_error, 1e-10), "lambda = 0");

  const double v0 = default_coupling_grid().back();
  const FlowParams p = default_experiment_law(ExperimentKind::Step2).at(v0);
  const RgStepReport r = rg_step_comparison(p, Interaction::local(p.lambda_n));
  o.require(r.relative_difference < v0, "below the v0 scale");
  o.require(r.quadrature_error < 0.1 * v0, "quadrature error");
  o.detail << " lambda=0: diff " << z.relative_difference << " (quad " << z.quadrature_error << "); v0 " << v0
           << ": diff " << r.relative_difference << " (quad " << r.quadrature_error << ")";
}

}  // namespace

int main() {
  criterion(1, "operator suite", operator_suite);
  criterion(2, "symbol suite", symbol_suite);
  criterion(3, "background suite", background_suite);
  criterion(4, "sandwich bounds", proposition1);
  criterion(5, "Step-1 inclusion", step1_inclusion);
  criterion(6, "Stokes suite", stokes_suite);
  criterion(7, "nonperturbative decay", decay);
  criterion(8, "RG step end-to-end", rg_step);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
