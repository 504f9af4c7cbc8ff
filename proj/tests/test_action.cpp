#include "doctest.h"

#include "bsrg/action.hpp"
#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <cmath>
#include <random>

using namespace bsrg;

namespace {

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
  explicit Desk(const FlowParams& params, std::vector<int> ext = {4, 4})
      : p(params), d(desk_lattices(1, ext, params.L, params.n)), ops(p, d.unit, d.fine, d.coarse) {}
};

FlowParams law_params(double v0 = 1e-3, double mu_frac = 0.0) {
  CouplingLaw law;
  law.mu_frac = mu_frac;
  return law.at(v0);
}

}  // namespace

TEST_CASE("interaction values") {
  const Lattice u = make_lattice(1, {4, 2}, 2, 0, Level::Unit);
  const Interaction v = Interaction::local(0.1);
  CHECK(eval_V(Field(u), Field(u), v) == cplx(0.0));
  const Field one = Field::constant(u, 1.0);
  CHECK(std::abs(eval_V(one.conj(), one, v) - 0.4) < 1e-15);

  CHECK(coupling_rn(Interaction::local(0.05)) == 0.05);
  CHECK(coupling_rn(Interaction::nearest_neighbor_smeared(0.05, 2)) == doctest::Approx(0.05).epsilon(1e-14));
  KernelTerm zero{{0, 0}, {0, 0}, {0, 0}, 0.0};
  CHECK(coupling_rn(Interaction::kernel({zero})) == 0.0);
  KernelTerm neg{{1, 0}, {0, 0}, {0, 0}, -0.1};
  CHECK_THROWS_AS(Interaction::kernel({neg}), ValidationError);

  const Lattice f = make_lattice(1, {8, 4}, 2, 1, Level::Fine);
  const Interaction sm = Interaction::nearest_neighbor_smeared(0.07, 2);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Field a = random_field(f, s);
    const Field b = random_field(f, 100 + s);
    for (const Interaction* w : {&v, &sm}) {
      const cplx two_v = 2.0 * eval_V(a, b, *w);
      CHECK(std::abs(pairing(a, eval_V_prime(b, a, b, *w)) - two_v) <= 1e-14 * std::abs(two_v) * 10);
    }
  }
}

TEST_CASE("A_n off-shell and at the background") {
  const Desk k(law_params(1e-3, 0.3));
  const Interaction v = Interaction::local(0.02);
  const Field zu(k.d.unit), zf(k.d.fine);
  CHECK(eval_An(zu, zu, zf, zf, k.ops, v) == cplx(0.0));
  CHECK(eval_An_at_background(zu, zu, k.ops, v) == cplx(0.0));

  const Field psi = random_field(k.d.unit, 1, 0.7);
  const Field psi_star = psi.conj();
  BackgroundSolution bg;
  const cplx a = eval_An_at_background(psi_star, psi, k.ops, v, &bg);
  const cplx reduced = pairing(psi_star, k.ops.fQn()(psi - k.ops.Qn()(bg.phi))) - eval_V(bg.phi_star, bg.phi, v);
  CHECK(std::abs(a - reduced) < 1e-10 * std::max(1.0, std::abs(a)));

  // Stationarity in phi and phi_* at the background.
  const Field eta = random_field(k.d.fine, 2);
  const double e = 1e-5;
  const cplx dphi = (eval_An(psi_star, psi, bg.phi_star, bg.phi + cplx(e) * eta, k.ops, v) -
                     eval_An(psi_star, psi, bg.phi_star, bg.phi - cplx(e) * eta, k.ops, v)) /
                    (2 * e);
  const cplx dphis = (eval_An(psi_star, psi, bg.phi_star + cplx(e) * eta, bg.phi, k.ops, v) -
                      eval_An(psi_star, psi, bg.phi_star - cplx(e) * eta, bg.phi, k.ops, v)) /
                     (2 * e);
  CHECK(std::abs(dphi) < 1e-6);
  CHECK(std::abs(dphis) < 1e-6);
}

TEST_CASE("A_n in the Gaussian case is the Delta form") {
  FlowParams p = law_params();
  p.mu_n = 0.0;
  const Desk k(p);
  const Field psi = random_field(k.d.unit, 3);
  const cplx a = eval_An_at_background(psi.conj(), psi, k.ops, Interaction::local(0.0));
  const Vec x = psi.values();
  const cplx brute = (x.conjugate().transpose() * k.ops.Delta().matrix() * x)(0, 0);
  CHECK(std::abs(a - brute) < 1e-10 * std::abs(brute));
}

TEST_CASE("second representation remainder is quadratic in the coupling") {
  const Desk k(law_params(1e-3, 0.3));
  const Field psi = random_field(k.d.unit, 4, 0.8);
  std::vector<double> lam, rem;
  for (double l : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}) {
    const Interaction v = Interaction::local(l);
    lam.push_back(l);
    rem.push_back(std::abs(eval_An_at_background(psi.conj(), psi, k.ops, v) -
                           An_second_representation(psi.conj(), psi, k.ops, v)));
  }
  const double s = std::log(rem.front() / rem.back()) / std::log(lam.front() / lam.back());
  CHECK(s == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("sandwich bounds on random large fields") {
  const Desk k(law_params(1e-3, 0.5));
  const Interaction v = Interaction::local(k.p.lambda_n);
  const SymbolFit fit = fit_gamma(k.ops);
  CHECK(fit.gamma > 0.0);
  CHECK(fit.gamma_tilde > 8.0 * fit.gamma);

  const BoundsReport z = proposition1_check(Field(k.d.unit), k.ops, v, 0.1, fit);
  CHECK(z.re_An == 0.0);
  CHECK(z.lower == 0.0);
  CHECK(z.upper == 0.0);
  CHECK(z.passed);

  // Gaussian case on plane waves: the symbol sandwich.
  FlowParams g = k.p;
  g.mu_n = 0.0;
  const Desk kg(g);
  for (int m = 0; m < kg.d.unit.sites(); ++m) {
    Field pw = Field::plane_wave(kg.d.unit, momentum(kg.d.unit, m));
    pw *= 0.5;
    CHECK(proposition1_check(pw, kg.ops, Interaction::local(0.0), 0.1, fit).passed);
  }

  const Proposition1Scan scan = proposition1_scan(k.ops, v, 0.1, 100, 11, fit);
  CHECK(scan.violations == 0);
  CHECK(scan.min_margin > 0.0);

  Field far = Field::constant(k.d.unit, 2.0 * k.p.kappa_n);
  CHECK_THROWS_AS(proposition1_check(far, k.ops, v, 0.1, fit), DomainError);
}

TEST_CASE("effective exponent") {
  const Desk k(law_params(1e-3, 0.5));
  const Interaction v = Interaction::local(k.p.lambda_n);
  const Field zc(k.d.coarse), zu(k.d.unit);
  CHECK(std::abs(effective_exponent(zc, zc, zu, zu, k.ops, v)) == 0.0);

  // Constant field at the bottom of the well: the integrand exceeds one.
  const double r = std::sqrt(k.p.mu_n / k.p.lambda_n);
  REQUIRE(r < k.p.kappa_n);
  const Field well = Field::constant(k.d.unit, r);
  const Field th = k.ops.Q()(well);
  CHECK(effective_exponent(th.conj(), th, well.conj(), well, k.ops, v).real() < 0.0);

  // One site at the field radius, smaller coupling.
  const Desk s(law_params(1e-4, 0.5));
  Field spike(s.d.unit);
  spike[0] = s.p.kappa_n * (1.0 - 1e-9);
  const Field ts = s.ops.Q()(spike);
  const double re =
      effective_exponent(ts.conj(), ts, spike.conj(), spike, s.ops, Interaction::local(s.p.lambda_n)).real();
  const double delta = 0.1;
  const double kap = s.p.kappa_n;
  const double bound = 0.5 * (1.0 - delta) * s.p.lambda_n * std::pow(kap, 4) - (1.0 + delta) * s.p.mu_n * kap * kap;
  CHECK(bound > 0.0);
  CHECK(re >= bound);

  Perturbation big;
  big.R = [](const Field&, const Field&) { return cplx(10.0); };
  big.budget = 1.0;
  CHECK_THROWS_AS(effective_exponent(zc, zc, zu, zu, k.ops, v, big), DomainError);
}

TEST_CASE("fluctuation expansion") {
  FlowParams p = law_params();
  const Desk k(p);
  const Interaction v = Interaction::local(0.05);
  const Field th = random_field(k.d.coarse, 5, 0.5);
  const CriticalFields cf = solve_critical_fields(th.conj(), th, k.ops, v);
  const Field zu(k.d.unit);
  const FluctuationSplit z = fluctuation_expansion(th.conj(), th, cf, zu, zu, k.ops, v);
  CHECK(std::abs(z.quadratic) == 0.0);
  CHECK(std::abs(z.remainder) < 1e-12);

  // At theta = 0, mu = 0 the critical point is 0 and C^{-1} is the exact Hessian.
  const Field d = random_field(k.d.unit, 6);
  const Field zc(k.d.coarse);
  const CriticalFields cz = solve_critical_fields(zc, zc, k.ops, v);
  std::vector<double> s, rem;
  for (double e : {0.2, 0.1, 0.05, 0.025}) {
    const Field de = cplx(e) * d;
    const FluctuationSplit f = fluctuation_expansion(zc, zc, cz, de.conj(), de, k.ops, v);
    s.push_back(e);
    rem.push_back(std::abs(f.remainder));
  }
  CHECK(std::log(rem[2] / rem[3]) / std::log(2.0) >= 2.9);

  const CriticalFields c0 = solve_critical_fields(th.conj(), th, k.ops, Interaction::local(0.0));
  const FluctuationSplit g = fluctuation_expansion(th.conj(), th, c0, d.conj(), d, k.ops, Interaction::local(0.0));
  CHECK(std::abs(g.remainder) < 1e-10 * std::max(1.0, std::abs(g.quadratic)));
}
