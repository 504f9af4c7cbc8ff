#include "doctest.h"

#include "bsrg/action.hpp"
#include "bsrg/background.hpp"
#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <Eigen/LU>

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
  Desk(const FlowParams& params, std::vector<int> ext = {4, 4})
      : p(params), d(desk_lattices(1, ext, params.L, params.n)), ops(p, d.unit, d.fine, d.coarse) {}
};

FlowParams law_params(double v0 = 1e-3, double mu_frac = 0.0) {
  CouplingLaw law;
  law.mu_frac = mu_frac;
  return law.at(v0);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("background at zero and in the linear case") {
  const Desk k(law_params());
  const Interaction v = Interaction::local(k.p.lambda_n);
  const Field zero(k.d.unit);
  const BackgroundSolution z = solve_background(zero, zero, k.ops, v);
  CHECK(sup_norm(z.phi) == 0.0);
  CHECK(sup_norm(z.phi_star) == 0.0);

  // lambda = mu = 0: phi = (D_n + Q_n* fQ_n Q_n)^{-1} Q_n* fQ_n psi by a direct dense solve.
  const Field psi = random_field(k.d.unit, 1);
  const BackgroundSolution lin = solve_background(psi.conj(), psi, k.ops, Interaction::local(0.0));
  const double an = k.p.a_n;
  const Mat Qn = k.ops.Qn().matrix();
  const Mat W = (Qn.transpose() * (1.0 / k.d.fine.cell_volume())).eval();  // Q_n* for unit-volume unit lattice
  const Mat K = k.ops.Dn().matrix() + an * W * Qn;
  const Vec phi = K.partialPivLu().solve(an * W * psi.values());
  CHECK((lin.phi.values() - phi).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("background residual and Euler identity") {
  const Desk k(law_params());
  const Interaction v = Interaction::local(0.05);
  const Field psi = random_field(k.d.unit, 2, 0.8);
  const Field psi_star = psi.conj() + random_field(k.d.unit, 3, 0.05);
  const BackgroundSolution bg = solve_background(psi_star, psi, k.ops, v);
  const BackgroundResidual r = background_residual(psi_star, psi, bg.phi_star, bg.phi, k.ops, v);
  CHECK(r.sup() < 1e-10);
  CHECK(bg.residual < 1e-10);

  for (std::uint64_t s = 0; s < 5; ++s) {
    const Field a = random_field(k.d.fine, 10 + s);
    const Field b = random_field(k.d.fine, 20 + s);
    const cplx lhs = pairing(a, eval_V_prime(b, a, b, v));
    const cplx rhs = 2.0 * eval_V(a, b, v);
    CHECK(std::abs(lhs - rhs) <= 1e-14 * std::abs(rhs) * 10);
  }
}

TEST_CASE("Newton converges quadratically") {
  const Desk k(law_params());
  const Interaction v = Interaction::local(0.2);
  const Field psi = random_field(k.d.unit, 4, 1.5);
  NewtonOptions o;
  o.tol = 1e-14;
  const BackgroundSolution bg = solve_background(psi.conj(), psi, k.ops, v, o);
  const auto& h = bg.residual_history;
  REQUIRE(h.size() >= 4);
  // e_{k+1} ~ C e_k^2: the log-ratio roughly doubles once in the asymptotic regime.
  const size_t m = h.size() - 2;
  CHECK(std::log(h[m]) / std::log(h[m - 1]) > 1.5);

  NewtonOptions one;
  one.max_iter = 1;
  one.tol = 1e-16;
  CHECK_THROWS_AS(solve_background(psi.conj(), psi, k.ops, v, one), DivergenceError);
}

TEST_CASE("degree expansion scaling") {
  const Desk k(law_params());
  const Interaction v = Interaction::local(0.3);
  const Field psi = random_field(k.d.unit, 5, 1.0);
  NewtonOptions o;
  o.tol = 1e-14;

  {
    const Interaction v0 = Interaction::local(0.0);
    const BackgroundSolution bg = solve_background(psi.conj(), psi, k.ops, v0, o);
    const DegreeParts dp = degree_expansion(psi.conj(), psi, k.ops, v0, bg);
    CHECK(sup_norm(dp.phi3) < 1e-13);
  }

  std::vector<double> ts, n1, n3, n5;
  for (double t : {0.1, 0.07, 0.05, 0.035, 0.025, 0.018, 0.013, 0.01}) {
    const Field tp = cplx(t) * psi;
    const BackgroundSolution bg = solve_background(tp.conj(), tp, k.ops, v, o);
    const DegreeParts dp = degree_expansion(tp.conj(), tp, k.ops, v, bg);
    ts.push_back(t);
    n1.push_back(sup_norm(bg.phi));
    n3.push_back(sup_norm(dp.phi3));
    n5.push_back(sup_norm(dp.phi5));
  }
  CHECK(slope(ts, n1) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(slope(ts, n3) == doctest::Approx(3.0).epsilon(0.01 / 3));
  CHECK(slope(ts, n5) == doctest::Approx(5.0).epsilon(0.05 / 5));
}

TEST_CASE("critical fields") {
  const Desk k(law_params());
  const Interaction v = Interaction::local(k.p.lambda_n);
  const Field zero(k.d.coarse);
  const CriticalFields z = solve_critical_fields(zero, zero, k.ops, v);
  CHECK(sup_norm(z.psi_n) < 1e-14);
  CHECK(sup_norm(z.rho_n) < 1e-14);

  // lambda = mu = 0: (a/L^2 Q*Q + Delta) psi = a/L^2 Q* theta, and the transposed system for psi_*.
  Field theta = random_field(k.d.coarse, 6, 0.3);
  const CriticalFields lin = solve_critical_fields(theta.conj(), theta, k.ops, Interaction::local(0.0));
  const double c = k.p.a / (k.p.L * k.p.L);
  const Mat Qadj = k.ops.Q().adjoint().matrix();
  const Mat Cinv = k.ops.C_inverse(1.0).matrix();
  const Vec psi = Cinv.partialPivLu().solve(c * Qadj * theta.values());
  const Vec psi_star = Mat(Cinv.transpose()).partialPivLu().solve(c * Qadj * theta.conj().values());
  CHECK((lin.psi_n.values() - psi).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((lin.psi_star_n.values() - psi_star).cwiseAbs().maxCoeff() < 1e-10);
  const CriticalFields closed = linear_critical_fields(theta.conj(), theta, k.ops);
  CHECK(sup_norm(closed.psi_n - lin.psi_n) < 1e-10);

  // Generic theta in the checked interior.
  for (std::uint64_t s = 0; s < 10; ++s) {
    Field th = random_field(k.d.coarse, 30 + s, 1.0);
    th *= 0.9 * k.p.c0 * k.p.kappa_next() / std::pow(k.p.L, 1.5) / sup_norm(th);
    if (!in_checkInt(th, k.p)) continue;
    const CriticalFields cf = solve_critical_fields(th.conj(), th, k.ops, v);
    CHECK(cf.converged);
    CHECK(sup_norm(cf.rho_n - (cf.psi_star_n.conj() - cf.psi_n)) == 0.0);
    CHECK(sup_norm(cf.rho_n) <= std::sqrt(k.p.c0) * k.p.kappa_prime_n);
    const BackgroundSolution bg = solve_background(cf.psi_star_n, cf.psi_n, k.ops, v);
    const CriticalGradient g = critical_gradient(th.conj(), th, cf.psi_star_n, cf.psi_n, bg, k.ops);
    CHECK(std::max(sup_norm(g.star), sup_norm(g.plain)) < 1e-9);
  }
}

TEST_CASE("reality defect vanishes with the time drift") {
  std::vector<double> drifts, defects;
  for (double drift : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    FlowParams p = law_params();
    p.drift = drift;
    const Desk k(p, {8, 4});
    const Interaction v = Interaction::local(p.lambda_n);
    const Field th = random_field(k.d.coarse, 7, 0.5);
    const CriticalFields cf = solve_critical_fields(th.conj(), th, k.ops, v);
    drifts.push_back(drift);
    defects.push_back(sup_norm(cf.rho_n));
  }
  CHECK(defects.front() > 1e-6);
  CHECK(slope(drifts, defects) == doctest::Approx(1.0).epsilon(0.1));
  FlowParams p = law_params();
  p.drift = 0.0;
  const Desk k(p, {8, 4});
  const Field th = random_field(k.d.coarse, 7, 0.5);
  const CriticalFields cf = solve_critical_fields(th.conj(), th, k.ops, Interaction::local(p.lambda_n));
  CHECK(sup_norm(cf.rho_n) < 1e-10);
}

TEST_CASE("critical iterate leaving An(n)") {
  const Desk k(law_params());
  Field th = Field::constant(k.d.coarse, 40.0 * k.p.kappa_n);
  CHECK_THROWS_AS(solve_critical_fields(th.conj(), th, k.ops, Interaction::local(k.p.lambda_n)), DomainEscapeError);
}
