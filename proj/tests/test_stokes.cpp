#include "doctest.h"

#include "bsrg/errors.hpp"
#include "bsrg/experiments.hpp"
#include "bsrg/stokes.hpp"

#include <cmath>

using namespace bsrg;

namespace {

FlowParams unit_params() {
  FlowParams p;
  p.n = 0;
  return p;
}

struct Model {
  FlowParams p = unit_params();
  OperatorSet ops = active_site_model(p);
  Field theta = active_site_theta(ops.coarse(), 1.0);
};

StokesReport run(const Model& k, const Interaction& v, std::vector<int> active, double tol,
                 SqrtBranch branch = SqrtBranch::Principal, int order = 12) {
  const CriticalFields cf = solve_critical_fields(k.theta.conj(), k.theta, k.ops, v);
  const ReducedModel model = reduce_to_sites(k.ops, cf.rho_n, active);
  StokesOptions o;
  o.radius = 1.5;
  o.tolerance = tol;
  o.top_branch = branch;
  o.quad.panels = 2;
  o.quad.order = order;
  o.quad.n_angle = 16 * order / 12;
  o.quad.t_order = order;
  return stokes_identity_check(fluctuation_integrand(k.theta.conj(), k.theta, cf, model, k.ops, v), model, k.p, o);
}

}  // namespace

TEST_CASE("holomorphic forms have no flux through small spheres") {
  const HoloFn f = [](const Vec& zs, const Vec& z) {
    const cplx w = zs[0] * z[0];
    return std::exp(-w - 0.1 * w * w);
  };
  Vec c(2), e1(2), e2(2), e3(2);
  c << cplx(0.2, 0.1), cplx(-0.1, 0.3);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  e3 << cplx(0.0, std::sqrt(0.5)), cplx(0.0, std::sqrt(0.5));
  const HolomorphyResidual h = holomorphy_residual(f, c, e1, e2, e3, 0.3);
  CHECK(h.scale > 0.0);
  CHECK(h.relative() < 1e-12);

  const HoloFn bad = [](const Vec& zs, const Vec& z) { return std::conj(zs[0]) * z[0]; };
  CHECK(holomorphy_residual(bad, c, e1, e2, e3, 0.3).relative() > 1e-3);
  CHECK_THROWS_AS(holomorphy_residual(f, Vec(3), e1, e2, e3, 0.3), ShapeError);
}

TEST_CASE("slice geometry") {
  const Model k;
  const Field rho(k.ops.unit());
  const ReducedModel m = reduce_to_sites(k.ops, rho, {0, 2});
  CHECK(m.m() == 2);
  const SliceGeometry g0 = slice_geometry(m, 0.0);
  CHECK((g0.G - Mat::Identity(2, 2)).norm() < 1e-14);
  CHECK(g0.h.norm() == 0.0);

  const double t = 0.4, e = 1e-6;
  const SliceGeometry g = slice_geometry(m, t);
  CHECK((g.D * g.D - m.C_inverse(t).inverse()).norm() < 1e-12);
  const Mat dd = (slice_geometry(m, t + e).D - slice_geometry(m, t - e).D) / (2 * e);
  CHECK((dd - g.D_dot).norm() < 1e-7);
  const Mat dg = (slice_geometry(m, t + e).G - slice_geometry(m, t - e).G) / (2 * e);
  CHECK((dg - g.G_dot).norm() < 1e-7);

  CHECK_THROWS_AS(reduce_to_sites(k.ops, rho, {0, 1, 2}), UsageError);
  CHECK_THROWS_AS(reduce_to_sites(k.ops, rho, {99}), UsageError);
}

TEST_CASE("Stokes identity in the Gaussian case") {
  const Model k;
  for (std::vector<int> active : {std::vector<int>{0}, std::vector<int>{0, 2}}) {
    const StokesReport r = run(k, Interaction::local(0.0), active, 1e-8);
    CHECK(r.mismatch < 1e-8);
    CHECK(r.passed);
  }
}

TEST_CASE("Stokes identity at small coupling") {
  const Model k;
  const Interaction v = Interaction::local(k.p.lambda_n);
  const StokesReport r1 = run(k, v, {0}, 1e-6);
  CHECK(r1.mismatch < 1e-6);
  CHECK(r1.passed);
  CHECK(std::abs(r1.wall) > 0.0);
  CHECK(stokes_to_json(r1).at("passed") == true);

  const StokesReport r2 = run(k, v, {0, 2}, 1e-6);
  CHECK(r2.mismatch < 1e-6);
  CHECK(r2.passed);

  // Non-principal square root on the top slice.
  const StokesReport bad = run(k, v, {0, 2}, 1e-2, SqrtBranch::FlipSmallest, 6);
  CHECK(bad.broken_branch);
  CHECK(bad.mismatch > 1e-2);
  CHECK_FALSE(bad.passed);
}

TEST_CASE("stationary phase factors on one site") {
  FlowParams p = CouplingLaw{}.at(1e-3);
  const OperatorSet ops = one_site_model(p);
  const Field zero(ops.coarse());
  const StationaryPhase z = stationary_phase_eval(zero, zero, ops, Interaction::local(p.lambda_n), p.r_n);
  CHECK(std::abs(z.cC) == 0.0);
  CHECK(sup_norm(z.critical.psi_n) == 0.0);

  // lambda = mu = 0: the disk fraction 1 - exp(-r^2) and cC quadratic in theta.
  p.mu_n = 0.0;
  const OperatorSet g = one_site_model(p);
  Field th(g.coarse());
  th[0] = cplx(0.3, -0.1);
  const StationaryPhase s1 = stationary_phase_eval(th.conj(), th, g, Interaction::local(0.0), p.r_n);
  CHECK(std::abs(s1.cF - (1.0 - std::exp(-p.r_n * p.r_n))) < 1e-12);
  const Field th2 = cplx(2.0) * th;
  const StationaryPhase s2 = stationary_phase_eval(th2.conj(), th2, g, Interaction::local(0.0), p.r_n);
  CHECK(std::abs(s2.cC - 4.0 * s1.cC) < 1e-12 * std::abs(s2.cC));
  CHECK(std::abs(s1.det_C - g.C(1.0).matrix().determinant()) == 0.0);

  CHECK_THROWS_AS(stationary_phase_eval(Field(active_site_model(unit_params()).coarse()),
                                        Field(active_site_model(unit_params()).coarse()),
                                        active_site_model(unit_params()), Interaction::local(0.0), 0.1),
                  UsageError);
}
