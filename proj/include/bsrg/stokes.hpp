#pragma once

#include "bsrg/action.hpp"
#include "bsrg/quadrature.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bsrg {

// Fluctuations restricted to m <= 2 active unit sites: dpsi = P D zeta with
// C_red(t)^{-1} = P^T C(t)^{-1} P = t P^T C(1)^{-1} P + (1 - t) 1.
struct ReducedModel {
  std::vector<int> active;
  Mat P;
  Mat C_inv1;
  Vec rho;  // P^T rho_n

  int m() const { return static_cast<int>(active.size()); }
  Mat C_inverse(double t) const;
};
ReducedModel reduce_to_sites(const OperatorSet& ops, const Field& rho, const std::vector<int>& active);

// I'_t: zeta_* = G(t) conj(zeta) - t h(t), with t-derivatives for the wall.
struct SliceGeometry {
  double t = 0.0;
  Mat D, D_dot, G, G_dot;
  Vec h, h_dot;
};
SliceGeometry slice_geometry(const ReducedModel& model, double t, SqrtBranch branch = SqrtBranch::Principal);

using HoloFn = std::function<cplx(const Vec& zeta_star, const Vec& zeta)>;

// exp(-(E(psi_*n + P D(1)^T zeta_*, psi_n + P D(1) zeta) - E(critical))).
HoloFn fluctuation_integrand(const Field& theta_star, const Field& theta, const CriticalFields& cf,
                             const ReducedModel& model, const OperatorSet& ops, const Interaction& v,
                             const Perturbation& pert = {});
// exp(-<zeta_*, zeta>), the lambda = mu = 0 form of the above.
HoloFn gaussian_integrand();

struct StokesQuadrature {
  int panels = 4;
  int order = 12;
  int n_angle = 24;
  int t_order = 12;
};

// int over I'_t with |zeta| < radius, and over the same slice with r_in <= |zeta| < radius.
IntegralEstimate integrate_slice_ball(const HoloFn& f, const SliceGeometry& g, double radius,
                                      const StokesQuadrature& q = {}, double r_in = 0.0);
// Wall [0,1] x {|zeta| = radius} of the cylinder, oriented so that
// top = bottom + wall.
IntegralEstimate integrate_cylinder_wall(const HoloFn& f, const ReducedModel& model, double radius,
                                         const StokesQuadrature& q = {}, SqrtBranch branch = SqrtBranch::Principal);

struct StokesReport {
  double radius = 0.0;
  double sbot_radius = 0.0;
  cplx top = 0.0;     // I'_1 within the cylinder
  cplx bottom = 0.0;  // real slice within the cylinder
  cplx wall = 0.0;
  cplx sbot = 0.0;    // real slice, |zeta| < r_n
  cplx cap = 0.0;     // real slice, r_n <= |zeta| < radius
  double quad_error = 0.0;
  double mismatch = 0.0;  // |top - bottom - wall| / |top|
  double tolerance = 0.0;
  bool inconclusive = false;
  bool passed = false;
  bool broken_branch = false;
};
struct StokesOptions {
  double radius = 0.0;       // 0: c0^{1/4} kappa'(n)
  double sbot_radius = 0.0;  // 0: r_n
  double tolerance = 1e-6;
  SqrtBranch top_branch = SqrtBranch::Principal;  // FlipSmallest: negative control
  StokesQuadrature quad;
};
StokesReport stokes_identity_check(const HoloFn& f, const ReducedModel& model, const FlowParams& params,
                                   const StokesOptions& opts);
nlohmann::json stokes_to_json(const StokesReport& r);

// wall_positivity on random points of the sphere |zeta| = c0^{1/4} kappa'(n) at each t.
struct WallScanRow {
  double t = 0.0;
  int samples = 0;
  int violations = 0;
  double constant = 0.0;
  double min_slack = 0.0;  // min of Re <zeta_*, zeta> - bound
};
std::vector<WallScanRow> wall_positivity_scan(const OperatorSet& ops, const Field& rho, const std::vector<double>& ts,
                                              int samples, std::uint64_t seed);

// Integral of the 2-form f dzeta_* ^ dzeta over the boundary sphere of a
// 3-real-dimensional ball c + r span(e1, e2, e3) in C^2, together with the
// integral of its magnitude for scale.
struct HolomorphyResidual {
  cplx flux = 0.0;
  double scale = 0.0;
  double relative() const { return scale > 0.0 ? std::abs(flux) / scale : 0.0; }
};
HolomorphyResidual holomorphy_residual(const HoloFn& f, const Vec& center, const Vec& e1, const Vec& e2,
                                       const Vec& e3, double r, int n = 32);

// Stationary-phase factors at fixed theta: det C(1), cC = -(exponent at the
// critical point) and cF = int over S_Bot of exp(-<zeta_*, zeta> - remainder).
struct StationaryPhase {
  cplx det_C = 0.0;
  cplx cC = 0.0;
  cplx cF = 0.0;
  double cF_error = 0.0;
  CriticalFields critical;
};
StationaryPhase stationary_phase_eval(const Field& theta_star, const Field& theta, const OperatorSet& ops,
                                      const Interaction& v, double sbot_radius, const StokesQuadrature& q = {},
                                      const Perturbation& pert = {}, const CriticalOptions& copts = {});

}  // namespace bsrg
