#include "bsrg/stokes.hpp"

#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bsrg {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

void require_small(int m, const char* what) {
  if (m < 1 || m > 2) throw UsageError(std::string(what) + ": only 1 or 2 active sites are supported");
}

// Comparison level for the error estimate.
int coarser(int n) { return std::max(2, (2 * n) / 3); }

// Interleaved coordinates (zeta*_1, zeta_1, zeta*_2, zeta_2, ...).
Vec interleave(const Vec& zs, const Vec& z) {
  Vec out(2 * z.size());
  for (int j = 0; j < z.size(); ++j) {
    out[2 * j] = zs[j];
    out[2 * j + 1] = z[j];
  }
  return out;
}

}  // namespace

Mat ReducedModel::C_inverse(double t) const {
  return t * C_inv1 + (1.0 - t) * Mat::Identity(m(), m());
}

ReducedModel reduce_to_sites(const OperatorSet& ops, const Field& rho, const std::vector<int>& active) {
  require_same_lattice(rho.lattice(), ops.unit(), "reduce_to_sites");
  require_small(static_cast<int>(active.size()), "reduce_to_sites");
  const int n = ops.unit().sites();
  ReducedModel r;
  r.active = active;
  r.P = Mat::Zero(n, r.m());
  for (int j = 0; j < r.m(); ++j) {
    if (active[j] < 0 || active[j] >= n) throw UsageError("reduce_to_sites: site index out of range");
    r.P(active[j], j) = 1.0;
  }
  r.C_inv1 = r.P.transpose() * ops.C_inverse(1.0).matrix() * r.P;
  r.rho = r.P.transpose() * rho.values();
  return r;
}

SliceGeometry slice_geometry(const ReducedModel& model, double t, SqrtBranch branch) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("t", "must lie in [0, 1]");
  const Mat cinv = model.C_inverse(t);
  const double lo = min_hermitian_eigenvalue(cinv);
  if (!(lo > 0.0)) throw SpectralError("reduced C(t)^{-1} Hermitian part is not positive", lo);
  const Mat c = checked_inverse(cinv, "reduced C(t)");
  const Mat c_dot = -c * (model.C_inv1 - Mat::Identity(model.m(), model.m())) * c;
  SliceGeometry g;
  g.t = t;
  g.D = principal_sqrt(c, branch);
  g.D_dot = sylvester_symmetric(g.D, c_dot);
  const Mat dt_inv = checked_inverse(g.D.transpose(), "D(t)^T");
  g.G = dt_inv * g.D.conjugate();
  g.G_dot = dt_inv * (g.D_dot.conjugate() - g.D_dot.transpose() * g.G);
  g.h = dt_inv * model.rho.conjugate();
  g.h_dot = -dt_inv * g.D_dot.transpose() * g.h;
  return g;
}

HoloFn fluctuation_integrand(const Field& theta_star, const Field& theta, const CriticalFields& cf,
                             const ReducedModel& model, const OperatorSet& ops, const Interaction& v,
                             const Perturbation& pert) {
  const Mat d1 = slice_geometry(model, 1.0).D;
  const Mat emb = model.P * d1;
  const Mat emb_star = model.P * d1.transpose();
  const cplx base = effective_exponent(theta_star, theta, cf.psi_star_n, cf.psi_n, ops, v, pert);
  return [=, &ops](const Vec& zs, const Vec& z) -> cplx {
    const Field ps(ops.unit(), cf.psi_star_n.values() + emb_star * zs);
    const Field p(ops.unit(), cf.psi_n.values() + emb * z);
    return std::exp(-(effective_exponent(theta_star, theta, ps, p, ops, v, pert) - base));
  };
}

HoloFn gaussian_integrand() {
  return [](const Vec& zs, const Vec& z) -> cplx { return std::exp(-(zs.transpose() * z)(0, 0)); };
}

IntegralEstimate integrate_slice_ball(const HoloFn& f, const SliceGeometry& g, double radius,
                                      const StokesQuadrature& q, double r_in) {
  const int m = static_cast<int>(g.G.rows());
  require_small(m, "integrate_slice_ball");
  if (!(radius > r_in && r_in >= 0.0)) throw ValidationError("radius", "need 0 <= r_in < radius");
  const cplx det_g = g.G.determinant();
  auto run = [&](int order, int n_angle, long& evals) {
    // S = |zeta|^2 in [r_in^2, R^2]; for m = 2, s1 = v S and s2 = (1 - v) S.
    // geometric panels toward the inner radius resolve exp(-|zeta|^2) on large balls
    const double span = radius * radius - r_in * r_in;
    const int panels = std::max(q.panels, static_cast<int>(std::ceil(std::log2(std::max(span, 1.0)))) + 2);
    const GaussRule s = graded_rule(r_in * r_in, radius * radius, panels, order);
    const GaussRule vfrac = composite_rule(0.0, 1.0, 1, order);
    const int nv = m == 1 ? 1 : static_cast<int>(vfrac.x.size());
    const int na2 = m == 1 ? 1 : n_angle;
    const long total = static_cast<long>(s.x.size()) * nv * n_angle * na2;
    std::vector<cplx> terms(total);
    parallel_for(total, [&](long lo, long hi) {
      Vec z(m);
      for (long idx = lo; idx < hi; ++idx) {
        long rest = idx;
        const int a2 = static_cast<int>(rest % na2);
        rest /= na2;
        const int a1 = static_cast<int>(rest % n_angle);
        rest /= n_angle;
        const int iv = static_cast<int>(rest % nv);
        const int is = static_cast<int>(rest / nv);
        const double S = s.x[is];
        double w = s.w[is] / n_angle;
        if (m == 1) {
          z[0] = std::polar(std::sqrt(S), 2.0 * kPi * a1 / n_angle);
        } else {
          const double v = vfrac.x[iv];
          w *= vfrac.w[iv] * S / na2;
          z[0] = std::polar(std::sqrt(v * S), 2.0 * kPi * a1 / n_angle);
          z[1] = std::polar(std::sqrt((1.0 - v) * S), 2.0 * kPi * a2 / na2);
        }
        const Vec zs = g.G * z.conjugate() - g.t * g.h;
        terms[idx] = w * det_g * f(zs, z);
      }
    });
    evals += total;
    return pairwise_sum(terms);
  };
  IntegralEstimate e;
  e.value = run(q.order, q.n_angle, e.evaluations);
  e.abs_error = std::abs(e.value - run(coarser(q.order), coarser(q.n_angle), e.evaluations));
  return e;
}

IntegralEstimate integrate_cylinder_wall(const HoloFn& f, const ReducedModel& model, double radius,
                                         const StokesQuadrature& q, SqrtBranch branch) {
  const int m = model.m();
  require_small(m, "integrate_cylinder_wall");
  if (!(radius > 0.0)) throw ValidationError("radius", "must be positive");
  const double orientation = m == 1 ? 1.0 : -1.0;  // (chi, alpha1, alpha2) is negatively oriented on S^3
  const cplx norm = std::pow(2.0 * kPi * kI, m);

  auto run = [&](int t_order, int order, int n_angle, long& evals) {
    const GaussRule tr = composite_rule(0.0, 1.0, 1, t_order);
    std::vector<SliceGeometry> geo;
    for (double t : tr.x) geo.push_back(slice_geometry(model, t, branch));
    const GaussRule chi = composite_rule(0.0, kPi / 2.0, 1, order);
    const int nchi = m == 1 ? 1 : static_cast<int>(chi.x.size());
    const int na2 = m == 1 ? 1 : n_angle;
    const long total = static_cast<long>(tr.x.size()) * nchi * n_angle * na2;
    std::vector<cplx> terms(total);
    parallel_for(total, [&](long lo, long hi) {
      Vec z(m);
      std::vector<Vec> dz;
      for (long idx = lo; idx < hi; ++idx) {
        long rest = idx;
        const int a2 = static_cast<int>(rest % na2);
        rest /= na2;
        const int a1 = static_cast<int>(rest % n_angle);
        rest /= n_angle;
        const int ic = static_cast<int>(rest % nchi);
        const int it = static_cast<int>(rest / nchi);
        const SliceGeometry& g = geo[it];
        const double al1 = 2.0 * kPi * a1 / n_angle;
        double w = tr.w[it] * 2.0 * kPi / n_angle;
        dz.clear();
        if (m == 1) {
          z[0] = std::polar(radius, al1);
          Vec d(1);
          d[0] = kI * z[0];
          dz.push_back(d);
        } else {
          const double c = chi.x[ic], al2 = 2.0 * kPi * a2 / na2;
          w *= chi.w[ic] * 2.0 * kPi / na2;
          z[0] = std::polar(radius * std::cos(c), al1);
          z[1] = std::polar(radius * std::sin(c), al2);
          Vec dchi(2), d1 = Vec::Zero(2), d2 = Vec::Zero(2);
          dchi[0] = std::polar(-radius * std::sin(c), al1);
          dchi[1] = std::polar(radius * std::cos(c), al2);
          d1[0] = kI * z[0];
          d2[1] = kI * z[1];
          dz = {dchi, d1, d2};
        }
        const Vec zs = g.G * z.conjugate() - g.t * g.h;
        Mat jac(2 * m, 2 * m);
        jac.col(0) = interleave(g.G_dot * z.conjugate() - g.h - g.t * g.h_dot, Vec::Zero(m));
        for (size_t k = 0; k < dz.size(); ++k)
          jac.col(static_cast<int>(k) + 1) = interleave(g.G * dz[k].conjugate(), dz[k]);
        terms[idx] = orientation * w * f(zs, z) * jac.determinant() / norm;
      }
    });
    evals += total;
    return pairwise_sum(terms);
  };
  IntegralEstimate e;
  e.value = run(q.t_order, q.order, q.n_angle, e.evaluations);
  e.abs_error = std::abs(e.value - run(coarser(q.t_order), coarser(q.order),
                                       coarser(q.n_angle), e.evaluations));
  return e;
}

StokesReport stokes_identity_check(const HoloFn& f, const ReducedModel& model, const FlowParams& params,
                                   const StokesOptions& o) {
  StokesReport r;
  r.radius = o.radius > 0.0 ? o.radius : cylinder_radius(params);
  r.sbot_radius = std::min(r.radius, o.sbot_radius > 0.0 ? o.sbot_radius : params.r_n);
  r.tolerance = o.tolerance;
  r.broken_branch = o.top_branch != SqrtBranch::Principal;
  const IntegralEstimate top = integrate_slice_ball(f, slice_geometry(model, 1.0, o.top_branch), r.radius, o.quad);
  const SliceGeometry g0 = slice_geometry(model, 0.0);
  const IntegralEstimate bottom = integrate_slice_ball(f, g0, r.radius, o.quad);
  const IntegralEstimate wall = integrate_cylinder_wall(f, model, r.radius, o.quad);
  r.top = top.value;
  r.bottom = bottom.value;
  r.wall = wall.value;
  if (r.sbot_radius < r.radius) {
    const IntegralEstimate sbot = integrate_slice_ball(f, g0, r.sbot_radius, o.quad);
    r.sbot = sbot.value;
    r.cap = r.bottom - r.sbot;
  } else {
    r.sbot = r.bottom;
  }
  const double scale = std::max(std::abs(r.top), 1e-300);
  r.quad_error = (top.abs_error + bottom.abs_error + wall.abs_error) / scale;
  r.mismatch = std::abs(r.top - r.bottom - r.wall) / scale;
  r.inconclusive = !(r.quad_error <= r.tolerance);
  r.passed = !r.inconclusive && r.mismatch <= r.tolerance;
  return r;
}

nlohmann::json stokes_to_json(const StokesReport& r) {
  auto c = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
  return {{"radius", r.radius},         {"sbot_radius", r.sbot_radius}, {"top", c(r.top)},
          {"bottom", c(r.bottom)},      {"wall", c(r.wall)},            {"sbot", c(r.sbot)},
          {"cap", c(r.cap)},            {"quad_error", r.quad_error},   {"mismatch", r.mismatch},
          {"tolerance", r.tolerance},   {"inconclusive", r.inconclusive}, {"passed", r.passed},
          {"broken_branch", r.broken_branch}};
}

HolomorphyResidual holomorphy_residual(const HoloFn& f, const Vec& c, const Vec& e1, const Vec& e2, const Vec& e3,
                                       double r, int n) {
  if (c.size() != 2 || e1.size() != 2 || e2.size() != 2 || e3.size() != 2)
    throw ShapeError("holomorphy_residual: points live in C^2");
  const GaussRule th = composite_rule(0.0, kPi, 1, n);
  const int nphi = 2 * n;
  HolomorphyResidual out;
  std::vector<cplx> terms;
  for (size_t i = 0; i < th.x.size(); ++i) {
    const double st = std::sin(th.x[i]), ct = std::cos(th.x[i]);
    for (int k = 0; k < nphi; ++k) {
      const double ph = 2.0 * kPi * k / nphi;
      const double sp = std::sin(ph), cp = std::cos(ph);
      const Vec x = c + r * (st * cp * e1 + st * sp * e2 + ct * e3);
      const Vec dth = r * (ct * cp * e1 + ct * sp * e2 - st * e3);
      const Vec dph = r * (-st * sp * e1 + st * cp * e2);
      Vec zs(1), z(1);
      zs[0] = x[0];
      z[0] = x[1];
      const cplx det = dth[0] * dph[1] - dth[1] * dph[0];
      const double w = th.w[i] * 2.0 * kPi / nphi;
      const cplx val = f(zs, z) * det / (2.0 * kPi * kI);
      terms.push_back(w * val);
      out.scale += w * std::abs(val);
    }
  }
  out.flux = pairwise_sum(terms);
  return out;
}

StationaryPhase stationary_phase_eval(const Field& theta_star, const Field& theta, const OperatorSet& ops,
                                      const Interaction& v, double sbot_radius, const StokesQuadrature& q,
                                      const Perturbation& pert, const CriticalOptions& copts) {
  const int n = ops.unit().sites();
  require_small(n, "stationary_phase_eval");
  StationaryPhase sp;
  sp.critical = solve_critical_fields(theta_star, theta, ops, v, copts);
  sp.det_C = ops.C(1.0).matrix().determinant();
  sp.cC = -effective_exponent(theta_star, theta, sp.critical.psi_star_n, sp.critical.psi_n, ops, v, pert);
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  const ReducedModel model = reduce_to_sites(ops, sp.critical.rho_n, all);
  const HoloFn f = fluctuation_integrand(theta_star, theta, sp.critical, model, ops, v, pert);
  const IntegralEstimate e = integrate_slice_ball(f, slice_geometry(model, 0.0), sbot_radius, q);
  sp.cF = e.value;
  sp.cF_error = e.abs_error;
  return sp;
}

std::vector<WallScanRow> wall_positivity_scan(const OperatorSet& ops, const Field& rho, const std::vector<double>& ts,
                                              int samples, std::uint64_t seed) {
  if (samples <= 0) throw UsageError("wall_positivity_scan: samples must be positive");
  const double radius = cylinder_radius(ops.params());
  std::vector<WallScanRow> rows;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const SliceMap map = slice_map(ops, ts[k], rho);
    const WallConstants wc = wall_constants(ops, map);
    WallScanRow row;
    row.t = ts[k];
    row.samples = samples;
    row.constant = wc.constant();
    row.min_slack = std::numeric_limits<double>::infinity();
    for (auto& pt : sbot_sample(ops.unit(), radius, samples, seed + k)) {
      Field z = pt.zeta;
      z *= radius / lp_norm(z, 2.0);
      const WallPositivity w = wall_positivity(map, wc, cylinder_point(map, z, ops.params()), rho);
      if (!w.holds) ++row.violations;
      row.min_slack = std::min(row.min_slack, w.re_pairing - w.bound);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bsrg
