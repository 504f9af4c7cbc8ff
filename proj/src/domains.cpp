#include "bsrg/domains.hpp"

#include "bsrg/errors.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>

namespace bsrg {

namespace {

double grad_sup_dir(const Field& f, int dir) { return sup_norm(forward_difference(f, dir)); }

double L_nu(const FlowParams& p, int nu) {
  return nu == 0 ? static_cast<double>(p.L) * p.L : static_cast<double>(p.L);
}

Field gaussian_field(const Lattice& lat, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Field f(lat);
  for (int i = 0; i < f.size(); ++i) f[i] = cplx(g(rng), g(rng));
  return f;
}

}  // namespace

double int_ratio(const Field& psi, const FlowParams& p, double c) {
  double r = sup_norm(psi) / (c * p.kappa_n);
  for (int nu = 0; nu < psi.lattice().dims(); ++nu)
    r = std::max(r, grad_sup_dir(psi, nu) / (c * p.kappa_prime_n));
  return r;
}

bool in_Int(const Field& psi, const FlowParams& p, double c) { return int_ratio(psi, p, c) < 1.0; }

bool in_An(const Field& psi, const FlowParams& p) { return in_Int(psi, p, 1.0); }

bool in_checkInt(const Field& theta, const FlowParams& p) {
  const double l32 = std::pow(static_cast<double>(p.L), 1.5);
  if (!(sup_norm(theta) < p.c0 * p.kappa_next() / l32)) return false;
  for (int nu = 0; nu < theta.lattice().dims(); ++nu)
    if (!(grad_sup_dir(theta, nu) < p.c0 * p.kappa_prime_next() / (l32 * L_nu(p, nu)))) return false;
  return true;
}

std::string to_string(Step1Region r) { return r == Step1Region::IntS ? "IntS" : "IntB"; }

Step1Region step1_split(const Field& theta, const Field& psi, const LinOp& Q, const FlowParams& p,
                        double coupling_r) {
  const double dist = lp_norm(theta - Q(psi), 2.0) / p.L;
  return dist < std::pow(coupling_r, -p.eps) ? Step1Region::IntS : Step1Region::IntB;
}

double step1_c(const FlowParams& p, double norm_Q, const std::vector<double>& norm_Q_minus) {
  const double L = p.L;
  double c = p.c0 / (2.0 * std::pow(L, 1.5 - p.eta) * norm_Q);
  for (size_t nu = 0; nu < norm_Q_minus.size(); ++nu)
    c = std::min(c, p.c0 / (2.0 * std::pow(L, 1.5 - p.eta_prime) * L_nu(p, static_cast<int>(nu)) *
                            norm_Q_minus[nu]));
  return c;
}

InclusionReport step1_inclusion_check(const FlowParams& p, const Lattice& unit, const Lattice& coarse,
                                      double coupling_r, int samples, std::uint64_t seed) {
  if (samples < 1) throw UsageError("step1_inclusion_check: samples must be positive");
  const LinOp Q = block_average_Q(unit, coarse);
  InclusionReport rep;
  rep.norm_Q = sup_operator_norm(Q);
  for (int nu = 0; nu < unit.dims(); ++nu)
    rep.norm_Q_minus.push_back(sup_operator_norm(block_average_difference(unit, coarse, nu)));
  rep.c = step1_c(p, rep.norm_Q, rep.norm_Q_minus);
  rep.requested = samples;
  rep.min_slack = std::numeric_limits<double>::infinity();

  const double l32 = std::pow(static_cast<double>(p.L), 1.5);
  const double ball = p.L * std::pow(coupling_r, -p.eps);
  const int real_dim = 2 * coarse.sites();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const long max_attempts = 200L * samples;

  while (rep.accepted < samples && rep.attempts < max_attempts) {
    ++rep.attempts;
    // psi: a random constant plus noise of random strength, scaled into Int(n).
    Field psi = gaussian_field(unit, rng);
    psi *= u01(rng);
    psi += Field::constant(unit, cplx(std::normal_distribution<double>(0.0, 1.0)(rng),
                                      std::normal_distribution<double>(0.0, 1.0)(rng)));
    psi *= std::pow(u01(rng), 0.25) / int_ratio(psi, p, p.c0) * (1.0 - 1e-12);
    // theta = Q psi + xi with xi uniform in the Int_s ball.
    Field xi = gaussian_field(coarse, rng);
    xi *= ball * std::pow(u01(rng), 1.0 / real_dim) / std::max(lp_norm(xi, 2.0), 1e-300) * (1.0 - 1e-12);
    const Field theta = Q(psi) + xi;
    if (in_checkInt(theta, p)) continue;
    if (step1_split(theta, psi, Q, p, coupling_r) != Step1Region::IntS || !in_Int(psi, p, p.c0)) continue;
    ++rep.accepted;
    if (!(sup_norm(theta) < p.c0 * p.kappa_next() / l32)) ++rep.value_bullets;
    else ++rep.gradient_bullets;
    const double slack = int_ratio(psi, p, rep.c) - 1.0;
    rep.min_slack = std::min(rep.min_slack, slack);
    if (slack < 0.0) ++rep.violations;
  }
  return rep;
}

nlohmann::json inclusion_to_json(const InclusionReport& r) {
  return {{"c", r.c},
          {"norm_Q", r.norm_Q},
          {"norm_Q_minus", r.norm_Q_minus},
          {"requested", r.requested},
          {"accepted", r.accepted},
          {"attempts", r.attempts},
          {"violations", r.violations},
          {"min_slack", r.min_slack},
          {"value_bullets", r.value_bullets},
          {"gradient_bullets", r.gradient_bullets}};
}

std::vector<SlicePoint> sbot_sample(const Lattice& lat, double radius, int count, std::uint64_t seed) {
  if (count < 0) throw UsageError("sbot_sample: negative count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int real_dim = 2 * lat.sites();
  std::vector<SlicePoint> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Field z = gaussian_field(lat, rng);
    const double r = radius * std::pow(u01(rng), 1.0 / real_dim);
    z *= r / lp_norm(z, 2.0);
    out.push_back({z.conj(), z});
  }
  return out;
}

SliceMap slice_map(const OperatorSet& ops, double t, const Field& rho, SqrtBranch branch) {
  require_same_lattice(rho.lattice(), ops.unit(), "slice_map");
  SliceMap m;
  m.t = t;
  m.D = principal_sqrt(ops.C(t).matrix(), branch);
  const Mat dt_inv = checked_inverse(m.D.transpose(), "D(t)^T");
  m.G = dt_inv * m.D.conjugate();
  m.h = dt_inv * rho.values().conjugate();
  return m;
}

double cylinder_radius(const FlowParams& p) { return std::pow(p.c0, 0.25) * p.kappa_prime_n; }

CylinderPoint cylinder_point(const SliceMap& map, const Field& zeta, const FlowParams& p) {
  CylinderPoint c;
  c.zeta = zeta;
  c.zeta_star = Field(zeta.lattice(), map.G * zeta.values().conjugate() - map.t * map.h);
  c.on_wall = lp_norm(zeta, 2.0) >= cylinder_radius(p);
  return c;
}

WallConstants wall_constants(const OperatorSet& ops, const SliceMap& map) {
  WallConstants k;
  k.herm_min = min_hermitian_eigenvalue(ops.C_inverse(map.t).matrix());
  k.dinv_norm = 1.0 / smallest_singular_value(map.D);
  return k;
}

WallPositivity wall_positivity(const SliceMap& map, const WallConstants& k, const CylinderPoint& pt,
                               const Field& rho) {
  WallPositivity w;
  w.re_pairing = pairing(pt.zeta_star, pt.zeta).real();
  const double nz = lp_norm(pt.zeta, 2.0);
  w.norm2 = nz * nz;
  w.constant = k.constant();
  w.bound = w.constant * w.norm2 - map.t * k.dinv_norm * lp_norm(rho, 2.0) * nz;
  w.holds = w.re_pairing >= w.bound - 1e-10 * std::max(1.0, w.norm2);
  return w;
}

bool region_contains(const RegionSpec& r, const FlowParams& p, const Field& psi) {
  switch (r.kind) {
    case RegionKind::All: return true;
    case RegionKind::Int: return in_Int(psi, p, r.c);
    case RegionKind::An: return in_An(psi, p);
    case RegionKind::CheckInt: return in_checkInt(psi, p);
    case RegionKind::SBot: return lp_norm(psi, 2.0) < r.radius;
    case RegionKind::IntS:
    case RegionKind::IntB: {
      if (!r.theta || !r.Q) throw UsageError("region_contains: IntS/IntB need theta and Q");
      if (!in_Int(psi, p, p.c0)) return false;
      const Step1Region s = step1_split(*r.theta, psi, *r.Q, p, r.coupling_r);
      return (s == Step1Region::IntS) == (r.kind == RegionKind::IntS);
    }
  }
  return false;
}

nlohmann::json wall_to_json(const WallPositivity& w) {
  return {{"re_pairing", w.re_pairing}, {"norm2", w.norm2}, {"bound", w.bound},
          {"constant", w.constant},     {"holds", w.holds}};
}

}  // namespace bsrg
