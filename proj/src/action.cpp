#include "bsrg/action.hpp"

#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

namespace bsrg {

cplx eval_An(const Field& psi_star, const Field& psi, const Field& phi_star, const Field& phi,
             const OperatorSet& ops, const Interaction& v) {
  require_same_lattice(psi.lattice(), ops.unit(), "eval_An");
  require_same_lattice(phi.lattice(), ops.fine(), "eval_An");
  const auto& p = ops.params();
  const Field block_star = psi_star - ops.Qn()(phi_star);
  const Field block = psi - ops.Qn()(phi);
  return pairing(block_star, p.a_n * block) + pairing(phi_star, ops.Dn()(phi)) -
         p.mu_n * pairing(phi_star, phi) + eval_V(phi_star, phi, v);
}

cplx eval_An_at_background(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                           const Interaction& v, BackgroundSolution* bg_out) {
  BackgroundSolution bg = solve_background(psi_star, psi, ops, v);
  const cplx a = eval_An(psi_star, psi, bg.phi_star, bg.phi, ops, v);
  if (bg_out) *bg_out = std::move(bg);
  return a;
}

cplx An_second_representation(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                              const Interaction& v) {
  const auto& p = ops.params();
  const Mat s_mu = ops.Sn(p.mu_n).matrix();
  const Mat s0 = ops.Sn(0.0).matrix();
  const Vec src_star = p.a_n * ops.Qn_adj().matrix() * psi_star.values();
  const Vec src = p.a_n * ops.Qn_adj().matrix() * psi.values();
  const Field Phi_star_mu(ops.fine(), s_mu.transpose() * src_star);
  const Field Phi_mu(ops.fine(), s_mu * src);
  const Field Phi_0(ops.fine(), s0 * src);
  return pairing(psi_star, ops.Delta()(psi)) - p.mu_n * pairing(Phi_star_mu, Phi_0) +
         eval_V(Phi_star_mu, Phi_mu, v);
}

cplx Perturbation::eval(const Field& psi_star, const Field& psi) const {
  cplx s = 0.0;
  if (R) s += R(psi_star, psi);
  if (E) s += E(psi_star, psi);
  if (std::abs(s) > budget) throw DomainError("perturbation exceeds its budget");
  return s;
}

cplx effective_exponent(const Field& theta_star, const Field& theta, const Field& psi_star, const Field& psi,
                        const OperatorSet& ops, const Interaction& v, const Perturbation& pert) {
  const auto& p = ops.params();
  const double w = p.a / (static_cast<double>(p.L) * p.L);
  const cplx block = pairing(theta_star - ops.Q()(psi_star), theta - ops.Q()(psi));
  return w * block + eval_An_at_background(psi_star, psi, ops, v) - pert.eval(psi_star, psi);
}

FluctuationSplit fluctuation_expansion(const Field& theta_star, const Field& theta, const CriticalFields& cf,
                                       const Field& dpsi_star, const Field& dpsi, const OperatorSet& ops,
                                       const Interaction& v, const Perturbation& pert) {
  const Field psi_star = cf.psi_star_n + dpsi_star;
  const Field psi = cf.psi_n + dpsi;
  if (!in_An(psi, ops.params()) || !in_An(psi_star, ops.params()))
    throw DomainEscapeError("fluctuation_expansion: shifted field leaves An(n)");
  FluctuationSplit out;
  out.quadratic = pairing(dpsi_star, ops.C_inverse(1.0)(dpsi));
  const cplx shifted = effective_exponent(theta_star, theta, psi_star, psi, ops, v, pert);
  const cplx base = effective_exponent(theta_star, theta, cf.psi_star_n, cf.psi_n, ops, v, pert);
  out.remainder = shifted - base - out.quadratic;
  return out;
}

double lattice_k2(const Lattice& lat, const std::vector<double>& k) {
  double s = 0.0;
  for (int d = 0; d < lat.dims(); ++d) {
    const double h = lat.spacing(d);
    s += std::norm(std::polar(1.0, k[d] * h) - 1.0) / (h * h);
  }
  return s;
}

SymbolFit fit_gamma(const OperatorSet& ops) {
  const LinOp& delta = ops.Delta();
  if (!delta.translation_invariant()) throw UsageError("fit_gamma: Delta is not translation invariant");
  const Lattice& lat = ops.unit();
  SymbolFit f;
  f.gamma = std::numeric_limits<double>::infinity();
  f.min_re_nonzero = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lat.sites(); ++i) {
    const auto k = momentum(lat, i);
    const cplx s = symbol(delta, k);
    if (i == 0) {
      f.zero_mode = std::abs(s);
      continue;
    }
    const double k2 = lattice_k2(lat, k);
    f.gamma = std::min(f.gamma, s.real() / (8.0 * k2));
    f.gamma_tilde = std::max(f.gamma_tilde, 2.0 * s.real() / k2);
    f.min_re_nonzero = std::min(f.min_re_nonzero, s.real());
    if (k[0] != 0.0) f.max_abs_im_over_k0 = std::max(f.max_abs_im_over_k0, std::abs(s.imag() / k[0]));
  }
  if (lat.sites() == 1) f.gamma = f.min_re_nonzero = 0.0;
  return f;
}

namespace {

double grad_l2_squared(const Field& psi) {
  double s = 0.0;
  for (int nu = 0; nu < psi.lattice().dims(); ++nu) {
    const double g = lp_norm(forward_difference(psi, nu), 2.0);
    s += g * g;
  }
  return s;
}

}  // namespace

BoundsReport proposition1_check(const Field& psi, const OperatorSet& ops, const Interaction& v, double delta,
                                const SymbolFit& fit) {
  const auto& p = ops.params();
  if (!(delta > 0.0)) throw ValidationError("delta", "must be positive");
  if (!in_An(psi, p)) throw DomainError("proposition1_check: psi is not in An(n)");
  BoundsReport r;
  r.delta = delta;
  r.gamma_fit = fit.gamma;
  r.gamma_tilde_fit = fit.gamma_tilde;
  r.re_An = eval_An_at_background(psi.conj(), psi, ops, v).real();
  const double grad2 = grad_l2_squared(psi);
  const double l2 = lp_norm(psi, 2.0);
  const double l4 = lp_norm(psi, 4.0);
  const double rn = coupling_rn(v);
  r.lower = fit.gamma * grad2 - (1.0 + delta) * p.mu_n * l2 * l2 + 0.5 * (1.0 - delta) * rn * std::pow(l4, 4);
  r.upper = fit.gamma_tilde * grad2 - (1.0 - delta) * p.mu_n * l2 * l2 + 0.5 * (1.0 + delta) * rn * std::pow(l4, 4);
  const double tol = 1e-12 * std::max(1.0, std::abs(r.re_An));
  r.passed = r.lower <= r.re_An + tol && r.re_An <= r.upper + tol;
  return r;
}

Field random_An_field(const Lattice& unit, const FlowParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, unit.sites() - 1);
  Field psi = Field::constant(unit, cplx(g(rng), g(rng)));
  const auto k = momentum(unit, pick(rng));
  std::vector<double> kk(k.size());
  for (size_t d = 0; d < k.size(); ++d) kk[d] = -k[d];
  psi += cplx(g(rng), g(rng)) * Field::plane_wave(unit, kk);
  const double noise = u01(rng);
  for (int i = 0; i < psi.size(); ++i) psi[i] += noise * cplx(g(rng), g(rng));
  const double ratio = int_ratio(psi, p, 1.0);
  if (ratio == 0.0) return psi;
  psi *= std::pow(u01(rng), 0.25) * (1.0 - 1e-9) / ratio;
  return psi;
}

Proposition1Scan proposition1_scan(const OperatorSet& ops, const Interaction& v, double delta, int samples,
                                   std::uint64_t seed, const SymbolFit& fit) {
  if (samples < 1) throw UsageError("proposition1_scan: samples must be positive");
  Proposition1Scan scan;
  scan.fit = fit;
  scan.min_margin = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> seeds(samples);
  std::mt19937_64 master(seed);
  for (auto& s : seeds) s = master();
  for (int i = 0; i < samples; ++i) {
    const Field psi = random_An_field(ops.unit(), ops.params(), seeds[i]);
    BoundsRow row;
    row.seed = seeds[i];
    row.norms = norms(psi);
    row.report = proposition1_check(psi, ops, v, delta, fit);
    if (!row.report.passed) ++scan.violations;
    scan.min_margin = std::min(scan.min_margin, row.report.margin());
    scan.rows.push_back(row);
  }
  return scan;
}

void write_bounds_csv(std::ostream& os, const std::vector<BoundsRow>& rows) {
  os << "seed,sup,l2,l4,grad_sup,grad_l2,re_An,lower,upper,margin,passed\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.seed << ',' << r.norms.sup << ',' << r.norms.l2 << ',' << r.norms.l4 << ',' << r.norms.grad_sup << ','
       << r.norms.grad_l2 << ',' << r.report.re_An << ',' << r.report.lower << ',' << r.report.upper << ','
       << r.report.margin() << ',' << (r.report.passed ? 1 : 0) << '\n';
  }
}

}  // namespace bsrg
