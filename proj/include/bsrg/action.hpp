#pragma once

#include "bsrg/background.hpp"
#include "bsrg/interaction.hpp"
#include "bsrg/operators.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>

namespace bsrg {

// A_n = <psi* - Q_n phi_*, fQ_n (psi - Q_n phi)>_0 + <phi_*, D_n phi>_n - mu_n <phi_*, phi>_n + V_n(phi_*, phi)
cplx eval_An(const Field& psi_star, const Field& psi, const Field& phi_star, const Field& phi,
             const OperatorSet& ops, const Interaction& v);
cplx eval_An_at_background(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                           const Interaction& v, BackgroundSolution* bg_out = nullptr);

// <psi*, Delta psi>_0 - mu_n <Phi_*(mu_n), Phi(0)>_n + V_n(Phi_*, Phi).
cplx An_second_representation(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                              const Interaction& v);

// Carried-along analytic corrections R_n and E_n; the integrand carries exp(+R + E).
struct Perturbation {
  std::function<cplx(const Field& psi_star, const Field& psi)> R;
  std::function<cplx(const Field& psi_star, const Field& psi)> E;
  double budget = std::numeric_limits<double>::infinity();

  // R + E, or 0 when neither is set; throws DomainError if |R + E| exceeds the budget.
  cplx eval(const Field& psi_star, const Field& psi) const;
};

// a L^-2 <theta_* - Q psi_*, theta - Q psi>_{-1} + A_n(background) - R_n - E_n.
// The theta-coupled integrand is exp(-effective_exponent).
cplx effective_exponent(const Field& theta_star, const Field& theta, const Field& psi_star, const Field& psi,
                        const OperatorSet& ops, const Interaction& v, const Perturbation& pert = {});

struct FluctuationSplit {
  cplx quadratic = 0.0;  // <dpsi_*, C^{-1} dpsi>_0
  cplx remainder = 0.0;  // exponent(shifted) - exponent(critical) - quadratic
};
FluctuationSplit fluctuation_expansion(const Field& theta_star, const Field& theta, const CriticalFields& cf,
                                       const Field& dpsi_star, const Field& dpsi, const OperatorSet& ops,
                                       const Interaction& v, const Perturbation& pert = {});

struct SymbolFit {
  double gamma = 0.0;        // min Re Delta^(k) / (8 |k|^2)
  double gamma_tilde = 0.0;  // max 2 Re Delta^(k) / |k|^2
  double min_re_nonzero = 0.0;
  double zero_mode = 0.0;    // |Delta^(0)|
  double max_abs_im_over_k0 = 0.0;
};
// |k|^2 = sum_nu |exp(i k_nu h_nu) - 1|^2 / h_nu^2, the symbol of sum_nu |d_nu|^2.
double lattice_k2(const Lattice& lattice, const std::vector<double>& k);
SymbolFit fit_gamma(const OperatorSet& ops);

struct BoundsReport {
  double re_An = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double delta = 0.1;
  double gamma_fit = 0.0;
  double gamma_tilde_fit = 0.0;
  bool passed = false;
  double margin() const { return std::min(re_An - lower, upper - re_An); }
};

BoundsReport proposition1_check(const Field& psi, const OperatorSet& ops, const Interaction& v, double delta,
                                const SymbolFit& fit);

struct BoundsRow {
  std::uint64_t seed = 0;
  NormReport norms;
  BoundsReport report;
};
struct Proposition1Scan {
  SymbolFit fit;
  std::vector<BoundsRow> rows;
  int violations = 0;
  double min_margin = 0.0;
};
// Random psi in An(n): constant, plane-wave and noise components scaled to a
// random fraction of the An(n) boundary.
Field random_An_field(const Lattice& unit, const FlowParams& params, std::uint64_t seed);
Proposition1Scan proposition1_scan(const OperatorSet& ops, const Interaction& v, double delta, int samples,
                                   std::uint64_t seed, const SymbolFit& fit);
void write_bounds_csv(std::ostream& os, const std::vector<BoundsRow>& rows);

}  // namespace bsrg
