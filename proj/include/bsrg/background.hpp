#pragma once

#include "bsrg/interaction.hpp"
#include "bsrg/operators.hpp"

#include <vector>

namespace bsrg {

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

struct BackgroundSolution {
  Field phi_star;
  Field phi;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Residuals of
//   (D_n^T + Q_n* fQ_n Q_n - mu) phi_* + dV/dphi   = Q_n* fQ_n psi*
//   (D_n   + Q_n* fQ_n Q_n - mu) phi   + dV/dphi_* = Q_n* fQ_n psi
struct BackgroundResidual {
  Field star;
  Field plain;
  double sup() const;
};
BackgroundResidual background_residual(const Field& psi_star, const Field& psi, const Field& phi_star,
                                       const Field& phi, const OperatorSet& ops, const Interaction& v);

// Newton iteration from the linear solution. Convergence means residual sup-norm
// below tol * max(1, |Q_n* fQ_n psi|_sup).
BackgroundSolution solve_background(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                                    const Interaction& v, const NewtonOptions& opts = {});

// Derivatives of the background fields with respect to the unit-lattice fields.
struct BackgroundSensitivity {
  Mat dphi_star_dpsi_star, dphi_star_dpsi;
  Mat dphi_dpsi_star, dphi_dpsi;
};
BackgroundSensitivity sensitivities(const BackgroundSolution& bg, const OperatorSet& ops,
                                    const Interaction& v);

struct DegreeParts {
  Field Phi_star, Phi;      // linear parts S_n(mu)^(T) Q_n* fQ_n psi^(*)
  Field phi3_star, phi3;    // phi - Phi
  Field phi5_star, phi5;    // phi3 + S_n(mu) V'(Phi, Phi_*, Phi)
};
DegreeParts degree_expansion(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                             const Interaction& v, const BackgroundSolution& bg);

struct CriticalFields {
  Field psi_star_n;
  Field psi_n;
  Field rho_n;  // conj(psi_star_n) - psi_n
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;
};

struct CriticalOptions {
  double tol = 1e-9;
  int max_iter = 50;
  // Throw DomainEscapeError when an iterate leaves An(n).
  bool check_domain = true;
};

// Gradient of E = a L^-2 <theta*-Q psi_*, theta-Q psi>_{-1} + A_n(background),
// ordered (d/dpsi_*, d/dpsi).
struct CriticalGradient {
  Field star;
  Field plain;
};
CriticalGradient critical_gradient(const Field& theta_star, const Field& theta, const Field& psi_star,
                                   const Field& psi, const BackgroundSolution& bg, const OperatorSet& ops);

// Stationary point of E in (psi_*, psi), by Newton from the lambda = 0 solution.
CriticalFields solve_critical_fields(const Field& theta_star, const Field& theta, const OperatorSet& ops,
                                     const Interaction& v, const CriticalOptions& opts = {});
// The lambda = 0 stationary point in closed form.
CriticalFields linear_critical_fields(const Field& theta_star, const Field& theta, const OperatorSet& ops);

nlohmann::json background_to_json(const BackgroundSolution& bg);
nlohmann::json critical_to_json(const CriticalFields& cf);

}  // namespace bsrg
