#pragma once

#include "bsrg/lattice.hpp"

#include <iosfwd>
#include <optional>

namespace bsrg {

// Dense linear map between field spaces.
class LinOp {
 public:
  LinOp() = default;
  LinOp(Lattice domain, Lattice codomain, Mat matrix, bool translation_invariant = false);

  static LinOp identity(const Lattice& lattice, cplx scale = 1.0);

  const Lattice& domain() const { return domain_; }
  const Lattice& codomain() const { return codomain_; }
  const Mat& matrix() const { return matrix_; }
  bool translation_invariant() const { return translation_invariant_; }

  Field apply(const Field& f) const;
  Field operator()(const Field& f) const { return apply(f); }

  // Bilinear adjoint with respect to the volume-weighted pairings:
  // <g, A f>_codomain = <A* g, f>_domain.
  LinOp adjoint() const;
  // Plain matrix transpose on the same lattices (used for D* when D is square).
  LinOp transpose() const;
  LinOp inverse() const;

  LinOp& operator+=(const LinOp& o);
  LinOp& operator-=(const LinOp& o);
  LinOp& operator*=(cplx s);

 private:
  Lattice domain_;
  Lattice codomain_;
  Mat matrix_;
  bool translation_invariant_ = false;
};

LinOp operator+(LinOp a, const LinOp& b);
LinOp operator-(LinOp a, const LinOp& b);
LinOp operator*(cplx s, LinOp a);
LinOp operator*(const LinOp& a, const LinOp& b);

// True if the matrix commutes with a unit translation in every direction.
bool commutes_with_translations(const Mat& m, const Lattice& lattice, double tol = 1e-10);

struct FlowParams {
  int n = 1;
  int n_p = 1;
  int L = 2;
  double a = 1.0;
  double a_n = 0.8;
  double mu_n = 0.0;
  double lambda_n = 1e-3;
  double v0 = 1e-3;
  double eps = 0.1;
  double kappa_n = 1.0;
  double kappa_prime_n = 0.5;
  double eta = 0.85;
  double eta_prime = 0.7;
  double c0 = 0.8;
  double r_n = 0.1;
  // Scales the antisymmetric part of the time difference in D_n; 1 is the physical operator.
  double drift = 1.0;

  double kappa_next() const;
  double kappa_prime_next() const;

  // Throws ValidationError naming the offending field.
  void validate() const;
  // The same checks without the coupling-size constraints (for exact-Gaussian runs).
  void validate_structure() const;
};

nlohmann::json params_to_json(const FlowParams& p);
FlowParams params_from_json(const nlohmann::json& j, const FlowParams& defaults = {});

// a_{k+1} = L^2 a_k / (L^2 + a_k), clipped to [1/2, 2], starting from a_0 = a.
double flow_a_n(double a, int L, int n);

// One-parameter family of FlowParams indexed by the initial coupling v0.
struct CouplingLaw {
  int n = 1;
  int n_p = 1;
  int L = 2;
  double a = 1.0;
  double eps = 0.1;
  double c0 = 0.8;
  double eta = 0.85;
  double eta_prime = 0.7;
  double kappa_coeff = 0.5;        // kappa^2 = kappa_coeff * v0^(2 eps - 1)
  double kappa_prime_ratio = 0.5;  // kappa' = ratio * kappa
  double lambda_ratio = 1.0;       // lambda_n = ratio * v0
  double mu_frac = 0.0;            // mu_n = mu_frac * 4 v0^(5 eps)
  double r_fraction = 0.5;         // r_n = r_fraction * c0^(1/4) kappa'
  double drift = 1.0;

  FlowParams at(double v0) const;
};

nlohmann::json law_to_json(const CouplingLaw& law);
CouplingLaw law_from_json(const nlohmann::json& j);

// (Q psi)(y): mean over the parabolic block of unit sites at y.
LinOp block_average_Q(const Lattice& unit, const Lattice& coarse);
// Averaging from `fine` onto any lattice whose sites are unions of blocks of
// fine sites; block shape is inferred from the extent ratio.
LinOp block_average(const Lattice& fine, const Lattice& coarse);
// Q^(-)_nu with d_nu Q = Q^(-)_nu d_nu on unit-lattice fields.
LinOp block_average_difference(const Lattice& unit, const Lattice& coarse, int nu);
// n successive single-step averages from the scale-n fine lattice to the unit lattice.
LinOp compose_Qn(const FlowParams& params, const Lattice& fine, const Lattice& unit);

LinOp build_fQn(const FlowParams& params, const Lattice& unit);
// Backward time difference minus spatial Laplacian on the fine lattice, with the
// antisymmetric part of the time difference scaled by params.drift.
LinOp build_Dn(const FlowParams& params, const Lattice& fine);
LinOp forward_difference_op(const Lattice& lattice, int dir);

// Sup-operator norm: maximum absolute row sum.
double sup_operator_norm(const LinOp& op);
// Smallest eigenvalue of (M + M^dagger)/2.
double min_hermitian_eigenvalue(const Mat& m);
double smallest_singular_value(const Mat& m);

// Inverts, or throws InvertibilityError carrying the smallest singular value.
Mat checked_inverse(const Mat& m, const char* what, double rcond = 1e-13);

enum class SqrtBranch { Principal, FlipSmallest };

// D with D D = A and, on the principal branch, spectrum in the right half-plane.
// Computed from a complex Schur form.
Mat principal_sqrt(const Mat& a, SqrtBranch branch = SqrtBranch::Principal);
LinOp principal_sqrt(const LinOp& op, SqrtBranch branch = SqrtBranch::Principal);
// X with D X + X D = rhs.
Mat sylvester_symmetric(const Mat& d, const Mat& rhs);

// Eigenvalue on the plane wave exp(-i k.x).
cplx symbol(const LinOp& op, const std::vector<double>& k);

void write_operator(std::ostream& os, const LinOp& op);
LinOp read_operator(std::istream& is);

// All operators of one RG step at scale n.
class OperatorSet {
 public:
  OperatorSet(const FlowParams& params, const Lattice& unit, const Lattice& fine,
              const Lattice& coarse);

  const FlowParams& params() const { return params_; }
  const Lattice& unit() const { return unit_; }
  const Lattice& fine() const { return fine_; }
  const Lattice& coarse() const { return coarse_; }

  const LinOp& Q() const { return Q_; }
  const LinOp& Qn() const { return Qn_; }
  const LinOp& Qn_adj() const { return Qn_adj_; }
  const LinOp& fQn() const { return fQn_; }
  const LinOp& Dn() const { return Dn_; }
  // D_n + Q_n* fQ_n Q_n.
  const LinOp& kinetic() const { return kinetic_; }
  const LinOp& Delta() const { return Delta_; }

  LinOp Sn(cplx mu) const;
  LinOp Sn_transpose(cplx mu) const;
  // C(t)^{-1} = (a t/L^2) Q*Q + t Delta + (1-t) 1.
  LinOp C_inverse(double t) const;
  LinOp C(double t) const;
  // d/dt C(t)^{-1}.
  LinOp C_inverse_dot() const;

 private:
  FlowParams params_;
  Lattice unit_, fine_, coarse_;
  LinOp Q_, Qn_, Qn_adj_, fQn_, Dn_, kinetic_, Delta_;
};

// Fine lattice and unit lattice for a unit lattice with the given extents.
struct DeskLattices {
  Lattice unit;
  Lattice fine;
  Lattice coarse;
};
DeskLattices desk_lattices(int spatial_dim, const std::vector<int>& unit_extents, int L, int n);

}  // namespace bsrg
