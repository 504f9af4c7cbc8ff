#pragma once

#include "bsrg/lattice.hpp"

#include <vector>

namespace bsrg {

// One translation-invariant quartic term: weight w on
// phi_*(u) phi(u+o2) phi_*(u+o3) phi(u+o4), offsets in lattice steps.
struct KernelTerm {
  std::vector<int> o2, o3, o4;
  double w = 0.0;
};

// V(phi_*, phi) = 1/2 vol sum_u sum_terms w phi_*(u) phi(u+o2) phi_*(u+o3) phi(u+o4).
// Weights are stored so that r_n = sum of weights; the local quartic is the
// single term with zero offsets and weight lambda_n.
class Interaction {
 public:
  enum class Kind { LocalQuartic, Kernel };

  static Interaction local(double lambda_n);
  // Terms are symmetrized over the exchanges phi(u2)<->phi(u4), phi_*(u1)<->phi_*(u3)
  // and (u1,u2)<->(u3,u4). Negative weights are rejected.
  static Interaction kernel(const std::vector<KernelTerm>& terms);
  // Half the weight on-site, the rest spread over nearest-neighbour density products.
  static Interaction nearest_neighbor_smeared(double lambda_n, int dims);

  Kind kind() const { return kind_; }
  const std::vector<KernelTerm>& terms() const { return terms_; }
  // Same shape with weights rescaled so that coupling_rn() == r.
  Interaction with_coupling(double r) const;

 private:
  Kind kind_ = Kind::LocalQuartic;
  std::vector<KernelTerm> terms_;
};

double coupling_rn(const Interaction& v);

cplx eval_V(const Field& phi_star, const Field& phi, const Interaction& v);
// V'(a,b,c)(u) = sum_terms w a(u+o2) b(u+o3) c(u+o4); <phi_*, V'(phi,phi_*,phi)> = 2V.
Field eval_V_prime(const Field& a, const Field& b, const Field& c, const Interaction& v);

// Pairing gradients: <delta, grad_star> = dV in the direction delta of phi_*.
struct VGradient {
  Field star;  // with respect to phi_*
  Field plain; // with respect to phi
};
VGradient grad_V(const Field& phi_star, const Field& phi, const Interaction& v);

// Jacobians of the two gradients: row index = gradient site, column = field site.
struct VHessian {
  Mat star_star, star_plain, plain_star, plain_plain;
};
VHessian hessian_V(const Field& phi_star, const Field& phi, const Interaction& v);

nlohmann::json interaction_to_json(const Interaction& v);
Interaction interaction_from_json(const nlohmann::json& j);

}  // namespace bsrg
