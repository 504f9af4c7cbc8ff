#pragma once

#include "bsrg/operators.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bsrg {

// |psi(x)| < c kappa(n) and |d_nu psi(x)| < c kappa'(n) for all x, nu.
bool in_Int(const Field& psi, const FlowParams& params, double c);
bool in_An(const Field& psi, const FlowParams& params);
// |theta(y)| < c0 kappa(n+1)/L^{3/2}, |d_nu theta(y)| < c0 kappa'(n+1)/(L^{3/2} L_nu).
bool in_checkInt(const Field& theta, const FlowParams& params);

// Largest of |psi|/(c kappa) and |d psi|/(c kappa'); psi is in Int(n,c) iff this is < 1.
double int_ratio(const Field& psi, const FlowParams& params, double c);

enum class Step1Region { IntS, IntB };
std::string to_string(Step1Region r);

// IntS iff L^-1 |theta - Q psi|_{-1} < r^-eps with r the coupling constant r_n.
Step1Region step1_split(const Field& theta, const Field& psi, const LinOp& Q, const FlowParams& params,
                        double coupling_r);

// min over nu of { c0 / (2 L^{3/2-eta} |Q|), c0 / (2 L^{3/2-eta'} L_nu |Q^(-)_nu|) }.
double step1_c(const FlowParams& params, double norm_Q, const std::vector<double>& norm_Q_minus);

struct InclusionReport {
  double c = 0.0;
  double norm_Q = 0.0;
  std::vector<double> norm_Q_minus;
  int requested = 0;
  int accepted = 0;      // pairs with theta outside checkInt, psi in Int_s
  int attempts = 0;
  int violations = 0;    // accepted pairs with psi in Int(n,c)
  double min_slack = 0.0;  // min over accepted pairs of int_ratio(psi, c) - 1
  int value_bullets = 0;   // pairs failing the value bound of checkInt
  int gradient_bullets = 0;
};
// Samples pairs with theta = Q psi + (perturbation inside the Int_s ball) and
// psi in Int(n) near the boundary, keeping those with theta outside checkInt.
InclusionReport step1_inclusion_check(const FlowParams& params, const Lattice& unit, const Lattice& coarse,
                                      double coupling_r, int samples, std::uint64_t seed);
nlohmann::json inclusion_to_json(const InclusionReport& r);

struct SlicePoint {
  Field zeta_star;
  Field zeta;
};

// Uniform points of the disk zeta_* = conj(zeta), |zeta|_2 < radius.
std::vector<SlicePoint> sbot_sample(const Lattice& lattice, double radius, int count, std::uint64_t seed);

// The slice I'_t: D zeta = conj(D^T) conj(zeta_*) + t rho, solved for zeta_*.
struct SliceMap {
  Mat D;        // D(t)
  Mat G;        // (D^T)^{-1} conj(D)
  Vec h;        // (D^T)^{-1} conj(rho)
  double t = 0.0;
};
SliceMap slice_map(const OperatorSet& ops, double t, const Field& rho,
                   SqrtBranch branch = SqrtBranch::Principal);

struct CylinderPoint {
  Field zeta_star;
  Field zeta;
  bool on_wall = false;  // |zeta| >= c0^{1/4} kappa'(n)
};
CylinderPoint cylinder_point(const SliceMap& map, const Field& zeta, const FlowParams& params);
double cylinder_radius(const FlowParams& params);

struct WallPositivity {
  double re_pairing = 0.0;   // Re <zeta_*, zeta>
  double norm2 = 0.0;        // |zeta|^2
  double bound = 0.0;        // const |zeta|^2 - t |D^{-1}| |rho| |zeta|
  double constant = 0.0;     // lambda_min(Herm C(t)^{-1}) / |D(t)^{-1}|^2
  bool holds = false;
};
struct WallConstants {
  double herm_min = 0.0;     // lambda_min of the Hermitian part of C(t)^{-1}
  double dinv_norm = 0.0;    // spectral norm of D(t)^{-1}
  double constant() const { return herm_min / (dinv_norm * dinv_norm); }
};
WallConstants wall_constants(const OperatorSet& ops, const SliceMap& map);
WallPositivity wall_positivity(const SliceMap& map, const WallConstants& k, const CylinderPoint& p,
                               const Field& rho);

enum class RegionKind { Int, An, CheckInt, IntS, IntB, SBot, All };

struct RegionSpec {
  RegionKind kind = RegionKind::All;
  double c = 1.0;                 // Int(n, c)
  double radius = 0.0;            // SBot
  double coupling_r = 0.0;        // IntS / IntB
  std::optional<Field> theta;     // IntS / IntB anchor
  const LinOp* Q = nullptr;       // IntS / IntB
};
bool region_contains(const RegionSpec& region, const FlowParams& params, const Field& psi);

nlohmann::json wall_to_json(const WallPositivity& w);

}  // namespace bsrg
