#pragma once

#include "bsrg/lattice.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace bsrg {

enum class Method { Tensor, QuasiRandom, MonteCarlo };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct IntegralEstimate {
  cplx value = 0.0;
  double abs_error = 0.0;
  Method method = Method::Tensor;
  long evaluations = 0;
  bool partial = false;  // budget exhausted before the requested tolerance
};

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> x, w;
};
GaussRule gauss_legendre(int n);

// Composite Gauss-Legendre on [a, b] with `panels` equal panels.
GaussRule composite_rule(double a, double b, int panels, int order);
// Panels [a, a + (b-a) 2^(1-panels)], ..., [a + (b-a)/2, b].
GaussRule graded_rule(double a, double b, int panels, int order);

// Radial range lo <= |z| < hi of one complex coordinate; hi may be +infinity.
struct RadialRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct TensorOptions {
  int panels = 4;
  int order = 16;
  int n_angle = 32;
  // Fix the phase of the first coordinate (integrand invariant under a common phase).
  bool u1_reduce = false;
  // Panels shrink geometrically (ratio 1/2) toward the inner radius.
  bool graded = false;
};

struct SamplingOptions {
  long points = 1 << 14;
  int shifts = 8;  // Cranley-Patterson randomizations (quasi-random only)
  std::uint64_t seed = 1;
  bool u1_reduce = false;
};

using ComplexIntegrand = std::function<cplx(const Vec& z)>;

// Integral of f(z) prod_j d^2 z_j / pi over the product of annuli, with s = |z|^2
// integrated by composite Gauss-Legendre (mapped when unbounded) and the phases by
// the trapezoid rule. abs_error compares against the half-resolution rule.
IntegralEstimate integrate_polar_tensor(const ComplexIntegrand& f, const std::vector<RadialRange>& box,
                                        const TensorOptions& opts = {});
IntegralEstimate integrate_polar_sampled(const ComplexIntegrand& f, const std::vector<RadialRange>& box,
                                         Method method, const SamplingOptions& opts = {});

// Tensor options sized so that the full- plus half-resolution rules stay within
// `budget` evaluations for `complex_dims` coordinates.
TensorOptions tensor_options_for_budget(long budget, int complex_dims, bool u1_reduce);

// The real slice z_* = conj(z) of a region, integrand exp(-exponent(z_*, z)).
// With rel_tol > 0 the result is flagged partial when abs_error exceeds rel_tol |value|.
struct SliceRegion {
  std::vector<RadialRange> box;
  std::function<bool(const Vec& z)> indicator;  // optional extra restriction
};
using ExponentFn = std::function<cplx(const Vec& z_star, const Vec& z)>;
IntegralEstimate integrate_real_slice(const ExponentFn& exponent, const SliceRegion& region, Method method,
                                      long budget, std::uint64_t seed = 1, bool u1_reduce = false,
                                      double rel_tol = 0.0);

// Halton point i (i >= 1) in dimension d using the first d primes.
std::vector<double> halton_point(long index, int dims);

// Runs body(lo, hi) over [0, count) split across hardware threads; body must be
// safe to call concurrently on disjoint ranges.
void parallel_for(long count, const std::function<void(long, long)>& body);

// Pairwise (cascade) summation.
cplx pairwise_sum(const std::vector<cplx>& terms);

}  // namespace bsrg
