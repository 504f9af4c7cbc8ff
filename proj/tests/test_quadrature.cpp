#include "doctest.h"

#include "bsrg/errors.hpp"
#include "bsrg/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <atomic>
#include <cmath>
#include <limits>

using namespace bsrg;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// int_0^inf exp(-a s - l s^2) ds, the radial form of int_C exp(-a|z|^2 - l|z|^4) d^2z / pi.
double radial_oracle(double a, double l) {
  auto f = [&](double s) { return std::exp(-a * s - l * s * s); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, kInf, 15, 1e-14);
}

}  // namespace

TEST_CASE("Gauss-Legendre exactness") {
  for (int n : {1, 2, 5, 12, 24}) {
    const GaussRule g = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g.w[i] * std::pow(g.x[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      CHECK(std::abs(s - exact) < 1e-13);
    }
  }
  const GaussRule c = composite_rule(0.0, 2.0, 3, 4);
  const GaussRule gr = graded_rule(0.0, 2.0, 5, 4);
  for (const GaussRule* r : {&c, &gr}) {
    double s = 0.0;
    for (size_t i = 0; i < r->x.size(); ++i) s += r->w[i] * std::pow(r->x[i], 7);
    CHECK(s == doctest::Approx(32.0).epsilon(1e-13));
  }
  CHECK(gr.x.front() < 2.0 / 16);
  CHECK_THROWS_AS(gauss_legendre(0), UsageError);
  CHECK_THROWS_AS(composite_rule(0.0, 1.0, 0, 4), UsageError);
}

TEST_CASE("one-site Gaussian and quartic integrals") {
  const SliceRegion all{{RadialRange{}}, {}};
  for (double a : {0.5, 2.0, 3.7}) {
    const auto e = integrate_real_slice([&](const Vec& zs, const Vec& z) { return a * zs[0] * z[0]; }, all,
                                        Method::Tensor, 20000);
    CHECK(std::abs(e.value - 1.0 / a) < 1e-8 / a);
    CHECK(std::abs(e.value - 1.0 / a) <= e.abs_error);
  }
  for (double l : {0.05, 0.3, 1.0}) {
    const double a = 1.2;
    const auto e = integrate_real_slice(
        [&](const Vec& zs, const Vec& z) { return a * zs[0] * z[0] + l * std::pow(zs[0] * z[0], 2); }, all,
        Method::Tensor, 20000);
    const double oracle = radial_oracle(a, l);
    CHECK(std::abs(e.value - oracle) < 1e-8 * oracle);
  }

  // Disk |z| < R: (1 - exp(-a R^2)) / a.
  const double a = 2.0, R = 0.7;
  const SliceRegion disk{{RadialRange{0.0, R}}, {}};
  const auto d = integrate_real_slice([&](const Vec& zs, const Vec& z) { return a * zs[0] * z[0]; }, disk,
                                      Method::Tensor, 20000);
  CHECK(std::abs(d.value - (1.0 - std::exp(-a * R * R)) / a) < 1e-12);
}

TEST_CASE("two-site Gaussian is 1/det M") {
  Mat M(2, 2);
  M << cplx(1.0, 0.0), cplx(0.25, 0.15), cplx(0.25, -0.15), cplx(1.5, 0.0);
  const ExponentFn ex = [&](const Vec& zs, const Vec& z) { return (zs.transpose() * M * z)(0, 0); };
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const double oracle = 1.0 / es.eigenvalues().prod();
  const SliceRegion all{{RadialRange{}, RadialRange{}}, {}};
  const auto e = integrate_real_slice(ex, all, Method::Tensor, 1000000, 1, true);
  CHECK(std::abs(e.value - oracle) < 1e-8 * oracle);
}

TEST_CASE("tensor and sampled estimates agree") {
  const double a = 1.0, l = 0.2, c = 0.3;
  const ExponentFn ex = [&](const Vec& zs, const Vec& z) {
    return a * (zs[0] * z[0] + zs[1] * z[1]) + c * (zs[0] * z[1] + zs[1] * z[0]) +
           l * (std::pow(zs[0] * z[0], 2) + std::pow(zs[1] * z[1], 2));
  };
  const SliceRegion box{{RadialRange{0.0, 2.5}, RadialRange{0.0, 2.5}}, {}};
  const auto t = integrate_real_slice(ex, box, Method::Tensor, 400000, 1, true);
  const auto q = integrate_real_slice(ex, box, Method::QuasiRandom, 1 << 15, 3);
  const auto m = integrate_real_slice(ex, box, Method::MonteCarlo, 1 << 15, 4);
  CHECK(q.method == Method::QuasiRandom);
  CHECK(q.abs_error > 0.0);
  CHECK(std::abs(t.value - q.value) <= 4.0 * (t.abs_error + q.abs_error));
  CHECK(std::abs(t.value - m.value) <= 4.0 * (t.abs_error + m.abs_error));
  CHECK(q.abs_error < m.abs_error);

  const auto low = integrate_real_slice(ex, box, Method::Tensor, 100, 1, true, 1e-12);
  CHECK(low.partial);
  CHECK_FALSE(t.partial);
}

TEST_CASE("Halton points") {
  const std::vector<double> p1 = halton_point(1, 3);
  CHECK(p1 == std::vector<double>{0.5, 1.0 / 3, 0.2});
  const std::vector<double> p2 = halton_point(2, 2);
  CHECK(p2[0] == 0.25);
  CHECK(p2[1] == doctest::Approx(2.0 / 3));
  CHECK(halton_point(4, 2)[1] == doctest::Approx(1.0 / 3 + 1.0 / 9));
  CHECK_THROWS_AS(halton_point(1, 17), UsageError);
}

TEST_CASE("usage errors and helpers") {
  const ComplexIntegrand one = [](const Vec&) { return cplx(1.0); };
  CHECK_THROWS_AS(integrate_polar_tensor(one, {}), UsageError);
  CHECK_THROWS_AS(integrate_polar_tensor(one, {RadialRange{1.0, 0.5}}), ValidationError);
  CHECK_THROWS_AS(integrate_polar_sampled(one, {RadialRange{}}, Method::Tensor), UsageError);
  CHECK_THROWS_AS(tensor_options_for_budget(10, 1, false), UsageError);
  CHECK_THROWS_AS(method_from_string("simpson"), UsageError);
  for (Method m : {Method::Tensor, Method::QuasiRandom, Method::MonteCarlo}) CHECK(method_from_string(to_string(m)) == m);

  // Annulus area / pi.
  const auto e = integrate_polar_tensor(one, {RadialRange{0.5, 1.5}});
  CHECK(e.value.real() == doctest::Approx(2.0).epsilon(1e-13));

  std::vector<std::atomic<int>> hits(10000);
  parallel_for(10000, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) ++hits[i];
  });
  bool once = true;
  for (auto& h : hits) once = once && h == 1;
  CHECK(once);

  std::vector<cplx> terms(1000, cplx(0.1, -0.2));
  CHECK(std::abs(pairwise_sum(terms) - cplx(100.0, -200.0)) < 1e-12);
  CHECK(pairwise_sum({}) == cplx(0.0));
}
