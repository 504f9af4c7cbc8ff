#include "bsrg/quadrature.hpp"

#include "bsrg/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace bsrg {

std::string to_string(Method m) {
  switch (m) {
    case Method::Tensor: return "tensor";
    case Method::QuasiRandom: return "quasi-random";
    case Method::MonteCarlo: return "monte-carlo";
  }
  return "tensor";
}

Method method_from_string(const std::string& s) {
  if (s == "tensor") return Method::Tensor;
  if (s == "quasi-random" || s == "qmc") return Method::QuasiRandom;
  if (s == "monte-carlo" || s == "mc") return Method::MonteCarlo;
  throw UsageError("unknown quadrature method '" + s + "'");
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw UsageError("gauss_legendre: n must be positive");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute the derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

GaussRule composite_rule(double a, double b, int panels, int order) {
  if (panels < 1) throw UsageError("composite_rule: panels must be positive");
  const GaussRule g = gauss_legendre(order);
  GaussRule r;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) {
      r.x.push_back(mid + 0.5 * h * g.x[i]);
      r.w.push_back(0.5 * h * g.w[i]);
    }
  }
  return r;
}

GaussRule graded_rule(double a, double b, int panels, int order) {
  if (panels < 1) throw UsageError("graded_rule: panels must be positive");
  GaussRule r;
  double lo = a;
  for (int p = 0; p < panels; ++p) {
    const double hi = a + (b - a) * std::ldexp(1.0, p + 1 - panels);
    const GaussRule piece = composite_rule(lo, hi, 1, order);
    r.x.insert(r.x.end(), piece.x.begin(), piece.x.end());
    r.w.insert(r.w.end(), piece.w.begin(), piece.w.end());
    lo = hi;
  }
  return r;
}

void parallel_for(long count, const std::function<void(long, long)>& body) {
  const long workers = std::min<long>(std::max(1u, std::thread::hardware_concurrency()), std::max(1L, count / 256));
  if (workers <= 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (count + workers - 1) / workers;
  for (long w = 0; w < workers; ++w) {
    const long lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo < hi) pool.emplace_back(body, lo, hi);
  }
  for (auto& t : pool) t.join();
}

cplx pairwise_sum(const std::vector<cplx>& t) {
  if (t.empty()) return 0.0;
  std::vector<cplx> cur(t);
  while (cur.size() > 1) {
    std::vector<cplx> next((cur.size() + 1) / 2);
    for (size_t i = 0; i < next.size(); ++i)
      next[i] = cur[2 * i] + (2 * i + 1 < cur.size() ? cur[2 * i + 1] : cplx(0.0));
    cur.swap(next);
  }
  return cur[0];
}

namespace {

void check_box(const std::vector<RadialRange>& box) {
  if (box.empty()) throw UsageError("polar integration needs at least one coordinate");
  for (const auto& r : box)
    if (!(r.lo >= 0.0) || !(r.hi > r.lo)) throw ValidationError("radial range", "need 0 <= lo < hi");
}

// Nodes s_i and weights for int ds over [lo^2, hi^2].
GaussRule radial_rule(const RadialRange& r, int panels, int order, bool graded) {
  const double s0 = r.lo * r.lo;
  auto rule = [&](double a, double b) {
    return graded ? graded_rule(a, b, panels, order) : composite_rule(a, b, panels, order);
  };
  if (std::isfinite(r.hi)) return rule(s0, r.hi * r.hi);
  const GaussRule u = rule(0.0, 1.0);
  GaussRule out;
  for (size_t i = 0; i < u.x.size(); ++i) {
    const double om = 1.0 - u.x[i];
    out.x.push_back(s0 + u.x[i] / om);
    out.w.push_back(u.w[i] / (om * om));
  }
  return out;
}

struct Axis {
  std::vector<cplx> z;  // points on the complex coordinate
  std::vector<double> w;
};

Axis polar_axis(const RadialRange& r, int panels, int order, int n_angle, bool fixed_phase, bool graded) {
  const GaussRule s = radial_rule(r, panels, order, graded);
  const int na = fixed_phase ? 1 : n_angle;
  Axis a;
  for (size_t i = 0; i < s.x.size(); ++i) {
    const double rad = std::sqrt(s.x[i]);
    for (int k = 0; k < na; ++k) {
      a.z.push_back(std::polar(rad, 2.0 * std::numbers::pi * k / na));
      a.w.push_back(s.w[i] / na);
    }
  }
  return a;
}

cplx tensor_sum(const ComplexIntegrand& f, const std::vector<Axis>& axes, long& evals) {
  const int n = static_cast<int>(axes.size());
  long total = 1;
  for (const auto& a : axes) total *= static_cast<long>(a.z.size());
  std::vector<cplx> terms(total);
  parallel_for(total, [&](long lo, long hi) {
    Vec z(n);
    for (long i = lo; i < hi; ++i) {
      long rest = i;
      double w = 1.0;
      for (int j = n - 1; j >= 0; --j) {
        const long sz = static_cast<long>(axes[j].z.size());
        const long k = rest % sz;
        rest /= sz;
        z[j] = axes[j].z[k];
        w *= axes[j].w[k];
      }
      terms[i] = w * f(z);
    }
  });
  evals += total;
  return pairwise_sum(terms);
}

}  // namespace

IntegralEstimate integrate_polar_tensor(const ComplexIntegrand& f, const std::vector<RadialRange>& box,
                                        const TensorOptions& o) {
  check_box(box);
  if (o.order < 2 || o.n_angle < 2 || o.panels < 1) throw UsageError("integrate_polar_tensor: resolution too small");
  auto build = [&](int order, int n_angle) {
    std::vector<Axis> axes;
    for (size_t j = 0; j < box.size(); ++j)
      axes.push_back(polar_axis(box[j], o.panels, order, n_angle, o.u1_reduce && j == 0, o.graded));
    return axes;
  };
  IntegralEstimate e;
  e.method = Method::Tensor;
  e.value = tensor_sum(f, build(o.order, o.n_angle), e.evaluations);
  const cplx half = tensor_sum(f, build(std::max(2, o.order / 2), std::max(2, o.n_angle / 2)), e.evaluations);
  e.abs_error = std::abs(e.value - half);
  return e;
}

std::vector<double> halton_point(long index, int dims) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dims > 16) throw UsageError("halton_point: at most 16 dimensions");
  std::vector<double> x(dims);
  for (int d = 0; d < dims; ++d) {
    const int b = primes[d];
    double f = 1.0, r = 0.0;
    for (long i = index; i > 0; i /= b) {
      f /= b;
      r += f * static_cast<double>(i % b);
    }
    x[d] = r;
  }
  return x;
}

IntegralEstimate integrate_polar_sampled(const ComplexIntegrand& f, const std::vector<RadialRange>& box,
                                         Method method, const SamplingOptions& o) {
  check_box(box);
  if (method == Method::Tensor) throw UsageError("integrate_polar_sampled: use integrate_polar_tensor");
  if (o.points < 2) throw UsageError("integrate_polar_sampled: need at least two points");
  const int n = static_cast<int>(box.size());
  const int dims = 2 * n;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vec z(n);
  auto eval = [&](const std::vector<double>& u) {
    double w = 1.0;
    for (int j = 0; j < n; ++j) {
      const double s0 = box[j].lo * box[j].lo;
      double s;
      if (std::isfinite(box[j].hi)) {
        const double span = box[j].hi * box[j].hi - s0;
        s = s0 + span * u[2 * j];
        w *= span;
      } else {
        const double om = 1.0 - u[2 * j];
        s = s0 + u[2 * j] / om;
        w /= om * om;
      }
      const double phase = (o.u1_reduce && j == 0) ? 0.0 : 2.0 * std::numbers::pi * u[2 * j + 1];
      z[j] = std::polar(std::sqrt(s), phase);
    }
    return w * f(z);
  };

  IntegralEstimate e;
  e.method = method;
  if (method == Method::MonteCarlo) {
    std::vector<cplx> terms;
    double sq = 0.0;
    std::vector<double> u(dims);
    for (long i = 0; i < o.points; ++i) {
      for (auto& x : u) x = u01(rng);
      terms.push_back(eval(u));
    }
    e.value = pairwise_sum(terms) / static_cast<double>(o.points);
    for (const auto& t : terms) sq += std::norm(t - e.value);
    e.abs_error = std::sqrt(sq / (o.points - 1) / o.points);
    e.evaluations = o.points;
    return e;
  }
  const int shifts = std::max(2, o.shifts);
  const long per = std::max(1L, o.points / shifts);
  std::vector<cplx> means;
  for (int r = 0; r < shifts; ++r) {
    std::vector<double> shift(dims);
    for (auto& x : shift) x = u01(rng);
    std::vector<cplx> terms;
    for (long i = 1; i <= per; ++i) {
      std::vector<double> u = halton_point(i, dims);
      for (int d = 0; d < dims; ++d) u[d] = std::fmod(u[d] + shift[d], 1.0);
      terms.push_back(eval(u));
    }
    means.push_back(pairwise_sum(terms) / static_cast<double>(per));
    e.evaluations += per;
  }
  e.value = pairwise_sum(means) / static_cast<double>(shifts);
  double sq = 0.0;
  for (const auto& m : means) sq += std::norm(m - e.value);
  e.abs_error = std::sqrt(sq / (shifts - 1) / shifts);
  return e;
}

TensorOptions tensor_options_for_budget(long budget, int complex_dims, bool u1_reduce) {
  if (budget < 16) throw UsageError("budget too small for tensor quadrature");
  const int real_dims = 2 * complex_dims - (u1_reduce ? 1 : 0);
  const double q = std::pow(static_cast<double>(budget) / 1.2, 1.0 / real_dims);
  TensorOptions o;
  o.u1_reduce = u1_reduce;
  o.panels = q >= 32 ? 4 : (q >= 8 ? 2 : 1);
  o.order = std::max(2, static_cast<int>(q / o.panels));
  o.n_angle = std::max(2, static_cast<int>(q));
  return o;
}

IntegralEstimate integrate_real_slice(const ExponentFn& exponent, const SliceRegion& region, Method method,
                                      long budget, std::uint64_t seed, bool u1_reduce, double rel_tol) {
  const ComplexIntegrand f = [&](const Vec& z) -> cplx {
    if (region.indicator && !region.indicator(z)) return 0.0;
    return std::exp(-exponent(z.conjugate(), z));
  };
  IntegralEstimate e;
  if (method == Method::Tensor) {
    e = integrate_polar_tensor(f, region.box,
                               tensor_options_for_budget(budget, static_cast<int>(region.box.size()), u1_reduce));
  } else {
    SamplingOptions o;
    o.points = budget;
    o.seed = seed;
    o.u1_reduce = u1_reduce;
    e = integrate_polar_sampled(f, region.box, method, o);
  }
  e.partial = rel_tol > 0.0 && e.abs_error > rel_tol * std::abs(e.value);
  return e;
}

}  // namespace bsrg
