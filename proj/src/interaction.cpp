#include "bsrg/interaction.hpp"

#include "bsrg/errors.hpp"

#include <array>
#include <map>

namespace bsrg {

namespace {

using Offset = std::vector<int>;

Offset sub(const Offset& a, const Offset& b) {
  Offset r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

int displaced(const Lattice& lat, int site, const Offset& o) {
  for (int d = 0; d < lat.dims(); ++d)
    if (o[d] != 0) site = lat.shift(site, d, o[d]);
  return site;
}

void check_term(const KernelTerm& t, size_t dims) {
  if (t.o2.size() != dims || t.o3.size() != dims || t.o4.size() != dims)
    throw ShapeError("kernel term offsets must all have the same dimension");
  if (!(t.w >= 0.0)) throw ValidationError("kernel", "negative kernel weight");
}

// Site indices of the four factors phi_*(u), phi(u+o2), phi_*(u+o3), phi(u+o4).
std::array<int, 4> positions(const Lattice& lat, int u, const KernelTerm& t) {
  if (static_cast<int>(t.o2.size()) != lat.dims())
    throw ShapeError("kernel offsets do not match the lattice dimension");
  return {u, displaced(lat, u, t.o2), displaced(lat, u, t.o3), displaced(lat, u, t.o4)};
}

}  // namespace

Interaction Interaction::local(double lambda_n) {
  if (!(lambda_n >= 0.0)) throw ValidationError("lambda_n", "must be non-negative");
  Interaction v;
  v.kind_ = Kind::LocalQuartic;
  v.terms_ = {KernelTerm{{}, {}, {}, lambda_n}};
  return v;
}

Interaction Interaction::kernel(const std::vector<KernelTerm>& terms) {
  if (terms.empty()) throw ValidationError("kernel", "no kernel terms");
  const size_t dims = terms.front().o2.size();
  std::map<std::array<Offset, 3>, double> merged;
  for (const auto& t : terms) {
    check_term(t, dims);
    // Positions p1..p4 with p1 = 0; slots alternate phi_*, phi.
    const std::array<Offset, 4> base = {Offset(dims, 0), t.o2, t.o3, t.o4};
    for (int g = 0; g < 8; ++g) {
      std::array<Offset, 4> p = base;
      if (g & 1) std::swap(p[1], p[3]);
      if (g & 2) std::swap(p[0], p[2]);
      if (g & 4) {
        std::swap(p[0], p[2]);
        std::swap(p[1], p[3]);
      }
      merged[{sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0])}] += t.w / 8.0;
    }
  }
  Interaction v;
  v.kind_ = Kind::Kernel;
  for (const auto& [key, w] : merged) v.terms_.push_back(KernelTerm{key[0], key[1], key[2], w});
  return v;
}

Interaction Interaction::nearest_neighbor_smeared(double lambda_n, int dims) {
  if (!(lambda_n >= 0.0)) throw ValidationError("lambda_n", "must be non-negative");
  std::vector<KernelTerm> terms;
  const Offset zero(dims, 0);
  terms.push_back(KernelTerm{zero, zero, zero, 0.5 * lambda_n});
  for (int d = 0; d < dims; ++d) {
    for (int s : {-1, 1}) {
      Offset e(dims, 0);
      e[d] = s;
      // |phi(u)|^2 |phi(u+e)|^2 density product.
      terms.push_back(KernelTerm{zero, e, e, 0.5 * lambda_n / (2 * dims)});
    }
  }
  return kernel(terms);
}

Interaction Interaction::with_coupling(double r) const {
  const double cur = coupling_rn(*this);
  Interaction v = *this;
  if (cur == 0.0) {
    if (r != 0.0) throw ValidationError("kernel", "cannot rescale a zero kernel");
    return v;
  }
  for (auto& t : v.terms_) t.w *= r / cur;
  return v;
}

double coupling_rn(const Interaction& v) {
  double r = 0.0;
  for (const auto& t : v.terms()) r += t.w;
  return r;
}

namespace {

// Local terms have empty offset vectors; expand them to the lattice dimension.
KernelTerm expanded(const KernelTerm& t, int dims) {
  if (!t.o2.empty()) return t;
  return KernelTerm{Offset(dims, 0), Offset(dims, 0), Offset(dims, 0), t.w};
}

}  // namespace

cplx eval_V(const Field& phi_star, const Field& phi, const Interaction& v) {
  require_same_lattice(phi_star.lattice(), phi.lattice(), "eval_V");
  const Lattice& lat = phi.lattice();
  cplx s = 0.0;
  for (const auto& t0 : v.terms()) {
    const KernelTerm t = expanded(t0, lat.dims());
    cplx acc = 0.0;
    for (int u = 0; u < lat.sites(); ++u) {
      const auto p = positions(lat, u, t);
      acc += phi_star[p[0]] * phi[p[1]] * phi_star[p[2]] * phi[p[3]];
    }
    s += t.w * acc;
  }
  return 0.5 * lat.cell_volume() * s;
}

Field eval_V_prime(const Field& a, const Field& b, const Field& c, const Interaction& v) {
  require_same_lattice(a.lattice(), b.lattice(), "eval_V_prime");
  require_same_lattice(a.lattice(), c.lattice(), "eval_V_prime");
  const Lattice& lat = a.lattice();
  Field out(lat);
  for (const auto& t0 : v.terms()) {
    const KernelTerm t = expanded(t0, lat.dims());
    for (int u = 0; u < lat.sites(); ++u) {
      const auto p = positions(lat, u, t);
      out[u] += t.w * a[p[1]] * b[p[2]] * c[p[3]];
    }
  }
  return out;
}

VGradient grad_V(const Field& phi_star, const Field& phi, const Interaction& v) {
  require_same_lattice(phi_star.lattice(), phi.lattice(), "grad_V");
  const Lattice& lat = phi.lattice();
  VGradient g{Field(lat), Field(lat)};
  for (const auto& t0 : v.terms()) {
    const KernelTerm t = expanded(t0, lat.dims());
    const double c = 0.5 * t.w;
    for (int u = 0; u < lat.sites(); ++u) {
      const auto p = positions(lat, u, t);
      const cplx f0 = phi_star[p[0]], f1 = phi[p[1]], f2 = phi_star[p[2]], f3 = phi[p[3]];
      g.star[p[0]] += c * f1 * f2 * f3;
      g.star[p[2]] += c * f0 * f1 * f3;
      g.plain[p[1]] += c * f0 * f2 * f3;
      g.plain[p[3]] += c * f0 * f1 * f2;
    }
  }
  return g;
}

VHessian hessian_V(const Field& phi_star, const Field& phi, const Interaction& v) {
  require_same_lattice(phi_star.lattice(), phi.lattice(), "hessian_V");
  const Lattice& lat = phi.lattice();
  const int n = lat.sites();
  VHessian h{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)};
  for (const auto& t0 : v.terms()) {
    const KernelTerm t = expanded(t0, lat.dims());
    const double c = 0.5 * t.w;
    for (int u = 0; u < n; ++u) {
      const auto p = positions(lat, u, t);
      const std::array<cplx, 4> f = {phi_star[p[0]], phi[p[1]], phi_star[p[2]], phi[p[3]]};
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          if (i == j) continue;
          cplx rest = c;
          for (int k = 0; k < 4; ++k)
            if (k != i && k != j) rest *= f[k];
          const bool star_i = i % 2 == 0, star_j = j % 2 == 0;
          Mat& target = star_i ? (star_j ? h.star_star : h.star_plain)
                               : (star_j ? h.plain_star : h.plain_plain);
          target(p[i], p[j]) += rest;
        }
      }
    }
  }
  return h;
}

nlohmann::json interaction_to_json(const Interaction& v) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : v.terms()) terms.push_back({{"o2", t.o2}, {"o3", t.o3}, {"o4", t.o4}, {"w", t.w}});
  return {{"kind", v.kind() == Interaction::Kind::LocalQuartic ? "local" : "kernel"},
          {"r_n", coupling_rn(v)},
          {"terms", terms}};
}

Interaction interaction_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "local");
  if (kind == "local") return Interaction::local(j.value("lambda_n", j.value("r_n", 0.0)));
  if (kind == "kernel") {
    std::vector<KernelTerm> terms;
    for (const auto& t : j.at("terms"))
      terms.push_back(KernelTerm{t.at("o2").get<Offset>(), t.at("o3").get<Offset>(),
                                 t.at("o4").get<Offset>(), t.at("w").get<double>()});
    return Interaction::kernel(terms);
  }
  if (kind == "smeared")
    return Interaction::nearest_neighbor_smeared(j.at("lambda_n").get<double>(), j.at("dims").get<int>());
  throw ValidationError("kind", "unknown interaction kind '" + kind + "'");
}

}  // namespace bsrg
