#include "bsrg/lattice.hpp"

#include "bsrg/errors.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace bsrg {

std::string to_string(Level level) {
  switch (level) {
    case Level::Unit: return "unit";
    case Level::Coarse: return "coarse";
    case Level::Fine: return "fine";
  }
  return "unit";
}

Level level_from_string(const std::string& s) {
  if (s == "unit") return Level::Unit;
  if (s == "coarse") return Level::Coarse;
  if (s == "fine") return Level::Fine;
  throw ValidationError("level", "unknown lattice level '" + s + "'");
}

Lattice::Lattice(int spatial_dim, std::vector<int> extent, std::vector<double> spacing, int L,
                 int scale, Level level)
    : spatial_dim_(spatial_dim),
      extent_(std::move(extent)),
      spacing_(std::move(spacing)),
      L_(L),
      scale_(scale),
      level_(level) {
  if (spatial_dim_ < 0 || spatial_dim_ > 3)
    throw ValidationError("spatial_dim", "must be between 0 and 3");
  if (static_cast<int>(extent_.size()) != dims() || static_cast<int>(spacing_.size()) != dims())
    throw ShapeError("lattice: need one extent and one spacing per direction");
  if (L_ < 2) throw ValidationError("L", "block ratio must be at least 2");
  stride_.assign(dims(), 1);
  sites_ = 1;
  cell_volume_ = 1.0;
  for (int d = dims() - 1; d >= 0; --d) {
    if (extent_[d] < 1) throw ValidationError("extent", "extents must be positive");
    if (!(spacing_[d] > 0.0)) throw ValidationError("spacing", "spacings must be positive");
    stride_[d] = sites_;
    sites_ *= extent_[d];
    cell_volume_ *= spacing_[d];
  }
}

std::vector<int> Lattice::coords(int index) const {
  std::vector<int> c(dims());
  for (int d = 0; d < dims(); ++d) c[d] = (index / stride_[d]) % extent_[d];
  return c;
}

int Lattice::index(const std::vector<int>& c) const {
  int idx = 0;
  for (int d = 0; d < dims(); ++d) {
    int x = c[d] % extent_[d];
    if (x < 0) x += extent_[d];
    idx += x * stride_[d];
  }
  return idx;
}

int Lattice::shift(int index, int dir, int step) const {
  const int x = (index / stride_[dir]) % extent_[dir];
  int y = (x + step) % extent_[dir];
  if (y < 0) y += extent_[dir];
  return index + (y - x) * stride_[dir];
}

bool Lattice::operator==(const Lattice& o) const {
  if (spatial_dim_ != o.spatial_dim_ || extent_ != o.extent_ || L_ != o.L_ || level_ != o.level_)
    return false;
  for (int d = 0; d < dims(); ++d)
    if (std::abs(spacing_[d] - o.spacing_[d]) > 1e-14 * spacing_[d]) return false;
  return true;
}

std::string Lattice::describe() const {
  std::ostringstream os;
  os << to_string(level_) << "(d_s=" << spatial_dim_ << ", extents=";
  for (int d = 0; d < dims(); ++d) os << (d ? "x" : "") << extent_[d];
  os << ", L=" << L_ << ", n=" << scale_ << ")";
  return os.str();
}

Lattice make_lattice(int spatial_dim, const std::vector<int>& extents, int L, int n, Level level) {
  const int dims = spatial_dim + 1;
  if (static_cast<int>(extents.size()) != dims)
    throw ShapeError("make_lattice: expected " + std::to_string(dims) + " extents");
  if (L < 2) throw ValidationError("L", "block ratio must be at least 2");
  std::vector<double> spacing(dims, 1.0);
  std::vector<int> ext = extents;
  switch (level) {
    case Level::Unit:
      break;
    case Level::Fine:
      spacing[0] = std::pow(static_cast<double>(L), -2.0 * n);
      for (int d = 1; d < dims; ++d) spacing[d] = std::pow(static_cast<double>(L), -1.0 * n);
      break;
    case Level::Coarse:
      for (int d = 0; d < dims; ++d) {
        const int b = d == 0 ? L * L : L;
        if (ext[d] % b != 0)
          throw DivisibilityError("make_lattice: extent " + std::to_string(ext[d]) +
                                  " in direction " + std::to_string(d) +
                                  " is not divisible by block size " + std::to_string(b));
        ext[d] /= b;
        spacing[d] = b;
      }
      break;
  }
  return Lattice(spatial_dim, ext, spacing, L, n, level);
}

Lattice refine(const Lattice& unit, int n) {
  if (unit.level() != Level::Unit) throw ShapeError("refine: expected a unit lattice");
  if (n < 0) throw ValidationError("n", "refinement depth must be non-negative");
  std::vector<int> ext = unit.extent();
  long factor_t = 1, factor_s = 1;
  for (int i = 0; i < n; ++i) {
    factor_t *= unit.L() * unit.L();
    factor_s *= unit.L();
  }
  ext[0] *= static_cast<int>(factor_t);
  for (int d = 1; d < unit.dims(); ++d) ext[d] *= static_cast<int>(factor_s);
  return make_lattice(unit.spatial_dim(), ext, unit.L(), n, Level::Fine);
}

Lattice coarsen(const Lattice& unit) {
  if (unit.level() != Level::Unit) throw ShapeError("coarsen: expected a unit lattice");
  Lattice c = make_lattice(unit.spatial_dim(), unit.extent(), unit.L(), unit.scale(), Level::Coarse);
  return c;
}

Lattice single_block_coarse(const Lattice& unit) {
  if (unit.sites() != 1) throw ShapeError("single_block_coarse: unit lattice must have one site");
  std::vector<double> spacing(unit.dims());
  for (int d = 0; d < unit.dims(); ++d) spacing[d] = unit.block(d);
  return Lattice(unit.spatial_dim(), std::vector<int>(unit.dims(), 1), spacing, unit.L(),
                 unit.scale(), Level::Coarse);
}

// ---------------------------------------------------------------------------

Field::Field(Lattice lattice) : lattice_(std::move(lattice)), values_(Vec::Zero(lattice_.sites())) {}

Field::Field(Lattice lattice, Vec values) : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_.sites())
    throw ShapeError("Field: value count " + std::to_string(values_.size()) +
                     " does not match site count " + std::to_string(lattice_.sites()));
}

Field Field::constant(const Lattice& lattice, cplx c) {
  return Field(lattice, Vec::Constant(lattice.sites(), c));
}

Field Field::delta(const Lattice& lattice, int site, cplx c) {
  Field f(lattice);
  f[site] = c;
  return f;
}

Field Field::plane_wave(const Lattice& lattice, const std::vector<double>& k) {
  Field f(lattice);
  for (int i = 0; i < lattice.sites(); ++i) {
    const auto c = lattice.coords(i);
    double phase = 0.0;
    for (int d = 0; d < lattice.dims(); ++d) phase += k[d] * c[d] * lattice.spacing(d);
    f[i] = std::polar(1.0, phase);
  }
  return f;
}

bool Field::all_finite() const {
  for (int i = 0; i < size(); ++i)
    if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag())) return false;
  return true;
}

Field Field::conj() const { return Field(lattice_, values_.conjugate()); }

Field& Field::operator+=(const Field& other) {
  require_same_lattice(lattice_, other.lattice_, "Field::operator+=");
  values_ += other.values_;
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_lattice(lattice_, other.lattice_, "Field::operator-=");
  values_ -= other.values_;
  return *this;
}

Field& Field::operator*=(cplx s) {
  values_ *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx s, Field a) { return a *= s; }

void require_same_lattice(const Lattice& a, const Lattice& b, const char* where) {
  if (a != b) throw ShapeError(std::string(where) + ": lattice mismatch " + a.describe() + " vs " + b.describe());
}

// ---------------------------------------------------------------------------

Field forward_difference(const Field& f, int dir) {
  const Lattice& lat = f.lattice();
  if (dir < 0 || dir >= lat.dims()) throw UsageError("forward_difference: invalid direction");
  Field out(lat);
  const double h = lat.spacing(dir);
  for (int i = 0; i < lat.sites(); ++i) out[i] = (f[lat.shift(i, dir, 1)] - f[i]) / h;
  return out;
}

Field backward_difference(const Field& f, int dir) {
  const Lattice& lat = f.lattice();
  if (dir < 0 || dir >= lat.dims()) throw UsageError("backward_difference: invalid direction");
  Field out(lat);
  const double h = lat.spacing(dir);
  for (int i = 0; i < lat.sites(); ++i) out[i] = (f[i] - f[lat.shift(i, dir, -1)]) / h;
  return out;
}

double sup_norm(const Field& f) {
  return f.size() == 0 ? 0.0 : f.values().cwiseAbs().maxCoeff();
}

double lp_norm(const Field& f, double p) {
  double s = 0.0;
  for (int i = 0; i < f.size(); ++i) s += std::pow(std::abs(f[i]), p);
  return std::pow(f.lattice().cell_volume() * s, 1.0 / p);
}

NormReport norms(const Field& f) {
  NormReport r;
  r.sup = sup_norm(f);
  r.l2 = lp_norm(f, 2.0);
  r.l4 = lp_norm(f, 4.0);
  for (int d = 0; d < f.lattice().dims(); ++d) {
    const Field g = forward_difference(f, d);
    r.grad_sup = std::max(r.grad_sup, sup_norm(g));
    r.grad_l2 += lp_norm(g, 2.0);
  }
  return r;
}

cplx pairing(const Field& f, const Field& g) {
  require_same_lattice(f.lattice(), g.lattice(), "pairing");
  return f.lattice().cell_volume() * (f.values().array() * g.values().array()).sum();
}

// ---------------------------------------------------------------------------

std::vector<double> momentum(const Lattice& lat, int index) {
  const auto m = lat.coords(index);
  std::vector<double> k(lat.dims());
  for (int d = 0; d < lat.dims(); ++d) {
    int md = m[d];
    if (2 * md > lat.extent(d)) md -= lat.extent(d);
    k[d] = 2.0 * std::numbers::pi * md / (lat.extent(d) * lat.spacing(d));
  }
  return k;
}

namespace {

// Separable DFT along every axis with kernel exp(sign * 2 pi i m j / n).
Vec separable_dft(const Lattice& lat, const Vec& in, double sign) {
  Vec cur = in;
  for (int d = 0; d < lat.dims(); ++d) {
    const int n = lat.extent(d);
    if (n == 1) continue;
    Vec next = Vec::Zero(cur.size());
    std::vector<cplx> twiddle(n);
    for (int j = 0; j < n; ++j) twiddle[j] = std::polar(1.0, sign * 2.0 * std::numbers::pi * j / n);
    for (int i = 0; i < lat.sites(); ++i) {
      const auto c = lat.coords(i);
      if (c[d] != 0) continue;
      for (int m = 0; m < n; ++m) {
        cplx acc = 0.0;
        for (int j = 0; j < n; ++j) acc += twiddle[(static_cast<long>(m) * j) % n] * cur[lat.shift(i, d, j)];
        next[lat.shift(i, d, m)] = acc;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

Field dft(const Field& f) {
  const double norm = 1.0 / std::sqrt(static_cast<double>(f.size()));
  return Field(f.lattice(), norm * separable_dft(f.lattice(), f.values(), -1.0));
}

Field inverse_dft(const Field& fhat) {
  const double norm = 1.0 / std::sqrt(static_cast<double>(fhat.size()));
  return Field(fhat.lattice(), norm * separable_dft(fhat.lattice(), fhat.values(), 1.0));
}

// ---------------------------------------------------------------------------

nlohmann::json lattice_to_json(const Lattice& lat) {
  return {{"spatial_dim", lat.spatial_dim()}, {"extent", lat.extent()}, {"spacing", lat.spacing()},
          {"L", lat.L()},                     {"scale", lat.scale()},   {"level", to_string(lat.level())}};
}

Lattice lattice_from_json(const nlohmann::json& j) {
  return Lattice(j.at("spatial_dim").get<int>(), j.at("extent").get<std::vector<int>>(),
                 j.at("spacing").get<std::vector<double>>(), j.at("L").get<int>(),
                 j.at("scale").get<int>(), level_from_string(j.at("level").get<std::string>()));
}

nlohmann::json field_to_json(const Field& f) {
  nlohmann::json values = nlohmann::json::array();
  for (int i = 0; i < f.size(); ++i) values.push_back({i, f[i].real(), f[i].imag()});
  return {{"lattice", lattice_to_json(f.lattice())}, {"values", values}};
}

Field field_from_json(const nlohmann::json& j) {
  Field f(lattice_from_json(j.at("lattice")));
  for (const auto& rec : j.at("values")) {
    const int site = rec.at(0).get<int>();
    if (site < 0 || site >= f.size()) throw ShapeError("field_from_json: site index out of range");
    f[site] = cplx(rec.at(1).get<double>(), rec.at(2).get<double>());
  }
  if (!f.all_finite()) throw ValidationError("values", "non-finite field value");
  return f;
}

void write_field_csv(std::ostream& os, const Field& f) {
  os << "# lattice: " << lattice_to_json(f.lattice()).dump() << "\n";
  os << "site,re,im\n";
  os << std::setprecision(17);
  for (int i = 0; i < f.size(); ++i) os << i << "," << f[i].real() << "," << f[i].imag() << "\n";
}

Field read_field_csv(std::istream& is) {
  std::string line;
  const std::string tag = "# lattice: ";
  if (!std::getline(is, line) || line.rfind(tag, 0) != 0)
    throw ValidationError("csv", "missing lattice header");
  Field f(lattice_from_json(nlohmann::json::parse(line.substr(tag.size()))));
  std::getline(is, line);  // column header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    std::getline(row, c, ',');
    const int site = std::stoi(a);
    if (site < 0 || site >= f.size()) throw ShapeError("read_field_csv: site index out of range");
    f[site] = cplx(std::stod(b), std::stod(c));
  }
  if (!f.all_finite()) throw ValidationError("values", "non-finite field value");
  return f;
}

}  // namespace bsrg
