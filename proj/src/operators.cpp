#include "bsrg/operators.hpp"

#include "bsrg/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace bsrg {

LinOp::LinOp(Lattice domain, Lattice codomain, Mat matrix, bool translation_invariant)
    : domain_(std::move(domain)),
      codomain_(std::move(codomain)),
      matrix_(std::move(matrix)),
      translation_invariant_(translation_invariant) {
  if (matrix_.rows() != codomain_.sites() || matrix_.cols() != domain_.sites())
    throw ShapeError("LinOp: matrix is " + std::to_string(matrix_.rows()) + "x" +
                     std::to_string(matrix_.cols()) + ", expected " +
                     std::to_string(codomain_.sites()) + "x" + std::to_string(domain_.sites()));
  if (translation_invariant_) {
    if (domain_ != codomain_) throw ShapeError("LinOp: translation invariance needs a square operator");
    if (!commutes_with_translations(matrix_, domain_))
      throw ValidationError("translation_invariant", "matrix does not commute with translations");
  }
}

LinOp LinOp::identity(const Lattice& lattice, cplx scale) {
  return LinOp(lattice, lattice, scale * Mat::Identity(lattice.sites(), lattice.sites()), true);
}

Field LinOp::apply(const Field& f) const {
  require_same_lattice(f.lattice(), domain_, "LinOp::apply");
  return Field(codomain_, matrix_ * f.values());
}

LinOp LinOp::adjoint() const {
  const double w = codomain_.cell_volume() / domain_.cell_volume();
  LinOp out;
  out.domain_ = codomain_;
  out.codomain_ = domain_;
  out.matrix_ = w * matrix_.transpose();
  out.translation_invariant_ = translation_invariant_;
  return out;
}

LinOp LinOp::transpose() const {
  LinOp out = *this;
  std::swap(out.domain_, out.codomain_);
  out.matrix_ = matrix_.transpose();
  return out;
}

LinOp LinOp::inverse() const {
  if (domain_.sites() != codomain_.sites()) throw ShapeError("LinOp::inverse: operator is not square");
  LinOp out;
  out.domain_ = codomain_;
  out.codomain_ = domain_;
  out.matrix_ = checked_inverse(matrix_, "LinOp::inverse");
  out.translation_invariant_ = translation_invariant_;
  return out;
}

LinOp& LinOp::operator+=(const LinOp& o) {
  require_same_lattice(domain_, o.domain_, "LinOp::operator+=");
  require_same_lattice(codomain_, o.codomain_, "LinOp::operator+=");
  matrix_ += o.matrix_;
  translation_invariant_ = translation_invariant_ && o.translation_invariant_;
  return *this;
}

LinOp& LinOp::operator-=(const LinOp& o) {
  require_same_lattice(domain_, o.domain_, "LinOp::operator-=");
  require_same_lattice(codomain_, o.codomain_, "LinOp::operator-=");
  matrix_ -= o.matrix_;
  translation_invariant_ = translation_invariant_ && o.translation_invariant_;
  return *this;
}

LinOp& LinOp::operator*=(cplx s) {
  matrix_ *= s;
  return *this;
}

LinOp operator+(LinOp a, const LinOp& b) { return a += b; }
LinOp operator-(LinOp a, const LinOp& b) { return a -= b; }
LinOp operator*(cplx s, LinOp a) { return a *= s; }

LinOp operator*(const LinOp& a, const LinOp& b) {
  require_same_lattice(a.domain(), b.codomain(), "LinOp composition");
  return LinOp(b.domain(), a.codomain(), a.matrix() * b.matrix(),
               a.translation_invariant() && b.translation_invariant());
}

bool commutes_with_translations(const Mat& m, const Lattice& lat, double tol) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (int d = 0; d < lat.dims(); ++d) {
    for (int i = 0; i < lat.sites(); ++i) {
      const int si = lat.shift(i, d, 1);
      for (int j = 0; j < lat.sites(); ++j) {
        if (std::abs(m(si, lat.shift(j, d, 1)) - m(i, j)) > tol * scale) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

double FlowParams::kappa_next() const { return std::pow(static_cast<double>(L), eta) * kappa_n; }

double FlowParams::kappa_prime_next() const {
  return std::pow(static_cast<double>(L), eta_prime) * kappa_prime_n;
}

void FlowParams::validate_structure() const {
  if (n < 0) throw ValidationError("n", "scale index must be non-negative");
  if (n_p < n) throw ValidationError("n_p", "must be at least n");
  if (L < 2) throw ValidationError("L", "block ratio must be at least 2");
  if (!(a > 0.0)) throw ValidationError("a", "must be positive");
  if (!(a_n >= 0.5 && a_n <= 2.0)) throw ValidationError("a_n", "must lie in [1/2, 2]");
  if (!std::isfinite(mu_n)) throw ValidationError("mu_n", "must be finite");
  if (!(lambda_n >= 0.0)) throw ValidationError("lambda_n", "must be non-negative");
  if (!(v0 > 0.0)) throw ValidationError("v0", "must be positive");
  if (!(eps > 0.0)) throw ValidationError("eps", "must be positive");
  if (!(kappa_n > 0.0)) throw ValidationError("kappa_n", "must be positive");
  if (!(kappa_prime_n > 0.0)) throw ValidationError("kappa_prime_n", "must be positive");
  if (!(eta < 7.0 / 8.0)) throw ValidationError("eta", "must be below 7/8");
  if (!(eta_prime < 0.75)) throw ValidationError("eta_prime", "must be below 3/4");
  if (!(c0 > 0.0 && c0 < 1.0)) throw ValidationError("c0", "must lie in (0, 1)");
  if (!(r_n > 0.0)) throw ValidationError("r_n", "must be positive");
  if (!std::isfinite(drift)) throw ValidationError("drift", "must be finite");
}

void FlowParams::validate() const {
  validate_structure();
  if (!(std::abs(mu_n) < 4.0 * std::pow(v0, 5.0 * eps)))
    throw ValidationError("mu_n", "|mu_n| must be below 4 v0^(5 eps)");
  if (!(lambda_n * kappa_n * kappa_n < std::pow(v0, 1.5 * eps)))
    throw ValidationError("lambda_n", "lambda_n kappa_n^2 must be below v0^(3 eps/2)");
}

nlohmann::json params_to_json(const FlowParams& p) {
  return {{"n", p.n},         {"n_p", p.n_p},         {"L", p.L},
          {"a", p.a},         {"a_n", p.a_n},         {"mu_n", p.mu_n},
          {"lambda_n", p.lambda_n}, {"v0", p.v0},     {"eps", p.eps},
          {"kappa_n", p.kappa_n},   {"kappa_prime_n", p.kappa_prime_n},
          {"eta", p.eta},     {"eta_prime", p.eta_prime}, {"c0", p.c0},
          {"r_n", p.r_n},     {"drift", p.drift}};
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(key, e.what());
  }
}

}  // namespace

FlowParams params_from_json(const nlohmann::json& j, const FlowParams& defaults) {
  FlowParams p = defaults;
  read_opt(j, "n", p.n);
  read_opt(j, "n_p", p.n_p);
  read_opt(j, "L", p.L);
  read_opt(j, "a", p.a);
  read_opt(j, "a_n", p.a_n);
  read_opt(j, "mu_n", p.mu_n);
  read_opt(j, "lambda_n", p.lambda_n);
  read_opt(j, "v0", p.v0);
  read_opt(j, "eps", p.eps);
  read_opt(j, "kappa_n", p.kappa_n);
  read_opt(j, "kappa_prime_n", p.kappa_prime_n);
  read_opt(j, "eta", p.eta);
  read_opt(j, "eta_prime", p.eta_prime);
  read_opt(j, "c0", p.c0);
  read_opt(j, "r_n", p.r_n);
  read_opt(j, "drift", p.drift);
  return p;
}

double flow_a_n(double a, int L, int n) {
  const double L2 = static_cast<double>(L) * L;
  double ak = a;
  for (int k = 0; k < n; ++k) ak = L2 * ak / (L2 + ak);
  return std::clamp(ak, 0.5, 2.0);
}

FlowParams CouplingLaw::at(double v0) const {
  FlowParams p;
  p.n = n;
  p.n_p = n_p;
  p.L = L;
  p.a = a;
  p.a_n = flow_a_n(a, L, n);
  p.v0 = v0;
  p.eps = eps;
  p.lambda_n = lambda_ratio * v0;
  p.kappa_n = std::sqrt(kappa_coeff * std::pow(v0, 2.0 * eps - 1.0));
  p.kappa_prime_n = kappa_prime_ratio * p.kappa_n;
  p.mu_n = mu_frac * 4.0 * std::pow(v0, 5.0 * eps);
  p.eta = eta;
  p.eta_prime = eta_prime;
  p.c0 = c0;
  p.r_n = r_fraction * std::pow(c0, 0.25) * p.kappa_prime_n;
  p.drift = drift;
  return p;
}

nlohmann::json law_to_json(const CouplingLaw& l) {
  return {{"n", l.n},         {"n_p", l.n_p},       {"L", l.L},
          {"a", l.a},         {"eps", l.eps},       {"c0", l.c0},
          {"eta", l.eta},     {"eta_prime", l.eta_prime},
          {"kappa_coeff", l.kappa_coeff},   {"kappa_prime_ratio", l.kappa_prime_ratio},
          {"lambda_ratio", l.lambda_ratio}, {"mu_frac", l.mu_frac},
          {"r_fraction", l.r_fraction},     {"drift", l.drift}};
}

CouplingLaw law_from_json(const nlohmann::json& j) {
  CouplingLaw l;
  read_opt(j, "n", l.n);
  read_opt(j, "n_p", l.n_p);
  read_opt(j, "L", l.L);
  read_opt(j, "a", l.a);
  read_opt(j, "eps", l.eps);
  read_opt(j, "c0", l.c0);
  read_opt(j, "eta", l.eta);
  read_opt(j, "eta_prime", l.eta_prime);
  read_opt(j, "kappa_coeff", l.kappa_coeff);
  read_opt(j, "kappa_prime_ratio", l.kappa_prime_ratio);
  read_opt(j, "lambda_ratio", l.lambda_ratio);
  read_opt(j, "mu_frac", l.mu_frac);
  read_opt(j, "r_fraction", l.r_fraction);
  read_opt(j, "drift", l.drift);
  return l;
}

// ---------------------------------------------------------------------------

LinOp block_average(const Lattice& fine, const Lattice& coarse) {
  if (fine.dims() != coarse.dims()) throw ShapeError("block_average: dimension mismatch");
  std::vector<int> ratio(fine.dims());
  int block_sites = 1;
  for (int d = 0; d < fine.dims(); ++d) {
    if (fine.extent(d) % coarse.extent(d) != 0)
      throw ShapeError("block_average: " + coarse.describe() + " does not block " + fine.describe());
    ratio[d] = fine.extent(d) / coarse.extent(d);
    block_sites *= ratio[d];
  }
  Mat m = Mat::Zero(coarse.sites(), fine.sites());
  for (int x = 0; x < fine.sites(); ++x) {
    auto c = fine.coords(x);
    for (int d = 0; d < fine.dims(); ++d) c[d] /= ratio[d];
    m(coarse.index(c), x) = 1.0 / block_sites;
  }
  return LinOp(fine, coarse, std::move(m));
}

LinOp block_average_Q(const Lattice& unit, const Lattice& coarse) {
  if (unit.sites() > 1) {
    for (int d = 0; d < unit.dims(); ++d) {
      if (coarse.extent(d) * unit.block(d) != unit.extent(d))
        throw ShapeError("block_average_Q: " + coarse.describe() + " is not the blocked lattice of " +
                         unit.describe());
    }
  }
  return block_average(unit, coarse);
}

LinOp block_average_difference(const Lattice& unit, const Lattice& coarse, int nu) {
  if (nu < 0 || nu >= unit.dims()) throw UsageError("block_average_difference: invalid direction");
  const LinOp q = block_average_Q(unit, coarse);
  const int steps = unit.sites() > 1 ? unit.block(nu) : 1;
  Mat m = Mat::Zero(coarse.sites(), unit.sites());
  for (int x = 0; x < unit.sites(); ++x) {
    for (int y = 0; y < coarse.sites(); ++y) {
      const cplx w = q.matrix()(y, x);
      if (w == cplx(0.0)) continue;
      for (int j = 0; j < steps; ++j) m(y, unit.shift(x, nu, j)) += w / static_cast<double>(steps);
    }
  }
  return LinOp(unit, coarse, std::move(m));
}

LinOp compose_Qn(const FlowParams& params, const Lattice& fine, const Lattice& unit) {
  const int n = params.n;
  if (n == 0) {
    require_same_lattice(fine, unit, "compose_Qn");
    return LinOp::identity(unit);
  }
  const Lattice expected = refine(unit, n);
  if (fine != expected)
    throw ShapeError("compose_Qn: " + fine.describe() + " is not the " + std::to_string(n) +
                     "-fold refinement of " + unit.describe());
  LinOp total = block_average(refine(unit, 1), unit);
  for (int k = 2; k <= n; ++k) total = total * block_average(refine(unit, k), refine(unit, k - 1));
  return total;
}

LinOp build_fQn(const FlowParams& params, const Lattice& unit) {
  return LinOp::identity(unit, params.a_n);
}

LinOp forward_difference_op(const Lattice& lat, int dir) {
  Mat m = Mat::Zero(lat.sites(), lat.sites());
  const double h = lat.spacing(dir);
  for (int i = 0; i < lat.sites(); ++i) {
    m(i, lat.shift(i, dir, 1)) += 1.0 / h;
    m(i, i) -= 1.0 / h;
  }
  return LinOp(lat, lat, std::move(m), true);
}

LinOp build_Dn(const FlowParams& params, const Lattice& fine) {
  // Backward time difference: same antisymmetric part as the forward one,
  // with nonnegative Hermitian part.
  const Mat d0 = forward_difference_op(fine, 0).matrix();
  const Mat sym = -0.5 * (d0 + d0.transpose());
  const Mat asym = 0.5 * (d0 - d0.transpose());
  Mat m = params.drift * asym + sym;
  for (int nu = 1; nu < fine.dims(); ++nu) {
    const double h2 = fine.spacing(nu) * fine.spacing(nu);
    for (int i = 0; i < fine.sites(); ++i) {
      m(i, fine.shift(i, nu, 1)) -= 1.0 / h2;
      m(i, fine.shift(i, nu, -1)) -= 1.0 / h2;
      m(i, i) += 2.0 / h2;
    }
  }
  return LinOp(fine, fine, std::move(m), true);
}

double sup_operator_norm(const LinOp& op) {
  return op.matrix().cwiseAbs().rowwise().sum().maxCoeff();
}

double min_hermitian_eigenvalue(const Mat& m) {
  const Mat h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double smallest_singular_value(const Mat& m) {
  Eigen::BDCSVD<Mat> svd(m);
  return svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
}

Mat checked_inverse(const Mat& m, const char* what, double rcond) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": matrix is not square");
  Eigen::PartialPivLU<Mat> lu(m);
  if (!(lu.rcond() > rcond)) throw InvertibilityError(what, smallest_singular_value(m));
  Mat inv = lu.inverse();
  if (!inv.allFinite()) throw InvertibilityError(what, smallest_singular_value(m));
  return inv;
}

// ---------------------------------------------------------------------------

Mat principal_sqrt(const Mat& a, SqrtBranch branch) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw ShapeError("principal_sqrt: matrix is not square");
  if (n == 0) return a;
  Eigen::ComplexSchur<Mat> schur(a);
  const Mat& t = schur.matrixT();
  const Mat& u = schur.matrixU();
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  Mat r = Mat::Zero(n, n);
  int smallest = 0;
  for (int i = 0; i < n; ++i) {
    const cplx lam = t(i, i);
    if (lam.real() <= 0.0 && std::abs(lam.imag()) <= 1e-12 * scale)
      throw BranchError("principal_sqrt: eigenvalue " + std::to_string(lam.real()) +
                        " lies on the branch cut");
    r(i, i) = std::sqrt(lam);
    if (t(i, i).real() < t(smallest, smallest).real()) smallest = i;
  }
  if (branch == SqrtBranch::FlipSmallest) r(smallest, smallest) = -r(smallest, smallest);
  for (int j = 1; j < n; ++j) {
    for (int i = j - 1; i >= 0; --i) {
      cplx s = t(i, j);
      for (int k = i + 1; k < j; ++k) s -= r(i, k) * r(k, j);
      const cplx den = r(i, i) + r(j, j);
      if (std::abs(den) < 1e-14 * scale) throw BranchError("principal_sqrt: singular Sylvester step");
      r(i, j) = s / den;
    }
  }
  return u * r * u.adjoint();
}

LinOp principal_sqrt(const LinOp& op, SqrtBranch branch) {
  require_same_lattice(op.domain(), op.codomain(), "principal_sqrt");
  return LinOp(op.domain(), op.codomain(), principal_sqrt(op.matrix(), branch));
}

Mat sylvester_symmetric(const Mat& d, const Mat& rhs) {
  const int n = static_cast<int>(d.rows());
  Eigen::ComplexSchur<Mat> schur(d);
  const Mat& r = schur.matrixT();
  const Mat& u = schur.matrixU();
  const Mat f = u.adjoint() * rhs * u;
  Mat y = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = n - 1; i >= 0; --i) {
      cplx s = f(i, j);
      for (int k = i + 1; k < n; ++k) s -= r(i, k) * y(k, j);
      for (int k = 0; k < j; ++k) s -= y(i, k) * r(k, j);
      const cplx den = r(i, i) + r(j, j);
      if (std::abs(den) < 1e-300) throw InvertibilityError("sylvester_symmetric", 0.0);
      y(i, j) = s / den;
    }
  }
  return u * y * u.adjoint();
}

cplx symbol(const LinOp& op, const std::vector<double>& k) {
  if (!op.translation_invariant()) throw UsageError("symbol: operator is not translation invariant");
  const Lattice& lat = op.domain();
  if (static_cast<int>(k.size()) != lat.dims()) throw ShapeError("symbol: momentum has wrong dimension");
  cplx s = 0.0;
  for (int x = 0; x < lat.sites(); ++x) {
    const cplx m = op.matrix()(0, x);
    if (m == cplx(0.0)) continue;
    const auto c = lat.coords(x);
    // Offsets at exactly half the extent are split evenly between +/-.
    cplx factor = 1.0;
    for (int d = 0; d < lat.dims(); ++d) {
      int cd = c[d];
      if (2 * cd > lat.extent(d)) cd -= lat.extent(d);
      const double phase = k[d] * cd * lat.spacing(d);
      factor *= 2 * cd == lat.extent(d) ? cplx(std::cos(phase)) : std::polar(1.0, -phase);
    }
    s += m * factor;
  }
  return s;
}

void write_operator(std::ostream& os, const LinOp& op) {
  const nlohmann::json header = {{"rows", op.matrix().rows()},
                                 {"cols", op.matrix().cols()},
                                 {"domain", lattice_to_json(op.domain())},
                                 {"codomain", lattice_to_json(op.codomain())},
                                 {"translation_invariant", op.translation_invariant()}};
  os << header.dump() << "\n" << std::setprecision(17);
  for (int i = 0; i < op.matrix().rows(); ++i) {
    for (int j = 0; j < op.matrix().cols(); ++j) {
      if (j) os << ' ';
      os << op.matrix()(i, j).real() << ' ' << op.matrix()(i, j).imag();
    }
    os << "\n";
  }
}

LinOp read_operator(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("operator", "missing header");
  const auto header = nlohmann::json::parse(line);
  const int rows = header.at("rows").get<int>();
  const int cols = header.at("cols").get<int>();
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double re, im;
      if (!(is >> re >> im)) throw ValidationError("operator", "truncated matrix data");
      m(i, j) = cplx(re, im);
    }
  }
  return LinOp(lattice_from_json(header.at("domain")), lattice_from_json(header.at("codomain")),
               std::move(m), header.value("translation_invariant", false));
}

// ---------------------------------------------------------------------------

OperatorSet::OperatorSet(const FlowParams& params, const Lattice& unit, const Lattice& fine,
                         const Lattice& coarse)
    : params_(params), unit_(unit), fine_(fine), coarse_(coarse) {
  params_.validate_structure();
  Q_ = block_average_Q(unit_, coarse_);
  Qn_ = compose_Qn(params_, fine_, unit_);
  Qn_adj_ = Qn_.adjoint();
  fQn_ = build_fQn(params_, unit_);
  Dn_ = build_Dn(params_, fine_);
  kinetic_ = LinOp(fine_, fine_, Dn_.matrix() + Qn_adj_.matrix() * fQn_.matrix() * Qn_.matrix(),
                   false);
  const Mat s0 = checked_inverse(kinetic_.matrix(), "S_n(0)");
  const double an = params_.a_n;
  const Mat delta = an * (Mat::Identity(unit_.sites(), unit_.sites()) -
                          an * Qn_.matrix() * s0 * Qn_adj_.matrix());
  Delta_ = LinOp(unit_, unit_, delta, commutes_with_translations(delta, unit_, 1e-9));
}

LinOp OperatorSet::Sn(cplx mu) const {
  const Mat m = kinetic_.matrix() - mu * Mat::Identity(fine_.sites(), fine_.sites());
  return LinOp(fine_, fine_, checked_inverse(m, "S_n(mu)"));
}

LinOp OperatorSet::Sn_transpose(cplx mu) const { return Sn(mu).transpose(); }

LinOp OperatorSet::C_inverse(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("t", "must lie in [0, 1]");
  const double L2 = static_cast<double>(params_.L) * params_.L;
  const Mat qq = Q_.adjoint().matrix() * Q_.matrix();
  const Mat m = (params_.a * t / L2) * qq + t * Delta_.matrix() +
                (1.0 - t) * Mat::Identity(unit_.sites(), unit_.sites());
  return LinOp(unit_, unit_, m);
}

LinOp OperatorSet::C(double t) const {
  const LinOp inv = C_inverse(t);
  const double lo = min_hermitian_eigenvalue(inv.matrix());
  if (!(lo > 0.0)) throw SpectralError("C(t)^{-1} Hermitian part is not positive", lo);
  return inv.inverse();
}

LinOp OperatorSet::C_inverse_dot() const {
  const double L2 = static_cast<double>(params_.L) * params_.L;
  const Mat qq = Q_.adjoint().matrix() * Q_.matrix();
  const Mat m = (params_.a / L2) * qq + Delta_.matrix() - Mat::Identity(unit_.sites(), unit_.sites());
  return LinOp(unit_, unit_, m);
}

DeskLattices desk_lattices(int spatial_dim, const std::vector<int>& unit_extents, int L, int n) {
  DeskLattices d;
  d.unit = make_lattice(spatial_dim, unit_extents, L, n, Level::Unit);
  d.fine = n == 0 ? d.unit : refine(d.unit, n);
  d.coarse = d.unit.sites() == 1 ? single_block_coarse(d.unit) : coarsen(d.unit);
  return d;
}

}  // namespace bsrg
