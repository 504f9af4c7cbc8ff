#pragma once

// Finite periodic anisotropic lattices and complex fields on them.
//
// Direction 0 is time; directions 1..spatial_dim are space. A parabolic block
// has L^2 sites in time and L sites in each spatial direction.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace bsrg {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

enum class Level { Unit, Coarse, Fine };

std::string to_string(Level level);
Level level_from_string(const std::string& s);

class Lattice {
 public:
  Lattice() = default;
  Lattice(int spatial_dim, std::vector<int> extent, std::vector<double> spacing, int L, int scale,
          Level level);

  int spatial_dim() const { return spatial_dim_; }
  int dims() const { return spatial_dim_ + 1; }
  const std::vector<int>& extent() const { return extent_; }
  int extent(int dir) const { return extent_[dir]; }
  const std::vector<double>& spacing() const { return spacing_; }
  double spacing(int dir) const { return spacing_[dir]; }
  int L() const { return L_; }
  int scale() const { return scale_; }
  Level level() const { return level_; }
  int sites() const { return sites_; }
  double cell_volume() const { return cell_volume_; }

  // Block size in direction dir: L^2 in time, L in space.
  int block(int dir) const { return dir == 0 ? L_ * L_ : L_; }

  std::vector<int> coords(int index) const;
  int index(const std::vector<int>& coords) const;
  // Site reached from `index` by `step` lattice steps in direction dir (periodic).
  int shift(int index, int dir, int step) const;

  bool operator==(const Lattice& other) const;
  bool operator!=(const Lattice& other) const { return !(*this == other); }

  std::string describe() const;

 private:
  int spatial_dim_ = 0;
  std::vector<int> extent_;
  std::vector<double> spacing_;
  std::vector<int> stride_;
  int L_ = 2;
  int scale_ = 0;
  Level level_ = Level::Unit;
  int sites_ = 0;
  double cell_volume_ = 1.0;
};

// Unit: extents as given, spacing 1. Fine: extents as given, spacing
// (L^-2n, L^-n, ...). Coarse: `per_direction_extents` are the extents of the
// unit lattice being blocked; the result has extents divided by (L^2, L, ...)
// and spacing (L^2, L, ...).
Lattice make_lattice(int spatial_dim, const std::vector<int>& per_direction_extents, int L, int n,
                     Level level);

// The n-fold parabolic refinement of a unit lattice.
Lattice refine(const Lattice& unit, int n);
// The blocked (coarse) lattice of a unit lattice.
Lattice coarsen(const Lattice& unit);
// Coarse partner of a single-site unit lattice: one site carrying the full
// block volume L^(2+d). Used by the one-site desk models.
Lattice single_block_coarse(const Lattice& unit);

class Field {
 public:
  Field() = default;
  explicit Field(Lattice lattice);
  Field(Lattice lattice, Vec values);

  static Field constant(const Lattice& lattice, cplx c);
  static Field delta(const Lattice& lattice, int site, cplx c = 1.0);
  // exp(i k.x) with physical coordinates x_nu = coord_nu * spacing_nu.
  static Field plane_wave(const Lattice& lattice, const std::vector<double>& k);

  const Lattice& lattice() const { return lattice_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  cplx operator[](int i) const { return values_[i]; }
  cplx& operator[](int i) { return values_[i]; }

  bool all_finite() const;
  Field conj() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(cplx s);

 private:
  Lattice lattice_;
  Vec values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx s, Field a);

void require_same_lattice(const Lattice& a, const Lattice& b, const char* where);

struct NormReport {
  double sup = 0.0;
  double l2 = 0.0;
  double l4 = 0.0;
  double grad_sup = 0.0;
  double grad_l2 = 0.0;
};

// (f(x+e_dir) - f(x)) / spacing_dir, periodic.
Field forward_difference(const Field& f, int dir);
// (f(x) - f(x-e_dir)) / spacing_dir, periodic.
Field backward_difference(const Field& f, int dir);

NormReport norms(const Field& f);
double sup_norm(const Field& f);
double lp_norm(const Field& f, double p);

// Bilinear, cell-volume weighted: <f,g> = vol * sum f(x) g(x). No conjugation.
cplx pairing(const Field& f, const Field& g);

// Physical momentum of momentum index `index`, reduced to the first zone.
std::vector<double> momentum(const Lattice& lattice, int index);
// Unitary DFT: fhat(k) = N^{-1/2} sum_x exp(-i k.x) f(x); output indexed like sites.
Field dft(const Field& f);
Field inverse_dft(const Field& fhat);

// Serialization: lattice descriptor plus (site, re, im) records.
nlohmann::json lattice_to_json(const Lattice& lattice);
Lattice lattice_from_json(const nlohmann::json& j);
nlohmann::json field_to_json(const Field& f);
Field field_from_json(const nlohmann::json& j);
void write_field_csv(std::ostream& os, const Field& f);
Field read_field_csv(std::istream& is);

}  // namespace bsrg
