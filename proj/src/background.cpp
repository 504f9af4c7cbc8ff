#include "bsrg/background.hpp"

#include "bsrg/domains.hpp"
#include "bsrg/errors.hpp"

#include <Eigen/LU>

#include <cmath>

namespace bsrg {

namespace {

Mat shifted_kinetic(const OperatorSet& ops) {
  const int n = ops.fine().sites();
  return ops.kinetic().matrix() - ops.params().mu_n * Mat::Identity(n, n);
}

Vec stack(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

double vec_sup(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Jacobian of (F_star, F_plain) in the unknowns (phi_*, phi).
Mat background_jacobian(const Mat& k, const Field& phi_star, const Field& phi, const Interaction& v) {
  const int n = static_cast<int>(k.rows());
  const VHessian h = hessian_V(phi_star, phi, v);
  Mat j(2 * n, 2 * n);
  j.topLeftCorner(n, n) = k.transpose() + h.plain_star;
  j.topRightCorner(n, n) = h.plain_plain;
  j.bottomLeftCorner(n, n) = h.star_star;
  j.bottomRightCorner(n, n) = k + h.star_plain;
  return j;
}

}  // namespace

double BackgroundResidual::sup() const { return std::max(sup_norm(star), sup_norm(plain)); }

BackgroundResidual background_residual(const Field& psi_star, const Field& psi, const Field& phi_star,
                                       const Field& phi, const OperatorSet& ops, const Interaction& v) {
  require_same_lattice(phi.lattice(), ops.fine(), "background_residual");
  const Mat k = shifted_kinetic(ops);
  const double an = ops.params().a_n;
  const VGradient g = grad_V(phi_star, phi, v);
  BackgroundResidual r;
  r.star = Field(ops.fine(), k.transpose() * phi_star.values() + g.plain.values() -
                                 an * ops.Qn_adj().matrix() * psi_star.values());
  r.plain = Field(ops.fine(), k * phi.values() + g.star.values() -
                                  an * ops.Qn_adj().matrix() * psi.values());
  return r;
}

BackgroundSolution solve_background(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                                    const Interaction& v, const NewtonOptions& opts) {
  require_same_lattice(psi.lattice(), ops.unit(), "solve_background");
  require_same_lattice(psi_star.lattice(), ops.unit(), "solve_background");
  const int n = ops.fine().sites();
  const Mat k = shifted_kinetic(ops);
  const double an = ops.params().a_n;
  const Vec rhs_star = an * ops.Qn_adj().matrix() * psi_star.values();
  const Vec rhs = an * ops.Qn_adj().matrix() * psi.values();
  const double scale = std::max({1.0, vec_sup(rhs_star), vec_sup(rhs)});

  Eigen::PartialPivLU<Mat> lu(k);
  if (!(lu.rcond() > 1e-13)) throw InvertibilityError("S_n(mu)", smallest_singular_value(k));
  Eigen::PartialPivLU<Mat> lu_t(Mat(k.transpose()));

  BackgroundSolution sol;
  sol.phi = Field(ops.fine(), lu.solve(rhs));
  sol.phi_star = Field(ops.fine(), lu_t.solve(rhs_star));

  for (int it = 0;; ++it) {
    const VGradient g = grad_V(sol.phi_star, sol.phi, v);
    const Vec f_star = k.transpose() * sol.phi_star.values() + g.plain.values() - rhs_star;
    const Vec f_plain = k * sol.phi.values() + g.star.values() - rhs;
    const double r = std::max(vec_sup(f_star), vec_sup(f_plain));
    sol.residual_history.push_back(r);
    sol.residual = r;
    sol.iterations = it;
    if (!std::isfinite(r)) throw DivergenceError("solve_background: non-finite residual", sol.residual_history);
    if (r <= opts.tol * scale) break;
    if (it >= opts.max_iter)
      throw DivergenceError("solve_background: no convergence after " + std::to_string(it) + " iterations",
                            sol.residual_history);
    const Mat j = background_jacobian(k, sol.phi_star, sol.phi, v);
    const Vec dx = Eigen::PartialPivLU<Mat>(j).solve(-stack(f_star, f_plain));
    sol.phi_star.values() += dx.head(n);
    sol.phi.values() += dx.tail(n);
  }
  return sol;
}

BackgroundSensitivity sensitivities(const BackgroundSolution& bg, const OperatorSet& ops,
                                    const Interaction& v) {
  const int n = ops.fine().sites();
  const int m = ops.unit().sites();
  const Mat j = background_jacobian(shifted_kinetic(ops), bg.phi_star, bg.phi, v);
  Eigen::PartialPivLU<Mat> lu(j);
  const Mat src = ops.params().a_n * ops.Qn_adj().matrix();
  Mat rhs = Mat::Zero(2 * n, 2 * m);
  rhs.topLeftCorner(n, m) = src;      // d/dpsi_* enters the phi_* equation
  rhs.bottomRightCorner(n, m) = src;  // d/dpsi enters the phi equation
  const Mat x = lu.solve(rhs);
  BackgroundSensitivity s;
  s.dphi_star_dpsi_star = x.topLeftCorner(n, m);
  s.dphi_star_dpsi = x.topRightCorner(n, m);
  s.dphi_dpsi_star = x.bottomLeftCorner(n, m);
  s.dphi_dpsi = x.bottomRightCorner(n, m);
  return s;
}

DegreeParts degree_expansion(const Field& psi_star, const Field& psi, const OperatorSet& ops,
                             const Interaction& v, const BackgroundSolution& bg) {
  const LinOp s = ops.Sn(ops.params().mu_n);
  const double an = ops.params().a_n;
  DegreeParts d;
  d.Phi = Field(ops.fine(), s.matrix() * (an * ops.Qn_adj().matrix() * psi.values()));
  d.Phi_star = Field(ops.fine(), s.matrix().transpose() * (an * ops.Qn_adj().matrix() * psi_star.values()));
  d.phi3 = bg.phi - d.Phi;
  d.phi3_star = bg.phi_star - d.Phi_star;
  const VGradient g = grad_V(d.Phi_star, d.Phi, v);
  d.phi5 = Field(ops.fine(), d.phi3.values() + s.matrix() * g.star.values());
  d.phi5_star = Field(ops.fine(), d.phi3_star.values() + s.matrix().transpose() * g.plain.values());
  return d;
}

CriticalGradient critical_gradient(const Field& theta_star, const Field& theta, const Field& psi_star,
                                   const Field& psi, const BackgroundSolution& bg, const OperatorSet& ops) {
  const auto& p = ops.params();
  const double w = p.a / (static_cast<double>(p.L) * p.L);
  const Mat& q = ops.Q().matrix();
  const Mat qadj = ops.Q().adjoint().matrix();
  CriticalGradient g;
  g.star = Field(ops.unit(), -w * qadj * (theta.values() - q * psi.values()) +
                                 p.a_n * (psi.values() - ops.Qn().matrix() * bg.phi.values()));
  g.plain = Field(ops.unit(), -w * qadj * (theta_star.values() - q * psi_star.values()) +
                                  p.a_n * (psi_star.values() - ops.Qn().matrix() * bg.phi_star.values()));
  return g;
}

CriticalFields linear_critical_fields(const Field& theta_star, const Field& theta, const OperatorSet& ops) {
  const auto& p = ops.params();
  const int m = ops.unit().sites();
  const double w = p.a / (static_cast<double>(p.L) * p.L);
  const Mat qadj = ops.Q().adjoint().matrix();
  const Mat qq = qadj * ops.Q().matrix();
  const Mat s = ops.Sn(p.mu_n).matrix();
  const Mat& qn = ops.Qn().matrix();
  const Mat& qn_adj = ops.Qn_adj().matrix();
  const Mat id = Mat::Identity(m, m);
  const Mat mm = p.a_n * (id - p.a_n * qn * s * qn_adj);
  const Mat mm_star = p.a_n * (id - p.a_n * qn * s.transpose() * qn_adj);
  CriticalFields cf;
  cf.psi_n = Field(ops.unit(), checked_inverse(w * qq + mm, "critical system") * (w * qadj * theta.values()));
  cf.psi_star_n = Field(ops.unit(), checked_inverse(w * qq + mm_star, "critical system") *
                                        (w * qadj * theta_star.values()));
  cf.rho_n = cf.psi_star_n.conj() - cf.psi_n;
  cf.converged = true;
  return cf;
}

CriticalFields solve_critical_fields(const Field& theta_star, const Field& theta, const OperatorSet& ops,
                                     const Interaction& v, const CriticalOptions& opts) {
  require_same_lattice(theta.lattice(), ops.coarse(), "solve_critical_fields");
  require_same_lattice(theta_star.lattice(), ops.coarse(), "solve_critical_fields");
  const auto& p = ops.params();
  const int m = ops.unit().sites();
  const double w = p.a / (static_cast<double>(p.L) * p.L);
  const Mat qadj = ops.Q().adjoint().matrix();
  const Mat qq = qadj * ops.Q().matrix();
  const Mat& qn = ops.Qn().matrix();
  const Mat id = Mat::Identity(m, m);
  const double scale = std::max({1.0, vec_sup(w * qadj * theta.values()), vec_sup(w * qadj * theta_star.values())});

  CriticalFields cf = linear_critical_fields(theta_star, theta, ops);
  cf.converged = false;
  for (int it = 0;; ++it) {
    if (opts.check_domain && (!in_An(cf.psi_n, p) || !in_An(cf.psi_star_n, p)))
      throw DomainEscapeError("solve_critical_fields: iterate " + std::to_string(it) + " left An(n)");
    const BackgroundSolution bg = solve_background(cf.psi_star_n, cf.psi_n, ops, v);
    const CriticalGradient g = critical_gradient(theta_star, theta, cf.psi_star_n, cf.psi_n, bg, ops);
    const double r = std::max(sup_norm(g.star), sup_norm(g.plain));
    cf.residual_history.push_back(r);
    cf.iterations = it;
    if (!std::isfinite(r)) throw DivergenceError("solve_critical_fields: non-finite gradient", cf.residual_history);
    if (r <= opts.tol * scale) {
      cf.converged = true;
      break;
    }
    if (it >= opts.max_iter)
      throw DivergenceError("solve_critical_fields: no convergence after " + std::to_string(it) + " iterations",
                            cf.residual_history);
    const BackgroundSensitivity s = sensitivities(bg, ops, v);
    Mat j(2 * m, 2 * m);
    j.topLeftCorner(m, m) = -p.a_n * qn * s.dphi_dpsi_star;
    j.topRightCorner(m, m) = w * qq + p.a_n * (id - qn * s.dphi_dpsi);
    j.bottomLeftCorner(m, m) = w * qq + p.a_n * (id - qn * s.dphi_star_dpsi_star);
    j.bottomRightCorner(m, m) = -p.a_n * qn * s.dphi_star_dpsi;
    const Vec dy = Eigen::PartialPivLU<Mat>(j).solve(-stack(g.star.values(), g.plain.values()));
    cf.psi_star_n.values() += dy.head(m);
    cf.psi_n.values() += dy.tail(m);
  }
  cf.rho_n = cf.psi_star_n.conj() - cf.psi_n;
  return cf;
}

nlohmann::json background_to_json(const BackgroundSolution& bg) {
  return {{"phi_star", field_to_json(bg.phi_star)},
          {"phi", field_to_json(bg.phi)},
          {"residual", bg.residual},
          {"iterations", bg.iterations},
          {"residual_history", bg.residual_history}};
}

nlohmann::json critical_to_json(const CriticalFields& cf) {
  return {{"psi_star_n", field_to_json(cf.psi_star_n)},
          {"psi_n", field_to_json(cf.psi_n)},
          {"rho_n", field_to_json(cf.rho_n)},
          {"converged", cf.converged},
          {"iterations", cf.iterations},
          {"residual_history", cf.residual_history}};
}

}  // namespace bsrg
