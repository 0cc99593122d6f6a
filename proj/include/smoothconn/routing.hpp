#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smoothconn/errors.hpp"
#include "smoothconn/eval.hpp"
#include "smoothconn/polynomial.hpp"
#include "smoothconn/tolerances.hpp"
#include "smoothconn/variety.hpp"

namespace smoothconn {

// r_c(x) = f(x) / D_c(x)^ell with D_c(x) = sum (x_i - c_i)^2 + 1. For
// ell >= 1 with 2*ell > deg f this is bounded and vanishes at infinity;
// ell = 0 means r = f and is only sound on a compact variety, which the
// caller must assert explicitly.
class RoutingFunction {
 public:
  RoutingFunction(Polynomial f, std::vector<Rational> center, int ell,
                  bool compactness_asserted = false)
      : f_(std::move(f)),
        center_(std::move(center)),
        ell_(ell),
        compactness_asserted_(compactness_asserted) {
    n_ = f_.nvars();
    if (static_cast<int>(center_.size()) != n_) throw Error("center dimension mismatch");
    if (ell_ < 0) throw Error("exponent ell must be non-negative");
    deg_f_ = f_.degree();
    if (f_.is_zero()) throw Error("numerator f must be nonzero");
    if (ell_ > 0 && 2 * ell_ <= deg_f_)
      throw Error("need 2*ell > deg f for a bounded routing function (ell=" +
                  std::to_string(ell_) + ", deg f=" + std::to_string(deg_f_) + ")");
    if (ell_ == 0 && !compactness_asserted_)
      throw Error("ell = 0 requires asserting compactness of the variety");
    grad_f_ = gradient(f_);
    hess_f_ = hessian(f_);
    compiled_f_ = CompiledSystem([&] {
      PolySystem s(n_);
      s.push_back(f_);
      return s;
    }());
    PolySystem gsys(n_);
    for (const auto& p : grad_f_.polys) gsys.push_back(p);
    compiled_grad_ = CompiledSystem(gsys);
    PolySystem hsys(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) hsys.push_back(hess_f_[i][j]);
    compiled_hess_ = CompiledSystem(hsys);
    center_d_.resize(n_);
    for (int i = 0; i < n_; ++i) center_d_[i] = to_double(center_[i]);
  }

  static int default_exponent(const Polynomial& f) { return f.degree() / 2 + 1; }

  int nvars() const { return n_; }
  int ell() const { return ell_; }
  int deg_f() const { return deg_f_; }
  const Polynomial& numerator() const { return f_; }
  const std::vector<Rational>& center() const { return center_; }
  const VectorXd& center_point() const { return center_d_; }
  bool compactness_asserted() const { return compactness_asserted_; }
  const PolySystem& grad_f() const { return grad_f_; }

  Polynomial denominator_poly() const {
    Polynomial d = Polynomial::constant(n_, Rational(1));
    for (int i = 0; i < n_; ++i) {
      Polynomial xi = Polynomial::variable(n_, i) - Polynomial::constant(n_, center_[i]);
      d += xi * xi;
    }
    return d;
  }

  double eval_f(const VectorXd& x) const {
    VectorXd r;
    std::vector<double> scratch;
    compiled_f_.residual(x, r, scratch);
    return r[0];
  }

  std::complex<double> eval_f(const Eigen::VectorXcd& x) const {
    Eigen::VectorXcd r;
    std::vector<std::complex<double>> scratch;
    compiled_f_.residual(x, r, scratch);
    return r[0];
  }

  double eval_denominator(const VectorXd& x) const { return (x - center_d_).squaredNorm() + 1.0; }

  double eval_r(const VectorXd& x) const {
    return eval_f(x) / std::pow(eval_denominator(x), ell_);
  }

  VectorXd eval_grad_f(const VectorXd& x) const {
    VectorXd g;
    std::vector<double> scratch;
    compiled_grad_.residual(x, g, scratch);
    return g;
  }

  MatrixXd eval_hess_f(const VectorXd& x) const {
    VectorXd flat;
    std::vector<double> scratch;
    compiled_hess_.residual(x, flat, scratch);
    MatrixXd h(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) h(i, j) = flat[i * n_ + j];
    return h;
  }

  // grad r = grad f * D^-ell - 2 ell f D^(-ell-1) (x - c)
  VectorXd ambient_grad(const VectorXd& x) const {
    VectorXd gf = eval_grad_f(x);
    if (ell_ == 0) return gf;
    double D = eval_denominator(x);
    double Dl = std::pow(D, ell_);
    return gf / Dl - (2.0 * ell_ * eval_f(x) / (Dl * D)) * (x - center_d_);
  }

  // One more derivative of the gradient formula, assembled numerically.
  MatrixXd ambient_hess(const VectorXd& x) const {
    MatrixXd hf = eval_hess_f(x);
    if (ell_ == 0) return hf;
    double D = eval_denominator(x);
    double f = eval_f(x);
    VectorXd gf = eval_grad_f(x);
    VectorXd u = x - center_d_;
    double Dl = std::pow(D, ell_);
    MatrixXd h = hf / Dl;
    h -= (2.0 * ell_ / (Dl * D)) *
         (gf * u.transpose() + u * gf.transpose() + f * MatrixXd::Identity(n_, n_));
    h += (4.0 * ell_ * (ell_ + 1) * f / (Dl * D * D)) * (u * u.transpose());
    return h;
  }

 private:
  Polynomial f_;
  std::vector<Rational> center_;
  int ell_;
  bool compactness_asserted_;
  int n_ = 0;
  int deg_f_ = 0;
  PolySystem grad_f_;
  std::vector<std::vector<Polynomial>> hess_f_;
  CompiledSystem compiled_f_, compiled_grad_, compiled_hess_;
  VectorXd center_d_;
};

// Gradient of r restricted to the variety, in frame coordinates.
// Transforms by Q^T under frame changes V -> VQ; its norm is invariant.
inline VectorXd intrinsic_gradient(const RoutingFunction& rf, const VarietySpec& spec,
                                   const TangentFrame& frame) {
  (void)spec;
  return frame.V.transpose() * rf.ambient_grad(frame.base);
}

// H_X r = sum_i dr/dx_i W^i + V^T H r V; eigenvalues are frame-invariant.
inline MatrixXd intrinsic_hessian(const RoutingFunction& rf, const VarietySpec& spec,
                                  const CurvatureData& curvature) {
  const auto& frame = curvature.frame;
  VectorXd gr = rf.ambient_grad(frame.base);
  MatrixXd h = frame.V.transpose() * rf.ambient_hess(frame.base) * frame.V;
  for (int i = 0; i < spec.n(); ++i) h += gr[i] * curvature.W[i];
  return 0.5 * (h + h.transpose());
}

// Cleared-denominator Lagrange form of the critical-point condition in
// the n + k unknowns (x, mu):
//   D_c(x) grad f(x) - 2 ell f(x) (x - c) + Jg(x)^T mu = 0
//   g(x) = 0
// The multipliers absorb D_c^(ell+1), keeping the system polynomial. For
// ell = 0 the first block is grad f + Jg^T mu.
inline PolySystem critical_system(const RoutingFunction& rf, const VarietySpec& spec) {
  const int n = spec.n(), k = spec.k();
  if (rf.nvars() != n) throw Error("routing function / variety dimension mismatch");
  const int total = n + k;
  PolySystem sys(total);
  Polynomial d_ext = rf.denominator_poly().extended(total);
  Polynomial f_ext = rf.numerator().extended(total);
  const auto& jg = spec.symbolic_jacobian();
  for (int i = 0; i < n; ++i) {
    Polynomial eq(total);
    Polynomial dfi = rf.numerator().differentiate(i).extended(total);
    if (rf.ell() == 0) {
      eq = dfi;
    } else {
      Polynomial xi = Polynomial::variable(total, i) -
                      Polynomial::constant(total, rf.center()[i]);
      eq = d_ext * dfi - Rational(2 * rf.ell()) * (f_ext * xi);
    }
    for (int j = 0; j < k; ++j)
      eq += jg[j][i].extended(total) * Polynomial::variable(total, n + j);
    sys.push_back(std::move(eq));
  }
  for (int j = 0; j < k; ++j) sys.push_back(spec.system().polys[j].extended(total));
  return sys;
}

struct UnstableDirection {
  double eigenvalue;
  VectorXd dir;  // ambient unit vector V * eigvec
};

// A classified critical point of r on X_r. The index counts eigenvalues
// of the intrinsic Hessian whose sign matches sign(r): the dimension of
// the local ascending (for r > 0) or descending (r < 0) manifold.
struct RoutingPoint {
  VectorXd z;
  double r_value = 0.0;
  int index = 0;
  VectorXd eigenvalues;  // ascending
  std::vector<UnstableDirection> unstable;
  bool nondegenerate = true;
  VectorXd multipliers;
  double grad_residual = 0.0;
};

inline RoutingPoint classify(const RoutingFunction& rf, const VarietySpec& spec,
                             const VectorXd& z, const VectorXd& multipliers,
                             const ToleranceSet& tols = {}) {
  RoutingPoint pt;
  pt.z = z;
  pt.multipliers = multipliers;
  pt.r_value = rf.eval_r(z);
  double fz = rf.eval_f(z);
  double fcut = tols.f_rel * (1.0 + std::pow(z.norm(), std::max(rf.deg_f(), 0)));
  if (std::abs(fz) <= fcut)
    throw Error("point lies on V(f); not a routing-point candidate");
  TangentFrame frame = tangent_frame(spec, z, tols.rank);
  VectorXd ig = intrinsic_gradient(rf, spec, frame);
  pt.grad_residual = ig.norm();
  double grad_scale = 1.0 + rf.ambient_grad(z).norm();
  if (pt.grad_residual > std::max(tols.grad, 1e-7 * grad_scale))
    throw Error("candidate fails the critical-point residual check: |grad| = " +
                std::to_string(pt.grad_residual));
  CurvatureData curv = curvature_matrices(spec, frame, tols.curvature);
  MatrixXd h = intrinsic_hessian(rf, spec, curv);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  pt.eigenvalues = es.eigenvalues();
  double hnorm = pt.eigenvalues.cwiseAbs().maxCoeff();
  double eig_cut = tols.eig_rel * hnorm;
  double min_abs = pt.eigenvalues.cwiseAbs().minCoeff();
  pt.nondegenerate = hnorm > 0.0 && min_abs > eig_cut;
  int sgn = pt.r_value > 0 ? 1 : -1;
  pt.index = 0;
  for (int i = 0; i < pt.eigenvalues.size(); ++i) {
    double lam = pt.eigenvalues[i];
    bool matches = (sgn > 0 && lam > 0.0) || (sgn < 0 && lam < 0.0);
    if (matches) {
      ++pt.index;
      UnstableDirection ud;
      ud.eigenvalue = lam;
      ud.dir = frame.V * es.eigenvectors().col(i);
      ud.dir.normalize();
      pt.unstable.push_back(std::move(ud));
    }
  }
  return pt;
}

struct ValidationCheck {
  std::string condition;
  bool passed = true;
  bool asserted = false;  // true when recorded rather than tested
  std::string detail;
};

struct ValidationReport {
  bool valid = true;
  bool recommend_rerandomize = false;
  std::vector<ValidationCheck> checks;

  std::string summary() const {
    std::ostringstream out;
    for (const auto& c : checks) {
      out << (c.asserted ? "[asserted] " : (c.passed ? "[pass] " : "[FAIL] ")) << c.condition;
      if (!c.detail.empty()) out << ": " << c.detail;
      out << "\n";
    }
    if (recommend_rerandomize) out << "recommendation: re-randomize the center c\n";
    return out.str();
  }
};

// Checks the testable routing-function conditions on a solved point set:
// nondegeneracy, pairwise-distinct critical levels, and the exponent
// bound. Vanishing at infinity / boundedness hold by construction for
// ell > 0 and are recorded as asserted for ell = 0.
inline ValidationReport validate_routing_function(const RoutingFunction& rf,
                                                  const VarietySpec& spec,
                                                  const std::vector<RoutingPoint>& points,
                                                  const ToleranceSet& tols = {}) {
  (void)spec;
  ValidationReport report;
  auto add = [&](ValidationCheck c) {
    if (!c.passed && !c.asserted) report.valid = false;
    report.checks.push_back(std::move(c));
  };

  {
    ValidationCheck c{"finitely many nondegenerate routing points", true, false, ""};
    std::ostringstream detail;
    int bad = 0;
    for (const auto& p : points) {
      if (!p.nondegenerate) {
        if (bad++) detail << "; ";
        detail << "degenerate point at (";
        for (int i = 0; i < p.z.size(); ++i) detail << (i ? "," : "") << p.z[i];
        detail << ")";
      }
    }
    if (bad) {
      c.passed = false;
      c.detail = detail.str();
      report.recommend_rerandomize = true;
    }
    add(std::move(c));
  }

  {
    ValidationCheck c{"pairwise-distinct critical levels", true, false, ""};
    std::ostringstream detail;
    int collisions = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        double ri = points[i].r_value, rj = points[j].r_value;
        double gap = std::abs(ri - rj);
        if (gap <= tols.level_rel * std::max(std::abs(ri), std::abs(rj))) {
          if (collisions++) detail << "; ";
          detail << "points " << i << " and " << j << " share level " << ri;
        }
      }
    if (collisions) {
      c.passed = false;
      c.detail = detail.str();
      report.recommend_rerandomize = true;
    }
    add(std::move(c));
  }

  {
    ValidationCheck c{"exponent bound 2*ell > deg f", true, false, ""};
    if (rf.ell() > 0 && 2 * rf.ell() <= rf.deg_f()) {
      c.passed = false;
      c.detail = "ell=" + std::to_string(rf.ell()) + ", deg f=" + std::to_string(rf.deg_f());
    } else if (rf.ell() == 0) {
      c.detail = "not applicable for ell = 0";
    }
    add(std::move(c));
  }

  {
    ValidationCheck c{"vanishing at infinity and bounded derivatives", true, true, ""};
    c.detail = rf.ell() > 0 ? "guaranteed by construction for ell > 0"
                            : "asserted by user (compact variety, ell = 0)";
    add(std::move(c));
  }

  return report;
}

}  // namespace smoothconn
