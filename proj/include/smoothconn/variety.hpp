#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "smoothconn/errors.hpp"
#include "smoothconn/eval.hpp"
#include "smoothconn/polynomial.hpp"
#include "smoothconn/tolerances.hpp"

namespace smoothconn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// X = V(g_1,...,g_k) in R^n with dim X = d and k = n - d. The effective
// complete-intersection shape keeps the projection and critical systems
// square. S is the sum of squares of the k x k minors of Jg, vanishing
// exactly on the rank-deficient (singular) locus.
class VarietySpec {
 public:
  VarietySpec(PolySystem g, int dim)
      : g_(std::move(g)), n_(g_.nvars), d_(dim), k_(static_cast<int>(g_.size())) {
    if (d_ < 1 || d_ >= n_) throw Error("variety dimension must satisfy 1 <= d < n");
    if (k_ != n_ - d_)
      throw Error("need exactly k = n - d defining polynomials (got k=" + std::to_string(k_) +
                  ", n-d=" + std::to_string(n_ - d_) + "); reformulate the system");
    jg_ = jacobian(g_);
    s_ = minor_sum(jg_, k_);
    compiled_g_ = CompiledSystem(g_);
    PolySystem jg_flat(n_);
    for (const auto& row : jg_)
      for (const auto& p : row) jg_flat.push_back(p);
    compiled_jg_ = CompiledSystem(jg_flat);
    PolySystem hg_flat(n_);
    for (const auto& p : g_.polys) {
      auto h = hessian(p);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) hg_flat.push_back(h[i][j]);
    }
    compiled_hg_ = CompiledSystem(hg_flat);
    for (const auto& p : g_.polys) degrees_.push_back(std::max(p.degree(), 0));
  }

  int n() const { return n_; }
  int d() const { return d_; }
  int k() const { return k_; }
  const PolySystem& system() const { return g_; }
  const Polynomial& singular_minor_sum() const { return s_; }
  const std::vector<std::vector<Polynomial>>& symbolic_jacobian() const { return jg_; }
  const std::vector<int>& g_degrees() const { return degrees_; }

  VectorXd eval_g(const VectorXd& x) const {
    VectorXd r;
    std::vector<double> scratch;
    compiled_g_.residual(x, r, scratch);
    return r;
  }

  MatrixXd eval_jg(const VectorXd& x) const {
    VectorXd flat;
    std::vector<double> scratch;
    compiled_jg_.residual(x, flat, scratch);
    MatrixXd J(k_, n_);
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < n_; ++j) J(i, j) = flat[i * n_ + j];
    return J;
  }

  std::vector<MatrixXd> eval_hg(const VectorXd& x) const {
    VectorXd flat;
    std::vector<double> scratch;
    compiled_hg_.residual(x, flat, scratch);
    std::vector<MatrixXd> hs(k_, MatrixXd(n_, n_));
    int at = 0;
    for (int j = 0; j < k_; ++j)
      for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b) hs[j](a, b) = flat[at++];
    return hs;
  }

 private:
  PolySystem g_;
  int n_, d_, k_;
  std::vector<std::vector<Polynomial>> jg_;
  Polynomial s_;
  CompiledSystem compiled_g_, compiled_jg_, compiled_hg_;
  std::vector<int> degrees_;
};

// Orthonormal basis of the tangent space at a smooth point. Frames are
// unique only up to right-multiplication by an orthogonal d x d matrix;
// downstream consumers must be frame-covariant.
struct TangentFrame {
  VectorXd base;
  MatrixXd V;  // n x d, orthonormal columns, Jg(base) V = 0
};

// Second-fundamental-form data: n symmetric d x d matrices W^i giving the
// quadratic term of the local graph y(p) = x + V p + (1/2)[p^T W^i p]_i.
struct CurvatureData {
  TangentFrame frame;
  std::vector<MatrixXd> W;
};

inline bool on_variety(const VarietySpec& spec, const VectorXd& x, double tol = 1e-9) {
  if (x.size() != spec.n()) throw Error("point dimension mismatch");
  VectorXd g = spec.eval_g(x);
  double nx = x.norm();
  for (int j = 0; j < spec.k(); ++j) {
    double scale = 1.0 + std::pow(nx, spec.g_degrees()[j]);
    if (std::abs(g[j]) > tol * scale) return false;
  }
  return true;
}

inline bool is_smooth_point(const VarietySpec& spec, const VectorXd& x, double rank_tol = 1e-8,
                            double variety_tol = 1e-9) {
  if (!on_variety(spec, x, variety_tol)) throw GeometryError("point is not on the variety");
  Eigen::JacobiSVD<MatrixXd> svd(spec.eval_jg(x));
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > rank_tol * smax) ++rank;
  return smax > 0.0 && rank == spec.k();
}

inline TangentFrame tangent_frame(const VarietySpec& spec, const VectorXd& x,
                                  double rank_tol = 1e-8) {
  if (x.size() != spec.n()) throw Error("point dimension mismatch");
  MatrixXd J = spec.eval_jg(x);
  Eigen::JacobiSVD<MatrixXd> svd(J, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > rank_tol * smax) ++rank;
  if (rank != spec.k())
    throw GeometryError("rank-deficient Jacobian (singular point or bad dimension): rank " +
                        std::to_string(rank) + " != k=" + std::to_string(spec.k()));
  // Null space = trailing right singular vectors; SVD ordering keeps this
  // deterministic for reproducibility.
  TangentFrame frame;
  frame.base = x;
  frame.V = svd.matrixV().rightCols(spec.d());
  return frame;
}

// Solves the well-constrained linear system for the curvature matrices:
//   sum_i dg_j/dx_i(x) W^i + V^T Hg_j(x) V = 0   (j = 1..k)
//   sum_i V_ij W^i = 0                           (j = 1..d)
// Each W^i is symmetric; unknowns are the d(d+1)/2 upper triangles.
inline CurvatureData curvature_matrices(const VarietySpec& spec, const TangentFrame& frame,
                                        double residual_tol = 1e-8) {
  const int n = spec.n(), d = spec.d(), k = spec.k();
  const int t = d * (d + 1) / 2;
  const int dim = n * t;
  auto sym_index = [d](int a, int b) {
    if (a > b) std::swap(a, b);
    return a * d - a * (a - 1) / 2 + (b - a);
  };
  MatrixXd A = MatrixXd::Zero(dim, dim);
  VectorXd rhs = VectorXd::Zero(dim);
  MatrixXd J = spec.eval_jg(frame.base);
  auto hs = spec.eval_hg(frame.base);
  int row = 0;
  for (int j = 0; j < k; ++j) {
    MatrixXd vhv = frame.V.transpose() * hs[j] * frame.V;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        for (int i = 0; i < n; ++i) A(row, i * t + sym_index(a, b)) = J(j, i);
        rhs[row] = -vhv(a, b);
        ++row;
      }
  }
  for (int j = 0; j < d; ++j) {
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        for (int i = 0; i < n; ++i) A(row, i * t + sym_index(a, b)) = frame.V(i, j);
        ++row;
      }
  }
  Eigen::FullPivLU<MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw GeometryError("curvature system singular (frame/rank inconsistency)");
  VectorXd w = lu.solve(rhs);
  double res = (A * w - rhs).norm();
  if (!(res <= residual_tol * (1.0 + rhs.norm())))
    throw GeometryError("curvature system residual too large: " + std::to_string(res));
  CurvatureData data;
  data.frame = frame;
  data.W.resize(n, MatrixXd::Zero(d, d));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        double v = w[i * t + sym_index(a, b)];
        data.W[i](a, b) = v;
        data.W[i](b, a) = v;
      }
  return data;
}

// Newton iteration on the square system [g(y); V^T (y - base) - p] from
// y0 = base + V p: the inverse of the tangential parameterization.
inline VectorXd project_to_variety(const VarietySpec& spec, const TangentFrame& frame,
                                   const VectorXd& p, int max_iter = 50, double tol = 1e-10) {
  const int n = spec.n(), d = spec.d(), k = spec.k();
  if (p.size() != d) throw Error("tangent coordinate dimension mismatch");
  VectorXd y = frame.base + frame.V * p;
  MatrixXd J(n, n);
  VectorXd F(n);
  for (int it = 0; it < max_iter; ++it) {
    F.head(k) = spec.eval_g(y);
    F.tail(d) = frame.V.transpose() * (y - frame.base) - p;
    if (F.lpNorm<Eigen::Infinity>() <= tol * (1.0 + y.norm())) return y;
    J.topRows(k) = spec.eval_jg(y);
    J.bottomRows(d) = frame.V.transpose();
    Eigen::PartialPivLU<MatrixXd> lu(J);
    VectorXd step = lu.solve(-F);
    if (!step.allFinite())
      throw GeometryError("projection Jacobian numerically singular");
    y += step;
  }
  throw GeometryError("projection onto variety did not converge (offset too large?)");
}

}  // namespace smoothconn
