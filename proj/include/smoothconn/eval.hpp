#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

#include "smoothconn/polynomial.hpp"

namespace smoothconn {

// Flattened double-precision form of a polynomial for tight evaluation
// loops. Terms store (variable, exponent) pairs; powers of the point are
// tabulated once per call via eval_powers.
struct CompiledPoly {
  struct Term {
    double coeff;
    std::uint32_t first;  // index into pairs
    std::uint32_t count;
  };
  std::vector<Term> terms;
  std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;  // (var, exp)

  static CompiledPoly from(const Polynomial& p) {
    CompiledPoly c;
    c.terms.reserve(p.terms().size());
    for (const auto& [e, coeff] : p.terms()) {
      Term t{to_double(coeff), static_cast<std::uint32_t>(c.pairs.size()), 0};
      for (std::size_t v = 0; v < e.size(); ++v) {
        if (e[v] > 0) {
          c.pairs.emplace_back(static_cast<std::uint16_t>(v), static_cast<std::uint16_t>(e[v]));
          ++t.count;
        }
      }
      c.terms.push_back(t);
    }
    return c;
  }

  // powers[v * stride + k] = x_v^k
  template <typename T>
  T eval(const std::vector<T>& powers, int stride) const {
    T sum{};
    for (const auto& t : terms) {
      T term = T(t.coeff);
      for (std::uint32_t k = t.first; k < t.first + t.count; ++k)
        term *= powers[pairs[k].first * stride + pairs[k].second];
      sum += term;
    }
    return sum;
  }
};

// A square (or rectangular) polynomial system compiled together with its
// Jacobian for repeated numeric evaluation in double or complex arithmetic.
class CompiledSystem {
 public:
  CompiledSystem() = default;

  explicit CompiledSystem(const PolySystem& sys) : nvars_(sys.nvars), neq_(static_cast<int>(sys.size())) {
    int maxdeg = 0;
    for (const auto& p : sys.polys) maxdeg = std::max(maxdeg, p.degree());
    stride_ = maxdeg + 1;
    residuals_.reserve(sys.size());
    degrees_.reserve(sys.size());
    for (const auto& p : sys.polys) {
      residuals_.push_back(CompiledPoly::from(p));
      degrees_.push_back(p.degree());
      for (int v = 0; v < nvars_; ++v) jacobian_.push_back(CompiledPoly::from(p.differentiate(v)));
    }
  }

  int nvars() const { return nvars_; }
  int neq() const { return neq_; }
  const std::vector<int>& degrees() const { return degrees_; }

  template <typename T>
  void eval_powers(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x, std::vector<T>& powers) const {
    powers.resize(static_cast<std::size_t>(nvars_) * stride_);
    for (int v = 0; v < nvars_; ++v) {
      powers[v * stride_] = T(1);
      for (int k = 1; k < stride_; ++k) powers[v * stride_ + k] = powers[v * stride_ + k - 1] * x[v];
    }
  }

  template <typename T>
  void residual(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x,
                Eigen::Matrix<T, Eigen::Dynamic, 1>& out, std::vector<T>& scratch) const {
    eval_powers(x, scratch);
    out.resize(neq_);
    for (int i = 0; i < neq_; ++i) out[i] = residuals_[i].eval(scratch, stride_);
  }

  template <typename T>
  void residual_and_jacobian(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x,
                             Eigen::Matrix<T, Eigen::Dynamic, 1>& r,
                             Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& J,
                             std::vector<T>& scratch) const {
    eval_powers(x, scratch);
    r.resize(neq_);
    J.resize(neq_, nvars_);
    for (int i = 0; i < neq_; ++i) {
      r[i] = residuals_[i].eval(scratch, stride_);
      for (int v = 0; v < nvars_; ++v) J(i, v) = jacobian_[i * nvars_ + v].eval(scratch, stride_);
    }
  }

  template <typename T>
  void jacobian_only(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x,
                     Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& J,
                     std::vector<T>& scratch) const {
    eval_powers(x, scratch);
    J.resize(neq_, nvars_);
    for (int i = 0; i < neq_; ++i)
      for (int v = 0; v < nvars_; ++v) J(i, v) = jacobian_[i * nvars_ + v].eval(scratch, stride_);
  }

 private:
  int nvars_ = 0;
  int neq_ = 0;
  int stride_ = 1;
  std::vector<CompiledPoly> residuals_;
  std::vector<CompiledPoly> jacobian_;  // row-major neq x nvars
  std::vector<int> degrees_;
};

}  // namespace smoothconn
