#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "smoothconn/errors.hpp"
#include "smoothconn/rational.hpp"

namespace smoothconn {

// Largest ambient dimension plus multiplier block seen in practice is 10;
// the cap keeps exponent vectors small and catches wiring mistakes early.
inline constexpr int kMaxVars = 16;

using Exponents = std::vector<int>;

// Sparse multivariate polynomial with exact rational coefficients.
// Terms map exponent vectors (length nvars) to nonzero coefficients.
class Polynomial {
 public:
  Polynomial() = default;

  explicit Polynomial(int nvars) : nvars_(check_nvars(nvars)) {}

  static Polynomial constant(int nvars, Rational c) {
    Polynomial p(nvars);
    if (c != 0) p.terms_.emplace(Exponents(nvars, 0), std::move(c));
    return p;
  }

  static Polynomial variable(int nvars, int i) {
    Polynomial p(nvars);
    if (i < 0 || i >= nvars) throw Error("variable index out of range");
    Exponents e(nvars, 0);
    e[i] = 1;
    p.terms_.emplace(std::move(e), Rational(1));
    return p;
  }

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<Exponents, Rational>& terms() const { return terms_; }

  // Total degree; the zero polynomial reports -1.
  int degree() const {
    int deg = -1;
    for (const auto& [e, c] : terms_) {
      int d = 0;
      for (int k : e) d += k;
      deg = std::max(deg, d);
    }
    return deg;
  }

  void add_term(Exponents e, const Rational& c) {
    if (static_cast<int>(e.size()) != nvars_) throw Error("exponent vector length mismatch");
    for (int k : e)
      if (k < 0) throw Error("negative exponent");
    if (c == 0) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      terms_.emplace(std::move(e), c);
    } else {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Rational coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  Polynomial operator-() const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, Rational(-c));
    return r;
  }

  Polynomial& operator+=(const Polynomial& o) {
    require_same_ring(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& o) {
    require_same_ring(o);
    for (const auto& [e, c] : o.terms_) add_term(e, Rational(-c));
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.require_same_ring(b);
    Polynomial r(a.nvars_);
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e(a.nvars_);
        for (int k = 0; k < a.nvars_; ++k) e[k] = ea[k] + eb[k];
        r.add_term(std::move(e), ca * cb);
      }
    }
    return r;
  }

  friend Polynomial operator*(const Rational& s, const Polynomial& p) {
    Polynomial r(p.nvars_);
    if (s == 0) return r;
    for (const auto& [e, c] : p.terms_) r.terms_.emplace(e, Rational(s * c));
    return r;
  }

  friend Polynomial operator*(const Polynomial& p, const Rational& s) { return s * p; }

  Polynomial pow(unsigned k) const {
    Polynomial result = constant(nvars_, Rational(1));
    Polynomial base = *this;
    while (k) {
      if (k & 1u) result = result * base;
      base = (k >>= 1) ? base * base : base;
    }
    return result;
  }

  bool operator==(const Polynomial& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }

  Polynomial differentiate(int var) const {
    if (var < 0 || var >= nvars_) throw Error("differentiation index out of range");
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) {
      if (e[var] == 0) continue;
      Exponents d = e;
      --d[var];
      r.add_term(std::move(d), c * e[var]);
    }
    return r;
  }

  // Direct sparse evaluation; T is double or std::complex<double>.
  template <typename T>
  T eval(const std::vector<T>& x) const {
    if (static_cast<int>(x.size()) != nvars_) throw Error("evaluation point dimension mismatch");
    T sum{};
    for (const auto& [e, c] : terms_) {
      T term = T(to_double(c));
      for (int k = 0; k < nvars_; ++k)
        for (int rep = 0; rep < e[k]; ++rep) term *= x[k];
      sum += term;
    }
    return sum;
  }

  // Embed into a larger ring by appending fresh trailing variables.
  Polynomial extended(int new_nvars) const {
    if (new_nvars < nvars_) throw Error("cannot shrink variable count");
    Polynomial r(new_nvars);
    for (const auto& [e, c] : terms_) {
      Exponents ee = e;
      ee.resize(new_nvars, 0);
      r.terms_.emplace(std::move(ee), c);
    }
    return r;
  }

  bool divisible_by_var(int i) const {
    if (is_zero()) return true;
    for (const auto& [e, c] : terms_)
      if (e[i] == 0) return false;
    return true;
  }

  std::string to_string(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream out;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto& [e, c] = *it;
      Rational mag = c < 0 ? Rational(-c) : c;
      if (first) {
        if (c < 0) out << "-";
        first = false;
      } else {
        out << (c < 0 ? " - " : " + ");
      }
      bool has_vars = false;
      for (int k : e) has_vars = has_vars || k > 0;
      if (!has_vars || mag != 1) {
        out << mag.str();
        if (has_vars) out << "*";
      }
      bool need_star = false;
      for (int k = 0; k < nvars_; ++k) {
        if (e[k] == 0) continue;
        if (need_star) out << "*";
        out << names.at(k);
        if (e[k] > 1) out << "^" << e[k];
        need_star = true;
      }
    }
    return out.str();
  }

 private:
  static int check_nvars(int n) {
    if (n < 0 || n > kMaxVars) throw Error("variable count out of supported range [0,16]");
    return n;
  }

  void require_same_ring(const Polynomial& o) const {
    if (nvars_ != o.nvars_) throw Error("polynomial ring mismatch");
  }

  int nvars_ = 0;
  std::map<Exponents, Rational> terms_;
};

struct PolySystem {
  int nvars = 0;
  std::vector<Polynomial> polys;

  PolySystem() = default;
  explicit PolySystem(int n) : nvars(n) {}

  void push_back(Polynomial p) {
    if (p.nvars() != nvars) throw Error("system/polynomial ring mismatch");
    polys.push_back(std::move(p));
  }
  std::size_t size() const { return polys.size(); }
};

inline PolySystem gradient(const Polynomial& p) {
  PolySystem g(p.nvars());
  for (int i = 0; i < p.nvars(); ++i) g.push_back(p.differentiate(i));
  return g;
}

inline std::vector<std::vector<Polynomial>> hessian(const Polynomial& p) {
  int n = p.nvars();
  std::vector<std::vector<Polynomial>> h(n, std::vector<Polynomial>(n, Polynomial(n)));
  for (int i = 0; i < n; ++i) {
    Polynomial di = p.differentiate(i);
    for (int j = i; j < n; ++j) {
      h[i][j] = di.differentiate(j);
      if (j != i) h[j][i] = h[i][j];
    }
  }
  return h;
}

inline std::vector<std::vector<Polynomial>> jacobian(const PolySystem& sys) {
  std::vector<std::vector<Polynomial>> j;
  j.reserve(sys.size());
  for (const auto& p : sys.polys) {
    std::vector<Polynomial> row;
    row.reserve(sys.nvars);
    for (int i = 0; i < sys.nvars; ++i) row.push_back(p.differentiate(i));
    j.push_back(std::move(row));
  }
  return j;
}

namespace detail {

// Determinant of the chosen rows over the column set encoded by `mask`,
// expanding along rows top-down with memoization over column subsets.
inline const Polynomial& subdet(const std::vector<std::vector<Polynomial>>& mat,
                                const std::vector<int>& rows, std::uint32_t mask, int nvars,
                                std::unordered_map<std::uint32_t, Polynomial>& memo) {
  auto it = memo.find(mask);
  if (it != memo.end()) return it->second;
  int size = 0;
  for (std::uint32_t m = mask; m; m &= m - 1) ++size;
  Polynomial det(nvars);
  if (size == 0) {
    det = Polynomial::constant(nvars, Rational(1));
  } else {
    int row = rows[rows.size() - size];
    int pos = 0;
    for (int col = 0; col < 32; ++col) {
      if (!(mask & (1u << col))) continue;
      const Polynomial& entry = mat[row][col];
      if (!entry.is_zero()) {
        Polynomial sub = entry * subdet(mat, rows, mask & ~(1u << col), nvars, memo);
        if (pos % 2 == 0)
          det += sub;
        else
          det -= sub;
      }
      ++pos;
    }
  }
  return memo.emplace(mask, std::move(det)).first->second;
}

inline void for_each_subset(int n, int m, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = m - 1;
    while (i >= 0 && idx[i] == n - m + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

// Sum of squares of all m x m minors of J. Vanishes exactly where rank < m.
inline Polynomial minor_sum(const std::vector<std::vector<Polynomial>>& J, int m) {
  const int rows = static_cast<int>(J.size());
  const int cols = rows ? static_cast<int>(J[0].size()) : 0;
  if (m < 1 || m > std::min(rows, cols)) throw Error("minor size out of range");
  if (m > 6) throw Error("minor size > 6 unsupported (Laplace expansion cost)");
  if (cols > 31) throw Error("too many columns for minor expansion");
  int nvars = J[0][0].nvars();
  Polynomial s(nvars);
  detail::for_each_subset(rows, m, [&](const std::vector<int>& rowset) {
    std::unordered_map<std::uint32_t, Polynomial> memo;
    detail::for_each_subset(cols, m, [&](const std::vector<int>& colset) {
      std::uint32_t mask = 0;
      for (int c : colset) mask |= 1u << c;
      const Polynomial& d = detail::subdet(J, rowset, mask, nvars, memo);
      s += d * d;
    });
  });
  return s;
}

namespace detail {

class PolyParser {
 public:
  PolyParser(const std::string& text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {
    if (static_cast<int>(vars.size()) > kMaxVars) throw Error("too many variables (max 16)");
  }

  Polynomial parse() {
    Polynomial p = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    return p;
  }

 private:
  int nvars() const { return static_cast<int>(vars_.size()); }

  Polynomial parse_expr() {
    skip_ws();
    Polynomial acc = parse_term();
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        char op = text_[pos_++];
        Polynomial rhs = parse_term();
        if (op == '+')
          acc += rhs;
        else
          acc -= rhs;
      } else {
        return acc;
      }
    }
  }

  Polynomial parse_term() {
    Polynomial acc = parse_factor();
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
        char op = text_[pos_++];
        std::size_t at = pos_;
        Polynomial rhs = parse_factor();
        if (op == '*') {
          acc = acc * rhs;
        } else {
          if (rhs.degree() > 0) throw ParseError("division by non-constant", at);
          Rational d = rhs.coefficient(Exponents(nvars(), 0));
          if (d == 0) throw ParseError("division by zero", at);
          acc = acc * Rational(Rational(1) / d);
        }
      } else {
        return acc;
      }
    }
  }

  Polynomial parse_factor() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      return -parse_factor();
    }
    if (pos_ < text_.size() && text_[pos_] == '+') {
      ++pos_;
      return parse_factor();
    }
    Polynomial base = parse_base();
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '^') {
      ++pos_;
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '-') throw ParseError("negative exponent", pos_);
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) throw ParseError("expected integer exponent after '^'", pos_);
      unsigned long k = std::stoul(text_.substr(start, pos_ - start));
      if (k > 64) throw ParseError("exponent too large", start);
      return base.pow(static_cast<unsigned>(k));
    }
    return base;
  }

  Polynomial parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = parse_expr();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') throw ParseError("expected ')'", pos_);
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return Polynomial::constant(nvars(), parse_number());
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      std::string name = text_.substr(start, pos_ - start);
      auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it == vars_.end()) throw ParseError("unknown variable '" + name + "'", start);
      return Polynomial::variable(nvars(), static_cast<int>(it - vars_.begin()));
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  // Integer or decimal literal; rationals like 5/4 arise from the '/' operator.
  Rational parse_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ == start) throw ParseError("expected number", pos_);
    return parse_rational(text_.substr(start, pos_ - start));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& vars_;
};

}  // namespace detail

// Grammar: + - * ^ and parentheses over declared variables and integer /
// decimal literals; '/' divides by a constant. No implicit multiplication.
inline Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& vars) {
  return detail::PolyParser(text, vars).parse();
}

}  // namespace smoothconn
