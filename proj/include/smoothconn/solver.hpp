#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smoothconn/errors.hpp"
#include "smoothconn/eval.hpp"
#include "smoothconn/parallel.hpp"
#include "smoothconn/polynomial.hpp"

namespace smoothconn {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

enum class SolveBackend { homotopy, multistart, import_file };

inline std::string backend_name(SolveBackend b) {
  switch (b) {
    case SolveBackend::homotopy: return "homotopy";
    case SolveBackend::multistart: return "multistart";
    case SolveBackend::import_file: return "import";
  }
  return "unknown";
}

struct SolveConfig {
  SolveBackend backend = SolveBackend::homotopy;
  std::uint64_t seed = 0;
  int n_starts = 500;
  double box_lo = -3.0;
  double box_hi = 3.0;
  long long path_budget = 5000;
  double step_floor = 1e-7;      // minimal continuation step in t
  double track_tol = 1e-8;       // corrector contraction target while tracking
  double endgame_radius = 0.01;  // switch to plain Newton polishing below this t
  double newton_tol = 1e-10;     // residual acceptance: ||F|| <= tol * (1 + ||z||)
  double real_tol = 1e-6;        // per-coordinate imaginary-part threshold
  double dedupe_tol = 1e-6;      // identity threshold on the x-block
  double divergence_radius = 1e8;
  // Constant complex perturbation of the (coefficient-scaled) target
  // during tracking. Positive-dimensional junk components of degenerate
  // targets dissolve into isolated roots, so paths cannot be captured;
  // the final polish always runs against the exact system.
  double perturbation = 1e-7;
  int max_path_steps = 10000;
  int endgame_newton_iters = 100;
  std::string import_path;
  int workers = 0;
  // Optional: failed endpoints satisfying this predicate on the x-block
  // (e.g. points of the excluded hypersurface V(f), where the critical
  // system is allowed to be singular) are counted separately and do not
  // feed the incompleteness heuristic.
  std::function<bool(const VectorXcd&)> failed_endpoint_excluded;
};

struct Solution {
  Eigen::VectorXd z;  // full (x, mu) vector
  double residual = 0.0;
  std::string provenance;
};

struct SolutionSet {
  std::vector<Solution> points;
  int x_dim = 0;  // leading block that determines identity under dedupe
  bool complete = false;
  std::string backend;
  long long paths_tracked = 0;
  long long path_failures = 0;
  long long paths_divergent = 0;
  long long paths_excluded = 0;
  int rejected = 0;
  std::vector<std::string> notes;
};

// Damped Newton; returns the final residual norm. Acceptance is purely
// residual-based so slowly converging (near-singular) roots still land.
inline double newton_refine(const CompiledSystem& F, Eigen::VectorXd& z, int max_iter,
                            double tol, bool damped = true) {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  std::vector<double> scratch;
  F.residual(z, r, scratch);
  double res = r.norm();
  for (int it = 0; it < max_iter; ++it) {
    if (res <= tol * (1.0 + z.norm())) break;
    F.residual_and_jacobian(z, r, J, scratch);
    Eigen::VectorXd step = J.partialPivLu().solve(-r);
    if (!step.allFinite()) break;
    if (!damped) {
      z += step;
      F.residual(z, r, scratch);
      res = r.norm();
      continue;
    }
    double lambda = 1.0;
    bool advanced = false;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::VectorXd trial = z + lambda * step;
      Eigen::VectorXd rt;
      F.residual(trial, rt, scratch);
      double rn = rt.norm();
      if (std::isfinite(rn) && rn < res) {
        z = trial;
        res = rn;
        advanced = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!advanced) break;
  }
  return res;
}

namespace detail {

inline void canonical_dedupe(SolutionSet& set, double dedupe_tol) {
  auto& pts = set.points;
  std::sort(pts.begin(), pts.end(), [&](const Solution& a, const Solution& b) {
    for (int i = 0; i < set.x_dim; ++i) {
      if (a.z[i] < b.z[i]) return true;
      if (a.z[i] > b.z[i]) return false;
    }
    return false;
  });
  std::vector<Solution> kept;
  for (auto& p : pts) {
    bool duplicate = false;
    for (const auto& q : kept) {
      if ((p.z.head(set.x_dim) - q.z.head(set.x_dim)).norm() <= dedupe_tol) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(std::move(p));
  }
  pts = std::move(kept);
}

struct PathOutcome {
  enum class Status { converged, divergent, failed };
  Status status = Status::failed;
  VectorXcd endpoint;  // affine coordinates (solver-scaled)
  double residual = 0.0;
};

// Appends the homogenizing coordinate as the last variable.
inline PolySystem homogenize(const PolySystem& sys) {
  if (sys.nvars + 1 > kMaxVars) throw SolveError("too many unknowns to homogenize");
  PolySystem out(sys.nvars + 1);
  for (const auto& p : sys.polys) {
    int d = std::max(p.degree(), 0);
    Polynomial h(sys.nvars + 1);
    for (const auto& [e, c] : p.terms()) {
      Exponents ee = e;
      int total = 0;
      for (int k : e) total += k;
      ee.push_back(d - total);
      h.add_term(std::move(ee), c);
    }
    out.push_back(std::move(h));
  }
  return out;
}

// Projective total-degree path tracking. The homotopy
//   H(z, t) = gamma t G(z) + (1 - t) F(z)
// is homogenized and tracked on the patch <conj(z), z> = 1, renormalized
// every accepted step, so paths to infinity stay bounded and are
// recognized by a vanishing homogenizing coordinate instead of by norm
// heuristics. RK4 predictor, Newton corrector, adaptive dt.
class HomotopyTracker {
 public:
  HomotopyTracker(const PolySystem& affine, std::vector<int> degrees, std::complex<double> gamma,
                  VectorXcd perturbation, const SolveConfig& cfg)
      : affine_(affine),
        hom_(homogenize(affine)),
        degrees_(std::move(degrees)),
        gamma_(gamma),
        pert_(std::move(perturbation)),
        cfg_(cfg),
        n_(affine.nvars) {}

  PathOutcome track(long long path_index) const {
    const double two_pi = 2.0 * M_PI;
    VectorXcd zh(n_ + 1);
    long long p = path_index;
    for (int i = 0; i < n_; ++i) {
      int d = degrees_[i];
      int k = static_cast<int>(p % d);
      p /= d;
      zh[i] = std::polar(1.0, two_pi * k / d);
    }
    zh[n_] = 1.0;
    zh /= zh.norm();
    VectorXcd patch = zh.conjugate();

    double t = 1.0;
    double dt = 0.05;
    int consecutive = 0;
    VectorXcd k1, k2, k3, k4, z_new, delta;
    const double t_min = 1e-4 * cfg_.endgame_radius;
    for (int step = 0; step < cfg_.max_path_steps && t > t_min; ++step) {
      double t_next = std::max(t - dt, 0.1 * t);
      if (t_next < t_min) t_next = t_min;
      double h = t_next - t;
      bool predicted = derivative(zh, patch, t, k1) &&
                       derivative(zh + (0.5 * h) * k1, patch, t + 0.5 * h, k2) &&
                       derivative(zh + (0.5 * h) * k2, patch, t + 0.5 * h, k3) &&
                       derivative(zh + h * k3, patch, t_next, k4);
      z_new = predicted ? VectorXcd(zh + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)) : zh;
      bool ok = false;
      if (z_new.allFinite()) {
        for (int it = 0; it < 3; ++it) {
          if (!correct(z_new, patch, t_next, delta)) break;
          z_new += delta;
          if (delta.norm() <= cfg_.track_tol * z_new.norm()) {
            ok = true;
            break;
          }
        }
      }
      if (ok) {
        zh = z_new / z_new.norm();
        patch = zh.conjugate();
        t = t_next;
        if (++consecutive >= 5) {
          dt = std::min(2.0 * dt, 0.1);
          consecutive = 0;
        }
      } else {
        dt *= 0.5;
        consecutive = 0;
        if (dt < cfg_.step_floor) return finish(zh, patch, false);
      }
    }
    return finish(zh, patch, true);
  }

 private:
  static std::complex<double> pow_int(std::complex<double> base, int e) {
    std::complex<double> r = 1.0;
    if (e < 0) return r;
    while (e) {
      if (e & 1) r *= base;
      base *= base;
      e >>= 1;
    }
    return r;
  }

  // Square patched system: N homotopy rows plus the patch row.
  void assemble(const VectorXcd& zh, const VectorXcd& patch, double t, VectorXcd& H,
                MatrixXcd& J) const {
    VectorXcd fv;
    hom_.residual_and_jacobian(zh, fv, jac_, scratch_);
    H.resize(n_ + 1);
    J.resize(n_ + 1, n_ + 1);
    for (int i = 0; i < n_; ++i) {
      int d = degrees_[i];
      std::complex<double> gi = pow_int(zh[i], d) - pow_int(zh[n_], d);
      std::complex<double> fi = fv[i] - pert_[i] * pow_int(zh[n_], d);
      H[i] = gamma_ * t * gi + (1.0 - t) * fi;
      for (int j = 0; j <= n_; ++j) J(i, j) = (1.0 - t) * jac_(i, j);
      J(i, i) += gamma_ * t * double(d) * pow_int(zh[i], d - 1);
      J(i, n_) -= gamma_ * t * double(d) * pow_int(zh[n_], d - 1);
      J(i, n_) -= (1.0 - t) * pert_[i] * double(d) * pow_int(zh[n_], d - 1);
    }
    H[n_] = (patch.array() * zh.array()).sum() - 1.0;
    for (int j = 0; j <= n_; ++j) J(n_, j) = patch[j];
  }

  bool correct(VectorXcd& zh, const VectorXcd& patch, double t, VectorXcd& delta) const {
    VectorXcd H;
    assemble(zh, patch, t, H, sys_);
    delta = sys_.partialPivLu().solve(-H);
    return delta.allFinite();
  }

  // dz/dt = -J^-1 [dH/dt; 0] with dH/dt = gamma G - F per row.
  bool derivative(const VectorXcd& zh, const VectorXcd& patch, double t, VectorXcd& out) const {
    VectorXcd fv;
    hom_.residual_and_jacobian(zh, fv, jac_, scratch_);
    MatrixXcd& J = sys_;
    J.resize(n_ + 1, n_ + 1);
    VectorXcd ht(n_ + 1);
    for (int i = 0; i < n_; ++i) {
      int d = degrees_[i];
      std::complex<double> fi = fv[i] - pert_[i] * pow_int(zh[n_], d);
      ht[i] = gamma_ * (pow_int(zh[i], d) - pow_int(zh[n_], d)) - fi;
      for (int j = 0; j <= n_; ++j) J(i, j) = (1.0 - t) * jac_(i, j);
      J(i, i) += gamma_ * t * double(d) * pow_int(zh[i], d - 1);
      J(i, n_) -= gamma_ * t * double(d) * pow_int(zh[n_], d - 1);
      J(i, n_) -= (1.0 - t) * pert_[i] * double(d) * pow_int(zh[n_], d - 1);
    }
    ht[n_] = 0.0;
    for (int j = 0; j <= n_; ++j) J(n_, j) = patch[j];
    out = J.partialPivLu().solve(-ht);
    return out.allFinite();
  }

  // Endgame: projective Newton polish at t = 0, then affine polish and
  // residual acceptance. The homogenizing coordinate separates paths at
  // infinity from finite endpoints.
  PathOutcome finish(VectorXcd zh, VectorXcd patch, bool reached_t_min) const {
    (void)reached_t_min;
    VectorXcd H, delta;
    for (int it = 0; it < 30; ++it) {
      assemble(zh, patch, 0.0, H, sys_);
      if (H.norm() <= 1e-14) break;
      delta = sys_.partialPivLu().solve(-H);
      if (!delta.allFinite() || delta.norm() > 1.0) break;
      zh += delta;
      zh /= zh.norm();
      patch = zh.conjugate();
      if (delta.norm() <= 1e-14) break;
    }
    // Affine polishing is only meaningful well away from the hyperplane at
    // infinity; elsewhere the norm-scaled acceptance would pass junk.
    double z0rel = std::abs(zh[n_]) / zh.norm();
    if (z0rel <= 1e-4) return {PathOutcome::Status::divergent, VectorXcd(), 0.0};

    VectorXcd z = zh.head(n_) / zh[n_];
    VectorXcd fv;
    MatrixXcd jf;
    VectorXcd best = z;
    double best_res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg_.endgame_newton_iters; ++it) {
      affine_.residual_and_jacobian(z, fv, jf, scratch_);
      double res = fv.norm();
      if (std::isfinite(res) && res < best_res) {
        best_res = res;
        best = z;
      }
      if (res <= cfg_.newton_tol * (1.0 + z.norm())) break;
      delta = jf.partialPivLu().solve(-fv);
      if (!delta.allFinite()) break;
      if (delta.norm() > 10.0 * (1.0 + z.norm())) break;  // singular blow-up
      z += delta;
      if (z.norm() > cfg_.divergence_radius)
        return {PathOutcome::Status::divergent, VectorXcd(), 0.0};
    }
    if (best_res <= cfg_.newton_tol * (1.0 + best.norm()))
      return {PathOutcome::Status::converged, best, best_res};
    return {PathOutcome::Status::failed, best, best_res};
  }

  CompiledSystem affine_;
  CompiledSystem hom_;
  std::vector<int> degrees_;
  std::complex<double> gamma_;
  VectorXcd pert_;
  const SolveConfig& cfg_;
  int n_;
  mutable std::vector<std::complex<double>> scratch_;
  mutable MatrixXcd jac_;
  mutable MatrixXcd sys_;
};

}  // namespace detail

// Total-degree homotopy continuation over all Bezout paths, with plain
// Newton endgame, real filtering, and canonical deduplication. Results
// are deterministic for a fixed seed and independent of scheduling.
namespace detail {

// Joint variable/equation scaling by exact powers of two: choose sigma_i
// (per variable) and eps_j (per equation) minimizing the spread of
// log2|c| + sum_i a_i sigma_i + eps_j over all terms, in least squares.
// Balances Lagrange-style systems whose multiplier block lives on a very
// different scale from the coordinate block.
struct SystemScaling {
  PolySystem scaled;
  std::vector<int> var_pow2;

  Eigen::VectorXd unscale(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = z;
    for (int i = 0; i < out.size(); ++i) out[i] *= std::ldexp(1.0, var_pow2[i]);
    return out;
  }
};

inline SystemScaling scale_system(const PolySystem& sys) {
  const int n = sys.nvars;
  const int m = static_cast<int>(sys.size());
  const int dim = n + m;
  Eigen::MatrixXd ata = Eigen::MatrixXd::Identity(dim, dim) * 1e-8;
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd row(dim);
  for (int j = 0; j < m; ++j) {
    for (const auto& [e, c] : sys.polys[j].terms()) {
      row.setZero();
      for (int i = 0; i < n; ++i) row[i] = e[i];
      row[n + j] = 1.0;
      double target = -std::log2(std::abs(to_double(c)));
      ata += row * row.transpose();
      atb += row * target;
    }
  }
  Eigen::VectorXd sol = ata.ldlt().solve(atb);
  SystemScaling scaling;
  scaling.scaled = PolySystem(n);
  scaling.var_pow2.resize(n);
  auto clamp_round = [](double v) {
    return std::max(-40, std::min(40, static_cast<int>(std::lround(v))));
  };
  for (int i = 0; i < n; ++i) scaling.var_pow2[i] = clamp_round(sol[i]);
  auto pow2_rational = [](int e) {
    Rational r(1);
    for (int i = 0; i < std::abs(e); ++i) r = e > 0 ? Rational(r * 2) : Rational(r / 2);
    return r;
  };
  for (int j = 0; j < m; ++j) {
    int ej = clamp_round(sol[n + j]);
    Polynomial p(n);
    for (const auto& [e, c] : sys.polys[j].terms()) {
      int shift = ej;
      for (int i = 0; i < n; ++i) shift += e[i] * scaling.var_pow2[i];
      p.add_term(e, c * pow2_rational(shift));
    }
    scaling.scaled.push_back(std::move(p));
  }
  return scaling;
}

}  // namespace detail

inline SolutionSet solve_homotopy(const PolySystem& sys, int x_dim, const SolveConfig& cfg) {
  if (sys.size() != static_cast<std::size_t>(sys.nvars))
    throw SolveError("homotopy backend needs a square system");
  detail::SystemScaling scaling = detail::scale_system(sys);
  const PolySystem& scaled = scaling.scaled;
  CompiledSystem F(scaled);
  std::vector<int> degrees;
  long long bezout = 1;
  for (const auto& p : scaled.polys) {
    int d = std::max(p.degree(), 1);
    degrees.push_back(d);
    if (bezout > cfg.path_budget) break;
    bezout *= d;
  }
  if (bezout > cfg.path_budget)
    throw SolveError("path budget exceeded: Bezout count " + std::to_string(bezout) +
                     " > budget " + std::to_string(cfg.path_budget));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::complex<double> gamma = std::polar(1.0, 2.0 * M_PI * unif(rng));
  VectorXcd perturbation(sys.nvars);
  for (int i = 0; i < sys.nvars; ++i)
    perturbation[i] = cfg.perturbation * std::polar(1.0, 2.0 * M_PI * unif(rng));

  detail::HomotopyTracker tracker(scaled, degrees, gamma, perturbation, cfg);
  std::vector<detail::PathOutcome> outcomes(static_cast<std::size_t>(bezout));
  parallel_for(static_cast<std::size_t>(bezout),
               [&](std::size_t i) { outcomes[i] = tracker.track(static_cast<long long>(i)); },
               cfg.workers);

  SolutionSet set;
  set.x_dim = x_dim;
  set.backend = "homotopy";
  set.paths_tracked = bezout;
  std::vector<Solution> candidates;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.status == detail::PathOutcome::Status::divergent) {
      ++set.paths_divergent;
      continue;
    }
    // The excluded-endpoint test sees original coordinates.
    VectorXcd endpoint = o.endpoint;
    for (int j = 0; j < endpoint.size(); ++j)
      endpoint[j] *= std::ldexp(1.0, scaling.var_pow2[j]);
    if (o.status == detail::PathOutcome::Status::failed) {
      if (cfg.failed_endpoint_excluded && cfg.failed_endpoint_excluded(endpoint.head(x_dim))) {
        ++set.paths_excluded;
      } else {
        ++set.path_failures;
      }
      continue;
    }
    bool real_sol = true;
    for (int j = 0; j < endpoint.size() && real_sol; ++j)
      real_sol = std::abs(endpoint[j].imag()) <= cfg.real_tol * (1.0 + std::abs(endpoint[j].real()));
    if (!real_sol) continue;
    // Refine and accept against the scaled system; double-precision
    // residual floors of the raw coefficients would reject legitimate
    // large-multiplier roots.
    Solution s;
    s.z = o.endpoint.real();
    s.residual = newton_refine(F, s.z, 20, cfg.newton_tol);
    if (s.residual > cfg.newton_tol * (1.0 + s.z.norm())) continue;  // complex root grazing the filter
    s.z = scaling.unscale(s.z);
    s.provenance = "path " + std::to_string(i);
    candidates.push_back(std::move(s));
  }
  set.points = std::move(candidates);
  detail::canonical_dedupe(set, cfg.dedupe_tol);
  double failure_rate = bezout ? double(set.path_failures) / double(bezout) : 0.0;
  set.complete = failure_rate <= 0.2;
  if (set.path_failures > 0)
    set.notes.push_back(std::to_string(set.path_failures) + " path failure(s) out of " +
                        std::to_string(bezout));
  if (!set.complete) set.notes.push_back("more than 20% of paths failed; results incomplete");
  return set;
}

namespace detail {

inline double halton(long long index, int base) {
  double f = 1.0, r = 0.0;
  long long i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

}  // namespace detail

// Damped Newton from random and low-discrepancy starts in a box; a
// heuristic with no completeness guarantee (complete stays false).
inline SolutionSet solve_multistart(const PolySystem& sys, int x_dim, const SolveConfig& cfg) {
  if (sys.size() != static_cast<std::size_t>(sys.nvars))
    throw SolveError("multistart backend needs a square system");
  detail::SystemScaling scaling = detail::scale_system(sys);
  CompiledSystem F(scaling.scaled);
  const int N = sys.nvars;
  static constexpr int primes[16] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (N > 16) throw SolveError("too many unknowns for multistart start generation");

  std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(std::max(cfg.n_starts, 0)));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(cfg.box_lo, cfg.box_hi);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Eigen::VectorXd z(N);
    if (s % 2 == 0) {
      for (int i = 0; i < N; ++i) z[i] = unif(rng);
    } else {
      for (int i = 0; i < N; ++i)
        z[i] = cfg.box_lo + (cfg.box_hi - cfg.box_lo) * detail::halton(static_cast<long long>(s), primes[i]);
    }
    starts[s] = std::move(z);
  }

  std::vector<std::pair<bool, Solution>> results(starts.size());
  parallel_for(starts.size(), [&](std::size_t s) {
    Eigen::VectorXd z = starts[s];
    for (int i = 0; i < N; ++i) z[i] = std::ldexp(z[i], -scaling.var_pow2[i]);
    // Seed the trailing (multiplier) block by least squares; it enters the
    // critical systems linearly and is rarely inside the sampling box.
    if (x_dim < N) {
      Eigen::VectorXd r;
      Eigen::MatrixXd J;
      std::vector<double> scratch;
      z.tail(N - x_dim).setZero();
      F.residual_and_jacobian(z, r, J, scratch);
      Eigen::VectorXd tail = J.rightCols(N - x_dim).colPivHouseholderQr().solve(-r);
      if (tail.allFinite()) z.tail(N - x_dim) = tail;
    }
    double res = newton_refine(F, z, 50, cfg.newton_tol);
    bool ok = res <= cfg.newton_tol * (1.0 + z.norm()) && z.allFinite();
    Solution sol;
    if (ok) {
      sol.z = scaling.unscale(z);
      sol.residual = res;
      sol.provenance = "start " + std::to_string(s);
    }
    results[s] = {ok, std::move(sol)};
  }, cfg.workers);

  SolutionSet set;
  set.x_dim = x_dim;
  set.backend = "multistart";
  set.complete = false;
  set.notes.push_back("heuristic backend: no completeness guarantee");
  for (auto& [ok, sol] : results)
    if (ok) set.points.push_back(std::move(sol));
  detail::canonical_dedupe(set, cfg.dedupe_tol);
  return set;
}

// Reads solutions from JSON {"solutions": [[...], ...]} or whitespace-
// separated text (one vector per line). Rows may carry the full (x, mu)
// vector or just the x-block; missing trailing coordinates are filled by
// linear least squares before Newton refinement against the system.
inline SolutionSet import_solutions(const std::string& path, const PolySystem& sys, int x_dim,
                                    const SolveConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw SolveError("cannot open solutions file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();

  std::vector<std::vector<double>> rows;
  auto first_nonspace = text.find_first_not_of(" \t\r\n");
  if (first_nonspace != std::string::npos && text[first_nonspace] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw SolveError(std::string("solutions file JSON parse failure: ") + e.what());
    }
    if (!doc.contains("solutions") || !doc["solutions"].is_array())
      throw SolveError("solutions file must contain a \"solutions\" array");
    for (const auto& row : doc["solutions"]) {
      std::vector<double> v;
      for (const auto& x : row) v.push_back(x.get<double>());
      rows.push_back(std::move(v));
    }
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream ls(line);
      std::vector<double> v;
      double x;
      while (ls >> x) v.push_back(x);
      if (!v.empty()) rows.push_back(std::move(v));
    }
  }

  detail::SystemScaling scaling = detail::scale_system(sys);
  CompiledSystem F(scaling.scaled);
  const int N = sys.nvars;
  SolutionSet set;
  set.x_dim = x_dim;
  set.backend = "import";
  set.complete = true;
  for (std::size_t idx = 0; idx < rows.size(); ++idx) {
    const auto& row = rows[idx];
    Eigen::VectorXd z(N);
    if (static_cast<int>(row.size()) == N) {
      for (int i = 0; i < N; ++i) z[i] = std::ldexp(row[i], -scaling.var_pow2[i]);
    } else if (static_cast<int>(row.size()) == x_dim && x_dim < N) {
      z.setZero();
      for (int i = 0; i < x_dim; ++i) z[i] = std::ldexp(row[i], -scaling.var_pow2[i]);
      Eigen::VectorXd r;
      Eigen::MatrixXd J;
      std::vector<double> scratch;
      F.residual_and_jacobian(z, r, J, scratch);
      Eigen::MatrixXd tail = J.rightCols(N - x_dim);
      z.tail(N - x_dim) = tail.colPivHouseholderQr().solve(-r);
    } else {
      ++set.rejected;
      set.notes.push_back("row " + std::to_string(idx) + ": expected " + std::to_string(N) +
                          " or " + std::to_string(x_dim) + " values, got " +
                          std::to_string(row.size()));
      continue;
    }
    Eigen::VectorXd z0 = z;
    int moved_block = static_cast<int>(row.size()) == N ? N : x_dim;
    double res = newton_refine(F, z, 50, cfg.newton_tol);
    if (!(res <= cfg.newton_tol * (1.0 + z.norm())) || !z.allFinite()) {
      ++set.rejected;
      set.notes.push_back("row " + std::to_string(idx) + ": refinement failed, residual " +
                          std::to_string(res));
      continue;
    }
    // Refinement is a polish, not a search: reject rows that only reach a
    // solution by drifting far from the imported location.
    double moved = (z.head(moved_block) - z0.head(moved_block)).norm();
    if (moved > 1e-2 * (1.0 + z0.head(moved_block).norm())) {
      ++set.rejected;
      set.notes.push_back("row " + std::to_string(idx) + ": not a solution (moved " +
                          std::to_string(moved) + " under refinement)");
      continue;
    }
    Solution s;
    s.z = scaling.unscale(z);
    s.residual = res;
    s.provenance = "import row " + std::to_string(idx);
    set.points.push_back(std::move(s));
  }
  detail::canonical_dedupe(set, cfg.dedupe_tol);
  return set;
}

inline SolutionSet solve_square_system(const PolySystem& sys, int x_dim, const SolveConfig& cfg) {
  switch (cfg.backend) {
    case SolveBackend::homotopy: return solve_homotopy(sys, x_dim, cfg);
    case SolveBackend::multistart: return solve_multistart(sys, x_dim, cfg);
    case SolveBackend::import_file: return import_solutions(cfg.import_path, sys, x_dim, cfg);
  }
  throw SolveError("unknown solver backend");
}

}  // namespace smoothconn
