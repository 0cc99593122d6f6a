#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smoothconn/errors.hpp"
#include "smoothconn/flow.hpp"
#include "smoothconn/parallel.hpp"
#include "smoothconn/routing.hpp"
#include "smoothconn/solver.hpp"
#include "smoothconn/variety.hpp"

namespace smoothconn {

// Disjoint-set forest; replaces boolean matrix powering for the
// transitive closure of the saddle-connection relation.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

struct AnalyzeConfig {
  SolveConfig solve;
  FlowConfig flow;
  ToleranceSet tols;
};

struct SolverStats {
  std::string backend;
  long long paths_tracked = 0;
  long long path_failures = 0;
  long long paths_divergent = 0;
  long long paths_excluded = 0;
  int raw_solutions = 0;
  int filtered_on_vf = 0;
  int rejected = 0;
  bool complete = false;
  std::vector<std::string> notes;
};

struct ConnectivityReport {
  std::vector<RoutingPoint> routing_points;  // canonical (lexicographic) order
  std::vector<std::vector<int>> adjacency;   // symmetric, reflexive 0/1
  std::vector<std::vector<int>> components;  // partition of point indices
  long long euler = 0;
  std::vector<Trajectory> trajectories;      // provenance of adjacency bits
  ValidationReport validation;
  SolverStats solver;
  bool incomplete = false;
  std::vector<std::string> issues;

  int component_of(int point_index) const {
    for (std::size_t c = 0; c < components.size(); ++c)
      for (int p : components[c])
        if (p == point_index) return static_cast<int>(c);
    return -1;
  }

  int count_index(int morse_index) const {
    int n = 0;
    for (const auto& p : routing_points) n += p.index == morse_index;
    return n;
  }
};

namespace detail {

inline std::vector<std::vector<int>> components_from_adjacency(
    const std::vector<std::vector<int>>& a) {
  const int m = static_cast<int>(a.size());
  UnionFind uf(m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (a[i][j]) uf.unite(i, j);
  std::vector<std::vector<int>> groups;
  std::vector<int> root_to_group(m, -1);
  for (int i = 0; i < m; ++i) {
    int r = uf.find(i);
    if (root_to_group[r] < 0) {
      root_to_group[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[root_to_group[r]].push_back(i);
  }
  // Points are already in canonical order, so sorting components by their
  // minimal member index sorts them by minimal lexicographic coordinates.
  std::sort(groups.begin(), groups.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return groups;
}

inline bool lex_less(const VectorXd& a, const VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace detail

// Full connectivity analysis: solve the critical system, classify and
// validate the routing points, compute the Euler characteristic, emanate
// from every unstable direction of every positive-index point, and
// partition via the transitive closure of the adjacency.
inline ConnectivityReport analyze(const RoutingFunction& rf, const VarietySpec& spec,
                                  const AnalyzeConfig& cfg = {}) {
  ConnectivityReport report;
  PolySystem crit = critical_system(rf, spec);
  SolveConfig solve_cfg = cfg.solve;
  solve_cfg.newton_tol = std::min(solve_cfg.newton_tol, cfg.tols.newton);
  // Paths stalling on the excluded hypersurface V(f) (singular junk the
  // clearing construction admits) are not completeness-relevant failures.
  solve_cfg.failed_endpoint_excluded = [&rf, &cfg](const Eigen::VectorXcd& x) {
    double scale = 1.0 + std::pow(x.norm(), std::max(rf.deg_f(), 0));
    return std::abs(rf.eval_f(x)) <= std::sqrt(cfg.tols.f_rel) * scale;
  };
  SolutionSet sols = solve_square_system(crit, spec.n(), solve_cfg);

  report.solver.backend = sols.backend;
  report.solver.paths_tracked = sols.paths_tracked;
  report.solver.path_failures = sols.path_failures;
  report.solver.paths_divergent = sols.paths_divergent;
  report.solver.paths_excluded = sols.paths_excluded;
  report.solver.raw_solutions = static_cast<int>(sols.points.size());
  report.solver.rejected = sols.rejected;
  report.solver.complete = sols.complete;
  report.solver.notes = sols.notes;
  if (sols.backend == "homotopy" && !sols.complete) {
    report.incomplete = true;
    report.issues.push_back("solver flagged incomplete (path failures above threshold)");
  }

  const int n = spec.n(), k = spec.k();
  for (const auto& s : sols.points) {
    VectorXd z = s.z.head(n);
    double fz = rf.eval_f(z);
    double cut = cfg.tols.f_rel * (1.0 + std::pow(z.norm(), std::max(rf.deg_f(), 0)));
    if (std::abs(fz) <= cut) {
      ++report.solver.filtered_on_vf;
      continue;
    }
    try {
      report.routing_points.push_back(classify(rf, spec, z, s.z.tail(k), cfg.tols));
    } catch (const std::exception& e) {
      report.issues.push_back(std::string("candidate dropped during classification: ") + e.what());
    }
  }
  std::sort(report.routing_points.begin(), report.routing_points.end(),
            [](const RoutingPoint& a, const RoutingPoint& b) { return detail::lex_less(a.z, b.z); });

  report.euler = 0;
  for (const auto& p : report.routing_points) report.euler += (p.index % 2 == 0) ? 1 : -1;

  report.validation = validate_routing_function(rf, spec, report.routing_points, cfg.tols);
  const int m = static_cast<int>(report.routing_points.size());
  report.adjacency.assign(m, std::vector<int>(m, 0));
  for (int i = 0; i < m; ++i) report.adjacency[i][i] = 1;

  if (!report.validation.valid) {
    report.components = detail::components_from_adjacency(report.adjacency);
    return report;
  }

  struct Job {
    int point, direction, sense;
  };
  std::vector<Job> jobs;
  for (int j = 0; j < m; ++j)
    for (int d = 0; d < static_cast<int>(report.routing_points[j].unstable.size()); ++d)
      for (int sense : {+1, -1}) jobs.push_back({j, d, sense});

  FlowEngine engine(rf, spec, report.routing_points, cfg.flow, cfg.tols);
  std::vector<std::optional<Trajectory>> results(jobs.size());
  std::vector<std::string> job_errors(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    try {
      results[i] = engine.emanate(jobs[i].point, jobs[i].direction, jobs[i].sense);
    } catch (const std::exception& e) {
      job_errors[i] = e.what();
    }
  }, cfg.solve.workers);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i]) {
      int a = jobs[i].point, b = results[i]->limit_routing_point;
      report.adjacency[a][b] = report.adjacency[b][a] = 1;
      report.trajectories.push_back(std::move(*results[i]));
    } else {
      report.incomplete = true;
      report.issues.push_back("emanation (point " + std::to_string(jobs[i].point) + ", direction " +
                              std::to_string(jobs[i].direction) + ", sense " +
                              std::to_string(jobs[i].sense) + ") failed: " + job_errors[i]);
    }
  }

  report.components = detail::components_from_adjacency(report.adjacency);

  // Each component of X_r carries at least one index-0 routing point; a
  // violation means the solve missed points or a trajectory misrouted.
  for (const auto& comp : report.components) {
    bool has_min = false;
    for (int p : comp) has_min = has_min || report.routing_points[p].index == 0;
    if (!has_min) {
      report.incomplete = true;
      report.issues.push_back("component without an index-0 routing point detected");
    }
  }
  return report;
}

// Membership query: route p and q to their limit routing points and
// compare components. Points within the snap radius of a routing point
// are identified directly.
inline bool query(const ConnectivityReport& report, const RoutingFunction& rf,
                  const VarietySpec& spec, const VectorXd& p, const VectorXd& q,
                  const AnalyzeConfig& cfg = {}) {
  if (report.routing_points.empty()) throw Error("report has no routing points");
  FlowEngine engine(rf, spec, report.routing_points, cfg.flow, cfg.tols);
  auto locate = [&](const VectorXd& x) {
    if (!on_variety(spec, x, cfg.tols.on_variety))
      throw GeometryError("query point is not on the variety");
    double fx = rf.eval_f(x);
    double cut = cfg.tols.f_rel * (1.0 + std::pow(x.norm(), std::max(rf.deg_f(), 0)));
    if (std::abs(fx) <= cut) throw GeometryError("query point lies on V(f): not in X_r");
    auto [idx, dist] = engine.nearest_point(x);
    if (idx >= 0 && dist <= cfg.flow.snap_radius) return idx;
    Trajectory t = engine.flow_to_limit(x);
    if (t.limit_routing_point < 0)
      throw FlowError("query trajectory did not converge (" + to_string(t.status) + ")");
    return t.limit_routing_point;
  };
  int cp = report.component_of(locate(p));
  int cq = report.component_of(locate(q));
  return cp == cq;
}

// Restriction of a report to an open orthant-type region given by sign
// constraints per coordinate (+1, -1, or 0 = unconstrained). Requires
// that X_r avoids the constrained coordinate hyperplanes: either every
// constrained variable divides f, or the caller asserts it.
inline ConnectivityReport filter_report(const ConnectivityReport& report,
                                        const RoutingFunction& rf,
                                        const std::vector<int>& sign_constraint,
                                        bool safety_asserted = false,
                                        std::vector<int>* kept_original = nullptr) {
  if (static_cast<int>(sign_constraint.size()) != rf.nvars())
    throw Error("sign constraint length must match the variable count");
  for (int i = 0; i < rf.nvars(); ++i) {
    if (sign_constraint[i] == 0) continue;
    if (!rf.numerator().divisible_by_var(i) && !safety_asserted)
      throw Error("orthant filtering requires f divisible by each constrained variable "
                  "or an explicit safety assertion");
  }
  std::vector<int> keep_map(report.routing_points.size(), -1);
  ConnectivityReport out;
  out.validation = report.validation;
  out.solver = report.solver;
  out.incomplete = report.incomplete;
  out.issues = report.issues;
  for (std::size_t i = 0; i < report.routing_points.size(); ++i) {
    const auto& z = report.routing_points[i].z;
    bool ok = true;
    for (int v = 0; v < rf.nvars() && ok; ++v) {
      if (sign_constraint[v] > 0) ok = z[v] > 0;
      else if (sign_constraint[v] < 0) ok = z[v] < 0;
    }
    if (ok) {
      keep_map[i] = static_cast<int>(out.routing_points.size());
      out.routing_points.push_back(report.routing_points[i]);
      if (kept_original) kept_original->push_back(static_cast<int>(i));
    }
  }
  const int m = static_cast<int>(out.routing_points.size());
  out.adjacency.assign(m, std::vector<int>(m, 0));
  for (std::size_t i = 0; i < keep_map.size(); ++i) {
    if (keep_map[i] < 0) continue;
    for (std::size_t j = 0; j < keep_map.size(); ++j)
      if (keep_map[j] >= 0)
        out.adjacency[keep_map[i]][keep_map[j]] = report.adjacency[i][j];
  }
  // Components restrict: under the hyperplane-exclusion precondition no
  // component straddles the constrained region boundary.
  for (const auto& comp : report.components) {
    std::vector<int> restricted;
    for (int p : comp)
      if (keep_map[p] >= 0) restricted.push_back(keep_map[p]);
    if (!restricted.empty()) out.components.push_back(std::move(restricted));
  }
  std::sort(out.components.begin(), out.components.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  out.euler = 0;
  for (const auto& p : out.routing_points) out.euler += (p.index % 2 == 0) ? 1 : -1;
  for (const auto& t : report.trajectories) {
    if (t.source_point >= 0 && keep_map[t.source_point] >= 0 && t.limit_routing_point >= 0 &&
        keep_map[t.limit_routing_point] >= 0) {
      Trajectory kept = t;
      kept.source_point = keep_map[t.source_point];
      kept.limit_routing_point = keep_map[t.limit_routing_point];
      out.trajectories.push_back(std::move(kept));
    }
  }
  return out;
}

}  // namespace smoothconn
