#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "smoothconn/errors.hpp"
#include "smoothconn/routing.hpp"
#include "smoothconn/solver.hpp"
#include "smoothconn/variety.hpp"

namespace smoothconn {

struct FlowConfig {
  double h0_scale = 1e-2;        // initial step = h0_scale * (1 + ||x0||)
  double h_min = 1e-9;
  double h_max_scale = 0.2;      // step cap = h_max_scale * (1 + ||x||)
  int max_steps = 50000;
  double snap_radius = 1e-4;
  double grad_rel = 1e-4;        // snap gate: ||grad r|| <= grad_rel * |r|
  double stationary_rel = 1e-7;  // stationarity away from any known point
  double accept_slack = 1e-12;   // tolerated |r| decrease per accepted step
  double r_max = 1e3;            // bounding ball for trajectories
  double eps_emanate = 1e-3;     // saddle offset, scaled by 1/sqrt(|lambda|)
  double eps_min = 1e-6;
  double eps_max = 1e-2;
  int proj_max_iter = 50;
  double proj_tol = 1e-10;
};

enum class TrajectoryStatus { converged, max_steps, left_tolerance };

inline std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::converged: return "converged";
    case TrajectoryStatus::max_steps: return "max_steps";
    case TrajectoryStatus::left_tolerance: return "left_tolerance";
  }
  return "unknown";
}

// Polyline realization of a gradient trajectory on X_r. |r| is
// nondecreasing along accepted vertices (up to the configured slack) and
// every vertex lies on the variety to projection accuracy.
struct Trajectory {
  std::vector<VectorXd> points;
  std::vector<double> r_values;
  VectorXd start;
  int limit_routing_point = -1;
  TrajectoryStatus status = TrajectoryStatus::max_steps;
  std::string note;
  int source_point = -1;     // emanation provenance
  int source_direction = -1;
  int sense = 0;
  double eps_used = 0.0;
};

// Integrates sign(r(x0)) * grad r / ||grad r|| on X_r by explicit tangent
// steps followed by Newton re-projection onto the variety. The limit is
// identified against a fixed routing-point table and verified by Newton
// refinement of the critical system.
class FlowEngine {
 public:
  FlowEngine(const RoutingFunction& rf, const VarietySpec& spec,
             const std::vector<RoutingPoint>& table, FlowConfig cfg = {}, ToleranceSet tols = {})
      : rf_(rf), spec_(spec), table_(table), cfg_(cfg), tols_(tols),
        critical_(critical_system(rf, spec)) {}

  const std::vector<RoutingPoint>& table() const { return table_; }

  Trajectory flow_to_limit(const VectorXd& x0, int exclude_point = -1) const {
    if (!on_variety(spec_, x0, tols_.on_variety))
      throw FlowError("flow start point is not on the variety");
    double f0 = rf_.eval_f(x0);
    if (std::abs(f0) <= f_cutoff(x0))
      throw FlowError("flow start point lies on V(f): not in X_r");
    {
      auto [idx, dist] = nearest_point(x0, exclude_point);
      if (idx >= 0 && dist <= cfg_.snap_radius)
        throw FlowError("flow start point is within the snap radius of routing point " +
                        std::to_string(idx));
    }

    Trajectory traj;
    traj.start = x0;
    VectorXd x = x0;
    double r = rf_.eval_r(x);
    const double sigma = r > 0 ? 1.0 : -1.0;
    traj.points.push_back(x);
    traj.r_values.push_back(r);

    double h = cfg_.h0_scale * (1.0 + x.norm());
    int consecutive = 0;
    for (int step = 0; step < cfg_.max_steps; ++step) {
      TangentFrame frame;
      try {
        frame = tangent_frame(spec_, x, tols_.rank);
      } catch (const GeometryError& e) {
        throw FlowError(std::string("trajectory hit a rank-deficient point: ") + e.what());
      }
      VectorXd w = intrinsic_gradient(rf_, spec_, frame);
      double gn = w.norm();

      auto [idx, dist] = nearest_point(x, exclude_point);
      if (idx >= 0 && dist <= cfg_.snap_radius &&
          (gn <= cfg_.grad_rel * std::abs(r) || dist <= 0.02 * cfg_.snap_radius)) {
        verify_snap(x, idx);
        traj.points.push_back(table_[idx].z);
        traj.r_values.push_back(table_[idx].r_value);
        traj.limit_routing_point = idx;
        traj.status = TrajectoryStatus::converged;
        return traj;
      }
      if (gn <= cfg_.stationary_rel * std::abs(r))
        throw FlowError("trajectory became stationary away from every known routing point "
                        "(routing-point table incomplete?)");

      VectorXd dir = (sigma / gn) * w;
      bool accepted = false;
      VectorXd y;
      double ry = 0.0;
      while (!accepted) {
        bool projected = true;
        try {
          y = project_to_variety(spec_, frame, h * dir, cfg_.proj_max_iter, cfg_.proj_tol);
        } catch (const GeometryError&) {
          projected = false;
        }
        if (projected) {
          ry = rf_.eval_r(y);
          if (sigma * (ry - r) >= -cfg_.accept_slack) {
            accepted = true;
            break;
          }
        }
        h *= 0.5;
        consecutive = 0;
        if (h < cfg_.h_min) {
          traj.status = TrajectoryStatus::left_tolerance;
          traj.note = "step size collapsed below floor";
          return traj;
        }
      }
      x = y;
      r = ry;
      traj.points.push_back(x);
      traj.r_values.push_back(r);
      if (x.norm() > cfg_.r_max)
        throw FlowError("trajectory left the bounding ball ||x|| <= " + std::to_string(cfg_.r_max));
      if (++consecutive >= 5) {
        h = std::min(2.0 * h, cfg_.h_max_scale * (1.0 + x.norm()));
        consecutive = 0;
      }
    }
    traj.status = TrajectoryStatus::max_steps;
    return traj;
  }

  // Trajectory from a saddle along an unstable eigenvector direction.
  // The offset eps scales inversely with the curvature and the limit is
  // accepted only when stable under eps refinement.
  Trajectory emanate(int point_index, int direction_index, int sense) const {
    const RoutingPoint& z = table_.at(point_index);
    if (direction_index < 0 || direction_index >= static_cast<int>(z.unstable.size()))
      throw FlowError("routing point " + std::to_string(point_index) +
                      " has no unstable direction " + std::to_string(direction_index));
    if (sense != 1 && sense != -1) throw FlowError("sense must be +1 or -1");
    const auto& ud = z.unstable[direction_index];
    double lam = std::max(std::abs(ud.eigenvalue), 1e-30);
    double eps = std::clamp(cfg_.eps_emanate / std::sqrt(lam), cfg_.eps_min, cfg_.eps_max);

    Trajectory first = flow_from_offset(point_index, ud.dir, sense, eps);
    Trajectory second = flow_from_offset(point_index, ud.dir, sense, eps / 4.0);
    if (first.limit_routing_point >= 0 &&
        first.limit_routing_point == second.limit_routing_point) {
      finalize_emanation(first, point_index, direction_index, sense, eps);
      return first;
    }
    Trajectory third = flow_from_offset(point_index, ud.dir, sense, eps / 16.0);
    if (second.limit_routing_point >= 0 &&
        second.limit_routing_point == third.limit_routing_point) {
      finalize_emanation(second, point_index, direction_index, sense, eps / 4.0);
      second.note = "eps reduced after limit disagreement";
      return second;
    }
    throw FlowError("emanation limit unstable under eps refinement at routing point " +
                    std::to_string(point_index));
  }

  // Nearest table entry; used for snapping and membership queries.
  std::pair<int, double> nearest_point(const VectorXd& x, int exclude = -1) const {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table_.size(); ++i) {
      if (static_cast<int>(i) == exclude) continue;
      double d = (table_[i].z - x).norm();
      if (d < best_dist) {
        best_dist = d;
        best = static_cast<int>(i);
      }
    }
    return {best, best_dist};
  }

 private:
  double f_cutoff(const VectorXd& x) const {
    return tols_.f_rel * (1.0 + std::pow(x.norm(), std::max(rf_.deg_f(), 0)));
  }

  Trajectory flow_from_offset(int point_index, const VectorXd& dir, int sense, double eps) const {
    const RoutingPoint& z = table_[point_index];
    TangentFrame frame = tangent_frame(spec_, z.z, tols_.rank);
    VectorXd p = frame.V.transpose() * (double(sense) * eps * dir);
    VectorXd x0;
    double scale = 1.0;
    // Retry with smaller offsets if the projection misses.
    for (int attempt = 0;; ++attempt) {
      try {
        x0 = project_to_variety(spec_, frame, scale * p, cfg_.proj_max_iter, cfg_.proj_tol);
        break;
      } catch (const GeometryError&) {
        scale *= 0.25;
        if (attempt >= 3) throw FlowError("could not project saddle offset onto the variety");
      }
    }
    Trajectory t = flow_to_limit(x0, point_index);
    if (t.limit_routing_point < 0)
      throw FlowError("emanation trajectory did not converge (" + to_string(t.status) +
                      (t.note.empty() ? "" : ": " + t.note) + ")");
    return t;
  }

  void finalize_emanation(Trajectory& t, int point_index, int direction_index, int sense,
                          double eps) const {
    t.source_point = point_index;
    t.source_direction = direction_index;
    t.sense = sense;
    t.eps_used = eps;
  }

  // Newton-refine the critical system from the snapped location and check
  // that it lands on the claimed table entry.
  void verify_snap(const VectorXd& x, int idx) const {
    const int n = spec_.n(), k = spec_.k();
    Eigen::VectorXd z(n + k);
    z.head(n) = x;
    z.tail(k).setZero();
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    std::vector<double> scratch;
    critical_.residual_and_jacobian(z, r, J, scratch);
    z.tail(k) = J.rightCols(k).colPivHouseholderQr().solve(-r);
    double res = newton_refine(critical_, z, 30, tols_.newton);
    if (!(res <= 1e3 * tols_.newton * (1.0 + z.norm())))
      throw FlowError("snap verification failed: refinement residual " + std::to_string(res));
    double dist = (z.head(n) - table_[idx].z).norm();
    if (dist > std::max(10.0 * tols_.dedupe, 1e-6 * (1.0 + table_[idx].z.norm())))
      throw FlowError("snap verification refined to a different critical point (distance " +
                      std::to_string(dist) + ")");
  }

  const RoutingFunction& rf_;
  const VarietySpec& spec_;
  const std::vector<RoutingPoint>& table_;
  FlowConfig cfg_;
  ToleranceSet tols_;
  CompiledSystem critical_;
};

inline Trajectory flow_to_limit(const RoutingFunction& rf, const VarietySpec& spec,
                                const VectorXd& x0, const std::vector<RoutingPoint>& table,
                                const FlowConfig& cfg = {}, const ToleranceSet& tols = {}) {
  return FlowEngine(rf, spec, table, cfg, tols).flow_to_limit(x0);
}

inline Trajectory emanate(const RoutingFunction& rf, const VarietySpec& spec, int point_index,
                          int direction_index, int sense, const std::vector<RoutingPoint>& table,
                          const FlowConfig& cfg = {}, const ToleranceSet& tols = {}) {
  return FlowEngine(rf, spec, table, cfg, tols).emanate(point_index, direction_index, sense);
}

}  // namespace smoothconn
