#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "smoothconn/flow.hpp"

using namespace smoothconn;

namespace {

const std::vector<std::string> kXY = {"x1", "x2"};
const std::vector<std::string> kXYZ = {"x1", "x2", "x3"};

struct Setup {
  VarietySpec spec;
  RoutingFunction rf;
  std::vector<RoutingPoint> table;
};

std::vector<RoutingPoint> routing_table(const RoutingFunction& rf, const VarietySpec& spec,
                                        std::uint64_t seed) {
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;
  cfg.seed = seed;
  SolutionSet set = solve_homotopy(crit, spec.n(), cfg);
  std::vector<RoutingPoint> table;
  for (const auto& s : set.points) {
    Eigen::VectorXd x = s.z.head(spec.n());
    if (std::abs(rf.eval_f(x)) <= 1e-8 * (1.0 + std::pow(x.norm(), rf.deg_f()))) continue;
    table.push_back(classify(rf, spec, x, s.z.tail(spec.k())));
  }
  std::sort(table.begin(), table.end(), [](const RoutingPoint& a, const RoutingPoint& b) {
    for (int i = 0; i < a.z.size(); ++i) {
      if (a.z[i] < b.z[i]) return true;
      if (a.z[i] > b.z[i]) return false;
    }
    return false;
  });
  return table;
}

Setup lines_setup() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 - x2^2", kXY));
  VarietySpec spec(std::move(g), 1);
  RoutingFunction rf(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                     {Rational(1, 2), Rational(1, 3)}, 2);
  auto table = routing_table(rf, spec, 7);
  return {std::move(spec), std::move(rf), std::move(table)};
}

Setup circle_setup() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 + x2^2 - 1", kXY));
  VarietySpec spec(std::move(g), 1);
  RoutingFunction rf(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                     {Rational(1, 2), Rational(1, 3)}, 2);
  auto table = routing_table(rf, spec, 3);
  return {std::move(spec), std::move(rf), std::move(table)};
}

Setup whitney_setup() {
  PolySystem g(3);
  g.push_back(parse_polynomial("x1^2 - x2^2*x3", kXYZ));
  VarietySpec spec(std::move(g), 2);
  RoutingFunction rf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     {Rational(1, 2), Rational(1, 3), Rational(1, 4)}, 3);
  auto table = routing_table(rf, spec, 11);
  return {std::move(spec), std::move(rf), std::move(table)};
}

void check_trajectory_invariants(const Trajectory& t, const VarietySpec& spec, double sigma) {
  for (std::size_t i = 0; i + 1 < t.r_values.size(); ++i)
    REQUIRE(sigma * (t.r_values[i + 1] - t.r_values[i]) >= -1e-12);
  for (const auto& x : t.points) {
    REQUIRE(on_variety(spec, x, 1e-8));  // 10x projection tolerance scale
    REQUIRE(x.norm() <= 1e3);
  }
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

VectorXd vec3(double a, double b, double c) {
  VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("flow on the lines reaches the branch maximum") {
  Setup s = lines_setup();
  REQUIRE(s.table.size() == 4);
  FlowEngine engine(s.rf, s.spec, s.table);
  Trajectory t = engine.flow_to_limit(vec2(2, 2));
  REQUIRE(t.status == TrajectoryStatus::converged);
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  CHECK((s.table[t.limit_routing_point].z - vec2(a, a)).norm() < 1e-8);
  check_trajectory_invariants(t, s.spec, +1.0);

  // Starting within the snap radius violates the precondition.
  VectorXd near_pt = s.table[0].z;
  near_pt[0] += 1e-5;
  CHECK_THROWS_AS(engine.flow_to_limit(near_pt), FlowError);

  // Starting on V(f) (the singular origin) is rejected.
  CHECK_THROWS_AS(engine.flow_to_limit(vec2(0, 0)), FlowError);
  // Starting off the variety is rejected.
  CHECK_THROWS_AS(engine.flow_to_limit(vec2(1.5, 0.5)), FlowError);
}

TEST_CASE("flow limits are stable under halving the snap radius") {
  Setup s = lines_setup();
  FlowConfig cfg;
  FlowEngine engine(s.rf, s.spec, s.table, cfg);
  Trajectory t1 = engine.flow_to_limit(vec2(2, 2));
  FlowConfig half = cfg;
  half.snap_radius = cfg.snap_radius / 2;
  FlowEngine engine2(s.rf, s.spec, s.table, half);
  Trajectory t2 = engine2.flow_to_limit(vec2(2, 2));
  CHECK(t1.limit_routing_point == t2.limit_routing_point);
}

TEST_CASE("whitney trajectory from the reference start point") {
  Setup s = whitney_setup();
  REQUIRE(s.table.size() == 6);
  FlowEngine engine(s.rf, s.spec, s.table);
  Trajectory t = engine.flow_to_limit(vec3(-2.25, 1.5, 2.25));
  REQUIRE(t.status == TrajectoryStatus::converged);
  CHECK(s.table[t.limit_routing_point].index == 0);  // a local maximum
  check_trajectory_invariants(t, s.spec, +1.0);
}

TEST_CASE("whitney saddle emanations reach maxima") {
  Setup s = whitney_setup();
  FlowEngine engine(s.rf, s.spec, s.table);
  int saddles = 0;
  for (std::size_t j = 0; j < s.table.size(); ++j) {
    if (s.table[j].index != 1) continue;
    ++saddles;
    for (int sense : {+1, -1}) {
      Trajectory t = engine.emanate(static_cast<int>(j), 0, sense);
      REQUIRE(t.status == TrajectoryStatus::converged);
      CHECK(s.table[t.limit_routing_point].index == 0);
      CHECK(t.source_point == static_cast<int>(j));
      check_trajectory_invariants(t, s.spec, s.table[j].r_value > 0 ? +1.0 : -1.0);
    }
  }
  CHECK(saddles == 2);
}

TEST_CASE("circle minimum emanates to the maximum on both sides") {
  Setup s = circle_setup();
  REQUIRE(s.table.size() == 2);
  // Canonical order puts the antipodal minimum (negative coords) first.
  REQUIRE(s.table[0].index == 1);
  REQUIRE(s.table[1].index == 0);
  FlowEngine engine(s.rf, s.spec, s.table);
  for (int sense : {+1, -1}) {
    Trajectory t = engine.emanate(0, 0, sense);
    REQUIRE(t.status == TrajectoryStatus::converged);
    CHECK(t.limit_routing_point == 1);
    check_trajectory_invariants(t, s.spec, +1.0);
  }
  // An index-0 point has no unstable directions.
  CHECK_THROWS_AS(engine.emanate(1, 0, +1), FlowError);
}
