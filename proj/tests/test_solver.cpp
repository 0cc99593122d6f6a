#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "smoothconn/routing.hpp"
#include "smoothconn/solver.hpp"
#include "smoothconn/variety.hpp"

using namespace smoothconn;

namespace {

const std::vector<std::string> kXY = {"x1", "x2"};
const std::vector<std::string> kXYZ = {"x1", "x2", "x3"};

VarietySpec lines_spec() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 - x2^2", kXY));
  return VarietySpec(std::move(g), 1);
}

VarietySpec circle_spec() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 + x2^2 - 1", kXY));
  return VarietySpec(std::move(g), 1);
}

RoutingFunction lines_rf() {
  return RoutingFunction(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                         {Rational(1, 2), Rational(1, 3)}, 2);
}

// Keep only solutions whose x-block stays off V(f).
std::vector<Eigen::VectorXd> off_vf(const SolutionSet& set, const RoutingFunction& rf, int n) {
  std::vector<Eigen::VectorXd> kept;
  for (const auto& s : set.points) {
    Eigen::VectorXd x = s.z.head(n);
    if (std::abs(rf.eval_f(x)) > 1e-8 * (1.0 + std::pow(x.norm(), rf.deg_f()))) kept.push_back(x);
  }
  return kept;
}

bool contains_point(const std::vector<Eigen::VectorXd>& pts, const Eigen::VectorXd& q,
                    double tol = 1e-8) {
  for (const auto& p : pts)
    if ((p - q).norm() <= tol) return true;
  return false;
}

}  // namespace

TEST_CASE("homotopy solves the lines critical system") {
  VarietySpec spec = lines_spec();
  RoutingFunction rf = lines_rf();
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;
  cfg.seed = 7;
  SolutionSet set = solve_homotopy(crit, 2, cfg);
  CHECK(set.complete);
  for (const auto& s : set.points)
    REQUIRE(s.residual <= cfg.newton_tol * (1.0 + s.z.norm()));

  auto candidates = off_vf(set, rf, 2);
  REQUIRE(candidates.size() == 4);
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) {
      Eigen::VectorXd q(2);
      q << sx * a, sy * a;
      CHECK(contains_point(candidates, q));
    }
}

TEST_CASE("homotopy solves the circle critical system") {
  VarietySpec spec = circle_spec();
  RoutingFunction rf = lines_rf();  // same f and center as the circle example
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;
  cfg.seed = 3;
  SolutionSet set = solve_homotopy(crit, 2, cfg);
  auto candidates = off_vf(set, rf, 2);
  REQUIRE(candidates.size() == 2);
  Eigen::VectorXd m(2), mm(2);
  m << 3.0 / std::sqrt(13.0), 2.0 / std::sqrt(13.0);
  mm = -m;
  CHECK(contains_point(candidates, m));
  CHECK(contains_point(candidates, mm));
}

TEST_CASE("homotopy finds the six umbrella routing points") {
  PolySystem g(3);
  g.push_back(parse_polynomial("x1^2 - x2^2*x3", kXYZ));
  VarietySpec spec(std::move(g), 2);
  RoutingFunction rf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     {Rational(1, 2), Rational(1, 3), Rational(1, 4)}, 3);
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;
  cfg.seed = 11;
  SolutionSet set = solve_homotopy(crit, 3, cfg);
  CHECK(set.complete);
  auto candidates = off_vf(set, rf, 3);
  CHECK(candidates.size() == 6);
}

TEST_CASE("homotopy is deterministic for a fixed seed") {
  VarietySpec spec = lines_spec();
  PolySystem crit = critical_system(lines_rf(), spec);
  SolveConfig cfg;
  cfg.seed = 42;
  SolutionSet a = solve_homotopy(crit, 2, cfg);
  SolutionSet b = solve_homotopy(crit, 2, cfg);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i)
    REQUIRE(a.points[i].z == b.points[i].z);  // bitwise
}

TEST_CASE("path budget guard") {
  VarietySpec spec = lines_spec();
  PolySystem crit = critical_system(lines_rf(), spec);
  SolveConfig cfg;
  cfg.path_budget = 4;  // Bezout count is 18
  CHECK_THROWS_AS(solve_homotopy(crit, 2, cfg), SolveError);
}

TEST_CASE("random dense systems: bookkeeping and multistart cross-check") {
  std::mt19937_64 rng(60601);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  for (int instance = 0; instance < 10; ++instance) {
    PolySystem sys(2);
    for (int e = 0; e < 2; ++e) {
      Polynomial p(2);
      for (int i = 0; i <= 3; ++i)
        for (int j = 0; i + j <= 3; ++j)
          p.add_term({i, j}, parse_rational(std::to_string(coeff(rng)).substr(0, 8)));
      sys.push_back(p);
    }
    SolveConfig cfg;
    cfg.seed = 1000 + instance;
    SolutionSet hset = solve_homotopy(sys, 2, cfg);
    long long accounted = hset.paths_divergent + hset.path_failures;
    for (const auto& s : hset.points) (void)s;
    CHECK(hset.paths_tracked == 9);
    CHECK(accounted <= 9);

    SolveConfig mcfg;
    mcfg.seed = 2000 + instance;
    mcfg.n_starts = 3000;
    mcfg.box_lo = -5;
    mcfg.box_hi = 5;
    SolutionSet mset = solve_multistart(sys, 2, mcfg);
    CHECK_FALSE(mset.complete);
    // Every multistart root must appear among the homotopy endpoints.
    for (const auto& ms : mset.points) {
      bool found = false;
      for (const auto& hs : hset.points)
        found = found || (ms.z - hs.z).norm() <= 1e-6 * (1.0 + hs.z.norm());
      REQUIRE(found);
    }
    // With this many starts the heuristic recovers every root that lies
    // well inside the sampling box.
    for (const auto& hs : hset.points) {
      if (hs.z.lpNorm<Eigen::Infinity>() > 4.0) continue;
      bool found = false;
      for (const auto& ms : mset.points)
        found = found || (ms.z - hs.z).norm() <= 1e-6 * (1.0 + hs.z.norm());
      REQUIRE(found);
    }
  }
}

TEST_CASE("multistart recovers the known critical points") {
  VarietySpec spec = lines_spec();
  RoutingFunction rf = lines_rf();
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;
  cfg.backend = SolveBackend::multistart;
  cfg.seed = 5;
  cfg.n_starts = 500;
  SolutionSet set = solve_multistart(crit, 2, cfg);
  auto candidates = off_vf(set, rf, 2);
  REQUIRE(candidates.size() == 4);
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) {
      Eigen::VectorXd q(2);
      q << sx * a, sy * a;
      CHECK(contains_point(candidates, q, 1e-7));
    }

  cfg.n_starts = 0;
  CHECK(solve_multistart(crit, 2, cfg).points.empty());

  VarietySpec circle = circle_spec();
  PolySystem ccrit = critical_system(rf, circle);
  cfg.n_starts = 200;
  SolutionSet cset = solve_multistart(ccrit, 2, cfg);
  auto cc = off_vf(cset, rf, 2);
  CHECK(cc.size() == 2);
}

TEST_CASE("import accepts solutions and rejects non-solutions") {
  VarietySpec spec = circle_spec();
  RoutingFunction rf = lines_rf();
  PolySystem crit = critical_system(rf, spec);
  SolveConfig cfg;

  const char* path = "import_test_solutions.json";
  {
    std::ofstream out(path);
    double nx = 3.0 / std::sqrt(13.0), ny = 2.0 / std::sqrt(13.0);
    out.precision(15);
    out << "{\"solutions\": [[" << nx << "," << ny << "],[" << -nx << "," << -ny << "]]}";
  }
  SolutionSet set = import_solutions(path, crit, 2, cfg);
  CHECK(set.complete);
  REQUIRE(set.points.size() == 2);
  for (const auto& s : set.points) CHECK(s.residual <= 1e-10 * (1.0 + s.z.norm()));

  {
    std::ofstream out(path);
    out << "{\"solutions\": [[0,0,0]]}";
  }
  SolutionSet bad = import_solutions(path, crit, 2, cfg);
  CHECK(bad.points.empty());
  CHECK(bad.rejected == 1);

  {
    std::ofstream out(path);
    out << "";
  }
  SolutionSet empty = import_solutions(path, crit, 2, cfg);
  CHECK(empty.points.empty());
  CHECK(empty.rejected == 0);

  // Whitespace text format.
  {
    std::ofstream out(path);
    double nx = 3.0 / std::sqrt(13.0), ny = 2.0 / std::sqrt(13.0);
    out.precision(15);
    out << nx << " " << ny << "\n" << -nx << " " << -ny << "\n";
  }
  SolutionSet txt = import_solutions(path, crit, 2, cfg);
  CHECK(txt.points.size() == 2);

  std::remove(path);
  CHECK_THROWS_AS(import_solutions("missing_file.json", crit, 2, cfg), SolveError);
}
