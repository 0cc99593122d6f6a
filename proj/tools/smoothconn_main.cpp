// smoothconn: smooth-connectivity analysis of real algebraic varieties.
//
// Subcommands:
//   analyze   solve, classify, validate, flow, partition; writes JSON
//   query     decide whether two points share a smoothly connected component
//   trace     export a single gradient trajectory as CSV
//   validate  routing-function checks only, verdict per condition
//
// Exit codes: analyze 0 ok / 2 invalid routing function / 3 incomplete;
// query 0 connected / 1 disconnected / >=2 error; validate 0 / 2 invalid.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smoothconn/connectivity.hpp"
#include "smoothconn/flow.hpp"
#include "smoothconn/problem.hpp"
#include "smoothconn/report_json.hpp"

namespace sc = smoothconn;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> workers;
  std::optional<long long> path_budget;
  std::optional<int> n_starts;
  std::vector<std::string> tols;  // name=value pairs

  void apply(sc::Problem& p) const {
    if (seed) p.cfg.solve.seed = *seed;
    if (backend) {
      if (*backend == "homotopy") p.cfg.solve.backend = sc::SolveBackend::homotopy;
      else if (*backend == "multistart") p.cfg.solve.backend = sc::SolveBackend::multistart;
      else if (*backend == "import") p.cfg.solve.backend = sc::SolveBackend::import_file;
      else throw sc::Error("unknown backend '" + *backend + "'");
    }
    if (workers) p.cfg.solve.workers = *workers;
    if (path_budget) p.cfg.solve.path_budget = *path_budget;
    if (n_starts) p.cfg.solve.n_starts = *n_starts;
    for (const auto& spec : tols) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) throw sc::Error("tolerance override must be name=value");
      std::string name = spec.substr(0, eq);
      double value = sc::detail::parse_double(spec.substr(eq + 1), "--tol");
      if (!sc::detail::apply_tolerance(p.cfg.tols, name, value))
        throw sc::Error("unknown tolerance '" + name + "'");
    }
    p.cfg.solve.dedupe_tol = p.cfg.tols.dedupe;
    p.cfg.solve.real_tol = p.cfg.tols.real;
    p.cfg.solve.newton_tol = p.cfg.tols.newton;
  }
};

void add_override_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "override the RNG seed");
  cmd->add_option("--backend", ov.backend, "homotopy | multistart | import");
  cmd->add_option("--workers", ov.workers, "worker pool size (0 = auto)");
  cmd->add_option("--path-budget", ov.path_budget, "homotopy path budget");
  cmd->add_option("--n-starts", ov.n_starts, "multistart count");
  cmd->add_option("--tol", ov.tols, "tolerance override name=value (repeatable)");
}

sc::VectorXd parse_point(const std::string& text, int n) {
  std::string cleaned = text;
  for (char& c : cleaned)
    if (c == ',' || c == '(' || c == ')' || c == '[' || c == ']') c = ' ';
  std::istringstream in(cleaned);
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (static_cast<int>(values.size()) != n)
    throw sc::Error("expected " + std::to_string(n) + " coordinates, got " +
                    std::to_string(values.size()));
  sc::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = values[i];
  return x;
}

// Rebuild the instance against a saved report: geometry from the problem
// file, center and exponent from the report echo, so queries bind to the
// exact analyzed routing function.
sc::ProblemInstance instance_for_report(sc::Problem problem, const sc::ordered_json& doc) {
  const auto& config = doc.at("config");
  problem.center.clear();
  for (const auto& c : config.at("center"))
    problem.center.push_back(sc::parse_rational(c.get<std::string>()));
  problem.center_random = false;
  problem.ell = config.at("ell").get<int>();
  problem.ell_auto = false;
  return sc::instantiate(problem);
}

int cmd_analyze(const std::string& problem_path, const std::string& out_path,
                const Overrides& ov, bool full_trajectories) {
  sc::Problem problem = sc::load_problem(problem_path);
  ov.apply(problem);
  sc::ProblemInstance inst = sc::instantiate(problem);
  sc::ConnectivityReport report = sc::analyze(inst.rf, inst.spec, inst.cfg);
  sc::ordered_json doc = sc::report_to_json(report, inst, full_trajectories);
  if (out_path == "-")
    std::cout << doc.dump(2) << "\n";
  else
    sc::write_report(out_path, doc);

  if (!report.validation.valid) {
    std::cerr << "routing-function validation failed:\n" << report.validation.summary();
    return 2;
  }
  if (report.incomplete) {
    std::cerr << "analysis incomplete:\n";
    for (const auto& issue : report.issues) std::cerr << "  - " << issue << "\n";
    return 3;
  }
  std::cerr << "routing points: " << report.routing_points.size() << ", euler: " << report.euler
            << ", components: " << report.components.size() << "\n";
  return 0;
}

int cmd_validate(const std::string& problem_path, const Overrides& ov) {
  sc::Problem problem = sc::load_problem(problem_path);
  ov.apply(problem);
  sc::ProblemInstance inst = sc::instantiate(problem);
  sc::PolySystem crit = sc::critical_system(inst.rf, inst.spec);
  sc::SolutionSet sols = sc::solve_square_system(crit, inst.spec.n(), inst.cfg.solve);
  std::vector<sc::RoutingPoint> points;
  for (const auto& s : sols.points) {
    sc::VectorXd z = s.z.head(inst.spec.n());
    double cut =
        inst.cfg.tols.f_rel * (1.0 + std::pow(z.norm(), std::max(inst.rf.deg_f(), 0)));
    if (std::abs(inst.rf.eval_f(z)) <= cut) continue;
    try {
      points.push_back(
          sc::classify(inst.rf, inst.spec, z, s.z.tail(inst.spec.k()), inst.cfg.tols));
    } catch (const std::exception&) {
    }
  }
  sc::ValidationReport v =
      sc::validate_routing_function(inst.rf, inst.spec, points, inst.cfg.tols);
  std::cout << "routing points found: " << points.size() << "\n" << v.summary();
  return v.valid ? 0 : 2;
}

int cmd_query(const std::string& problem_path, const std::string& report_path,
              const std::string& p_text, const std::string& q_text, const Overrides& ov) {
  sc::Problem problem = sc::load_problem(problem_path);
  ov.apply(problem);
  sc::ordered_json doc = sc::read_report(report_path);
  sc::LoadedReport loaded = sc::report_from_json(doc);
  if (loaded.problem_hash != problem.hash_hex) {
    std::cerr << "report/problem hash mismatch: report was produced from a different file\n";
    return 3;
  }
  if (!loaded.report.validation.valid) {
    std::cerr << "report records an invalid routing function; re-run analyze\n";
    return 3;
  }
  sc::ProblemInstance inst = instance_for_report(problem, doc);
  sc::VectorXd p = parse_point(p_text, inst.spec.n());
  sc::VectorXd q = parse_point(q_text, inst.spec.n());
  bool connected = sc::query(loaded.report, inst.rf, inst.spec, p, q, inst.cfg);
  std::cout << (connected ? "connected" : "disconnected") << "\n";
  return connected ? 0 : 1;
}

int cmd_trace(const std::string& problem_path, const std::string& report_path,
              const std::string& x0_text, int saddle, int direction, int sense,
              const std::string& out_path, const Overrides& ov) {
  sc::Problem problem = sc::load_problem(problem_path);
  ov.apply(problem);
  sc::ordered_json doc = sc::read_report(report_path);
  sc::LoadedReport loaded = sc::report_from_json(doc);
  if (loaded.problem_hash != problem.hash_hex) {
    std::cerr << "report/problem hash mismatch\n";
    return 2;
  }
  sc::ProblemInstance inst = instance_for_report(problem, doc);
  sc::FlowEngine engine(inst.rf, inst.spec, loaded.report.routing_points, inst.cfg.flow,
                        inst.cfg.tols);
  sc::Trajectory traj;
  if (!x0_text.empty()) {
    sc::VectorXd x0 = parse_point(x0_text, inst.spec.n());
    auto [idx, dist] = engine.nearest_point(x0);
    if (idx >= 0 && dist <= inst.cfg.flow.snap_radius)
      throw sc::Error("start is a stationary point; supply --saddle and --direction instead");
    traj = engine.flow_to_limit(x0);
  } else if (saddle >= 0) {
    traj = engine.emanate(saddle, direction, sense);
  } else {
    throw sc::Error("trace needs either --x0 or --saddle");
  }

  std::FILE* out = out_path == "-" ? stdout : std::fopen(out_path.c_str(), "w");
  if (!out) throw sc::Error("cannot open '" + out_path + "' for writing");
  for (int i = 0; i < inst.spec.n(); ++i) std::fprintf(out, "x%d,", i + 1);
  std::fprintf(out, "r\n");
  for (std::size_t row = 0; row < traj.points.size(); ++row) {
    for (int i = 0; i < inst.spec.n(); ++i) std::fprintf(out, "%.17g,", traj.points[row][i]);
    std::fprintf(out, "%.17g\n", traj.r_values[row]);
  }
  if (out != stdout) std::fclose(out);
  std::cerr << "status: " << sc::to_string(traj.status);
  if (traj.limit_routing_point >= 0)
    std::cerr << ", limit routing point " << traj.limit_routing_point;
  std::cerr << ", " << traj.points.size() << " vertices\n";
  return traj.status == sc::TrajectoryStatus::converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smooth connectivity on real algebraic varieties"};
  app.require_subcommand(1);

  std::string problem_path, out_path = "-", report_path, p_text, q_text, x0_text;
  int saddle = -1, direction = 0, sense = +1;
  bool full_trajectories = false;
  Overrides ov;

  auto* analyze = app.add_subcommand("analyze", "full connectivity analysis");
  analyze->add_option("problem", problem_path, "problem file")->required();
  analyze->add_option("-o,--out", out_path, "output JSON path ('-' = stdout)");
  analyze->add_flag("--full-trajectories", full_trajectories, "embed trajectory polylines");
  add_override_options(analyze, ov);

  auto* query = app.add_subcommand("query", "connectivity membership query");
  query->add_option("problem", problem_path, "problem file")->required();
  query->add_option("report", report_path, "JSON report from analyze")->required();
  query->add_option("--p", p_text, "first point, comma separated")->required();
  query->add_option("--q", q_text, "second point, comma separated")->required();
  add_override_options(query, ov);

  auto* trace = app.add_subcommand("trace", "export one gradient trajectory as CSV");
  trace->add_option("problem", problem_path, "problem file")->required();
  trace->add_option("report", report_path, "JSON report from analyze")->required();
  trace->add_option("--x0", x0_text, "start point");
  trace->add_option("--saddle", saddle, "routing-point index to emanate from");
  trace->add_option("--direction", direction, "unstable direction index");
  trace->add_option("--sense", sense, "+1 or -1");
  trace->add_option("-o,--out", out_path, "CSV path ('-' = stdout)");
  add_override_options(trace, ov);

  auto* validate = app.add_subcommand("validate", "routing-function checks only");
  validate->add_option("problem", problem_path, "problem file")->required();
  add_override_options(validate, ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze))
      return cmd_analyze(problem_path, out_path, ov, full_trajectories);
    if (app.got_subcommand(query))
      return cmd_query(problem_path, report_path, p_text, q_text, ov);
    if (app.got_subcommand(trace))
      return cmd_trace(problem_path, report_path, x0_text, saddle, direction, sense, out_path,
                       ov);
    if (app.got_subcommand(validate)) return cmd_validate(problem_path, ov);
  } catch (const sc::GeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app.got_subcommand(query) ? 4 : 1;
  }
  return 1;
}
