#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smoothconn/connectivity.hpp"
#include "smoothconn/errors.hpp"
#include "smoothconn/polynomial.hpp"
#include "smoothconn/routing.hpp"
#include "smoothconn/variety.hpp"

namespace smoothconn {

// Flat key-value problem description. Grammar (one entry per line,
// '#' comments, trailing '\' continues a line):
//
//   vars <name> ...            variable list (required)
//   g <expr>                   one defining polynomial per line (required)
//   dim <int>                  variety dimension (required)
//   f <expr> | S               numerator; S = minor-sum of the Jacobian
//   center <rat> ... | random  routing center (default random)
//   ell <int> | auto           exponent (default auto: floor(deg f/2)+1)
//   seed <uint>                RNG seed (default 0)
//   backend homotopy | multistart | import
//   n_starts <int>             multistart starts
//   box <lo> <hi>              multistart sampling box
//   path_budget <int>          homotopy Bezout budget
//   solutions <path>           import file (relative to the problem file)
//   orthant <+|-|*> ...        sign constraint per variable
//   assert_compact true        required for ell = 0
//   assert_orthant_safe true   orthant filter without f-divisibility
//   workers <int>              worker pool override (0 = auto)
//   tol <name> <value>         tolerance overrides (see ToleranceSet)
//   flow <name> <value>        flow overrides (max_steps, snap_radius, ...)
//   solver <name> <value>      tracker overrides (step_floor, track_tol, ...)
struct Problem {
  std::vector<std::string> vars;
  std::vector<std::string> g_exprs;
  std::string f_expr;
  int dim = -1;
  std::vector<Rational> center;
  bool center_random = true;
  int ell = 0;
  bool ell_auto = true;
  bool assert_compact = false;
  bool assert_orthant_safe = false;
  std::vector<int> orthant;
  std::string solutions_path;
  AnalyzeConfig cfg;
  std::string raw;
  std::string hash_hex;
  std::string source_path;

  bool has_orthant() const {
    for (int s : orthant)
      if (s != 0) return true;
    return false;
  }
};

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> parts;
  std::string tok;
  while (in >> tok) parts.push_back(tok);
  return parts;
}

inline double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("invalid numeric value '" + s + "' for key '" + key + "'");
  }
}

inline long long parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("invalid integer value '" + s + "' for key '" + key + "'");
  }
}

inline bool apply_tolerance(ToleranceSet& t, const std::string& name, double v) {
  if (name == "on_variety") t.on_variety = v;
  else if (name == "rank") t.rank = v;
  else if (name == "frame") t.frame = v;
  else if (name == "curvature") t.curvature = v;
  else if (name == "proj") t.proj = v;
  else if (name == "grad") t.grad = v;
  else if (name == "eig") t.eig_rel = v;
  else if (name == "f") t.f_rel = v;
  else if (name == "level") t.level_rel = v;
  else if (name == "newton") t.newton = v;
  else if (name == "real") t.real = v;
  else if (name == "dedupe") t.dedupe = v;
  else return false;
  return true;
}

inline bool apply_flow(FlowConfig& f, const std::string& name, double v) {
  if (name == "max_steps") f.max_steps = static_cast<int>(v);
  else if (name == "snap_radius") f.snap_radius = v;
  else if (name == "grad_rel") f.grad_rel = v;
  else if (name == "h0_scale") f.h0_scale = v;
  else if (name == "h_min") f.h_min = v;
  else if (name == "h_max_scale") f.h_max_scale = v;
  else if (name == "rmax") f.r_max = v;
  else if (name == "eps") f.eps_emanate = v;
  else if (name == "eps_min") f.eps_min = v;
  else if (name == "eps_max") f.eps_max = v;
  else if (name == "proj_tol") f.proj_tol = v;
  else return false;
  return true;
}

inline bool apply_solver(SolveConfig& s, const std::string& name, double v) {
  if (name == "step_floor") s.step_floor = v;
  else if (name == "track_tol") s.track_tol = v;
  else if (name == "endgame_radius") s.endgame_radius = v;
  else if (name == "max_path_steps") s.max_path_steps = static_cast<int>(v);
  else if (name == "endgame_newton_iters") s.endgame_newton_iters = static_cast<int>(v);
  else if (name == "divergence_radius") s.divergence_radius = v;
  else if (name == "perturbation") s.perturbation = v;
  else return false;
  return true;
}

}  // namespace detail

inline Problem parse_problem(const std::string& text, const std::string& source_path = "") {
  Problem p;
  p.raw = text;
  p.hash_hex = fnv1a_hex(text);
  p.source_path = source_path;

  // Logical lines: strip comments, honor trailing backslash continuations.
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line, pending;
    while (std::getline(in, line)) {
      if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
      while (!line.empty() && (line.back() == '\r' || std::isspace(static_cast<unsigned char>(line.back()))))
        line.pop_back();
      if (!line.empty() && line.back() == '\\') {
        line.pop_back();
        pending += line;
        continue;
      }
      pending += line;
      if (!pending.empty()) lines.push_back(pending);
      pending.clear();
    }
    if (!pending.empty()) lines.push_back(pending);
  }

  bool have_center = false;
  for (const std::string& entry : lines) {
    std::istringstream in(entry);
    std::string key;
    in >> key;
    std::string rest;
    std::getline(in, rest);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.erase(0, 1);

    if (key == "vars") {
      p.vars = detail::split_ws(rest);
      if (p.vars.empty()) throw Error("'vars' needs at least one name");
    } else if (key == "g") {
      if (rest.empty()) throw Error("'g' needs an expression");
      p.g_exprs.push_back(rest);
    } else if (key == "dim") {
      p.dim = static_cast<int>(detail::parse_int(rest, key));
    } else if (key == "f") {
      if (rest.empty()) throw Error("'f' needs an expression or S");
      p.f_expr = rest;
    } else if (key == "center") {
      have_center = true;
      if (rest == "random") {
        p.center_random = true;
      } else {
        p.center_random = false;
        p.center.clear();
        for (const auto& tok : detail::split_ws(rest)) p.center.push_back(parse_rational(tok));
      }
    } else if (key == "ell") {
      if (rest == "auto") {
        p.ell_auto = true;
      } else {
        p.ell_auto = false;
        p.ell = static_cast<int>(detail::parse_int(rest, key));
      }
    } else if (key == "seed") {
      p.cfg.solve.seed = static_cast<std::uint64_t>(detail::parse_int(rest, key));
    } else if (key == "backend") {
      if (rest == "homotopy") p.cfg.solve.backend = SolveBackend::homotopy;
      else if (rest == "multistart") p.cfg.solve.backend = SolveBackend::multistart;
      else if (rest == "import") p.cfg.solve.backend = SolveBackend::import_file;
      else throw Error("unknown backend '" + rest + "'");
    } else if (key == "n_starts") {
      p.cfg.solve.n_starts = static_cast<int>(detail::parse_int(rest, key));
    } else if (key == "box") {
      auto parts = detail::split_ws(rest);
      if (parts.size() != 2) throw Error("'box' needs two values");
      p.cfg.solve.box_lo = detail::parse_double(parts[0], key);
      p.cfg.solve.box_hi = detail::parse_double(parts[1], key);
      if (!(p.cfg.solve.box_lo < p.cfg.solve.box_hi)) throw Error("'box' must be nonempty");
    } else if (key == "path_budget") {
      p.cfg.solve.path_budget = detail::parse_int(rest, key);
    } else if (key == "solutions") {
      p.solutions_path = rest;
    } else if (key == "orthant") {
      p.orthant.clear();
      for (const auto& tok : detail::split_ws(rest)) {
        if (tok == "+") p.orthant.push_back(+1);
        else if (tok == "-") p.orthant.push_back(-1);
        else if (tok == "*") p.orthant.push_back(0);
        else throw Error("orthant tokens must be +, - or *");
      }
    } else if (key == "assert_compact") {
      p.assert_compact = rest == "true" || rest == "1";
    } else if (key == "assert_orthant_safe") {
      p.assert_orthant_safe = rest == "true" || rest == "1";
    } else if (key == "workers") {
      p.cfg.solve.workers = static_cast<int>(detail::parse_int(rest, key));
    } else if (key == "tol" || key == "flow" || key == "solver") {
      auto parts = detail::split_ws(rest);
      if (parts.size() != 2) throw Error("'" + key + "' needs a name and a value");
      double v = detail::parse_double(parts[1], key);
      bool ok = key == "tol" ? detail::apply_tolerance(p.cfg.tols, parts[0], v)
                : key == "flow" ? detail::apply_flow(p.cfg.flow, parts[0], v)
                                : detail::apply_solver(p.cfg.solve, parts[0], v);
      if (!ok) throw Error("unknown " + key + " setting '" + parts[0] + "'");
    } else {
      throw Error("unknown problem key '" + key + "'");
    }
  }

  if (p.vars.empty()) throw Error("problem is missing 'vars'");
  if (p.g_exprs.empty()) throw Error("problem is missing 'g'");
  if (p.dim < 0) throw Error("problem is missing 'dim'");
  if (p.f_expr.empty()) throw Error("problem is missing 'f'");
  if (!have_center) p.center_random = true;
  if (!p.center_random && static_cast<int>(p.center.size()) != static_cast<int>(p.vars.size()))
    throw Error("'center' needs one value per variable");
  if (!p.orthant.empty() && p.orthant.size() != p.vars.size())
    throw Error("'orthant' needs one token per variable");
  // Mirror the solver dedupe into the shared tolerance set unless the user
  // overrode them separately.
  p.cfg.solve.dedupe_tol = p.cfg.tols.dedupe;
  p.cfg.solve.real_tol = p.cfg.tols.real;
  p.cfg.solve.newton_tol = p.cfg.tols.newton;
  return p;
}

inline Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open problem file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_problem(buffer.str(), path);
}

// A fully instantiated problem: geometry, routing function, and the
// resolved configuration (drawn center, concrete exponent, import path).
struct ProblemInstance {
  VarietySpec spec;
  RoutingFunction rf;
  AnalyzeConfig cfg;
  Problem meta;
};

// Centers are drawn uniformly from [0,1]^n with denominator 10^10 so the
// echoed value reproduces the run exactly.
inline std::vector<Rational> draw_center(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::uint64_t den = 10000000000ull;
  std::uniform_int_distribution<std::uint64_t> dist(0, den);
  std::vector<Rational> c;
  c.reserve(n);
  for (int i = 0; i < n; ++i) c.push_back(Rational(BigInt(dist(rng)), BigInt(den)));
  return c;
}

inline ProblemInstance instantiate(const Problem& problem) {
  Problem meta = problem;
  const int n = static_cast<int>(meta.vars.size());
  PolySystem g(n);
  for (const auto& expr : meta.g_exprs) g.push_back(parse_polynomial(expr, meta.vars));
  VarietySpec spec(std::move(g), meta.dim);

  Polynomial f = meta.f_expr == "S" ? spec.singular_minor_sum()
                                    : parse_polynomial(meta.f_expr, meta.vars);
  if (meta.center_random) {
    meta.center = draw_center(n, meta.cfg.solve.seed);
    meta.center_random = false;
  }
  int ell = meta.ell_auto ? RoutingFunction::default_exponent(f) : meta.ell;
  meta.ell = ell;
  meta.ell_auto = false;
  RoutingFunction rf(std::move(f), meta.center, ell, meta.assert_compact);

  AnalyzeConfig cfg = meta.cfg;
  if (!meta.solutions_path.empty()) {
    std::filesystem::path sol(meta.solutions_path);
    if (sol.is_relative() && !meta.source_path.empty())
      sol = std::filesystem::path(meta.source_path).parent_path() / sol;
    cfg.solve.import_path = sol.string();
  } else if (cfg.solve.backend == SolveBackend::import_file) {
    throw Error("import backend requires a 'solutions' path");
  }
  return ProblemInstance{std::move(spec), std::move(rf), std::move(cfg), std::move(meta)};
}

}  // namespace smoothconn
