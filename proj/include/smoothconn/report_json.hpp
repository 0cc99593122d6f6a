#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothconn/connectivity.hpp"
#include "smoothconn/problem.hpp"

namespace smoothconn {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline ordered_json to_json(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline VectorXd vector_from_json(const ordered_json& a) {
  VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

inline std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

inline ordered_json tolerances_to_json(const ToleranceSet& t) {
  return ordered_json{{"on_variety", t.on_variety}, {"rank", t.rank},       {"frame", t.frame},
                      {"curvature", t.curvature},   {"proj", t.proj},       {"grad", t.grad},
                      {"eig", t.eig_rel},           {"f", t.f_rel},         {"level", t.level_rel},
                      {"newton", t.newton},         {"real", t.real},       {"dedupe", t.dedupe}};
}

// Serializes a full analysis. Identical problem + seed produce identical
// bytes except for the generated_at stamp. Trajectory polylines are
// summarized unless include_polylines is set.
inline ordered_json report_to_json(const ConnectivityReport& report, const ProblemInstance& inst,
                                   bool include_polylines = false) {
  const Problem& meta = inst.meta;
  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["generated_at"] = detail::timestamp_utc();
  doc["problem_hash"] = meta.hash_hex;
  doc["problem_file"] = meta.source_path;

  ordered_json config;
  config["seed"] = meta.cfg.solve.seed;
  config["backend"] = backend_name(meta.cfg.solve.backend);
  config["ell"] = meta.ell;
  ordered_json center = ordered_json::array();
  for (const auto& c : meta.center) center.push_back(to_string(c));
  config["center"] = center;
  config["n_starts"] = meta.cfg.solve.n_starts;
  config["box"] = {meta.cfg.solve.box_lo, meta.cfg.solve.box_hi};
  config["path_budget"] = meta.cfg.solve.path_budget;
  config["workers"] = meta.cfg.solve.workers;
  config["tolerances"] = tolerances_to_json(meta.cfg.tols);
  config["flow"] = ordered_json{{"max_steps", meta.cfg.flow.max_steps},
                                {"snap_radius", meta.cfg.flow.snap_radius},
                                {"grad_rel", meta.cfg.flow.grad_rel},
                                {"h0_scale", meta.cfg.flow.h0_scale},
                                {"h_min", meta.cfg.flow.h_min},
                                {"h_max_scale", meta.cfg.flow.h_max_scale},
                                {"rmax", meta.cfg.flow.r_max},
                                {"eps", meta.cfg.flow.eps_emanate}};
  doc["config"] = std::move(config);

  ordered_json validation;
  validation["valid"] = report.validation.valid;
  validation["recommend_rerandomize"] = report.validation.recommend_rerandomize;
  ordered_json checks = ordered_json::array();
  for (const auto& c : report.validation.checks)
    checks.push_back(ordered_json{{"condition", c.condition},
                                  {"passed", c.passed},
                                  {"asserted", c.asserted},
                                  {"detail", c.detail}});
  validation["checks"] = std::move(checks);
  doc["validation"] = std::move(validation);

  ordered_json points = ordered_json::array();
  for (const auto& p : report.routing_points) {
    ordered_json jp;
    jp["z"] = detail::to_json(p.z);
    jp["r_value"] = p.r_value;
    jp["index"] = p.index;
    jp["eigenvalues"] = detail::to_json(p.eigenvalues);
    jp["nondegenerate"] = p.nondegenerate;
    jp["multipliers"] = detail::to_json(p.multipliers);
    jp["grad_residual"] = p.grad_residual;
    ordered_json dirs = ordered_json::array();
    for (const auto& u : p.unstable)
      dirs.push_back(ordered_json{{"eigenvalue", u.eigenvalue}, {"dir", detail::to_json(u.dir)}});
    jp["unstable"] = std::move(dirs);
    points.push_back(std::move(jp));
  }
  doc["routing_points"] = std::move(points);

  doc["euler"] = report.euler;
  doc["adjacency"] = report.adjacency;
  doc["components"] = report.components;

  ordered_json trajectories = ordered_json::array();
  for (const auto& t : report.trajectories) {
    ordered_json jt;
    jt["source_point"] = t.source_point;
    jt["source_direction"] = t.source_direction;
    jt["sense"] = t.sense;
    jt["limit"] = t.limit_routing_point;
    jt["status"] = to_string(t.status);
    jt["steps"] = t.points.size();
    jt["eps"] = t.eps_used;
    if (!t.note.empty()) jt["note"] = t.note;
    if (include_polylines) {
      ordered_json poly = ordered_json::array();
      for (const auto& x : t.points) poly.push_back(detail::to_json(x));
      jt["polyline"] = std::move(poly);
      jt["r_values"] = t.r_values;
    }
    trajectories.push_back(std::move(jt));
  }
  doc["trajectories"] = std::move(trajectories);

  ordered_json solver;
  solver["backend"] = report.solver.backend;
  solver["paths_tracked"] = report.solver.paths_tracked;
  solver["path_failures"] = report.solver.path_failures;
  solver["paths_divergent"] = report.solver.paths_divergent;
  solver["raw_solutions"] = report.solver.raw_solutions;
  solver["filtered_on_vf"] = report.solver.filtered_on_vf;
  solver["rejected"] = report.solver.rejected;
  solver["complete"] = report.solver.complete;
  solver["notes"] = report.solver.notes;
  doc["solver"] = std::move(solver);

  doc["incomplete"] = report.incomplete;
  doc["issues"] = report.issues;

  if (inst.meta.has_orthant()) {
    std::vector<int> kept;
    ConnectivityReport filtered =
        filter_report(report, inst.rf, inst.meta.orthant, inst.meta.assert_orthant_safe, &kept);
    ordered_json jf;
    jf["kept_points"] = kept;
    ordered_json comps = ordered_json::array();
    for (const auto& comp : filtered.components) {
      ordered_json jc = ordered_json::array();
      for (int p : comp) jc.push_back(kept[p]);
      comps.push_back(std::move(jc));
    }
    jf["components"] = std::move(comps);
    jf["euler"] = filtered.euler;
    ordered_json sign = ordered_json::array();
    for (int s : inst.meta.orthant) sign.push_back(s);
    jf["constraint"] = std::move(sign);
    doc["orthant_filtered"] = std::move(jf);
  }
  return doc;
}

// The subset of a saved report needed to answer queries and re-run
// trajectories: the routing-point table, components, and the binding hash.
struct LoadedReport {
  std::string problem_hash;
  ConnectivityReport report;
};

inline LoadedReport report_from_json(const ordered_json& doc) {
  LoadedReport loaded;
  loaded.problem_hash = doc.at("problem_hash").get<std::string>();
  ConnectivityReport& r = loaded.report;
  for (const auto& jp : doc.at("routing_points")) {
    RoutingPoint p;
    p.z = detail::vector_from_json(jp.at("z"));
    p.r_value = jp.at("r_value").get<double>();
    p.index = jp.at("index").get<int>();
    p.eigenvalues = detail::vector_from_json(jp.at("eigenvalues"));
    p.nondegenerate = jp.at("nondegenerate").get<bool>();
    p.multipliers = detail::vector_from_json(jp.at("multipliers"));
    p.grad_residual = jp.at("grad_residual").get<double>();
    for (const auto& ju : jp.at("unstable")) {
      UnstableDirection u;
      u.eigenvalue = ju.at("eigenvalue").get<double>();
      u.dir = detail::vector_from_json(ju.at("dir"));
      p.unstable.push_back(std::move(u));
    }
    r.routing_points.push_back(std::move(p));
  }
  r.euler = doc.at("euler").get<long long>();
  r.adjacency = doc.at("adjacency").get<std::vector<std::vector<int>>>();
  r.components = doc.at("components").get<std::vector<std::vector<int>>>();
  r.validation.valid = doc.at("validation").at("valid").get<bool>();
  r.incomplete = doc.at("incomplete").get<bool>();
  return loaded;
}

inline void write_report(const std::string& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report to '" + path + "'");
  out << doc.dump(2) << "\n";
}

inline ordered_json read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read report '" + path + "'");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw Error(std::string("report JSON parse failure: ") + e.what());
  }
  return doc;
}

}  // namespace smoothconn
