#pragma once

namespace smoothconn {

// Central tolerance set; every threshold in the pipeline routes through
// here so runs are reproducible from the echoed configuration.
struct ToleranceSet {
  double on_variety = 1e-9;     // |g_j(x)| <= on_variety * (1 + ||x||^deg g_j)
  double rank = 1e-8;           // singular values below rank * sigma_max count as zero
  double frame = 1e-8;          // ||Jg V|| <= frame * (1 + ||Jg||)
  double curvature = 1e-8;      // residual bound for the W-matrix linear system
  double proj = 1e-10;          // projection Newton residual
  double grad = 1e-8;           // routing-point gradient residual (scaled)
  double eig_rel = 1e-6;        // degeneracy: min|lambda| <= eig_rel * ||H||
  double f_rel = 1e-8;          // |f(z)| cutoff: f_rel * (1 + ||z||^deg f)
  double level_rel = 1e-6;      // relative separation of routing-point levels
  double newton = 1e-10;        // solver residual: ||F|| <= newton * (1 + ||z||)
  double real = 1e-6;           // imaginary-part threshold for real filtering
  double dedupe = 1e-6;         // solution identity threshold on the x-block
};

}  // namespace smoothconn
