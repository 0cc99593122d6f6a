#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "smoothconn/eval.hpp"
#include "smoothconn/routing.hpp"

using namespace smoothconn;

namespace {

const std::vector<std::string> kXY = {"x1", "x2"};
const std::vector<std::string> kXYZ = {"x1", "x2", "x3"};

VarietySpec lines_spec() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 - x2^2", kXY));
  return VarietySpec(std::move(g), 1);
}

VarietySpec whitney_spec() {
  PolySystem g(3);
  g.push_back(parse_polynomial("x1^2 - x2^2*x3", kXYZ));
  return VarietySpec(std::move(g), 2);
}

VarietySpec circle_spec() {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 + x2^2 - 1", kXY));
  return VarietySpec(std::move(g), 1);
}

std::vector<Rational> rat_center(std::initializer_list<Rational> rs) { return rs; }

RoutingFunction lines_rf() {
  return RoutingFunction(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                         rat_center({Rational(1, 2), Rational(1, 3)}), 2);
}

RoutingFunction circle_rf() {
  return RoutingFunction(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                         rat_center({Rational(1, 2), Rational(1, 3)}), 2);
}

TangentFrame whitney_reference_frame() {
  TangentFrame frame;
  frame.base = Eigen::Vector3d(1, 1, 1);
  frame.V.resize(3, 2);
  double s = 1.0 / std::sqrt(2.0);
  frame.V << s, s / 3.0, s, -s / 3.0, 0.0, 4.0 * s / 3.0;
  return frame;
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

// Fill the multiplier block of the critical system by least squares.
VectorXd critical_residual(const PolySystem& crit, int n, const VectorXd& x) {
  CompiledSystem F(crit);
  Eigen::VectorXd z(crit.nvars);
  z.head(n) = x;
  z.tail(crit.nvars - n).setZero();
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  std::vector<double> scratch;
  F.residual_and_jacobian(z, r, J, scratch);
  z.tail(crit.nvars - n) = J.rightCols(crit.nvars - n).colPivHouseholderQr().solve(-r);
  F.residual(z, r, scratch);
  return r;
}

}  // namespace

TEST_CASE("routing function construction guards") {
  CHECK_THROWS_AS(RoutingFunction(parse_polynomial("x1^4 + x2^4", kXY),
                                  rat_center({Rational(0), Rational(0)}), 2),
                  Error);
  CHECK_THROWS_AS(RoutingFunction(parse_polynomial("x1", kXY),
                                  rat_center({Rational(0), Rational(0)}), 0),
                  Error);
  CHECK_NOTHROW(RoutingFunction(parse_polynomial("x1", kXY),
                                rat_center({Rational(0), Rational(0)}), 0, true));
  CHECK(RoutingFunction::default_exponent(parse_polynomial("x1^4 + x2^4", kXY)) == 3);
}

TEST_CASE("ambient gradient of r") {
  RoutingFunction rf = lines_rf();
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  VectorXd z = vec2(a, a);
  VectorXd g = rf.ambient_grad(z);
  // At a routing point the ambient gradient is orthogonal to the branch
  // direction (1,1).
  CHECK(std::abs(g.dot(vec2(1, 1))) < 1e-12 * (1.0 + g.norm()));

  // ell = 0 collapses to grad f.
  RoutingFunction plain(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                        rat_center({Rational(0), Rational(0)}), 0, true);
  VectorXd x = vec2(0.3, -0.7);
  CHECK((plain.ambient_grad(x) - plain.eval_grad_f(x)).norm() < 1e-15);

  // Constant numerator: gradient vanishes at the center by symmetry.
  RoutingFunction bump(Polynomial::constant(2, Rational(1)),
                       rat_center({Rational(1, 4), Rational(-2)}), 1);
  CHECK(bump.ambient_grad(bump.center_point()).norm() == 0.0);
}

TEST_CASE("intrinsic gradient matches the worked examples") {
  VarietySpec lines = lines_spec();
  RoutingFunction f_only(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                         rat_center({Rational(0), Rational(0)}), 0, true);
  TangentFrame frame = tangent_frame(lines, vec2(1, 1));
  VectorXd ig = intrinsic_gradient(f_only, lines, frame);
  CHECK(std::abs(ig.norm() - 8.0 * std::sqrt(2.0)) < 1e-12);

  VarietySpec whitney = whitney_spec();
  RoutingFunction wf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     rat_center({Rational(0), Rational(0), Rational(0)}), 0, true);
  TangentFrame ref = whitney_reference_frame();
  VectorXd igw = intrinsic_gradient(wf, whitney, ref);
  double s = 2.0 * std::sqrt(2.0) / 3.0;
  CHECK(std::abs(igw[0] - 15.0 * s) < 1e-10);
  CHECK(std::abs(igw[1] - 7.0 * s) < 1e-10);
  CHECK(std::abs(igw.norm() - s * std::sqrt(274.0)) < 1e-10);

  // Norm is frame-invariant: compare against the SVD frame.
  TangentFrame svd_frame = tangent_frame(whitney, vec3(1, 1, 1));
  CHECK(std::abs(intrinsic_gradient(wf, whitney, svd_frame).norm() - s * std::sqrt(274.0)) <
        1e-10);

  // Unconstrained critical point of f on X has vanishing intrinsic gradient.
  RoutingFunction shifted(parse_polynomial("(x1-2)^2 + (x2-2)^2", kXY),
                          rat_center({Rational(0), Rational(0)}), 0, true);
  TangentFrame at2 = tangent_frame(lines, vec2(2, 2));
  CHECK(intrinsic_gradient(shifted, lines, at2).norm() < 1e-14);
}

TEST_CASE("intrinsic hessian matches the worked examples") {
  VarietySpec lines = lines_spec();
  RoutingFunction f_only(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                         rat_center({Rational(0), Rational(0)}), 0, true);
  CurvatureData cd = curvature_matrices(lines, tangent_frame(lines, vec2(1, 1)));
  MatrixXd h = intrinsic_hessian(f_only, lines, cd);
  REQUIRE(h.rows() == 1);
  CHECK(std::abs(h(0, 0) - 8.0) < 1e-12);

  VarietySpec whitney = whitney_spec();
  RoutingFunction wf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     rat_center({Rational(0), Rational(0), Rational(0)}), 0, true);
  CurvatureData cw = curvature_matrices(whitney, whitney_reference_frame());
  MatrixXd hw = intrinsic_hessian(wf, whitney, cw);
  MatrixXd expected(2, 2);
  expected << 567, 303, 303, 127;
  expected *= 2.0 / 81.0;
  CHECK((hw - expected).norm() < 1e-10);

  // Signature: one positive, one negative eigenvalue.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hw);
  CHECK(es.eigenvalues()[0] < 0.0);
  CHECK(es.eigenvalues()[1] > 0.0);

  // Eigenvalues are frame-invariant.
  CurvatureData c_svd = curvature_matrices(whitney, tangent_frame(whitney, vec3(1, 1, 1)));
  MatrixXd h_svd = intrinsic_hessian(wf, whitney, c_svd);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es2(h_svd);
  CHECK((es.eigenvalues() - es2.eigenvalues()).norm() < 1e-8);
}

TEST_CASE("critical system shape and closed-form solutions") {
  VarietySpec lines = lines_spec();
  RoutingFunction rf = lines_rf();
  PolySystem crit = critical_system(rf, lines);
  REQUIRE(crit.nvars == 3);
  REQUIRE(crit.size() == 3);

  double a = 7.0 / (6.0 * std::sqrt(2.0));
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) {
      VectorXd r = critical_residual(crit, 2, vec2(sx * a, sy * a));
      REQUIRE(r.norm() < 1e-10);
    }
  // A generic on-variety point is not critical.
  CHECK(critical_residual(crit, 2, vec2(2, 2)).norm() > 1e-3);

  VarietySpec circle = circle_spec();
  RoutingFunction crf = circle_rf();
  PolySystem ccrit = critical_system(crf, circle);
  double nx = 3.0 / std::sqrt(13.0), ny = 2.0 / std::sqrt(13.0);
  CHECK(critical_residual(ccrit, 2, vec2(nx, ny)).norm() < 1e-10);
  CHECK(critical_residual(ccrit, 2, vec2(-nx, -ny)).norm() < 1e-10);

  // Degenerate center c = 0: every circle point solves the system.
  RoutingFunction c0(parse_polynomial("4*(x1^2 + x2^2)", kXY),
                     rat_center({Rational(0), Rational(0)}), 2);
  PolySystem crit0 = critical_system(c0, circle);
  for (double theta : {0.3, 1.7, 4.0})
    CHECK(critical_residual(crit0, 2, vec2(std::cos(theta), std::sin(theta))).norm() < 1e-10);
}

TEST_CASE("ell = 0 critical system drops the denominator block") {
  PolySystem g(2);
  g.push_back(parse_polynomial("x1^2 + x2^2 - 1", kXY));
  VarietySpec circle(std::move(g), 1);
  RoutingFunction rf(parse_polynomial("x2", kXY), rat_center({Rational(0), Rational(0)}), 0,
                     true);
  PolySystem crit = critical_system(rf, circle);
  // grad f + Jg^T mu = 0 -> (2 mu x1, 1 + 2 mu x2, g). Poles at (0, +-1).
  CHECK(critical_residual(crit, 2, vec2(0, 1)).norm() < 1e-12);
  CHECK(critical_residual(crit, 2, vec2(0, -1)).norm() < 1e-12);
  CHECK(critical_residual(crit, 2, vec2(1, 0)).norm() > 1e-2);
}

TEST_CASE("classification of closed-form routing points") {
  VarietySpec lines = lines_spec();
  RoutingFunction rf = lines_rf();
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0}) {
      RoutingPoint pt = classify(rf, lines, vec2(sx * a, sy * a), VectorXd::Zero(1));
      CHECK(pt.r_value > 0.0);
      CHECK(pt.index == 0);
      CHECK(pt.nondegenerate);
      CHECK(pt.unstable.empty());
      CHECK(pt.eigenvalues[0] < 0.0);
    }

  VarietySpec circle = circle_spec();
  RoutingFunction crf = circle_rf();
  double nx = 3.0 / std::sqrt(13.0), ny = 2.0 / std::sqrt(13.0);
  RoutingPoint maxpt = classify(crf, circle, vec2(nx, ny), VectorXd::Zero(1));
  CHECK(maxpt.index == 0);
  RoutingPoint minpt = classify(crf, circle, vec2(-nx, -ny), VectorXd::Zero(1));
  CHECK(minpt.index == 1);
  REQUIRE(minpt.unstable.size() == 1);
  // Unstable direction is tangent to the circle at the minimum.
  VectorXd tangent = vec2(ny, -nx);
  CHECK(std::abs(std::abs(minpt.unstable[0].dir.dot(tangent)) - 1.0) < 1e-9);

  // Points off the critical set are rejected.
  CHECK_THROWS(classify(crf, circle, vec2(1, 0), VectorXd::Zero(1)));
  // Points on V(f) are rejected.
  CHECK_THROWS(classify(rf, lines, vec2(0, 0), VectorXd::Zero(1)));
}

TEST_CASE("validation flags degeneracy and level collisions") {
  VarietySpec lines = lines_spec();
  RoutingFunction rf = lines_rf();
  double a = 7.0 / (6.0 * std::sqrt(2.0));
  std::vector<RoutingPoint> pts;
  for (double sx : {1.0, -1.0})
    for (double sy : {1.0, -1.0})
      pts.push_back(classify(rf, lines, vec2(sx * a, sy * a), VectorXd::Zero(1)));
  ValidationReport ok = validate_routing_function(rf, lines, pts);
  CHECK(ok.valid);
  CHECK_FALSE(ok.recommend_rerandomize);

  // Duplicate level values -> condition 4 violation.
  std::vector<RoutingPoint> dup = pts;
  dup[1].r_value = dup[0].r_value;
  ValidationReport collide = validate_routing_function(rf, lines, dup);
  CHECK_FALSE(collide.valid);
  CHECK(collide.recommend_rerandomize);

  // A degenerate point -> condition 3 violation.
  std::vector<RoutingPoint> degen = pts;
  degen[2].nondegenerate = false;
  ValidationReport flat = validate_routing_function(rf, lines, degen);
  CHECK_FALSE(flat.valid);

  // Antipodal-style pairs with opposite signs do not collide.
  std::vector<RoutingPoint> signed_pair(2);
  signed_pair[0].r_value = 0.5;
  signed_pair[1].r_value = -0.5;
  signed_pair[0].nondegenerate = signed_pair[1].nondegenerate = true;
  CHECK(validate_routing_function(rf, lines, signed_pair).valid);
}

TEST_CASE("intrinsic derivatives match finite differences along the variety") {
  VarietySpec whitney = whitney_spec();
  RoutingFunction rf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     rat_center({Rational(1, 2), Rational(1, 3), Rational(1, 4)}), 3);
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  int tested = 0;
  for (int trial = 0; trial < 60 && tested < 12; ++trial) {
    double u = unif(rng), v = unif(rng);
    if (std::abs(u) < 0.3) continue;
    VectorXd x = vec3(u * v, u, v * v);
    TangentFrame frame = tangent_frame(whitney, x);
    CurvatureData cd = curvature_matrices(whitney, frame);
    VectorXd w = intrinsic_gradient(rf, whitney, frame);
    MatrixXd h = intrinsic_hessian(rf, whitney, cd);
    VectorXd dir = VectorXd::Random(2).normalized();
    auto phi = [&](double t) {
      return rf.eval_r(project_to_variety(whitney, frame, t * dir));
    };
    double hstep = 1e-5;
    double fd1 = (phi(hstep) - phi(-hstep)) / (2 * hstep);
    double exact1 = w.dot(dir);
    REQUIRE(std::abs(fd1 - exact1) <= 1e-5 * (1.0 + std::abs(exact1)));
    double hstep2 = 1e-4;
    double fd2 = (phi(hstep2) - 2.0 * phi(0.0) + phi(-hstep2)) / (hstep2 * hstep2);
    double exact2 = dir.dot(h * dir);
    REQUIRE(std::abs(fd2 - exact2) <= 1e-4 * (1.0 + std::abs(exact2)));
    ++tested;
  }
  REQUIRE(tested >= 8);
}

TEST_CASE("hessian eigenvalues are invariant under frame rotation") {
  VarietySpec whitney = whitney_spec();
  RoutingFunction rf(parse_polynomial("4*x1^2 + 4*x2^2*x3^2 + x2^4", kXYZ),
                     rat_center({Rational(1, 2), Rational(1, 3), Rational(1, 4)}), 3);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss;
  VectorXd x = vec3(0.8 * 1.1, 0.8, 1.21);
  TangentFrame frame = tangent_frame(whitney, x);
  CurvatureData cd = curvature_matrices(whitney, frame);
  MatrixXd h = intrinsic_hessian(rf, whitney, cd);
  Eigen::SelfAdjointEigenSolver<MatrixXd> base(h);
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd M(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) M(i, j) = gauss(rng);
    MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(M).householderQ();
    TangentFrame rot{frame.base, frame.V * Q};
    CurvatureData cr = curvature_matrices(whitney, rot);
    MatrixXd hr = intrinsic_hessian(rf, whitney, cr);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(hr);
    REQUIRE((es.eigenvalues() - base.eigenvalues()).norm() <= 1e-8);
  }
}
