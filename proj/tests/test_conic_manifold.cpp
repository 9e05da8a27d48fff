#include <algorithm>
#include <cmath>

#include "conicxray/conic_manifold.hpp"
#include "conicxray/errors.hpp"
#include "doctest.h"

using namespace conicxray;

namespace {

// Finite-difference Hamilton oracle: canonical equations of the dual metric
// in standard coordinates (x, theta, phi, xi, eta), rescaled by 1/(2x) and
// mapped back to (x, y, tau, mu). Fully independent of the implementation.
struct OracleVelocity {
  double dx, dth, dph, dtau, dmu_a, dmu_b;
};

OracleVelocity fd_hamilton(const ConicMetric& M, const ScCovector& q) {
  const double R = M.link().radius();
  auto G = [&](double x, double th, double ph, double xi, double eta_a, double eta_b) {
    double cp = 1.0;
    if (M.link().kind() == LinkKind::PerturbedSphere) {
      const Vec3 u{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
      cp = M.link().conformal(u);
    }
    const double H0 = (eta_a * eta_a + eta_b * eta_b / (std::sin(th) * std::sin(th))) / (R * R * cp);
    return std::pow(x, 4) * xi * xi + x * x / M.warp(x) * H0;
  };
  const double xi = q.tau / (q.x * q.x);
  const double ea = q.mu.a / q.x, eb = q.mu.b / q.x;
  double v[6] = {q.x, q.y.a, q.y.b, xi, ea, eb};
  auto Gv = [&](const double* a) { return G(a[0], a[1], a[2], a[3], a[4], a[5]); };
  double grad[6];
  for (int i = 0; i < 6; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(v[i]));
    double vp[6], vm[6];
    std::copy(v, v + 6, vp);
    std::copy(v, v + 6, vm);
    vp[i] += h;
    vm[i] -= h;
    grad[i] = (Gv(vp) - Gv(vm)) / (2 * h);
  }
  // Canonical field, half, rescaled by 1/x.
  const double f = 1.0 / (2.0 * q.x);
  const double dx = f * grad[3], dth = f * grad[4], dph = f * grad[5];
  const double dxi = -f * grad[0], dea = -f * grad[1], deb = -f * grad[2];
  OracleVelocity out;
  out.dx = dx;
  out.dth = dth;
  out.dph = dph;
  out.dtau = 2.0 * q.x * xi * dx + q.x * q.x * dxi;
  out.dmu_a = ea * dx + q.x * dea;
  out.dmu_b = eb * dx + q.x * deb;
  return out;
}

}  // namespace

TEST_CASE("dual metric on the exact cone and a warped model") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  ScCovector q{0.3, {1.1, 0.4}, 1.0, {0.0, 0.0}};
  CHECK(cone.dual_metric(q) == doctest::Approx(1.0).epsilon(1e-14));
  q.tau = 0.0;
  CHECK(cone.dual_metric(q) == 0.0);

  // c(x) = 1 + x, |mu|_{h(0)} = 1 at x = 0.1 -> 1/1.1.
  const ConicMetric warped(LinkMetric::round_sphere(1.0), 0.5, WarpProfile({1.0}));
  ScCovector w{0.1, {M_PI / 2, 0.0}, 0.0, {1.0, 0.0}};  // |mu|_{h0,dual} = mu_a/R = 1
  CHECK(warped.dual_metric(w) == doctest::Approx(1.0 / 1.1).epsilon(1e-14));

  ScCovector bad = q;
  bad.x = 0.7;
  CHECK_THROWS_AS(warped.dual_metric(bad), DomainError);
}

TEST_CASE("hamilton field on the exact cone: radial and tangent covectors") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  ScCovector q{0.2, {1.0, 0.5}, 1.0, {0.0, 0.0}};
  const ScVelocity v = cone.sc_hamilton_field(q);
  CHECK(v.dx == doctest::Approx(q.x).epsilon(1e-14));  // radial ray: dx/dt = x
  CHECK(v.dy.a == 0.0);
  CHECK(v.dy.b == 0.0);
  CHECK(v.dtau == 0.0);
  CHECK(v.dmu.a == 0.0);

  ScCovector t{0.2, {M_PI / 2, 0.2}, 0.0, {1.0, 0.0}};
  const ScVelocity vt = cone.sc_hamilton_field(t);
  CHECK(vt.dtau == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(vt.dx == 0.0);
}

TEST_CASE("hamilton field matches the finite-difference oracle on a warped metric") {
  const ConicMetric M(LinkMetric::perturbed_sphere(1.2, 0.1, 3), 0.5, WarpProfile({1.0}));
  const ScCovector q{0.23, {1.1, 0.7}, 0.4, {0.5, 0.3}};
  const ScVelocity v = M.sc_hamilton_field(q);
  const OracleVelocity o = fd_hamilton(M, q);
  CHECK(std::abs(v.dx - o.dx) < 1e-6);
  CHECK(std::abs(v.dy.a - o.dth) < 1e-6);
  CHECK(std::abs(v.dy.b - o.dph) < 1e-6);
  CHECK(std::abs(v.dtau - o.dtau) < 1e-6);
  CHECK(std::abs(v.dmu.a - o.dmu_a) < 1e-6);
  CHECK(std::abs(v.dmu.b - o.dmu_b) < 1e-6);
}

TEST_CASE("covector to b-tangent identification") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  {
    const ScCovector q{0.3, {1.0, 0.0}, 1.0, {0.0, 0.0}};
    const BTangent b = cone.covector_to_btangent(q);
    CHECK(b.lambda == 1.0);
    CHECK(b.omega.a == 0.0);
    CHECK(b.omega.b == 0.0);
  }
  {
    const ScCovector q{0.3, {M_PI / 2, 0.0}, 0.0, {1.0, 0.0}};
    const BTangent b = cone.covector_to_btangent(q);
    CHECK(b.lambda == 0.0);
    CHECK(std::abs(b.omega.a) == doctest::Approx(1.0).epsilon(1e-12));  // |omega|_h = 1
  }
  {
    const ScCovector q{0.3, {M_PI / 2, 0.0}, 0.6, {0.8, 0.0}};
    const BTangent b = cone.covector_to_btangent(q);
    CHECK(b.lambda == doctest::Approx(0.6));
    CHECK(std::abs(b.omega.a) == doctest::Approx(0.8).epsilon(1e-12));
  }
  {
    ScCovector off{0.3, {M_PI / 2, 0.0}, 0.9, {0.8, 0.0}};  // |.| != 1
    CHECK_THROWS_AS(cone.covector_to_btangent(off), ContractViolation);
  }
}

TEST_CASE("warp profile invariants") {
  CHECK(WarpProfile({1.0}).value(0.0) == 1.0);
  CHECK(WarpProfile({1.0}).value(0.2) == doctest::Approx(1.2));
  CHECK(WarpProfile({1.0, -0.5}).derivative(0.1) == doctest::Approx(1.0 - 0.1));
  // c(x) dropping below 1/2 on the collar is rejected.
  CHECK_THROWS_AS(ConicMetric(LinkMetric::round_sphere(1.0), 0.5, WarpProfile({-1.9})),
                  ArgumentError);
}
