#include <cmath>
#include <random>

#include "conicxray/errors.hpp"
#include "conicxray/link_geometry.hpp"
#include "doctest.h"

using namespace conicxray;

namespace {

// Closed-form great-circle flow on the round sphere: the oracle for the
// integrated link flow. Returns (point, ambient covector).
struct GreatCircle {
  Vec3 u, m;
};
GreatCircle great_circle(double R, const Vec3& u0, const Vec3& e0_unit, double r) {
  GreatCircle g;
  g.u = std::cos(r / R) * u0 + std::sin(r / R) * e0_unit;
  // m = R^2 u'(r); |m| = R for unit speed.
  g.m = R * (std::cos(r / R) * e0_unit - std::sin(r / R) * u0);
  return g;
}

double state_distance(const LinkMetric& link, const LinkState& a, const LinkState& b) {
  const Vec3 ua = link.embed(a.y), ub = link.embed(b.y);
  const Vec3 ma = link.covector_ambient(a.y, a.mu_hat), mb = link.covector_ambient(b.y, b.mu_hat);
  return norm(ua - ub) + norm(ma - mb);
}

}  // namespace

TEST_CASE("circle flow is a constant-speed rotation") {
  const LinkMetric link = LinkMetric::circle(1.0);
  LinkState s{{0.0, 0.0}, {1.0, 0.0}};
  const LinkState out = link_flow(link, s, M_PI / 2);
  CHECK(out.y.a == doctest::Approx(M_PI / 2).epsilon(1e-14));
  CHECK(out.mu_hat.a == doctest::Approx(1.0));
  const LinkState same = link_flow(link, s, 0.0);
  CHECK(same.y.a == s.y.a);
}

TEST_CASE("round sphere flow matches the great-circle oracle") {
  const double R = 1.0;
  const LinkMetric link = LinkMetric::round_sphere(R);
  // Equator start moving along +phi.
  LinkState s{{M_PI / 2, 0.0}, {0.0, R}};
  const LinkState anti = link_flow(link, s, M_PI * R);
  const Vec3 u0{1, 0, 0}, e0{0, 1, 0};
  const GreatCircle gc = great_circle(R, u0, e0, M_PI * R);
  CHECK(norm(link.embed(anti.y) - gc.u) < 1e-9);
  CHECK(norm(link.covector_ambient(anti.y, anti.mu_hat) - gc.m) < 1e-8);

  // Tilted start: 35 degrees off the equator direction.
  const double psi = 35.0 * M_PI / 180.0;
  const Vec3 e_theta{0, 0, -1};  // at the equator point (1,0,0)
  const Vec3 e_tilt = std::cos(psi) * e0 + std::sin(psi) * e_theta;
  LinkState s2{{M_PI / 2, 0.0}, link.covector_chart(u0, R * e_tilt)};
  for (double r : {0.4, 1.3, 2.9}) {
    const LinkState out = link_flow(link, s2, r);
    const GreatCircle g = great_circle(R, u0, e_tilt, r);
    CHECK(norm(link.embed(out.y) - g.u) < 1e-9);
    CHECK(norm(link.covector_ambient(out.y, out.mu_hat) - g.m) < 1e-8);
  }
}

TEST_CASE("flow group law and unit speed on a perturbed sphere") {
  const LinkMetric link = LinkMetric::perturbed_sphere(1.0, 0.15, 3);
  std::mt19937_64 rng(7);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  for (int trial = 0; trial < 6; ++trial) {
    LinkState s;
    s.y = {uni(0.4, M_PI - 0.4), uni(0.0, 2 * M_PI)};
    const double psi = uni(0.0, 2 * M_PI);
    // Build a unit covector at y in direction psi.
    const Vec3 u = link.embed(s.y);
    const double st = std::sin(s.y.a), ct = std::cos(s.y.a);
    const Vec3 e_theta{ct * std::cos(s.y.b), ct * std::sin(s.y.b), -st};
    const Vec3 e_phi{-std::sin(s.y.b), std::cos(s.y.b), 0.0};
    const double len = link.radius() * std::sqrt(link.conformal(u));
    const Vec3 m = len * (std::cos(psi) * e_theta + std::sin(psi) * e_phi);
    s.mu_hat = link.covector_chart(u, m);

    const double a = uni(-M_PI, M_PI), b = uni(-M_PI, M_PI);
    const LinkState one = link_flow(link, s, a + b);
    const LinkState two = link_flow(link, link_flow(link, s, a), b);
    CHECK(state_distance(link, one, two) < 1e-8);

    const double speed = std::sqrt(link.dual_norm2(one.y, one.mu_hat));
    CHECK(std::abs(speed - 1.0) < 1e-9);
  }
}

TEST_CASE("non-unit covector is rejected") {
  const LinkMetric link = LinkMetric::circle(2.0);
  LinkState s{{0.0, 0.0}, {1.0, 0.0}};  // |mu|_h = 1/2
  CHECK_THROWS_AS(link_flow(link, s, 0.3), ContractViolation);
}

TEST_CASE("conjugate scan on spheres matches the sin(r/R) Jacobi oracle") {
  // J(r) = R sin(r/R): first zero at pi R.
  LinkState s{{M_PI / 2, 0.0}, {0.0, 1.0}};
  {
    const LinkMetric link = LinkMetric::round_sphere(1.0);
    s.mu_hat = {0.0, 1.0};
    CHECK_FALSE(conjugate_scan(link, s, M_PI / 2).has_value());
    const auto full = conjugate_scan(link, s, M_PI);
    REQUIRE(full.has_value());
    CHECK(*full == doctest::Approx(M_PI).epsilon(1e-6));
  }
  {
    const LinkMetric link = LinkMetric::round_sphere(0.4);
    s.mu_hat = {0.0, 0.4};
    const auto hit = conjugate_scan(link, s, M_PI / 2);
    REQUIRE(hit.has_value());
    CHECK(std::abs(*hit - 0.4 * M_PI) < 1e-4);
  }
}

TEST_CASE("circle has no conjugate points") {
  const LinkMetric link = LinkMetric::circle(1.0);
  LinkState s{{1.0, 0.0}, {1.0, 0.0}};
  CHECK_FALSE(conjugate_scan(link, s, M_PI).has_value());
  CHECK_THROWS_AS(conjugate_scan(link, s, -1.0), ArgumentError);
}

TEST_CASE("perturbed sphere curvature satisfies Gauss-Bonnet") {
  const LinkMetric link = LinkMetric::perturbed_sphere(1.3, 0.2, 4);
  REQUIRE(link.positive_definite_sampled());
  // int K dA = 4 pi on any metric sphere; dA = R^2 c_p sin(theta) dtheta dphi.
  const GaussRule gz = gauss_legendre(48, -1.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < gz.nodes.size(); ++i) {
    const double w = gz.nodes[i];
    const Vec3 u{std::sqrt(1 - w * w), 0.0, w};
    const double cp = link.conformal(u);
    acc += gz.weights[i] * 2.0 * M_PI * link.gauss_curvature(u) * link.radius() * link.radius() * cp;
  }
  CHECK(acc == doctest::Approx(4.0 * M_PI).epsilon(1e-10));
}

TEST_CASE("metric family invariants") {
  CHECK_THROWS_AS(LinkMetric::circle(-1.0), ArgumentError);
  CHECK_THROWS_AS(LinkMetric::perturbed_sphere(1.0, 0.3, 2), ArgumentError);  // >= R/4
  const LinkMetric ok = LinkMetric::perturbed_sphere(1.0, 0.24, 2);
  CHECK(ok.positive_definite_sampled());
}
