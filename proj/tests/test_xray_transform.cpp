#include <cmath>

#include "conicxray/errors.hpp"
#include "conicxray/xray_transform.hpp"
#include "doctest.h"

using namespace conicxray;

namespace {

std::shared_ptr<GridSpec> fine_radial_grid(const ConicMetric& m, int nx = 640) {
  return std::make_shared<GridSpec>(m, nx, 4, 0.04, m.x0());
}

// 1D reparameterized quadrature oracle for the exact cone, built from the
// closed-form bicharacteristic: If = int f(x(r)) x(r)^{-1} |mu(r)|^{-1} dr
// with x(r) = x0 sin(r + r0)/sin(r0), |mu(r)| = sin(r + r0).
double forward_oracle(const std::function<double(double)>& f_radial, double x0,
                      double lambda_slope) {
  const double r0 = std::atan2(1.0, lambda_slope);
  const double eps = 1e-9;
  return adaptive_quad(
      [&](double r) {
        const double s = std::sin(r + r0);
        const double x = x0 * s / std::sin(r0);
        if (x <= 0) return 0.0;
        return f_radial(x) / (x * s);
      },
      -r0 + eps, -r0 + M_PI - eps, 1e-12);
}

}  // namespace

TEST_CASE("eval_function reproduces constants and analytic radial profiles") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  auto grid = fine_radial_grid(cone, 200);
  const GridFunction one = GridFunction::from_function(
      grid, [](double, const LinkPoint&) { return 1.0; });
  CHECK(std::abs(one.eval(0.2371, {1.1, 2.2}) - 1.0) < 1e-10);

  auto analytic = [](double x) { return std::exp(-1.0 / (2.0 * x * x)); };
  const GridFunction g = GridFunction::from_function(
      grid, [&](double x, const LinkPoint&) { return analytic(x); },
      DecayInfo{DecayClass::Gaussian, 0.5, 1.0, 0, 0});
  double max_err = 0.0;
  for (double x : {0.011, 0.13, 0.2345, 0.37, 0.4999})
    max_err = std::max(max_err, std::abs(g.eval(x, {0.4, 0.9}) - (x < grid->x_min() ? 0.0 : analytic(x))));
  CHECK(max_err < 1e-6);
  CHECK(g.eval(0.02, {0.4, 0.9}) == 0.0);  // below the smallest node, gaussian class
  CHECK_THROWS_AS(g.eval(0.55, {0.4, 0.9}), DomainError);
}

TEST_CASE("forward matches the 1D reparameterized oracle on the exact cone") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  auto grid = fine_radial_grid(cone);
  auto analytic = [](double x) { return std::exp(-1.0 / (2.0 * x * x)); };
  const GridFunction f = GridFunction::from_function(
      grid, [&](double x, const LinkPoint&) { return analytic(x); },
      DecayInfo{DecayClass::Gaussian, 0.5, 1.0, 0, 0});

  const LinkPoint y{M_PI / 2, 0.8};
  TraceOptions topt;
  topt.max_param = 16.0;
  topt.max_step = 0.04;
  for (double slope : {0.0, -0.6, 0.9}) {
    const TraceInit init =
        init_from_slope(cone, 0.3, y, slope, unit_direction(cone, 0.3, y, 1.0));
    const GeodesicPath path = trace(cone, init, topt);
    const double numeric = forward(f, path);
    const double exact = forward_oracle(analytic, 0.3, slope);
    CHECK(std::abs(numeric - exact) / std::abs(exact) < 1e-6);
  }

  const GridFunction zero(grid);
  const TraceInit init = init_from_slope(cone, 0.3, y, 0.0, unit_direction(cone, 0.3, y, 0.0));
  CHECK(forward(zero, trace(cone, init, topt)) == 0.0);
}

TEST_CASE("forward linearity, reversal, and quadrature convergence") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  auto grid = std::make_shared<GridSpec>(cone, 64, 8, 0.05, 0.5);
  const GridFunction f = GridFunction::from_function(
      grid,
      [](double x, const LinkPoint& y) {
        return std::exp(-1.0 / (2.0 * x * x)) * (1.0 + 0.3 * std::cos(y.a));
      },
      DecayInfo{DecayClass::Gaussian, 0.5, 1.0, 0, 0});
  const GridFunction g = GridFunction::from_function(
      grid, [](double x, const LinkPoint& y) { return std::exp(-1.0 / (x * x)) * std::sin(y.b); },
      DecayInfo{DecayClass::Gaussian, 1.0, 1.0, 0, 0});

  const LinkPoint y{1.2, 0.4};
  TraceOptions topt;
  topt.max_param = 14.0;
  topt.max_step = 0.05;
  const TraceInit init = init_from_slope(cone, 0.28, y, 0.35, unit_direction(cone, 0.28, y, 0.7));
  const GeodesicPath path = trace(cone, init, topt);

  // Linearity is exact up to floating re-association.
  GridFunction combo(grid);
  combo.values() = 2.0 * f.values() - 3.0 * g.values();
  const double lhs = forward(combo, path);
  const double rhs = 2.0 * forward(f, path) - 3.0 * forward(g, path);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));

  // Orientation reversal.
  TraceInit rev = init;
  rev.lambda = -init.lambda;
  rev.omega.a = -init.omega.a;
  rev.omega.b = -init.omega.b;
  const double a = forward(f, path);
  const double b = forward(f, trace(cone, rev, topt));
  CHECK(std::abs(a - b) / std::abs(a) < 1e-10);

  // Positivity on a nonnegative function with exactly representable modes.
  const GridFunction pos = GridFunction::from_function(
      grid, [](double x, const LinkPoint& y) {
        return std::exp(-1.0 / (2.0 * x * x)) * (1.0 + 0.3 * std::cos(y.a));
      });
  CHECK(forward(pos, path) >= -1e-12);

  // Halving the quadrature panels changes the value below 1e-8 relative.
  // The floor is the integrator tolerance accumulated over the steps, so the
  // gate configuration tightens it.
  TraceOptions gate = topt;
  gate.max_step = 0.02;
  gate.rel_tol = 1e-13;
  gate.abs_tol = 1e-15;
  gate.refine = 1;
  TraceOptions fine = gate;
  fine.refine = 2;
  const double coarse_v = forward(f, trace(cone, init, gate));
  const double fine_v = forward(f, trace(cone, init, fine));
  CHECK(std::abs(coarse_v - fine_v) / std::abs(fine_v) < 1e-8);
}

TEST_CASE("forward_family indexing, symmetry pair, and edge cases") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  certify(cone, 3, 2, 2);
  auto grid = std::make_shared<GridSpec>(cone, 6, 4, 0.15, 0.33);
  GeodesicFamily fam;
  fam.grid = grid;
  const GaussRule gl = gauss_legendre(8, -4.0, 4.0);
  fam.lam_hat = gl.nodes;
  fam.lam_w = gl.weights;
  fam.psi = {0.0, M_PI / 2, M_PI, 3 * M_PI / 2};
  const double h = 0.1;
  fam.lambda_scale = [h](double x, const LinkPoint&, double) { return std::sqrt(h) * x; };
  fam.trace_opts.max_param = 12.0;

  const GridFunction f = GridFunction::from_function(
      grid,
      [](double x, const LinkPoint& y) {
        return std::exp(-1.0 / (2.0 * x * x)) * (1.0 + 0.3 * std::cos(y.a));
      },
      DecayInfo{DecayClass::Gaussian, 0.5, 1.0, 0, 0});
  const std::vector<double> data = forward_family(cone, f, fam);
  CHECK(data.size() == static_cast<std::size_t>(fam.n_base()) * 8 * 4);

  // Symmetric pair (lambda_hat, omega) vs (-lambda_hat, -omega).
  double max_rel = 0.0;
  for (int b = 0; b < fam.n_base(); b += 5) {
    for (int k = 0; k < 8; ++k) {
      const double v1 = data[fam.data_index(b, k, 0)];
      const double v2 = data[fam.data_index(b, 7 - k, 2)];  // GL nodes are symmetric
      max_rel = std::max(max_rel, std::abs(v1 - v2) / std::max(std::abs(v1), 1e-300));
    }
  }
  CHECK(max_rel < 1e-8);

  // Singleton family equals a direct forward call.
  GeodesicFamily single = fam;
  single.grid = std::make_shared<GridSpec>(cone, 2, 4, 0.2999, 0.3);
  const std::vector<double> one = forward_family(cone, f, single);
  CHECK(one.size() == static_cast<std::size_t>(single.n_base()) * 8 * 4);
  const TraceInit init = family_init(cone, single, 0, 3, 1);
  const GeodesicPath path = trace(cone, init, single.trace_opts);
  CHECK(one[single.data_index(0, 3, 1)] == doctest::Approx(forward(f, path)).epsilon(1e-9));
}

TEST_CASE("grid function serialization round-trips") {
  const ConicMetric cone(LinkMetric::perturbed_sphere(1.1, 0.2, 3), 0.4);
  auto grid = std::make_shared<GridSpec>(cone, 9, 8, 0.1, 0.37);
  GridFunction f = GridFunction::from_function(
      grid, [](double x, const LinkPoint& y) { return std::sin(5 * x) + std::cos(y.a + y.b); },
      DecayInfo{DecayClass::Compact, 0, 1, 0.1, 0.3});
  const std::string path = "/tmp/conicxray_roundtrip.gfn";
  f.save(path);
  const GridFunction g = GridFunction::load(path);
  REQUIRE(g.spec().nx() == 9);
  REQUIRE(g.spec().ny() == 8);
  CHECK(g.decay().kind == DecayClass::Compact);
  CHECK(g.decay().x_hi == 0.3);
  double max_err = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 8; ++j) max_err = std::max(max_err, std::abs(f.at(i, j) - g.at(i, j)));
  CHECK(max_err == 0.0);  // bit-exact payload
  CHECK(g.spec().hash() == f.spec().hash());
}
