#include <cmath>
#include <complex>

#include "conicxray/errors.hpp"
#include "conicxray/onecusp_calculus.hpp"
#include "doctest.h"

using namespace conicxray;

namespace {

using Cplx = std::complex<double>;

Lattice lattice1d(int n = 128) {
  Lattice lat;
  lat.n = 1;
  lat.size0 = n;
  lat.lo = -8.0;
  lat.hi = 8.0;
  return lat;
}

const ParabolicSymbol kOne{1, [](const double*, const double*) { return Cplx(1.0); }, 0, 0};
const ParabolicSymbol kZeta{1, [](const double*, const double* z) { return Cplx(z[0]); }, 1, 0};
const ParabolicSymbol kCutoff{
    1, [](const double* z, const double*) { return Cplx(std::exp(-z[0] * z[0] / 2)); }, 0, 0};

}  // namespace

TEST_CASE("quantize: identity, spectral derivative, symmetry") {
  const Lattice lat = lattice1d();
  const double h = 0.1;
  for (LatticeScaling sc : {LatticeScaling::Transverse, LatticeScaling::Foliation}) {
    const Eigen::MatrixXcd K = quantize(kOne, lat, h, sc);
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(lat.size0, lat.size0);
    CHECK((K - I).cwiseAbs().maxCoeff() < 1e-8);
  }

  // a = zeta quantizes to the h-scaled derivative: exact on lattice modes.
  const Eigen::MatrixXcd Kz = quantize(kZeta, lat, h, LatticeScaling::Transverse);
  Eigen::VectorXcd u(lat.size0), du(lat.size0);
  const double nu = 2.0 * M_PI * 5 / (lat.hi - lat.lo);
  for (int i = 0; i < lat.size0; ++i) {
    const double z = lat.lo + (i + 0.5) * lat.delta();
    u[i] = std::sin(nu * z);
    du[i] = h * Cplx(0, -1) * nu * std::cos(nu * z);  // h D_z u
  }
  CHECK((Kz * u - du).cwiseAbs().maxCoeff() < 1e-8);

  // Real even-in-zeta Fourier multiplier: the kernel K(z - z') is even, so
  // the matrix is symmetric. (With z-dependence, left quantization is only
  // symmetric to leading order.)
  const ParabolicSymbol even{
      1, [](const double*, const double* zeta) { return Cplx(std::exp(-zeta[0] * zeta[0])); }, 0,
      0};
  const Eigen::MatrixXcd Ke = quantize(even, lat, h, LatticeScaling::Foliation);
  CHECK((Ke - Ke.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("quantize refuses decaying symbols that are too wide for the cutoff") {
  const Lattice lat = lattice1d(64);
  const ParabolicSymbol wide{
      1, [](const double*, const double* zeta) { return Cplx(1.0 / (1.0 + zeta[0] * zeta[0])); },
      -2, 0};
  CHECK_THROWS_AS(quantize(wide, lat, 0.1, LatticeScaling::Foliation), ArgumentError);
  CHECK_THROWS_AS(quantize(kOne, lat, -0.5, LatticeScaling::Transverse), ArgumentError);
}

TEST_CASE("composition gain: h^{1/2} along the foliation, h transverse") {
  const Lattice lat = lattice1d();
  const std::vector<double> hs{0.1, 0.05, 0.025};
  const ComposeResult fol = compose_check(kZeta, kCutoff, lat, hs, LatticeScaling::Foliation);
  REQUIRE(fol.ratios.size() == 2);
  for (double r : fol.ratios) {
    CHECK(r > 0.5);
    CHECK(r < 0.9);
    CHECK(r == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
  }
  const ComposeResult tr = compose_check(kZeta, kCutoff, lat, hs, LatticeScaling::Transverse);
  for (double r : tr.ratios) CHECK(r == doctest::Approx(0.5).epsilon(0.05));

  // Identity and multiplier edge cases are exact.
  const ComposeResult id = compose_check(kOne, kCutoff, lat, {0.1}, LatticeScaling::Foliation);
  CHECK(id.err0 < 1e-8);
  const ParabolicSymbol m1{1, [](const double*, const double* z) { return Cplx(std::exp(-z[0] * z[0])); }, 0, 0};
  const ParabolicSymbol m2{
      1, [](const double*, const double* z) { return Cplx(z[0] * std::exp(-z[0] * z[0] / 4)); }, 0, 0};
  const ComposeResult mult = compose_check(m1, m2, lat, {0.1}, LatticeScaling::Foliation);
  CHECK(mult.err0 < 1e-8);
}

TEST_CASE("2d mixed quantization: identity and cap") {
  Lattice lat;
  lat.n = 2;
  lat.size0 = 12;
  lat.size1 = 12;
  lat.lo = -6.0;
  lat.hi = 6.0;
  ParabolicSymbol one{2, [](const double*, const double*) { return Cplx(1.0); }, 0, 0};
  const Eigen::MatrixXcd K = quantize(one, lat, 0.1, LatticeScaling::Mixed2D);
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(144, 144);
  CHECK((K - I).cwiseAbs().maxCoeff() < 1e-8);
  Lattice big = lat;
  big.size0 = big.size1 = 80;
  CHECK_THROWS_AS(quantize(one, big, 0.1, LatticeScaling::Mixed2D), SizeError);
}

TEST_CASE("symbol order verification reports finite constants") {
  const ParabolicSymbol s{
      1, [](const double* z, const double* zeta) {
        return Cplx(1.0 / std::sqrt(1.0 + zeta[0] * zeta[0]) * std::sqrt(1.0 + z[0] * z[0]));
      },
      -1, 2};
  const SymbolOrderReport rep = verify_symbol_orders(s, 10.0, 10.0);
  CHECK(rep.finite);
  CHECK(rep.c0 < 2.0);
  CHECK(rep.c_dzeta < 3.0);
  CHECK(rep.c_dz < 3.0);
}

TEST_CASE("full symbol: positivity, ratio law, and closed-form match") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  const Localizer loc;
  const LinkPoint y{M_PI / 2, 0.3};

  const Cplx v0 = full_symbol_numeric(cone, loc, 0.3, y, 0, 0, 0);
  CHECK(v0.real() > 0.0);
  CHECK(std::abs(v0.imag()) < 1e-8 * v0.real());

  for (double xi : {0.5, 1.0, 2.0, 5.0}) {
    const Cplx v = full_symbol_numeric(cone, loc, 0.3, y, xi, 0, 0);
    const double ratio = std::abs(v) / std::abs(v0);
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(1.0 + xi * xi)).epsilon(0.02));
  }

  // Closed form with the one-point calibration at (0, 0).
  const double cprime = std::abs(v0) / closed_form_symbol(-0.5, 0, 0, 2);
  for (double xi : {0.0, 1.0, 5.0}) {
    for (double eta : {0.0, 2.0, 10.0}) {
      const Cplx v = full_symbol_numeric(cone, loc, 0.3, y, xi, eta, 1.0);
      const double cf = cprime * closed_form_symbol(-0.5, xi, eta, 2);
      CHECK(std::abs(std::abs(v) - cf) / cf < 0.02);
    }
  }

  // Closed-form spot values.
  CHECK(closed_form_symbol(-0.5, 0, 0, 2) == doctest::Approx(2.0 * 2.0 * M_PI).epsilon(1e-10));
  const double base = closed_form_symbol(-0.7, 1.3, 0, 2);
  CHECK(base == doctest::Approx((1.0 / 0.7) / std::sqrt(1 + 1.3 * 1.3) * 2 * M_PI).epsilon(1e-10));
  CHECK(closed_form_symbol(-0.5, 1.0, 2.0, 2) < closed_form_symbol(-0.5, 1.0, 1.0, 2));
  CHECK_THROWS_AS(closed_form_symbol(0.1, 0, 0, 2), DomainError);
}

TEST_CASE("ellipticity scan passes on the cone and fails for chi(0) = 0") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  const std::vector<double> xi{0, 1, -1, 5, -5, 20, -20};
  const std::vector<double> eta{0, 1, 5, 20};
  const LinkPoint y{M_PI / 2, 0.0};
  const EllipticityScan good = ellipticity_scan(cone, Localizer(), {0.3}, y, xi, eta, 4, 0.05);
  CHECK(good.pass);
  CHECK(good.fiber_infinity_supported);
  CHECK(good.max_closed_form_rel_err < 0.02);
  CHECK(good.decay_slope == doctest::Approx(-1.0).epsilon(0.1));

  const Localizer bad(4.0, -0.5, Localizer::Kind::VanishingCenter);
  const EllipticityScan broken = ellipticity_scan(cone, bad, {0.3}, y, xi, eta, 4, 0.05);
  CHECK_FALSE(broken.pass);
  CHECK(std::abs(broken.argmin.xi) == 20.0);  // fails toward fiber infinity, eta small

  const ConicMetric flat2d(LinkMetric::circle(1.0), 0.5);
  const EllipticityScan two = ellipticity_scan(flat2d, Localizer(), {0.3}, {0.0, 0.0}, xi, eta, 2, 0.05);
  CHECK_FALSE(two.fiber_infinity_supported);
  CHECK_FALSE(two.pass);
}
