#include <cmath>

#include "conicxray/errors.hpp"
#include "conicxray/normal_operator.hpp"
#include "doctest.h"

using namespace conicxray;

namespace {

// Brute-force quadrature of the modified normal-operator kernel on the exact
// cone: closed-form bicharacteristics (no tracer), dense Gauss panels in t,
// dense Gauss rule in lambda_hat, uniform omega directions. Assembles the
// same matrix convention as NormalOperator::assemble().
Eigen::MatrixXd brute_force_matrix(const ConicMetric& cone, const Localizer& loc,
                                   const WeightSpec& weight, double h, const GridSpec& g,
                                   int n_lam, int n_omega, int n_t_panels) {
  const int N = g.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  const GaussRule lam_rule = gauss_legendre(n_lam, -loc.S(), loc.S());
  const GaussRule gl4 = gauss_legendre(4);
  const double psi_w = 2.0 * M_PI / n_omega;
  std::vector<std::pair<int, double>> stencil;

  for (int row = 0; row < N; ++row) {
    const double xz = g.x_of(row / g.ny());
    const LinkPoint yz = g.y_of(row % g.ny());
    const Vec3 u0 = cone.link().embed(yz);
    const double scale = std::sqrt(h) * xz;  // one-cusp lambda scale, p = 1
    for (int k = 0; k < n_lam; ++k) {
      const double lam_hat = lam_rule.nodes[k];
      const double chi = loc.chi(lam_hat);
      if (chi == 0.0) continue;
      const double lam = scale * lam_hat;
      const double c = std::atanh(lam);
      // t-window where E/h >= -80: cosh^2(c - t) <= cosh^2(c)(1 + 160 h x^2).
      const double reach = std::acosh(std::cosh(c) * std::sqrt(1.0 + 160.0 * h * xz * xz));
      const double t_lo = c - reach, t_hi = c + reach;
      for (int l = 0; l < n_omega; ++l) {
        const double psi = psi_w * l;
        // Ambient unit tangent at angle psi; the dual-unit covector direction.
        const double st = std::sin(yz.a), ct = std::cos(yz.a);
        const Vec3 e_theta{ct * std::cos(yz.b), ct * std::sin(yz.b), -st};
        const Vec3 e_phi{-std::sin(yz.b), std::cos(yz.b), 0.0};
        const Vec3 e0 = std::cos(psi) * e_theta + std::sin(psi) * e_phi;
        for (int p = 0; p < n_t_panels; ++p) {
          const double a = t_lo + (t_hi - t_lo) * p / n_t_panels;
          const double b = t_lo + (t_hi - t_lo) * (p + 1) / n_t_panels;
          for (int q = 0; q < 4; ++q) {
            const double t = 0.5 * (a + b) + 0.5 * (b - a) * gl4.nodes[q];
            const double wq = 0.5 * (b - a) * gl4.weights[q];
            // Closed form: x(t) = xz cosh(c)/cosh(c - t), r(t) via gudermann.
            const double xt = xz * std::cosh(c) / std::cosh(c - t);
            if (xt < g.x_min() * 0.3) continue;
            const double r = 2.0 * (std::atan(std::exp(t - c)) - std::atan(std::exp(-c)));
            const Vec3 u = std::cos(r) * u0 + std::sin(r) * e0;
            const double E = 0.5 * (1.0 / (xz * xz) - 1.0 / (xt * xt));
            if (E / h < -80.0) continue;
            if (E / h < -36.0) continue;
            g.interp_row(xt, cone.link().coords(u), stencil);
            // Full direction set here (the engine folds the reversal symmetry).
            const double base =
                lam_rule.weights[k] * psi_w * scale * chi * wq * std::exp(E / h) / xt;
            for (const auto& [idx, w] : stencil) A(row, idx) += base * w;
          }
        }
      }
    }
  }
  return A;
}

}  // namespace

TEST_CASE("localizer profile invariants and the vanishing-center control") {
  const Localizer loc;
  CHECK(loc.sanity_sampled());
  CHECK(loc.chi(0.0) == 1.0);
  CHECK(loc.chi(4.0) == 0.0);
  CHECK(loc.chi(1.3) == doctest::Approx(std::exp(-1.3 * 1.3)).epsilon(1e-12));
  const Localizer bad(4.0, -0.5, Localizer::Kind::VanishingCenter);
  CHECK(bad.sanity_sampled());
  CHECK(bad.chi(0.0) == 0.0);
  CHECK(bad.chi(1.0) > 0.0);
  CHECK_THROWS_AS(Localizer(-1.0), ArgumentError);
}

TEST_CASE("one-cusp weight: phi, scale, and localizer argument") {
  const WeightSpec w = WeightSpec::one_cusp(1.0);
  CHECK(w.phi(0.2) == doctest::Approx(-1.0 / (2.0 * 0.04)).epsilon(1e-15));
  CHECK(w.phi_prime(0.2) == doctest::Approx(std::pow(0.2, -3.0)));
  CHECK(w.exponent_delta(0.3, 0.25) ==
        doctest::Approx(0.5 / (0.3 * 0.3) - 0.5 / (0.25 * 0.25)).epsilon(1e-14));
  const Localizer loc;
  const double h = 0.04;
  // localizer_value(x, lambda) = chi(lambda/(h^{1/2} x^p)).
  CHECK(localizer_value(loc, w, 0.3, 0.0, h) == 1.0);
  CHECK(localizer_value(loc, w, 0.3, 4.0 * std::sqrt(h) * 0.3, h) == 0.0);  // support edge
  CHECK_THROWS_AS(localizer_value(loc, w, 0.3, 0.1, -1.0), ArgumentError);

  const WeightSpec p2 = WeightSpec::one_cusp(0.5);
  CHECK(p2.phi(0.2) == doctest::Approx(-1.0 / (2.0 * 0.5 * std::pow(0.2, 1.0))));
}

TEST_CASE("combined weight joins the 1-cusp and scattering pieces monotonically") {
  const double xbar = 0.5;
  const WeightSpec w = WeightSpec::combined(xbar);
  CHECK(w.monotone_sampled(1000));
  // Pure pieces outside the join.
  CHECK(w.phi(0.1) == doctest::Approx(-1.0 / (2.0 * 0.01)).epsilon(1e-15));
  CHECK(w.phi(0.4) == doctest::Approx(1.0 / (xbar - 0.4)).epsilon(1e-9));
  // Continuity across the join.
  CHECK(w.phi(0.15 - 1e-9) == doctest::Approx(w.phi(0.15 + 1e-9)).epsilon(1e-7));
  CHECK(w.phi(0.35 - 1e-9) == doctest::Approx(w.phi(0.35 + 1e-9)).epsilon(1e-7));
  // Near x = 0 the combined localizer argument carries the extra
  // |alpha|^{1/2}: x^{1/2} sqrt(F') = x^{-1}.
  const Localizer loc;
  const double h = 0.09, alpha = -0.37, x = 0.1, lam = 0.01;
  const double expected = loc.chi(lam / (std::sqrt(h) * x * std::sqrt(std::abs(alpha))));
  CHECK(localizer_value(loc, w, x, lam, h, alpha) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("apply_normal zero, positivity, and certification gate") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  auto grid = std::make_shared<GridSpec>(cone, 8, 4, 0.2, 0.35);
  const GridFunction zero(grid);
  NormalOperatorOptions opts;
  opts.n_omega = 4;
  CHECK_THROWS_AS(apply_normal(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.1, zero, opts),
                  CertificationError);
  certify(cone, 3, 2, 2);
  const GridFunction out = apply_normal(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.1, zero, opts);
  CHECK(out.max_abs() == 0.0);
  CHECK_THROWS_AS(apply_normal(cone, WeightSpec::one_cusp(1.0), Localizer(), -0.1, zero, opts),
                  ArgumentError);

  // x-constant and harmonic-exact: the plain interpolant is exactly pos.
  GridFunction pos = GridFunction::from_function(
      grid, [](double, const LinkPoint& y) { return 1.0 + 0.3 * std::cos(y.a); });
  const GridFunction ap = apply_normal(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.1, pos, opts);
  double mn = 0.0;
  for (int i = 0; i < grid->nx(); ++i)
    for (int j = 0; j < grid->ny(); ++j) mn = std::min(mn, ap.at(i, j));
  CHECK(mn >= -1e-10 * (1.0 + ap.max_abs()));
}

TEST_CASE("assembled matrix reproduces the matrix-free action") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  certify(cone, 3, 2, 2);
  auto grid = std::make_shared<GridSpec>(cone, 6, 4, 0.22, 0.35);
  NormalOperatorOptions opts;
  opts.n_omega = 4;
  NormalOperator op(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.15, grid, opts);
  const Eigen::MatrixXd A = op.assemble();
  GridFunction v = GridFunction::from_function(
      grid, [](double x, const LinkPoint& y) { return std::sin(9 * x) + 0.2 * std::cos(y.a); });
  const GridFunction av = op.apply(v);
  const Eigen::VectorXd direct = A * v.flat();
  double max_rel = 0.0;
  for (int i = 0; i < grid->size(); ++i)
    max_rel = std::max(max_rel, std::abs(direct[i] - av.flat()[i]) /
                                    std::max(1e-300, std::abs(direct[i])));
  CHECK(max_rel < 1e-10);

  CHECK((A * Eigen::VectorXd::Zero(grid->size())).norm() == 0.0);

  NormalOperatorOptions capped = opts;
  capped.matrix_cap = 10;
  NormalOperator small(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.15, grid, capped);
  CHECK_THROWS_AS(small.assemble(), SizeError);
}

TEST_CASE("brute-force kernel quadrature oracle agrees with the engine") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  certify(cone, 3, 2, 2);
  auto grid = std::make_shared<GridSpec>(cone, 4, 8, 0.25, 0.35);
  const double h = 0.2;
  NormalOperatorOptions opts;
  opts.n_lambda = 32;
  opts.n_omega = 4;
  NormalOperator op(cone, WeightSpec::one_cusp(1.0), Localizer(), h, grid, opts);
  const Eigen::MatrixXd A = op.assemble();
  const Eigen::MatrixXd B =
      brute_force_matrix(cone, Localizer(), WeightSpec::one_cusp(1.0), h, *grid, 64, 8, 400);
  const double rel = (A - B).norm() / B.norm();
  CHECK(rel < 1e-4);
}

TEST_CASE("exponent bookkeeping identity along traced paths") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  const WeightSpec w = WeightSpec::one_cusp(1.0);
  const LinkPoint y{M_PI / 2, 0.0};
  const TraceInit init = init_from_slope(cone, 0.3, y, 0.4, unit_direction(cone, 0.3, y, 0.3));
  const GeodesicPath path = trace(cone, init, {});
  // e^{-Phi(x)/h + Phi(gamma)/h} = e^{E/h}: compare the stored exponent with
  // the weight's phi difference where both are finite.
  double max_err = 0.0;
  for (const auto& s : path.samples)
    max_err = std::max(max_err, std::abs(s.exponent - w.exponent_delta(0.3, s.x)));
  CHECK(max_err < 1e-10);
}

TEST_CASE("doubling the direction quadrature is converged") {
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  certify(cone, 3, 2, 2);
  auto grid = std::make_shared<GridSpec>(cone, 8, 8, 0.2, 0.35);
  GridFunction v = GridFunction::from_function(
      grid, [](double, const LinkPoint& y) { return 1.0 + 0.4 * std::sin(y.b); });
  NormalOperatorOptions base;
  base.n_lambda = 32;
  base.n_omega = 8;
  NormalOperatorOptions dbl;
  dbl.n_lambda = 64;
  dbl.n_omega = 16;
  NormalOperator op1(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.1, grid, base);
  NormalOperator op2(cone, WeightSpec::one_cusp(1.0), Localizer(), 0.1, grid, dbl);
  const Eigen::VectorXd a = op1.apply(v).flat();
  const Eigen::VectorXd b = op2.apply(v).flat();
  CHECK((a - b).norm() / b.norm() < 1e-6);
}

TEST_CASE("matrix serialization round-trips") {
  Eigen::MatrixXd A(3, 3);
  A << 1, 2, 3, 4, 5, 6, 7, 8, 9.5;
  save_matrix("/tmp/conicxray_nop.bin", A, 0.1, 1.0, 0, 1234567ull);
  const Eigen::MatrixXd B = load_matrix("/tmp/conicxray_nop.bin");
  CHECK((A - B).norm() == 0.0);
}
