// Scratch validation of modeling assumptions before freezing acceptance
// configs (not part of the build).
#include <cstdio>

#include "conicxray/inversion.hpp"
#include "conicxray/runner.hpp"

using namespace conicxray;

int main() {
  set_thread_count(2);
  const ConicMetric cone(LinkMetric::round_sphere(1.0), 0.5);
  certify(cone, 4, 3, 2);

  // (a) quantize identity and derivative, composition ratio.
  {
    Lattice lat;
    lat.n = 1;
    lat.size0 = 128;
    lat.lo = -8;
    lat.hi = 8;
    ParabolicSymbol one{1, [](const double*, const double*) { return std::complex<double>(1.0); },
                        0, 0};
    auto K = quantize(one, lat, 0.1, LatticeScaling::Transverse);
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(128, 128);
    std::printf("Op(1)-Id = %.3e\n", (K - I).cwiseAbs().maxCoeff());

    ParabolicSymbol zeta{1, [](const double*, const double* z) { return std::complex<double>(z[0]); },
                         1, 0};
    auto Kz = quantize(zeta, lat, 0.1, LatticeScaling::Transverse);
    Eigen::VectorXcd u(128), du(128);
    const double nu = 2.0 * M_PI * 3 / 16.0;
    for (int i = 0; i < 128; ++i) {
      const double z = lat.lo + (i + 0.5) * lat.delta();
      u[i] = std::sin(nu * z);
      du[i] = 0.1 * std::complex<double>(0, -1) * nu * std::cos(nu * z);
    }
    std::printf("Op(zeta)u vs hDu = %.3e\n", (Kz * u - du).cwiseAbs().maxCoeff());

    ParabolicSymbol bsym{1, [](const double* zz, const double*) {
                           return std::complex<double>(std::exp(-zz[0] * zz[0] / 2));
                         },
                         0, 0};
    ComposeResult cr = compose_check(zeta, bsym, lat, {0.1, 0.05, 0.025}, LatticeScaling::Foliation);
    std::printf("compose foliation errs %.3e %.3e %.3e ratios %.4f %.4f\n", cr.errs[0], cr.errs[1],
                cr.errs[2], cr.ratios[0], cr.ratios[1]);
    ComposeResult ct = compose_check(zeta, bsym, lat, {0.1, 0.05, 0.025}, LatticeScaling::Transverse);
    std::printf("compose transverse ratios %.4f %.4f\n", ct.ratios[0], ct.ratios[1]);
  }

  // (b) symbol scan: positivity, ratio law, decay slope, closed-form match.
  {
    Localizer loc;
    const LinkPoint y{M_PI / 2, 0.0};
    const auto v0 = full_symbol_numeric(cone, loc, 0.3, y, 0, 0, 0);
    std::printf("symbol(0,0) = %.6f %+.2e i\n", v0.real(), v0.imag());
    for (double xi : {0.5, 1.0, 2.0, 5.0, 20.0}) {
      const auto v = full_symbol_numeric(cone, loc, 0.3, y, xi, 0, 0);
      std::printf("ratio xi=%.1f: %.6f vs %.6f\n", xi, std::abs(v) / std::abs(v0),
                  1.0 / std::sqrt(1 + xi * xi));
    }
    const auto ve = full_symbol_numeric(cone, loc, 0.3, y, 2.0, 5.0, 0.3);
    const double cf0 = closed_form_symbol(-0.5, 0, 0, 2);
    const double cpr = std::abs(v0) / cf0;
    const double cf = cpr * closed_form_symbol(-0.5, 2.0, 5.0, 2);
    std::printf("eta test: |v| = %.6e closed = %.6e rel = %.3f%%\n", std::abs(ve), cf,
                100 * std::abs(std::abs(ve) - cf) / cf);
  }

  // (c) h-scaling slope of apply_normal and sigma_min across h.
  {
    auto grid = std::make_shared<GridSpec>(cone, 12, 4, 0.15, 0.33);
    GridFunction v(grid);
    for (int i = 0; i < grid->nx(); ++i)
      for (int j = 0; j < grid->ny(); ++j) v.at(i, j) = 1.0;
    NormalOperatorOptions opts;
    opts.n_lambda = 32;
    opts.n_omega = 8;
    std::vector<double> lh, ln;
    for (double h : {0.2, 0.1, 0.05}) {
      Localizer loc;
      WeightSpec w = WeightSpec::one_cusp(1.0);
      NormalOperator op(cone, w, loc, h, grid, opts);
      const GridFunction out = op.apply_gauged(v);
      double norm2 = 0.0;
      for (int i = 0; i < grid->nx(); ++i)
        for (int j = 0; j < grid->ny(); ++j)
          norm2 += grid->measure_weight(i, j) * out.at(i, j) * out.at(i, j);
      lh.push_back(std::log(h));
      ln.push_back(0.5 * std::log(norm2));
      const double smin = sigma_min(diag_rescaled(op.assemble_modal()));
      std::printf("h = %.2f  |Av| = %.6e  sigma_min_rescaled = %.6e\n", h, std::exp(ln.back()),
                  smin);
    }
    std::printf("h-slope = %.4f\n", fit_slope(lh, ln));
  }
  return 0;
}
