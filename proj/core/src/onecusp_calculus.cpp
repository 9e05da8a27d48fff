#include "conicxray/onecusp_calculus.hpp"

#include <cmath>
#include <fstream>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

using Cplx = std::complex<double>;

double scale_exponent(LatticeScaling s, int dim_index) {
  switch (s) {
    case LatticeScaling::Transverse:
      return 1.0;
    case LatticeScaling::Foliation:
      return 0.5;
    case LatticeScaling::Mixed2D:
      return dim_index == 0 ? 0.5 : 1.0;  // last direction transverse
  }
  return 1.0;
}

}  // namespace

Eigen::MatrixXcd quantize(const ParabolicSymbol& sym, const Lattice& lat, double h,
                          LatticeScaling scaling) {
  if (sym.n != lat.n) throw ArgumentError("quantize: symbol/lattice dimension mismatch");
  if (!(h > 0)) throw ArgumentError("quantize: h must be positive");
  const double delta = lat.delta();

  if (lat.n == 1) {
    const int N = lat.size0;
    if (N < 2) throw ArgumentError("quantize: lattice too small");
    const double hs = std::pow(h, scale_exponent(scaling, 0));
    const double Z = M_PI * hs / delta;  // Nyquist cutoff in zeta
    // Bandlimit gate for decaying symbols: edge value vs peak over the grid.
    if (sym.order_m < 0) {
      double peak = 0.0, edge = 0.0;
      for (int i = 0; i < N; ++i) {
        const double z = lat.lo + (i + 0.5) * delta;
        double zeta0 = 0.0;
        peak = std::max(peak, std::abs(sym.eval(&z, &zeta0)));
        for (double ze : {-Z, Z}) edge = std::max(edge, std::abs(sym.eval(&z, &ze)));
      }
      if (edge > 1e-10 * peak)
        throw ArgumentError("quantize: symbol does not decay at the Nyquist cutoff (edge/peak = " +
                            format_g17(edge / std::max(peak, 1e-300)) + ")");
    }
    Eigen::MatrixXcd K(N, N);
    // Integer DFT frequency grid: Op(1) = Id exactly and on-grid spectral
    // derivatives are exact; the unpaired -Nyquist mode is invisible on the
    // lattice (sin(pi m) = 0).
    std::vector<double> zeta(N);
    for (int k = 0; k < N; ++k) zeta[k] = (2.0 * Z / N) * (k - N / 2);
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
      const double z = lat.lo + (static_cast<int>(i) + 0.5) * delta;
      std::vector<Cplx> az(N);
      for (int k = 0; k < N; ++k) az[k] = sym.eval(&z, &zeta[k]);
      for (int j = 0; j < N; ++j) {
        const double dz = (static_cast<int>(i) - j) * delta;
        Cplx acc = 0.0;
        for (int k = 0; k < N; ++k) acc += az[k] * std::exp(Cplx(0.0, zeta[k] * dz / hs));
        K(i, j) = acc / static_cast<double>(N);
      }
    });
    return K;
  }

  // 2D: z = (z_1 foliation, z_2 transverse) on a size0 x size1 lattice.
  const int N0 = lat.size0, N1 = lat.size1;
  const int NP = N0 * N1;
  if (NP > 64 * 64) throw SizeError("quantize: 2D lattice capped at 64^2 points");
  const double h0 = std::pow(h, scale_exponent(LatticeScaling::Mixed2D, 0));
  const double h1 = std::pow(h, scale_exponent(LatticeScaling::Mixed2D, 1));
  const double Z0 = M_PI * h0 / delta, Z1 = M_PI * h1 / delta;
  Eigen::MatrixXcd K(NP, NP);
  std::vector<double> zeta0(N0), zeta1(N1);
  for (int k = 0; k < N0; ++k) zeta0[k] = (2.0 * Z0 / N0) * (k - N0 / 2);
  for (int k = 0; k < N1; ++k) zeta1[k] = (2.0 * Z1 / N1) * (k - N1 / 2);
  parallel_for(static_cast<std::size_t>(NP), [&](std::size_t row) {
    const int i0 = static_cast<int>(row) / N1, i1 = static_cast<int>(row) % N1;
    const double z[2] = {lat.lo + (i0 + 0.5) * delta, lat.lo + (i1 + 0.5) * delta};
    // Separable DFT: transform in zeta_1 first, then zeta_0.
    Eigen::MatrixXcd az(N0, N1);
    for (int k0 = 0; k0 < N0; ++k0)
      for (int k1 = 0; k1 < N1; ++k1) {
        const double zeta[2] = {zeta0[k0], zeta1[k1]};
        az(k0, k1) = sym.eval(z, zeta);
      }
    for (int j0 = 0; j0 < N0; ++j0) {
      const double dz0 = (i0 - j0) * delta;
      Eigen::VectorXcd partial(N1);
      for (int k1 = 0; k1 < N1; ++k1) {
        Cplx acc = 0.0;
        for (int k0 = 0; k0 < N0; ++k0) acc += az(k0, k1) * std::exp(Cplx(0.0, zeta0[k0] * dz0 / h0));
        partial[k1] = acc;
      }
      for (int j1 = 0; j1 < N1; ++j1) {
        const double dz1 = (i1 - j1) * delta;
        Cplx acc = 0.0;
        for (int k1 = 0; k1 < N1; ++k1) acc += partial[k1] * std::exp(Cplx(0.0, zeta1[k1] * dz1 / h1));
        K(row, j0 * N1 + j1) = acc / static_cast<double>(NP);
      }
    }
  });
  return K;
}

double operator_norm(const Eigen::MatrixXcd& A) {
  const int n = static_cast<int>(A.cols());
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = Cplx(1.0 + 0.3 * std::sin(i + 1.0), 0.1 * std::cos(2.0 * i));
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < 300; ++it) {
    Eigen::VectorXcd w = A.adjoint() * (A * v);
    const double nl = w.norm();
    if (nl == 0.0) return 0.0;
    w /= nl;
    if (std::abs(nl - lam) <= 1e-12 * std::max(1.0, nl) && it > 10) {
      lam = nl;
      break;
    }
    lam = nl;
    v = w;
  }
  return std::sqrt(lam);
}

ComposeResult compose_check(const ParabolicSymbol& a, const ParabolicSymbol& b, const Lattice& lat,
                            const std::vector<double>& h_values, LatticeScaling scaling) {
  ComposeResult res;
  ParabolicSymbol ab;
  ab.n = a.n;
  ab.order_m = a.order_m + b.order_m;
  ab.order_l = a.order_l + b.order_l;
  auto ea = a.eval, eb = b.eval;
  ab.eval = [ea, eb](const double* z, const double* zeta) { return ea(z, zeta) * eb(z, zeta); };
  for (double h : h_values) {
    const Eigen::MatrixXcd Ka = quantize(a, lat, h, scaling);
    const Eigen::MatrixXcd Kb = quantize(b, lat, h, scaling);
    const Eigen::MatrixXcd Kab = quantize(ab, lat, h, scaling);
    res.errs.push_back(operator_norm(Ka * Kb - Kab));
  }
  res.err0 = res.errs.empty() ? 0.0 : res.errs.front();
  for (std::size_t i = 0; i + 1 < res.errs.size(); ++i)
    res.ratios.push_back(res.errs[i + 1] / std::max(res.errs[i], 1e-300));
  return res;
}

SymbolOrderReport verify_symbol_orders(const ParabolicSymbol& sym, double z_max, double zeta_max,
                                       int n_samples) {
  SymbolOrderReport rep;
  const double dz = 1e-5 * std::max(1.0, z_max);
  const double dzeta = 1e-5 * std::max(1.0, zeta_max);
  for (int i = 0; i < n_samples; ++i) {
    for (int j = 0; j < n_samples; ++j) {
      double z = -z_max + 2.0 * z_max * i / (n_samples - 1);
      double zeta = -zeta_max + 2.0 * zeta_max * j / (n_samples - 1);
      const double bz = std::sqrt(1.0 + z * z);
      const double bzeta = std::sqrt(1.0 + zeta * zeta);
      const Cplx v = sym.eval(&z, &zeta);
      const double zp = z + dz, zm = z - dz;
      const double zetap = zeta + dzeta, zetam = zeta - dzeta;
      const Cplx dvz = (sym.eval(&zp, &zeta) - sym.eval(&zm, &zeta)) / (2.0 * dz);
      const Cplx dvzeta = (sym.eval(&z, &zetap) - sym.eval(&z, &zetam)) / (2.0 * dzeta);
      if (!std::isfinite(std::abs(v)) || !std::isfinite(std::abs(dvz)) ||
          !std::isfinite(std::abs(dvzeta)))
        rep.finite = false;
      rep.c0 = std::max(rep.c0, std::abs(v) / (std::pow(bzeta, sym.order_m) *
                                               std::pow(bz, sym.order_l / 2.0)));
      rep.c_dzeta = std::max(rep.c_dzeta, std::abs(dvzeta) / (std::pow(bzeta, sym.order_m - 1.0) *
                                                              std::pow(bz, sym.order_l / 2.0)));
      rep.c_dz = std::max(rep.c_dz, std::abs(dvz) / (std::pow(bzeta, sym.order_m) *
                                                     std::pow(bz, sym.order_l / 2.0 - 0.5)));
    }
  }
  return rep;
}

namespace {

// Composite Gauss-Legendre rule resolving `cycles` oscillations over [a, b].
GaussRule oscillatory_rule(double a, double b, double cycles, int per_cycle, int min_nodes) {
  const int n = std::max(min_nodes, static_cast<int>(per_cycle * cycles) + 8);
  const int panels = std::max(1, n / 8);
  static const GaussRule g8 = gauss_legendre(8);
  GaussRule rule;
  rule.nodes.reserve(panels * 8);
  rule.weights.reserve(panels * 8);
  for (int p = 0; p < panels; ++p) {
    const double pa = a + (b - a) * p / panels;
    const double pb = a + (b - a) * (p + 1) / panels;
    for (int k = 0; k < 8; ++k) {
      rule.nodes.push_back(0.5 * (pa + pb) + 0.5 * (pb - pa) * g8.nodes[k]);
      rule.weights.push_back(0.5 * (pb - pa) * g8.weights[k]);
    }
  }
  return rule;
}

}  // namespace

std::complex<double> full_symbol_numeric(const ConicMetric& metric, const Localizer& loc, double x,
                                         const LinkPoint& y, double xi, double eta_mag,
                                         double eta_angle, SymbolQuadratureOptions opts) {
  const int link_dim = metric.link().dim();
  const double S = loc.S();

  // Directions and their alpha(x, y, 0, omega); alpha >= 0 is a foliation
  // violation and expansion_alpha throws.
  std::vector<double> psis, alphas, omega_w;
  if (link_dim == 1) {
    psis = {1.0, -1.0};
    omega_w = {1.0, 1.0};
  } else {
    // The omega integrand has ridges of width ~ sqrt(1+xi^2)/|eta|.
    int n_omega = opts.n_omega;
    const double ridge = std::abs(eta_mag) / std::sqrt(1.0 + xi * xi);
    n_omega = std::max(n_omega, 2 * static_cast<int>(8.0 * ridge + 8.0));
    for (int l = 0; l < n_omega; ++l) {
      psis.push_back(2.0 * M_PI * l / n_omega);
      omega_w.push_back(2.0 * M_PI / n_omega);
    }
  }
  double alpha_min = 0.0;
  for (double psi : psis) {
    const double a = expansion_alpha(metric, x, y, unit_direction(metric, x, y, psi));
    alphas.push_back(a);
    alpha_min = std::min(alpha_min, a);
  }
  const double amax = *std::max_element(alphas.begin(), alphas.end());  // least negative

  // t-range where the damping exp(alpha t^2 + lambda t) is above 1e-16 of its
  // peak for the worst lambda = +-S.
  const double log_drop = 16.0 * std::log(10.0);
  const double aa = std::abs(amax);
  const double T = (S + std::sqrt(2.0 * S * S + 4.0 * aa * log_drop)) / (2.0 * aa);

  const double cycles_t =
      (std::abs(xi) * (aa * T * T + S * T) + std::abs(eta_mag) * T) / (2.0 * M_PI);
  const GaussRule rt = oscillatory_rule(-T, T, cycles_t, opts.nodes_per_cycle, opts.min_t_nodes);

  const double cycles_l = std::abs(xi) * T * 2.0 * S / (2.0 * M_PI);
  const GaussRule rl = oscillatory_rule(-S, S, cycles_l, opts.nodes_per_cycle, opts.min_lambda_nodes);

  // Inner lambda-hat integral G(t) = int chi(l) e^{(1+i xi) l t} dl.
  std::vector<Cplx> G(rt.nodes.size());
  std::vector<double> chi_v(rl.nodes.size());
  for (std::size_t j = 0; j < rl.nodes.size(); ++j) chi_v[j] = loc.chi(rl.nodes[j]);
  parallel_for(G.size(), [&](std::size_t k) {
    const double t = rt.nodes[k];
    Cplx acc = 0.0;
    for (std::size_t j = 0; j < rl.nodes.size(); ++j) {
      const double l = rl.nodes[j];
      if (chi_v[j] == 0.0) continue;
      acc += rl.weights[j] * chi_v[j] * std::exp(Cplx(l * t, xi * l * t));
    }
    G[k] = acc;
  });

  Cplx total = 0.0;
  for (std::size_t p = 0; p < psis.size(); ++p) {
    const double alpha = alphas[p];
    const double beta = link_dim == 1 ? eta_mag * psis[p]
                                      : eta_mag * std::cos(psis[p] - eta_angle);
    Cplx acc = 0.0;
    for (std::size_t k = 0; k < rt.nodes.size(); ++k) {
      const double t = rt.nodes[k];
      // e^{(1+i xi) alpha t^2} e^{i beta t}
      acc += rt.weights[k] * G[k] * std::exp(Cplx(alpha * t * t, xi * alpha * t * t + beta * t));
    }
    total += omega_w[p] * acc;
  }
  return total;
}

double closed_form_symbol(double alpha, double xi, double eta_mag, int link_dim) {
  if (!(alpha < 0)) throw DomainError("closed_form_symbol: alpha must be negative");
  const double pref = (1.0 / std::abs(alpha)) / std::sqrt(1.0 + xi * xi);
  const double denom = 2.0 * alpha * (1.0 + xi * xi);
  if (link_dim == 1) {
    return pref * 2.0 * std::exp(eta_mag * eta_mag / denom);
  }
  const double ridge = std::abs(eta_mag) / std::sqrt(1.0 + xi * xi);
  const int n = std::max(64, 2 * static_cast<int>(16.0 * ridge + 16.0));
  const GaussRule circle = gauss_legendre(n, 0.0, 2.0 * M_PI);
  double acc = 0.0;
  for (std::size_t k = 0; k < circle.nodes.size(); ++k) {
    const double b = eta_mag * std::cos(circle.nodes[k]);
    acc += circle.weights[k] * std::exp(b * b / denom);
  }
  return pref * acc;
}

EllipticityScan ellipticity_scan(const ConicMetric& metric, const Localizer& loc,
                                 const std::vector<double>& x_grid, const LinkPoint& y,
                                 const std::vector<double>& xi_grid,
                                 const std::vector<double>& eta_grid, int n_eta_dirs,
                                 double c0_fraction, SymbolQuadratureOptions opts) {
  if (x_grid.empty() || xi_grid.empty() || eta_grid.empty())
    throw ArgumentError("ellipticity_scan: empty grids");
  EllipticityScan scan;
  scan.fiber_infinity_supported = metric.link().dim() >= 2;

  struct Task {
    double x, xi, eta;
    int dir;
  };
  std::vector<Task> tasks;
  for (double x : x_grid)
    for (double xi : xi_grid)
      for (double eta : eta_grid) {
        const int nd = eta == 0.0 ? 1 : n_eta_dirs;
        for (int d = 0; d < nd; ++d) tasks.push_back({x, xi, eta, d});
      }
  std::vector<FiberSample> samples(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t idx) {
    const Task& t = tasks[idx];
    FiberSample fs;
    fs.x = t.x;
    fs.y = y;
    fs.xi = t.xi;
    fs.eta_mag = t.eta;
    fs.eta_dir_index = t.dir;
    const double ang = 2.0 * M_PI * t.dir / std::max(1, n_eta_dirs);
    fs.value = full_symbol_numeric(metric, loc, t.x, y, t.xi, t.eta, ang, opts);
    fs.normalized_modulus =
        std::abs(fs.value) * std::sqrt(1.0 + t.xi * t.xi + t.eta * t.eta);
    samples[idx] = fs;
  });
  scan.samples = samples;

  // Origin reference at the first base point.
  double origin = 0.0;
  for (const auto& s : samples)
    if (s.x == x_grid.front() && s.xi == 0.0 && s.eta_mag == 0.0) origin = std::abs(s.value);
  scan.origin_value = origin;
  scan.threshold = c0_fraction * origin;

  scan.min_normalized = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (s.normalized_modulus < scan.min_normalized) {
      scan.min_normalized = s.normalized_modulus;
      scan.argmin = s;
    }
  }
  scan.pass = scan.min_normalized > scan.threshold && scan.fiber_infinity_supported;

  // One-point c' calibration at (0, 0) against the closed form, then the
  // worst relative deviation across the scan (only meaningful for the
  // Gaussian localizer).
  const double alpha_ref =
      expansion_alpha(metric, x_grid.front(), y, unit_direction(metric, x_grid.front(), y, 0.0));
  const double cf0 = closed_form_symbol(alpha_ref, 0.0, 0.0, metric.link().dim());
  scan.c_prime = origin / cf0;
  double worst = 0.0;
  std::vector<double> lx, lv;
  for (const auto& s : samples) {
    if (s.x != x_grid.front()) continue;
    const double cf = scan.c_prime * closed_form_symbol(alpha_ref, s.xi, s.eta_mag,
                                                        metric.link().dim());
    const double rel = std::abs(std::abs(s.value) - cf) / std::max(cf, 1e-300);
    worst = std::max(worst, rel);
    if (s.eta_mag == 0.0 && s.xi >= 2.0) {
      lx.push_back(std::log(s.xi));
      lv.push_back(std::log(std::abs(s.value)));
    }
  }
  scan.max_closed_form_rel_err = worst;
  if (lx.size() >= 2) scan.decay_slope = fit_slope(lx, lv);
  return scan;
}

void write_scan_csv(const std::string& path, const EllipticityScan& scan) {
  std::ofstream os(path);
  if (!os) throw FormatError("write_scan_csv: cannot open " + path);
  os << "x,y_a,y_b,xi,eta_mag,eta_dir_index,re,im,normalized_modulus\r\n";
  for (const auto& s : scan.samples) {
    os << format_g17(s.x) << ',' << format_g17(s.y.a) << ',' << format_g17(s.y.b) << ','
       << format_g17(s.xi) << ',' << format_g17(s.eta_mag) << ',' << s.eta_dir_index << ','
       << format_g17(s.value.real()) << ',' << format_g17(s.value.imag()) << ','
       << format_g17(s.normalized_modulus) << "\r\n";
  }
}

}  // namespace conicxray
