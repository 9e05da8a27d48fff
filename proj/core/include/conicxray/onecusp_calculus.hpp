#pragma once

#include <complex>

#include "conicxray/normal_operator.hpp"

namespace conicxray {

/// Symbol in the parabolic (R^n model) class: an evaluator with declared
/// orders (m, l). For lattice quantization n is 1 or 2.
struct ParabolicSymbol {
  int n = 1;
  std::function<std::complex<double>(const double* z, const double* zeta)> eval;
  double order_m = 0.0;
  double order_l = 0.0;
};

/// Uniform lattice on [lo, hi]^n.
struct Lattice {
  int n = 1;
  int size0 = 0, size1 = 0;
  double lo = -8.0, hi = 8.0;
  double delta() const { return (hi - lo) / size0; }
  int points() const { return n == 1 ? size0 : size0 * size1; }
};

/// Semiclassical scale attached to each lattice direction: the foliation
/// direction pairs with h^{1/2}, the transverse direction with h. In 2D the
/// first direction is foliation-tangent and the second transverse.
enum class LatticeScaling { Transverse, Foliation, Mixed2D };

/// Discrete semiclassical foliation quantization: trapezoid sum over the DFT
/// frequency grid at the Nyquist cutoff pi/delta, unitary normalization
/// (Op(1) is the identity on lattice functions).
Eigen::MatrixXcd quantize(const ParabolicSymbol& sym, const Lattice& lat, double h,
                          LatticeScaling scaling);

/// Largest singular value by power iteration on A* A (deterministic start).
double operator_norm(const Eigen::MatrixXcd& A);

struct ComposeResult {
  double err0 = 0.0;                // error at the first h
  std::vector<double> errs;         // ||Op(a)Op(b) - Op(ab)|| per h
  std::vector<double> ratios;       // errs[i+1]/errs[i] for halving h
};
ComposeResult compose_check(const ParabolicSymbol& a, const ParabolicSymbol& b, const Lattice& lat,
                            const std::vector<double>& h_values, LatticeScaling scaling);

/// Sampled symbol-estimate verification: finite-difference derivatives tested
/// against the declared order pattern on a lattice of sample points. Reports
/// the largest constant seen per derivative (order verification, not proof).
struct SymbolOrderReport {
  double c0 = 0.0;      // |a| / <zeta>^m <z>^{l/2}
  double c_dzeta = 0.0; // |d_zeta a| / <zeta>^{m-1} <z>^{l/2}
  double c_dz = 0.0;    // |d_z a| / <zeta>^m <z>^{l/2-1/2}
  bool finite = true;
};
SymbolOrderReport verify_symbol_orders(const ParabolicSymbol& sym, double z_max, double zeta_max,
                                       int n_samples = 24);

struct SymbolQuadratureOptions {
  int min_t_nodes = 200;
  int min_lambda_nodes = 96;
  int nodes_per_cycle = 10;
  int n_omega = 16;
};

/// Principal symbol of the modified normal operator at h^{1/2} = 0, without
/// the overall xh factor:
///   int e^{i(xi (l t + a t^2) + eta.omega t)} e^{l t + a t^2} chi(l) dt dl domega,
/// with a = alpha(x, y, 0, omega) < 0. eta is given by magnitude and
/// direction angle in the link fiber.
std::complex<double> full_symbol_numeric(const ConicMetric& metric, const Localizer& loc, double x,
                                         const LinkPoint& y, double xi, double eta_mag,
                                         double eta_angle, SymbolQuadratureOptions opts = {});

/// The Gaussian-localizer closed form (up to the shared constant c'):
/// |alpha|^{-1} (1+xi^2)^{-1/2} int_{S^{n-2}} exp((eta.omega)^2/(2 alpha (1+xi^2))) domega.
double closed_form_symbol(double alpha, double xi, double eta_mag, int link_dim);

struct FiberSample {
  double x = 0.0;
  LinkPoint y;
  double xi = 0.0;
  double eta_mag = 0.0;
  int eta_dir_index = 0;
  std::complex<double> value;
  double normalized_modulus = 0.0;  // |value| <(xi, eta)>
};

struct EllipticityScan {
  bool pass = false;
  bool fiber_infinity_supported = true;  // false for 2-dimensional cones
  double min_normalized = 0.0;
  double origin_value = 0.0;   // |value| at (xi, eta) = 0 of the argmin base point
  double threshold = 0.0;
  FiberSample argmin;
  double c_prime = 0.0;             // one-point calibration constant
  double max_closed_form_rel_err = 0.0;
  double decay_slope = 0.0;         // log-log slope over xi in [2, 20], eta = 0
  std::vector<FiberSample> samples;
};

/// Scans |full symbol| <(xi,eta)> over the fiber grid at the given base
/// points; passes when the minimum stays above c0_fraction times the origin
/// value. Also fits c' and checks the closed-form match and the decay order.
EllipticityScan ellipticity_scan(const ConicMetric& metric, const Localizer& loc,
                                 const std::vector<double>& x_grid, const LinkPoint& y,
                                 const std::vector<double>& xi_grid,
                                 const std::vector<double>& eta_grid, int n_eta_dirs,
                                 double c0_fraction = 0.05, SymbolQuadratureOptions opts = {});

void write_scan_csv(const std::string& path, const EllipticityScan& scan);

}  // namespace conicxray
