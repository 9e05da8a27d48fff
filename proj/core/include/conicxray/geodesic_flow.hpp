#pragma once

#include <limits>
#include <vector>

#include "conicxray/conic_manifold.hpp"

namespace conicxray {

enum class ParamKind { TParam, RParam };

/// One accepted point of a traced bicharacteristic. Samples with weight > 0
/// form a quadrature rule for integrals \int g(path(t)) dt.
struct PathSample {
  double t = 0.0;          // accumulated t-parameter
  double dt_dparam = 1.0;  // 1 in the t-regime, 1/|mu| in the radial regime
  ParamKind mode = ParamKind::TParam;
  double x = 0.0;
  double tau = 0.0;
  Vec3 u{};                // link point, ambient
  Vec3 m{};                // mu as an ambient link covector
  double mu_norm = 0.0;    // |mu|_{h(x,.)}
  double exponent = 0.0;   // E(t) = x_base^{-2p}/(2p) - x^{-2p}/(2p)
  double weight = 0.0;     // quadrature weight in dt (0 for structural samples)
};

struct TraceOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.1;
  double x_min_factor = 1e-3;  // stop when x < x0 * x_min_factor
  double max_param = 40.0;
  double exponent_cutoff = std::numeric_limits<double>::infinity();  // stop when E < -cutoff
  double mu_switch = 0.05;     // |mu| threshold for the radial reparameterization
  int refine = 0;              // halve quadrature panels this many times
  bool both_directions = true;
};

/// Sampled bicharacteristic with initial data (x, y, lambda, omega).
struct GeodesicPath {
  double x_base = 0.0;
  LinkPoint y_base;
  double lambda = 0.0;     // = tau(0); unit level set
  LinkTangent omega;       // h(x,.)-dual of mu(0)
  double p = 1.0;          // exponent power of the stored E values
  std::vector<PathSample> samples;  // ascending in t
  double max_drift = 0.0;  // max |dual_metric - 1| before per-step renormalization
  bool truncated_at_x0 = false;
  bool hit_x_min = false;
};

/// Initial data on the unit level set after the covector identification:
/// tau = lambda, mu = h(x,.)-dual of omega, with lambda^2 + |omega|^2 = 1.
struct TraceInit {
  double x = 0.0;
  LinkPoint y;
  double lambda = 0.0;
  LinkTangent omega;
};

/// Builds unit-level initial data from a slope cot(r0) = lambda_slope and a
/// unit link direction.
TraceInit init_from_slope(const ConicMetric& metric, double x, const LinkPoint& y,
                          double lambda_slope, const LinkTangent& omega_unit);
/// Unit link tangent at y in direction angle psi (2-sphere) or sign (circle).
LinkTangent unit_direction(const ConicMetric& metric, double x, const LinkPoint& y, double psi);

GeodesicPath trace(const ConicMetric& metric, const TraceInit& init, const TraceOptions& opts = {});

/// Closed-form bicharacteristic of the exact cone, r0 = arccot(lambda_slope):
/// x = x0 sin(r + r0)/sin(r0), tau = cos(r + r0), |mu| = sin(r + r0).
struct ExactConePoint {
  double x = 0.0;
  double tau = 0.0;
  double mu_norm = 0.0;
  LinkState link;  // (y, mu_hat) after link flow by r
};
ExactConePoint exact_cone_path(const ConicMetric& metric, double x0, const LinkState& start,
                               double lambda_slope, double r);

/// Quadratic coefficient alpha(x, y, 0, omega) of x(gamma(t))/x = 1 + alpha t^2 + ...
/// along the tangent (lambda = 0) geodesic; throws FoliationError if alpha >= 0.
double expansion_alpha(const ConicMetric& metric, double x, const LinkPoint& y,
                       const LinkTangent& omega_unit);

struct FoliationReport {
  bool passes = false;
  bool warning_empty = false;
  double c_concavity = 0.0;  // min over tangency samples of -d2x/dt2 / x
  double C3 = 0.0;           // declared slope window |lambda| < C3 x
  double C4 = 0.0;           // declared time window |t| > C4 |lambda|
  double C5 = 0.0;           // fitted Gaussian bound E <= -C5 x^{-2p} t^2
  double Cw = 0.0;           // fitted upper bound of E on the window
  bool single_maximum_ok = true;
  std::vector<double> alphas;          // per (x, y, omega) sample
  std::vector<double> failing_x;       // x locations of failed checks
};

FoliationReport foliation_report(const ConicMetric& metric, const std::vector<double>& x_grid,
                                 const std::vector<LinkPoint>& y_samples,
                                 const std::vector<double>& omega_angles);

/// Non-degeneracy of (r, r0, psi) -> (x^{-1} gamma^(1), gamma^(2)) over the
/// given r-range; degeneracy where the Gaussian weight is negligible is
/// tolerated.
bool conjugate_check(const ConicMetric& metric, double x, const LinkPoint& y, double r_lo,
                     double r_hi);

/// Runs foliation_report on default grids and records the certification on
/// the metric; returns the report.
FoliationReport certify(const ConicMetric& metric, int nx = 6, int ny = 4, int n_omega = 4);

}  // namespace conicxray
