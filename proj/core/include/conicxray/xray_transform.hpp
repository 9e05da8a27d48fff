#pragma once

#include "conicxray/geodesic_flow.hpp"
#include "conicxray/grid_function.hpp"

namespace conicxray {

/// Weighted X-ray transform If = int f(gamma(t)) x(gamma(t))^{-1} dt over a
/// traced path, using the path's quadrature samples. Tails where the decay
/// class of f makes the integrand negligible (< 1e-16 of the peak bound) are
/// skipped.
double forward(const GridFunction& f, const GeodesicPath& path);

struct ForwardInfo {
  double value = 0.0;
  double truncation_estimate = 0.0;  // only meaningful without a decay class
};
ForwardInfo forward_with_info(const GridFunction& f, const GeodesicPath& path);

/// Direction family over the grid base points: Gauss-Legendre nodes in the
/// rescaled slope lambda_hat over [-S, S] and uniform link directions, with
/// lambda = scale(x, y, psi) * lambda_hat.
struct GeodesicFamily {
  std::shared_ptr<const GridSpec> grid;
  std::vector<double> lam_hat;  // GL nodes
  std::vector<double> lam_w;    // GL weights
  std::vector<double> psi;     // direction angles over the full circle (even count)
  std::function<double(double x, const LinkPoint& y, double psi)> lambda_scale;
  TraceOptions trace_opts;

  int n_base() const { return grid->size(); }
  int n_dir() const { return static_cast<int>(lam_hat.size() * psi.size()); }
  int data_index(int base, int k_lam, int l_psi) const {
    return (base * static_cast<int>(lam_hat.size()) + k_lam) * static_cast<int>(psi.size()) + l_psi;
  }
};

/// Builds the traced initial data for one family member.
TraceInit family_init(const ConicMetric& metric, const GeodesicFamily& fam, int base, int k_lam,
                      int l_psi);

/// Maps forward over every family member; deterministic ordering.
std::vector<double> forward_family(const ConicMetric& metric, const GridFunction& f,
                                   const GeodesicFamily& fam);

/// Forward transform of a closed-form integrand along the family rays; used
/// to generate reconstruction data free of grid-interpolation error.
std::vector<double> forward_family(const ConicMetric& metric,
                                   const std::function<double(double, const LinkPoint&)>& f,
                                   const DecayInfo& decay, const GeodesicFamily& fam);

}  // namespace conicxray
