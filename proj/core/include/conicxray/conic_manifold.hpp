#pragma once

#include <memory>
#include <vector>

#include "conicxray/link_geometry.hpp"

namespace conicxray {

/// Smooth warp profile c(x) = 1 + sum_k beta_k x^k multiplying the link
/// metric; c(0) = 1 holds structurally.
class WarpProfile {
 public:
  WarpProfile() = default;  // exact cone
  explicit WarpProfile(std::vector<double> coeffs);
  double value(double x) const;
  double derivative(double x) const;
  bool is_identity() const { return coeffs_.empty(); }
  const std::vector<double>& coeffs() const { return coeffs_; }

 private:
  std::vector<double> coeffs_;  // beta_1, beta_2, ...
};

/// A point (x, y, tau, mu) of the scattering cotangent bundle over the collar,
/// written as tau dx/x^2 + mu dy/x.
struct ScCovector {
  double x = 0.0;
  LinkPoint y;
  double tau = 0.0;
  LinkCovector mu;
};

/// Chart components of a tangent vector on Y.
struct LinkTangent {
  double a = 0.0;
  double b = 0.0;
};

/// b-tangent data lambda x d_x + omega d_y of a bicharacteristic.
struct BTangent {
  double lambda = 0.0;
  LinkTangent omega;
};

/// Coordinate velocity (dx/dt, dy/dt, dtau/dt, dmu/dt) of (1/2) sc H_g.
struct ScVelocity {
  double dx = 0.0;
  LinkTangent dy;
  double dtau = 0.0;
  LinkCovector dmu;
};

struct CertificationState;

/// Collar {0 < x <= x0} x Y with metric dx^2/x^4 + c(x) h0 / x^2 and the
/// weight exponent p used by the analytic scalings.
class ConicMetric {
 public:
  ConicMetric(LinkMetric link, double x0, WarpProfile warp = {}, double p = 1.0);

  const LinkMetric& link() const { return link_; }
  double x0() const { return x0_; }
  double p() const { return p_; }
  const WarpProfile& warp_profile() const { return warp_; }
  double warp(double x) const { return warp_.value(x); }
  double warp_derivative(double x) const { return warp_.derivative(x); }
  bool is_exact_cone() const { return warp_.is_identity(); }
  int dim() const { return link_.dim() + 1; }

  void check_in_collar(double x) const;

  /// tau^2 + |mu|^2_{h(x,.)}; zero only at the zero section.
  double dual_metric(const ScCovector& q) const;

  /// Coordinate velocity of (1/2) sc H_g = (1/2) x^{-1} H_g.
  ScVelocity sc_hamilton_field(const ScCovector& q) const;

  /// lambda = tau, omega = metric dual of mu in h(x,.); unit level set only.
  BTangent covector_to_btangent(const ScCovector& q) const;

  /// Squared dual norm of mu at collar level x.
  double mu_norm2(double x, const LinkPoint& y, const LinkCovector& mu) const;

  /// Certification record attached by foliation_report; shared across copies.
  bool certified() const;
  void record_certification(double c_concavity, double C3, double C4, double C5, double Cw) const;
  struct Constants {
    double c_concavity = 0, C3 = 0, C4 = 0, C5 = 0, Cw = 0;
  };
  Constants certified_constants() const;

 private:
  LinkMetric link_;
  double x0_ = 0.5;
  WarpProfile warp_;
  double p_ = 1.0;
  std::shared_ptr<CertificationState> cert_;
};

}  // namespace conicxray
