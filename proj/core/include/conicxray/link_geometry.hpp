#pragma once

#include <optional>

#include "conicxray/numerics.hpp"

namespace conicxray {

enum class LinkKind { Circle, RoundSphere, PerturbedSphere };

/// Chart coordinates on the link: (angle, unused) for a circle,
/// (colatitude, longitude) for the sphere families.
struct LinkPoint {
  double a = 0.0;
  double b = 0.0;
};

/// Covector components in the same chart.
struct LinkCovector {
  double a = 0.0;
  double b = 0.0;
};

/// Point of the unit cosphere bundle of the link: |mu_hat|_h = 1.
struct LinkState {
  LinkPoint y;
  LinkCovector mu_hat;
};

/// The cross-section (Y, h): circle, round sphere, or a sphere with a
/// conformal Legendre perturbation h = R^2 (1 + a P_k(cos theta)) g_round.
class LinkMetric {
 public:
  static LinkMetric circle(double radius);
  static LinkMetric round_sphere(double radius);
  static LinkMetric perturbed_sphere(double base_radius, double amplitude, int harmonic_degree);

  LinkKind kind() const { return kind_; }
  int dim() const { return kind_ == LinkKind::Circle ? 1 : 2; }
  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }
  int harmonic_degree() const { return degree_; }

  /// Conformal factor c_p(u) of the metric relative to the round sphere.
  double conformal(const Vec3& u) const;
  /// Full ambient gradient of c_p (the flow projects it tangentially).
  Vec3 conformal_gradient(const Vec3& u) const;
  /// Gauss curvature at a link point; 2-dimensional links only.
  double gauss_curvature(const Vec3& u) const;

  Vec3 embed(const LinkPoint& y) const;
  LinkPoint coords(const Vec3& u) const;
  /// Ambient representation of a chart covector at y.
  Vec3 covector_ambient(const LinkPoint& y, const LinkCovector& mu) const;
  LinkCovector covector_chart(const Vec3& u, const Vec3& m) const;

  /// Squared dual norm |m|^2_{h^{-1}} = |m|^2 / (R^2 c_p(u)) at u.
  double dual_norm2_ambient(const Vec3& u, const Vec3& m) const;
  double dual_norm2(const LinkPoint& y, const LinkCovector& mu) const;

  /// Samples the metric tensor eigenvalues; true when positive definite.
  bool positive_definite_sampled(int n_samples = 256) const;

 private:
  LinkMetric() = default;
  LinkKind kind_ = LinkKind::Circle;
  double radius_ = 1.0;
  double amplitude_ = 0.0;
  int degree_ = 0;
};

/// exp(r H_{h/2}) applied to a unit-cosphere state: unit-speed geodesic flow
/// lifted to the cotangent bundle.
LinkState link_flow(const LinkMetric& link, const LinkState& state, double r);

/// First distance in (0, r_max] at which a Jacobi field with J(0) = 0 vanishes
/// again along the geodesic through `state`, or nullopt if there is none.
std::optional<double> conjugate_scan(const LinkMetric& link, const LinkState& state, double r_max);

namespace detail {
/// Ambient flow state used by the integrators: point, covector, Jacobi pair.
struct LinkFlowState {
  Vec3 u{};
  Vec3 m{};
  double jacobi = 0.0;
  double jacobi_prime = 0.0;
};
LinkFlowState link_flow_ambient(const LinkMetric& link, const Vec3& u0, const Vec3& m0, double r,
                                bool with_jacobi,
                                const std::function<void(double, const LinkFlowState&)>& observer = {});
}  // namespace detail

}  // namespace conicxray
