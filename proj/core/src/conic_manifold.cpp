#include "conicxray/conic_manifold.hpp"

#include <atomic>
#include <cmath>

#include "conicxray/errors.hpp"

namespace conicxray {

WarpProfile::WarpProfile(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
}

double WarpProfile::value(double x) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = (acc + *it) * x;
  return 1.0 + acc;
}

double WarpProfile::derivative(double x) const {
  double acc = 0.0;
  for (std::size_t k = coeffs_.size(); k > 0; --k) acc = acc * x + static_cast<double>(k) * coeffs_[k - 1];
  return acc;
}

struct CertificationState {
  std::atomic<bool> certified{false};
  ConicMetric::Constants constants;
};

ConicMetric::ConicMetric(LinkMetric link, double x0, WarpProfile warp, double p)
    : link_(std::move(link)), x0_(x0), warp_(std::move(warp)), p_(p),
      cert_(std::make_shared<CertificationState>()) {
  if (!(x0 > 0)) throw ArgumentError("ConicMetric: x0 must be positive");
  if (!(p > 0)) throw ArgumentError("ConicMetric: p must be positive");
  // c(x) > 1/2 on [0, x0], sampled.
  for (int i = 0; i <= 256; ++i) {
    const double x = x0 * i / 256.0;
    if (!(warp_.value(x) > 0.5))
      throw ArgumentError("ConicMetric: warp profile must stay above 1/2 on the collar");
  }
  if (!link_.positive_definite_sampled())
    throw ArgumentError("ConicMetric: link metric is not positive definite");
}

void ConicMetric::check_in_collar(double x) const {
  if (!(x > 0.0) || !(x <= x0_ * (1.0 + 1e-12)))
    throw DomainError("point outside the collar (0, x0]");
}

double ConicMetric::mu_norm2(double x, const LinkPoint& y, const LinkCovector& mu) const {
  return link_.dual_norm2(y, mu) / warp_.value(x);
}

double ConicMetric::dual_metric(const ScCovector& q) const {
  check_in_collar(q.x);
  return q.tau * q.tau + mu_norm2(q.x, q.y, q.mu);
}

ScVelocity ConicMetric::sc_hamilton_field(const ScCovector& q) const {
  check_in_collar(q.x);
  const double c = warp_.value(q.x);
  const double dc = warp_.derivative(q.x);
  const LinkMetric& L = link_;
  const double R2 = L.radius() * L.radius();

  // Chart form of H0 = |mu|^2_{h0^{-1}} and its y/mu gradients.
  double H0, dH0_da = 0, dH0_db = 0, dH0_dmu_a = 0, dH0_dmu_b = 0;
  double cp = 1.0;
  if (L.kind() == LinkKind::Circle) {
    H0 = q.mu.a * q.mu.a / R2;
    dH0_dmu_a = 2.0 * q.mu.a / R2;
  } else {
    const double st = std::sin(q.y.a);
    if (std::abs(st) < 1e-12)
      throw DomainError("sc_hamilton_field: colatitude chart degenerate at the pole");
    const Vec3 u = L.embed(q.y);
    cp = L.conformal(u);
    const double s2 = st * st;
    H0 = (q.mu.a * q.mu.a + q.mu.b * q.mu.b / s2) / (R2 * cp);
    const double dcp_dtheta = -st * L.conformal_gradient(u)[2];  // d/dtheta of c_p(cos theta)
    dH0_da = -dcp_dtheta / cp * H0 - 2.0 * std::cos(q.y.a) / (s2 * st) * q.mu.b * q.mu.b / (R2 * cp);
    dH0_dmu_a = 2.0 * q.mu.a / (R2 * cp);
    dH0_dmu_b = 2.0 * q.mu.b / (R2 * cp * s2);
  }

  ScVelocity v;
  v.dx = q.tau * q.x;
  v.dy.a = 0.5 / c * dH0_dmu_a;
  v.dy.b = 0.5 / c * dH0_dmu_b;
  v.dtau = -(H0 / c) * (1.0 - 0.5 * q.x * dc / c);
  v.dmu.a = q.tau * q.mu.a - 0.5 / c * dH0_da;
  v.dmu.b = q.tau * q.mu.b - 0.5 / c * dH0_db;
  return v;
}

BTangent ConicMetric::covector_to_btangent(const ScCovector& q) const {
  check_in_collar(q.x);
  const double g = dual_metric(q);
  if (std::abs(std::sqrt(g) - 1.0) > 1e-9)
    throw ContractViolation("covector_to_btangent: covector must lie on the unit level set");
  BTangent b;
  b.lambda = q.tau;
  const double c = warp_.value(q.x);
  const LinkMetric& L = link_;
  const double R2 = L.radius() * L.radius();
  if (L.kind() == LinkKind::Circle) {
    b.omega.a = q.mu.a / (R2 * c);
    return b;
  }
  const Vec3 u = L.embed(q.y);
  const double cp = L.conformal(u);
  const double st = std::sin(q.y.a);
  if (std::abs(st) < 1e-12) throw DomainError("covector_to_btangent: chart degenerate at the pole");
  b.omega.a = q.mu.a / (R2 * cp * c);
  b.omega.b = q.mu.b / (R2 * cp * c * st * st);
  return b;
}

bool ConicMetric::certified() const { return cert_->certified.load(); }

void ConicMetric::record_certification(double c_concavity, double C3, double C4, double C5,
                                       double Cw) const {
  cert_->constants = {c_concavity, C3, C4, C5, Cw};
  cert_->certified.store(true);
}

ConicMetric::Constants ConicMetric::certified_constants() const {
  if (!certified()) throw CertificationError("metric has not been certified");
  return cert_->constants;
}

}  // namespace conicxray
