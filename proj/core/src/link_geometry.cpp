#include "conicxray/link_geometry.hpp"

#include <algorithm>
#include <cmath>

#include "conicxray/errors.hpp"
#include "conicxray/rk45.hpp"

namespace conicxray {

LinkMetric LinkMetric::circle(double radius) {
  if (!(radius > 0)) throw ArgumentError("LinkMetric: radius must be positive");
  LinkMetric m;
  m.kind_ = LinkKind::Circle;
  m.radius_ = radius;
  return m;
}

LinkMetric LinkMetric::round_sphere(double radius) {
  if (!(radius > 0)) throw ArgumentError("LinkMetric: radius must be positive");
  LinkMetric m;
  m.kind_ = LinkKind::RoundSphere;
  m.radius_ = radius;
  return m;
}

LinkMetric LinkMetric::perturbed_sphere(double base_radius, double amplitude, int harmonic_degree) {
  if (!(base_radius > 0)) throw ArgumentError("LinkMetric: radius must be positive");
  if (!(std::abs(amplitude) < base_radius / 4.0))
    throw ArgumentError("LinkMetric: |amplitude| must be < base_radius/4");
  if (harmonic_degree < 1 || harmonic_degree > 12)
    throw ArgumentError("LinkMetric: harmonic_degree out of range [1, 12]");
  LinkMetric m;
  m.kind_ = LinkKind::PerturbedSphere;
  m.radius_ = base_radius;
  m.amplitude_ = amplitude;
  m.degree_ = harmonic_degree;
  return m;
}

double LinkMetric::conformal(const Vec3& u) const {
  if (kind_ != LinkKind::PerturbedSphere) return 1.0;
  return 1.0 + amplitude_ * legendre(degree_, std::clamp(u[2], -1.0, 1.0)).p;
}

Vec3 LinkMetric::conformal_gradient(const Vec3& u) const {
  if (kind_ != LinkKind::PerturbedSphere) return {0, 0, 0};
  const double dp = legendre(degree_, std::clamp(u[2], -1.0, 1.0)).dp;
  return {0, 0, amplitude_ * dp};
}

double LinkMetric::gauss_curvature(const Vec3& u) const {
  if (kind_ == LinkKind::Circle) throw DomainError("gauss_curvature: 1-dimensional link");
  const double R2 = radius_ * radius_;
  if (kind_ == LinkKind::RoundSphere) return 1.0 / R2;
  // Conformal metric c_p * g_round: K = (K0 - Lap_round phi) / c_p, phi = log(c_p)/2.
  const double w = std::clamp(u[2], -1.0, 1.0);
  const LegendreEval e = legendre(degree_, w);
  const double cp = 1.0 + amplitude_ * e.p;
  const double cp1 = amplitude_ * e.dp;
  const double cp2 = amplitude_ * e.ddp;
  const double phi1 = cp1 / (2.0 * cp);
  const double phi2 = (cp2 * cp - cp1 * cp1) / (2.0 * cp * cp);
  const double lap = ((1.0 - w * w) * phi2 - 2.0 * w * phi1) / R2;
  return (1.0 / R2 - lap) / cp;
}

Vec3 LinkMetric::embed(const LinkPoint& y) const {
  if (kind_ == LinkKind::Circle) return {std::cos(y.a), std::sin(y.a), 0.0};
  const double st = std::sin(y.a), ct = std::cos(y.a);
  return {st * std::cos(y.b), st * std::sin(y.b), ct};
}

LinkPoint LinkMetric::coords(const Vec3& u) const {
  if (kind_ == LinkKind::Circle) return {std::atan2(u[1], u[0]), 0.0};
  return {std::acos(std::clamp(u[2], -1.0, 1.0)), std::atan2(u[1], u[0])};
}

Vec3 LinkMetric::covector_ambient(const LinkPoint& y, const LinkCovector& mu) const {
  if (kind_ == LinkKind::Circle) {
    return {-mu.a * std::sin(y.a), mu.a * std::cos(y.a), 0.0};
  }
  const double st = std::sin(y.a), ct = std::cos(y.a);
  if (std::abs(st) < 1e-13) throw DomainError("covector_ambient: chart degenerate at the pole");
  const double cf = std::cos(y.b), sf = std::sin(y.b);
  const Vec3 grad_theta{ct * cf, ct * sf, -st};
  const Vec3 grad_phi{-sf / st, cf / st, 0.0};
  return mu.a * grad_theta + mu.b * grad_phi;
}

LinkCovector LinkMetric::covector_chart(const Vec3& u, const Vec3& m) const {
  if (kind_ == LinkKind::Circle) {
    const double r = std::hypot(u[0], u[1]);
    return {(-m[0] * u[1] + m[1] * u[0]) / r, 0.0};
  }
  const LinkPoint y = coords(u);
  const double st = std::sin(y.a), ct = std::cos(y.a);
  if (std::abs(st) < 1e-13) throw DomainError("covector_chart: chart degenerate at the pole");
  const double cf = std::cos(y.b), sf = std::sin(y.b);
  const Vec3 e_theta{ct * cf, ct * sf, -st};
  const Vec3 e_phi{-sf, cf, 0.0};
  // mu(d/dtheta) and mu(d/dphi); d/dphi has ambient length sin(theta).
  return {dot(m, e_theta), st * dot(m, e_phi)};
}

double LinkMetric::dual_norm2_ambient(const Vec3& u, const Vec3& m) const {
  return dot(m, m) / (radius_ * radius_ * conformal(u));
}

double LinkMetric::dual_norm2(const LinkPoint& y, const LinkCovector& mu) const {
  if (kind_ == LinkKind::Circle) return mu.a * mu.a / (radius_ * radius_);
  const Vec3 u = embed(y);
  return dual_norm2_ambient(u, covector_ambient(y, mu));
}

bool LinkMetric::positive_definite_sampled(int n_samples) const {
  if (kind_ != LinkKind::PerturbedSphere) return true;
  for (int i = 0; i <= n_samples; ++i) {
    const double w = -1.0 + 2.0 * i / n_samples;
    // Metric eigenvalues are R^2 c_p {1, sin^2 theta}: positive iff c_p > 0.
    if (!(1.0 + amplitude_ * legendre(degree_, w).p > 0.0)) return false;
  }
  return true;
}

namespace {

struct FlowVec {
  std::array<double, 8> v{};
  std::size_t n = 6;
  std::size_t size() const { return n; }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

void check_unit(const LinkMetric& link, const LinkState& s) {
  const double g = link.dual_norm2(s.y, s.mu_hat);
  if (std::abs(std::sqrt(g) - 1.0) > 1e-10)
    throw ContractViolation("link state: |mu_hat|_h must be 1 (got " + format_g17(std::sqrt(g)) + ")");
}

}  // namespace

namespace detail {

LinkFlowState link_flow_ambient(const LinkMetric& link, const Vec3& u0, const Vec3& m0, double r,
                                bool with_jacobi,
                                const std::function<void(double, const LinkFlowState&)>& observer) {
  const double R2 = link.radius() * link.radius();
  auto rhs = [&link, R2, with_jacobi](const FlowVec& s, FlowVec& ds) {
    const Vec3 u{s[0], s[1], s[2]};
    const Vec3 m{s[3], s[4], s[5]};
    const double cp = link.conformal(u);
    const double H0 = dot(m, m) / (R2 * cp);
    const Vec3 gc = link.conformal_gradient(u);
    const Vec3 gct = gc - dot(gc, u) * u;
    // du/dr = m / (R^2 c_p);  dm/dr = H0 grad_T(c_p)/(2 c_p) - H0 u.
    const Vec3 du = (1.0 / (R2 * cp)) * m;
    const Vec3 dm = (H0 / (2.0 * cp)) * gct - H0 * u;
    ds[0] = du[0];
    ds[1] = du[1];
    ds[2] = du[2];
    ds[3] = dm[0];
    ds[4] = dm[1];
    ds[5] = dm[2];
    if (with_jacobi) {
      const double K = link.gauss_curvature(u);
      ds[6] = s[7];
      ds[7] = -K * s[6];
    } else {
      ds[6] = ds[7] = 0.0;
    }
  };

  Rk45Options opts;
  opts.rel_tol = 1e-12;
  opts.abs_tol = 1e-14;
  opts.initial_step = 1e-3;
  opts.max_step = 0.05;
  Rk45Stepper<FlowVec, decltype(rhs)> stepper(rhs, opts);

  FlowVec s;
  s.n = 8;
  s.v = {u0[0], u0[1], u0[2], m0[0], m0[1], m0[2], 0.0, with_jacobi ? 1.0 : 0.0};
  const double direction = r >= 0 ? 1.0 : -1.0;
  double t = 0.0;

  auto emit = [&](double rr) {
    if (!observer) return;
    LinkFlowState st;
    st.u = {s[0], s[1], s[2]};
    st.m = {s[3], s[4], s[5]};
    st.jacobi = s[6];
    st.jacobi_prime = s[7];
    observer(rr, st);
  };

  emit(0.0);
  while (direction * (r - t) > 1e-15) {
    stepper.step(s, t, direction, r);
    // Keep u on the sphere and m tangent; the dual norm is left untouched so
    // unit-speed conservation stays an honest accuracy measure.
    Vec3 u{s[0], s[1], s[2]};
    const double nu = norm(u);
    u = (1.0 / nu) * u;
    Vec3 m{s[3], s[4], s[5]};
    m = m - dot(m, u) * u;
    s.v[0] = u[0];
    s.v[1] = u[1];
    s.v[2] = u[2];
    s.v[3] = m[0];
    s.v[4] = m[1];
    s.v[5] = m[2];
    emit(t);
  }

  LinkFlowState out;
  out.u = {s[0], s[1], s[2]};
  out.m = {s[3], s[4], s[5]};
  out.jacobi = s[6];
  out.jacobi_prime = s[7];
  return out;
}

}  // namespace detail

LinkState link_flow(const LinkMetric& link, const LinkState& state, double r) {
  if (!std::isfinite(r)) throw ArgumentError("link_flow: r must be finite");
  check_unit(link, state);
  if (link.kind() == LinkKind::Circle) {
    // Constant-speed rotation: dy/dr = h^{-1} mu_hat = mu_hat / R^2, |mu_hat| = R.
    LinkState out = state;
    out.y.a = state.y.a + r * state.mu_hat.a / (link.radius() * link.radius());
    return out;
  }
  if (r == 0.0) return state;
  const Vec3 u0 = link.embed(state.y);
  const Vec3 m0 = link.covector_ambient(state.y, state.mu_hat);
  const detail::LinkFlowState fs = detail::link_flow_ambient(link, u0, m0, r, false);
  LinkState out;
  out.y = link.coords(fs.u);
  out.mu_hat = link.covector_chart(fs.u, fs.m);
  return out;
}

std::optional<double> conjugate_scan(const LinkMetric& link, const LinkState& state, double r_max) {
  if (!(r_max > 0.0) || !(r_max <= M_PI + 1e-12))
    throw ArgumentError("conjugate_scan: require 0 < r_max <= pi");
  check_unit(link, state);
  if (link.kind() == LinkKind::Circle) return std::nullopt;  // no normal Jacobi directions

  const Vec3 u0 = link.embed(state.y);
  const Vec3 m0 = link.covector_ambient(state.y, state.mu_hat);

  struct Sample {
    double r;
    detail::LinkFlowState s;
  };
  std::vector<Sample> samples;
  detail::link_flow_ambient(link, u0, m0, r_max, true,
                            [&samples](double r, const detail::LinkFlowState& s) {
                              samples.push_back({r, s});
                            });

  // First sign change (or near-vanishing minimum) of J after leaving r = 0.
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double j0 = samples[i - 1].s.jacobi;
    const double j1 = samples[i].s.jacobi;
    if (samples[i].r < 1e-8) continue;
    const bool crossing = samples[i - 1].r > 0.0 && j0 > 0.0 && j1 <= 0.0;
    const bool graze = std::abs(j1) < 1e-8 && samples[i].r > 1e-6;
    if (!crossing) {
      if (graze) return samples[i].r;
      continue;
    }
    // Bisection on sign(J(mid)), re-integrating from the start each probe.
    double lo = samples[i - 1].r, hi = samples[i].r;
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      const detail::LinkFlowState probe = detail::link_flow_ambient(link, u0, m0, mid, true);
      if (probe.jacobi > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }
  return std::nullopt;
}

}  // namespace conicxray
