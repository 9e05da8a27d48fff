#include "conicxray/geodesic_flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "conicxray/dual.hpp"
#include "conicxray/errors.hpp"
#include "conicxray/rk45.hpp"

namespace conicxray {

namespace {

template <typename S, int N>
struct SVec {
  std::array<S, N> v{};
  std::size_t size() const { return N; }
  S& operator[](std::size_t i) { return v[i]; }
  const S& operator[](std::size_t i) const { return v[i]; }
};

template <typename S>
S legendre_p(int k, S x) {
  S pm1 = 0.0, p = 1.0;
  for (int j = 1; j <= k; ++j) {
    const S pj = ((2.0 * j - 1.0) * x * p - (j - 1.0) * pm1) / S(double(j));
    pm1 = p;
    p = pj;
  }
  return p;
}

template <typename S>
S legendre_dp(int k, S x) {
  // P'_k = P'_{k-2} + (2k-1) P_{k-1}; no division, valid at the poles.
  if (k == 0) return S(0.0);
  if (k == 1) return S(1.0);
  S p_prev = 1.0, p = x;
  S dp_prev = 0.0, dp = 1.0;
  for (int j = 2; j <= k; ++j) {
    const S pj = ((2.0 * j - 1.0) * x * p - (j - 1.0) * p_prev) / S(double(j));
    const S dpj = dp_prev + (2.0 * j - 1.0) * p;
    p_prev = p;
    p = pj;
    dp_prev = dp;
    dp = dpj;
  }
  return dp;
}

template <typename S>
S warp_value(const WarpProfile& w, S x) {
  S acc = 0.0;
  const auto& c = w.coeffs();
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = (acc + S(*it)) * x;
  return S(1.0) + acc;
}

template <typename S>
S warp_deriv(const WarpProfile& w, S x) {
  S acc = 0.0;
  const auto& c = w.coeffs();
  for (std::size_t k = c.size(); k > 0; --k) acc = acc * x + S(double(k)) * S(c[k - 1]);
  return acc;
}

// Collar state layout: [x, tau, u(3), m(3), t_acc, r_acc].
constexpr int kX = 0, kTau = 1, kU = 2, kM = 5, kT = 8, kR = 9;

// Rescaled Hamilton field (1/2) sc H_g, optionally divided by |mu| (radial
// regime). Templated so dual numbers propagate initial-data variations.
template <typename S, int N>
void collar_field(const ConicMetric& metric, bool r_mode, const SVec<S, N>& s, SVec<S, N>& ds) {
  const LinkMetric& L = metric.link();
  const double R2 = L.radius() * L.radius();
  const S x = s[kX], tau = s[kTau];
  const S c = warp_value(metric.warp_profile(), x);
  const S dc = warp_deriv(metric.warp_profile(), x);

  S cp = 1.0, gz = 0.0;
  if (L.kind() == LinkKind::PerturbedSphere) {
    cp = S(1.0) + L.amplitude() * legendre_p(L.harmonic_degree(), s[kU + 2]);
    gz = L.amplitude() * legendre_dp(L.harmonic_degree(), s[kU + 2]);
  }

  const S m2 = s[kM] * s[kM] + s[kM + 1] * s[kM + 1] + s[kM + 2] * s[kM + 2];
  const S H0 = m2 / (R2 * cp);
  const S Hmu = H0 / c;  // |mu|^2 at collar level x

  ds[kX] = tau * x;
  ds[kTau] = S(0.0) - Hmu * (S(1.0) - 0.5 * x * dc / c);
  const S du_fac = S(1.0) / (R2 * cp * c);
  for (int i = 0; i < 3; ++i) ds[kU + i] = du_fac * s[kM + i];

  // Tangential part of grad c_p = (0, 0, gz).
  const S gu = gz * s[kU + 2];
  const S dm_fac = Hmu / (2.0 * cp);
  for (int i = 0; i < 3; ++i) {
    const S gct = (i == 2 ? gz : S(0.0)) - gu * s[kU + i];
    ds[kM + i] = tau * s[kM + i] + dm_fac * gct - Hmu * s[kU + i];
  }
  ds[kT] = 1.0;
  if (N > kR) {
    S mu = sqrt(Hmu);
    ds[kR] = mu;
  }
  if (r_mode) {
    const S inv = S(1.0) / sqrt(Hmu);
    for (int i = 0; i < N; ++i) ds[i] = ds[i] * inv;
  }
}

using DState = SVec<double, 9>;

double dual_metric_state(const ConicMetric& metric, const DState& s) {
  const LinkMetric& L = metric.link();
  const double R2 = L.radius() * L.radius();
  double cp = 1.0;
  if (L.kind() == LinkKind::PerturbedSphere)
    cp = 1.0 + L.amplitude() * legendre_p(L.harmonic_degree(), s[kU + 2]);
  const double m2 = s[kM] * s[kM] + s[kM + 1] * s[kM + 1] + s[kM + 2] * s[kM + 2];
  return s[kTau] * s[kTau] + m2 / (R2 * cp * metric.warp(s[kX]));
}

void renormalize(const ConicMetric& metric, DState& s, double& drift) {
  Vec3 u{s[kU], s[kU + 1], s[kU + 2]};
  const double nu = norm(u);
  u = (1.0 / nu) * u;
  Vec3 m{s[kM], s[kM + 1], s[kM + 2]};
  m = m - dot(m, u) * u;
  for (int i = 0; i < 3; ++i) {
    s[kU + i] = u[i];
    s[kM + i] = m[i];
  }
  const double g = dual_metric_state(metric, s);
  drift = std::max(drift, std::abs(g - 1.0));
  const double scale = 1.0 / std::sqrt(g);
  s[kTau] *= scale;
  for (int i = 0; i < 3; ++i) s[kM + i] *= scale;
}

double exponent_of(double x_base, double x, double p) {
  return (std::pow(x_base, -2.0 * p) - std::pow(x, -2.0 * p)) / (2.0 * p);
}

PathSample make_sample(const ConicMetric& metric, const DState& s, bool r_mode, double x_base,
                       double weight) {
  PathSample ps;
  ps.t = s[kT];
  ps.mode = r_mode ? ParamKind::RParam : ParamKind::TParam;
  ps.x = s[kX];
  ps.tau = s[kTau];
  ps.u = {s[kU], s[kU + 1], s[kU + 2]};
  ps.m = {s[kM], s[kM + 1], s[kM + 2]};
  const double g_mu = dual_metric_state(metric, s) - s[kTau] * s[kTau];
  ps.mu_norm = std::sqrt(std::max(g_mu, 0.0));
  ps.dt_dparam = r_mode ? 1.0 / std::max(ps.mu_norm, 1e-300) : 1.0;
  ps.exponent = exponent_of(x_base, ps.x, metric.p());
  ps.weight = weight;
  return ps;
}

DState initial_state(const ConicMetric& metric, const TraceInit& init) {
  metric.check_in_collar(init.x);
  const LinkMetric& L = metric.link();
  const double c = metric.warp(init.x);
  const double R2 = L.radius() * L.radius();
  DState s;
  s[kX] = init.x;
  s[kTau] = init.lambda;
  const Vec3 u = L.embed(init.y);
  Vec3 w;  // ambient tangent of omega
  double cp = 1.0;
  if (L.kind() == LinkKind::Circle) {
    w = {-init.omega.a * u[1], init.omega.a * u[0], 0.0};
  } else {
    cp = L.conformal(u);
    const double st = std::sin(init.y.a), ct = std::cos(init.y.a);
    const double cf = std::cos(init.y.b), sf = std::sin(init.y.b);
    const Vec3 e_theta{ct * cf, ct * sf, -st};
    const Vec3 e_phi{-sf, cf, 0.0};
    w = init.omega.a * e_theta + (init.omega.b * st) * e_phi;
  }
  // Lower omega with h(x,.) = c R^2 c_p g_round.
  const Vec3 m = (c * R2 * cp) * w;
  for (int i = 0; i < 3; ++i) {
    s[kU + i] = u[i];
    s[kM + i] = m[i];
  }
  s[kT] = 0.0;
  const double g = dual_metric_state(metric, s);
  if (std::abs(std::sqrt(g) - 1.0) > 1e-9)
    throw ContractViolation("trace: initial data off the unit level set, |.|=" +
                            format_g17(std::sqrt(g)));
  return s;
}

}  // namespace

LinkTangent unit_direction(const ConicMetric& metric, double x, const LinkPoint& y, double psi) {
  const LinkMetric& L = metric.link();
  const double c = metric.warp(x);
  LinkTangent w;
  if (L.kind() == LinkKind::Circle) {
    w.a = (psi >= 0 ? 1.0 : -1.0) / (L.radius() * std::sqrt(c));
    return w;
  }
  const Vec3 u = L.embed(y);
  const double cp = L.conformal(u);
  const double len = L.radius() * std::sqrt(cp * c);
  w.a = std::cos(psi) / len;
  w.b = std::sin(psi) / (len * std::sin(y.a));
  return w;
}

TraceInit init_from_slope(const ConicMetric& /*metric*/, double x, const LinkPoint& y,
                          double lambda_slope, const LinkTangent& omega_unit) {
  const double r0 = std::atan2(1.0, lambda_slope);
  TraceInit init;
  init.x = x;
  init.y = y;
  init.lambda = std::cos(r0);
  init.omega.a = omega_unit.a * std::sin(r0);
  init.omega.b = omega_unit.b * std::sin(r0);
  return init;
}

GeodesicPath trace(const ConicMetric& metric, const TraceInit& init, const TraceOptions& opts) {
  GeodesicPath path;
  path.x_base = init.x;
  path.y_base = init.y;
  path.lambda = init.lambda;
  path.omega = init.omega;
  path.p = metric.p();

  const DState base = initial_state(metric, init);
  const double x_min = metric.x0() * opts.x_min_factor;
  const GaussRule gl = gauss_legendre(4);
  const int subpanels = 1 << std::max(0, opts.refine);

  auto run_direction = [&](double dir, std::vector<PathSample>& out) {
    DState s = base;
    double param = 0.0;
    bool r_mode = false;
    {
      const double mu0 = std::sqrt(std::max(dual_metric_state(metric, s) - s[kTau] * s[kTau], 0.0));
      r_mode = mu0 < opts.mu_switch;
    }

    Rk45Options ro;
    ro.rel_tol = opts.rel_tol;
    ro.abs_tol = opts.abs_tol;
    ro.max_step = opts.max_step;
    ro.initial_step = 1e-4;

    auto rhs_t = [&metric](const DState& y, DState& dy) { collar_field<double, 9>(metric, false, y, dy); };
    auto rhs_r = [&metric](const DState& y, DState& dy) { collar_field<double, 9>(metric, true, y, dy); };
    Rk45Stepper<DState, decltype(rhs_t)> step_t(rhs_t, ro);
    Rk45Stepper<DState, decltype(rhs_r)> step_r(rhs_r, ro);

    for (int iter = 0; iter < 100000; ++iter) {
      const DState s0 = s;
      const double p0 = param;
      double hs;
      if (r_mode)
        hs = step_r.step(s, param, dir, dir * 4.0 * opts.max_param);
      else
        hs = step_t.step(s, param, dir, dir * 4.0 * opts.max_param);
      if (hs == 0.0) break;

      // Quadrature subnodes: rigid chain through the Gauss nodes of each
      // subpanel of the accepted step.
      DState chain = s0;
      double chain_p = p0;
      for (int sp = 0; sp < subpanels; ++sp) {
        const double a = p0 + dir * hs * sp / subpanels;
        const double half = hs / subpanels / 2.0;
        for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
          const double pn = a + dir * half * (1.0 + gl.nodes[k]);
          const double dist = std::abs(pn - chain_p);
          if (dist > 0) {
            // Substepped rigid landings keep the node-state error well below
            // the panel quadrature error.
            if (r_mode)
              step_r.rigid_advance(chain, dist, dir, 3);
            else
              step_t.rigid_advance(chain, dist, dir, 3);
            chain_p = pn;
          }
          out.push_back(make_sample(metric, chain, r_mode, init.x, gl.weights[k] * half));
          PathSample& ps = out.back();
          ps.weight *= ps.dt_dparam;  // quadrature in dt
        }
      }

      renormalize(metric, s, path.max_drift);
      out.push_back(make_sample(metric, s, r_mode, init.x, 0.0));

      const PathSample& last = out.back();
      if (last.x < x_min) {
        path.hit_x_min = true;
        break;
      }
      if (last.x > metric.x0() * (1.0 + 1e-12)) {
        path.truncated_at_x0 = true;
        break;
      }
      if (std::abs(last.t) > opts.max_param || std::abs(param) > 4.0 * opts.max_param) break;
      if (-last.exponent > opts.exponent_cutoff) break;
      if (!r_mode && last.mu_norm < opts.mu_switch) {
        r_mode = true;
      } else if (r_mode && last.mu_norm > 1.5 * opts.mu_switch) {
        r_mode = false;
      }
    }
  };

  std::vector<PathSample> fwd, bwd;
  fwd.push_back(make_sample(metric, base, false, init.x, 0.0));
  run_direction(+1.0, fwd);
  if (opts.both_directions) run_direction(-1.0, bwd);

  path.samples.reserve(fwd.size() + bwd.size());
  for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) path.samples.push_back(*it);
  for (const auto& ps : fwd) path.samples.push_back(ps);
  return path;
}

ExactConePoint exact_cone_path(const ConicMetric& metric, double x0, const LinkState& start,
                               double lambda_slope, double r) {
  if (!metric.is_exact_cone())
    throw ContractViolation("exact_cone_path: metric has a nontrivial warp");
  metric.check_in_collar(x0);
  const double r0 = std::atan2(1.0, lambda_slope);  // arccot in (0, pi)
  if (!(r > -r0) || !(r < -r0 + M_PI))
    throw DomainError("exact_cone_path: r outside (-r0, -r0 + pi)");
  ExactConePoint out;
  out.x = x0 * std::sin(r + r0) / std::sin(r0);
  out.tau = std::cos(r + r0);
  out.mu_norm = std::sin(r + r0);
  out.link = link_flow(metric.link(), start, r);
  return out;
}

namespace {

// x(gamma(t)) for the lambda = 0 geodesic, evaluated by a short rigid chain.
double tangent_x_at(const ConicMetric& metric, const DState& base, double t) {
  if (t == 0.0) return base[kX];
  auto rhs = [&metric](const DState& y, DState& dy) { collar_field<double, 9>(metric, false, y, dy); };
  Rk45Options ro;
  Rk45Stepper<DState, decltype(rhs)> st(rhs, ro);
  DState s = base;
  const int n_steps = 4;
  for (int i = 0; i < n_steps; ++i) st.rigid_step(s, std::abs(t) / n_steps, t > 0 ? 1.0 : -1.0);
  return s[kX];
}

}  // namespace

double expansion_alpha(const ConicMetric& metric, double x, const LinkPoint& y,
                       const LinkTangent& omega_unit) {
  TraceInit init;
  init.x = x;
  init.y = y;
  init.lambda = 0.0;
  init.omega = omega_unit;
  const DState base = initial_state(metric, init);

  const double delta = 1e-3 * x;
  auto alpha_fit = [&](double d) {
    const double xp = tangent_x_at(metric, base, d);
    const double xm = tangent_x_at(metric, base, -d);
    return (xp + xm - 2.0 * x) / (2.0 * x * d * d);
  };
  const double a1 = alpha_fit(delta);
  const double a2 = alpha_fit(delta / 2.0);
  const double alpha = (4.0 * a2 - a1) / 3.0;
  if (!(alpha < 0.0))
    throw FoliationError("expansion_alpha: fitted alpha is nonnegative (" + format_g17(alpha) +
                         ") at x = " + format_g17(x));
  return alpha;
}

FoliationReport foliation_report(const ConicMetric& metric, const std::vector<double>& x_grid,
                                 const std::vector<LinkPoint>& y_samples,
                                 const std::vector<double>& omega_angles) {
  FoliationReport rep;
  rep.C3 = 0.5;
  rep.C4 = 3.0;
  if (x_grid.empty() || y_samples.empty() || omega_angles.empty()) {
    rep.passes = true;
    rep.warning_empty = true;
    return rep;
  }

  struct Cell {
    double alpha = 0.0;
    bool alpha_ok = true;
    double C5 = std::numeric_limits<double>::infinity();
    double Cw = -std::numeric_limits<double>::infinity();
    bool single_max_ok = true;
    double x = 0.0;
  };
  std::vector<Cell> cells(x_grid.size() * y_samples.size() * omega_angles.size());

  const double lam_fracs[] = {0.0, 0.5, -0.5, 1.0, -1.0};
  parallel_for(cells.size(), [&](std::size_t idx) {
    const std::size_t i = idx / (y_samples.size() * omega_angles.size());
    const std::size_t j = (idx / omega_angles.size()) % y_samples.size();
    const std::size_t k = idx % omega_angles.size();
    Cell& cell = cells[idx];
    const double x = x_grid[i];
    cell.x = x;
    const LinkPoint y = y_samples[j];
    const LinkTangent dir = unit_direction(metric, x, y, omega_angles[k]);
    try {
      cell.alpha = expansion_alpha(metric, x, y, dir);
    } catch (const FoliationError&) {
      cell.alpha_ok = false;
      return;
    }
    TraceOptions topt;
    topt.max_param = 6.0;
    topt.max_step = 0.05;
    for (double f : lam_fracs) {
      const double lam = f * rep.C3 * x;
      TraceInit init;
      init.x = x;
      init.y = y;
      init.lambda = lam;
      const double scale = std::sqrt(1.0 - lam * lam);
      init.omega.a = dir.a * scale;
      init.omega.b = dir.b * scale;
      const GeodesicPath path = trace(metric, init, topt);
      int n_max = 0;
      for (std::size_t s = 0; s < path.samples.size(); ++s) {
        const PathSample& ps = path.samples[s];
        if (ps.weight > 0.0) {
          cell.Cw = std::max(cell.Cw, ps.exponent);
          const double t_floor = std::max(rep.C4 * std::abs(lam), 1e-4);
          if (std::abs(ps.t) > t_floor) {
            const double c5 =
                -ps.exponent * std::pow(x, 2.0 * metric.p()) / (ps.t * ps.t);
            cell.C5 = std::min(cell.C5, c5);
          }
        }
        if (s > 0 && s + 1 < path.samples.size()) {
          const double tol = 1e-12 * x;
          if (path.samples[s].x > path.samples[s - 1].x + tol &&
              path.samples[s].x > path.samples[s + 1].x + tol)
            ++n_max;
        }
      }
      if (n_max > 1) cell.single_max_ok = false;
    }
  });

  rep.passes = true;
  rep.c_concavity = std::numeric_limits<double>::infinity();
  rep.C5 = std::numeric_limits<double>::infinity();
  rep.Cw = -std::numeric_limits<double>::infinity();
  for (const Cell& cell : cells) {
    rep.alphas.push_back(cell.alpha);
    if (!cell.alpha_ok) {
      rep.passes = false;
      rep.failing_x.push_back(cell.x);
      continue;
    }
    rep.c_concavity = std::min(rep.c_concavity, -2.0 * cell.alpha);
    rep.C5 = std::min(rep.C5, cell.C5);
    rep.Cw = std::max(rep.Cw, cell.Cw);
    if (!cell.single_max_ok) {
      rep.passes = false;
      rep.failing_x.push_back(cell.x);
    }
    rep.single_maximum_ok = rep.single_maximum_ok && cell.single_max_ok;
  }
  if (!(rep.c_concavity > 0.0) || !(rep.C5 > 0.0)) rep.passes = false;
  return rep;
}

namespace {

using D2 = Dual<2>;
using VState = SVec<D2, 10>;

struct JacobianSample {
  double r = 0.0;
  double x_ratio = 0.0;
  double det = 0.0;
  double sigma_min = 0.0;
};

// Integrates the flow with dual-number initial data (r0, psi) and collects
// the normalized Jacobian of (x/x_base, gamma^(2)) in (r, r0, psi).
void variational_run(const ConicMetric& metric, double x, const LinkPoint& y, double r0_val,
                     double psi_base, double dir, double r_span,
                     std::vector<JacobianSample>& out) {
  const LinkMetric& L = metric.link();
  const int link_dim = L.dim();
  const double c = metric.warp(x);

  const Vec3 u0 = L.embed(y);
  double cp = 1.0;
  if (L.kind() == LinkKind::PerturbedSphere) cp = L.conformal(u0);
  // Orthonormal (for the ambient metric) covector pair spanning T*_y Y.
  Vec3 m1;
  if (L.kind() == LinkKind::Circle) {
    m1 = {-u0[1], u0[0], 0.0};
  } else {
    const double st = std::sin(y.a), ct = std::cos(y.a);
    const double cf = std::cos(y.b), sf = std::sin(y.b);
    const Vec3 e_theta{ct * cf, ct * sf, -st};
    const Vec3 e_phi{-sf, cf, 0.0};
    m1 = std::cos(psi_base) * e_theta + std::sin(psi_base) * e_phi;
  }
  const Vec3 m2 = cross(u0, m1);

  // |mu| of the unit-level covector is sin(r0) in h(x,.)-dual norm; ambient
  // magnitude carries the factor R sqrt(c c_p).
  const double amb = L.radius() * std::sqrt(c * cp);

  const D2 r0 = D2::seed(r0_val, 0);
  const D2 psi = D2::seed(0.0, 1);

  VState s;
  s[kX] = x;
  s[kTau] = cos(r0);
  const D2 smu = sin(r0);
  for (int i = 0; i < 3; ++i) {
    s[kU + i] = u0[i];
    s[kM + i] = smu * amb * (cos(psi) * m1[i] + sin(psi) * m2[i]);
  }
  s[kT] = 0.0;
  s[kR] = 0.0;

  auto rhs = [&metric](const VState& yv, VState& dy) { collar_field<D2, 10>(metric, false, yv, dy); };
  Rk45Options ro;
  ro.rel_tol = 1e-10;
  ro.abs_tol = 1e-12;
  ro.max_step = 0.05;
  Rk45Stepper<VState, decltype(rhs)> stepper(rhs, ro);

  // Smooth frame orthogonal to u for the gamma^(2) rows.
  Vec3 e1 = (1.0 / norm(m1)) * m1;
  double t = 0.0;
  const double x_min = metric.x0() * 1e-3;
  for (int iter = 0; iter < 20000; ++iter) {
    stepper.step(s, t, dir, dir * 50.0);
    const double xv = value(s[kX]);
    const double rv = value(s[kR]);
    if (xv < x_min || xv > metric.x0() * (1.0 + 1e-9)) break;
    if (std::abs(rv) > r_span) break;

    Vec3 uv{value(s[kU]), value(s[kU + 1]), value(s[kU + 2])};
    uv = (1.0 / norm(uv)) * uv;
    e1 = e1 - dot(e1, uv) * uv;
    e1 = (1.0 / norm(e1)) * e1;
    const Vec3 e2 = cross(uv, e1);

    if (std::abs(rv) < 0.05) continue;

    // d/dr column from the field, d/d(r0, psi) columns from dual parts.
    VState ds;
    collar_field<D2, 10>(metric, false, s, ds);
    const double mu = value(ds[kR]);  // dr/dt = |mu|
    if (mu < 1e-10) break;

    const int nrows = 1 + link_dim;
    Eigen::MatrixXd M(nrows, nrows);
    // Row 0: x / x_base.
    M(0, 0) = value(ds[kX]) / (x * mu);
    M(0, 1) = s[kX].d[0] / (x * rv);
    if (link_dim == 2) M(0, 2) = s[kX].d[1] / (x * rv);
    // Rows 1..: projections of u on the transported frame.
    const Vec3 frames[2] = {e1, e2};
    for (int rrow = 0; rrow < link_dim; ++rrow) {
      const Vec3& e = frames[rrow];
      double du_dt = 0, du_d0 = 0, du_d1 = 0;
      for (int i = 0; i < 3; ++i) {
        du_dt += e[i] * value(ds[kU + i]);
        du_d0 += e[i] * s[kU + i].d[0];
        du_d1 += e[i] * s[kU + i].d[1];
      }
      M(1 + rrow, 0) = du_dt / mu;
      M(1 + rrow, 1) = du_d0 / rv;
      if (link_dim == 2) M(1 + rrow, 2) = du_d1 / rv;
    }

    JacobianSample js;
    js.r = rv;
    js.x_ratio = xv / x;
    js.det = M.determinant();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    js.sigma_min = svd.singularValues().tail(1)(0);
    out.push_back(js);
  }
}

}  // namespace

bool conjugate_check(const ConicMetric& metric, double x, const LinkPoint& y, double r_lo,
                     double r_hi) {
  metric.check_in_collar(x);
  if (r_lo == 0.0 && r_hi == 0.0) return true;  // Jacobian limit at t = 0 is nondegenerate
  const double r_span = std::max(std::abs(r_lo), std::abs(r_hi));

  const int link_dim = metric.link().dim();
  std::vector<double> r0_values{M_PI / 2, M_PI / 3, 2 * M_PI / 3};
  std::vector<double> psi_values;
  if (link_dim == 2)
    psi_values = {0.0, M_PI / 2};
  else
    psi_values = {0.0};

  for (double r0v : r0_values) {
    for (double psiv : psi_values) {
      for (double dir : {+1.0, -1.0}) {
        std::vector<JacobianSample> js;
        variational_run(metric, x, y, r0v, psiv, dir, r_span, js);
        double prev_det = 0.0;
        bool have_prev = false;
        for (const auto& s : js) {
          if (s.r < r_lo - 1e-9 || s.r > r_hi + 1e-9) continue;
          const bool eligible = s.x_ratio >= 0.05;
          if (!eligible) continue;
          if (s.sigma_min < 1e-6) return false;
          if (have_prev && prev_det * s.det < 0.0) return false;
          prev_det = s.det;
          have_prev = true;
        }
      }
    }
  }
  return true;
}

FoliationReport certify(const ConicMetric& metric, int nx, int ny, int n_omega) {
  std::vector<double> xs;
  for (int i = 0; i < nx; ++i)
    xs.push_back(metric.x0() * std::exp(-std::log(8.0) * i / std::max(1, nx - 1)));
  std::vector<LinkPoint> ys;
  if (metric.link().dim() == 1) {
    for (int j = 0; j < ny; ++j) ys.push_back({2.0 * M_PI * j / ny, 0.0});
  } else {
    for (int j = 0; j < ny; ++j)
      ys.push_back({M_PI * (j + 0.5) / ny, 2.0 * M_PI * j / std::max(1, ny)});
  }
  std::vector<double> omegas;
  if (metric.link().dim() == 1) {
    omegas = {1.0, -1.0};
  } else {
    for (int k = 0; k < n_omega; ++k) omegas.push_back(2.0 * M_PI * k / n_omega);
  }
  FoliationReport rep = foliation_report(metric, xs, ys, omegas);
  if (rep.passes)
    metric.record_certification(rep.c_concavity, rep.C3, rep.C4, rep.C5, rep.Cw);
  return rep;
}

}  // namespace conicxray
