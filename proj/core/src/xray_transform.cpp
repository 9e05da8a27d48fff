#include "conicxray/xray_transform.hpp"

#include <cmath>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

// Smallest x at which the decay-class bound still contributes relative to the
// peak of the traced path; samples below are skipped.
double decay_cutoff_x(const DecayInfo& d, double x_peak) {
  if (d.kind != DecayClass::Gaussian) return 0.0;
  // exp(-C/(p x^{2p})) / exp(-C/(p x_peak^{2p})) < 1e-16
  const double log_drop = 16.0 * std::log(10.0);
  const double target = d.C / d.p * std::pow(x_peak, -2.0 * d.p) + log_drop * 1.0;
  return std::pow(d.C / (d.p * target), 1.0 / (2.0 * d.p));
}

}  // namespace

ForwardInfo forward_with_info(const GridFunction& f, const GeodesicPath& path) {
  ForwardInfo info;
  if (path.samples.empty()) return info;
  double x_peak = 0.0;
  for (const auto& s : path.samples) x_peak = std::max(x_peak, s.x);
  const double x_cut = decay_cutoff_x(f.decay(), x_peak);

  double acc = 0.0;
  double tail = 0.0;
  const LinkMetric& link = f.spec().link();
  for (const auto& s : path.samples) {
    if (s.weight == 0.0) continue;
    if (s.x < x_cut) continue;
    if (s.x > f.spec().x0() * (1.0 + 1e-12)) continue;
    const LinkPoint y = link.coords(s.u);
    const double v = f.eval(s.x, y) * s.weight / s.x;
    acc += v;
    if (f.decay().kind == DecayClass::None && s.x < f.spec().x_min()) tail = std::abs(v);
  }
  info.value = acc;
  info.truncation_estimate = tail;
  return info;
}

double forward(const GridFunction& f, const GeodesicPath& path) {
  return forward_with_info(f, path).value;
}

TraceInit family_init(const ConicMetric& metric, const GeodesicFamily& fam, int base, int k_lam,
                      int l_psi) {
  const GridSpec& g = *fam.grid;
  const int i = base / g.ny();
  const int j = base % g.ny();
  const double x = g.x_of(i);
  const LinkPoint y = g.y_of(j);
  const double psi = fam.psi[l_psi];
  const double lam = fam.lambda_scale(x, y, psi) * fam.lam_hat[k_lam];
  if (!(std::abs(lam) < 1.0))
    throw ContractViolation("family_init: |lambda| >= 1; localizer scale too large for this grid");
  TraceInit init;
  init.x = x;
  init.y = y;
  init.lambda = lam;
  const LinkTangent dir = unit_direction(metric, x, y, psi);
  const double s = std::sqrt(1.0 - lam * lam);
  init.omega.a = dir.a * s;
  init.omega.b = dir.b * s;
  return init;
}

namespace {

TraceOptions family_data_options(const GeodesicFamily& fam, const DecayInfo& decay) {
  TraceOptions topt = fam.trace_opts;
  topt.exponent_cutoff = std::numeric_limits<double>::infinity();
  if (decay.kind == DecayClass::Gaussian) {
    // Paths need not descend past the point where the decay bound is 1e-16
    // of its value at the highest reachable level.
    const double xm = fam.grid->x_top() * 1.3;
    const double drop = 16.0 * std::log(10.0);
    const double target = decay.C / decay.p * std::pow(xm, -2.0 * decay.p) + drop;
    const double x_cut = std::pow(decay.C / (decay.p * target), 1.0 / (2.0 * decay.p));
    topt.x_min_factor = std::max(topt.x_min_factor, 0.8 * x_cut / fam.grid->x0());
  }
  return topt;
}

}  // namespace

std::vector<double> forward_family(const ConicMetric& metric, const GridFunction& f,
                                   const GeodesicFamily& fam) {
  // The family fixes the rays; f may live on any grid over the same collar.
  if (f.spec().link().dim() != fam.grid->link().dim() ||
      std::abs(f.spec().x0() - fam.grid->x0()) > 1e-12)
    throw ContractViolation("forward_family: function collar does not match the family");
  const int nb = fam.n_base();
  const int nl = static_cast<int>(fam.lam_hat.size());
  const int np = static_cast<int>(fam.psi.size());
  std::vector<double> data(static_cast<std::size_t>(nb) * nl * np, 0.0);
  const TraceOptions base_topt = family_data_options(fam, f.decay());
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t base) {
    TraceOptions topt = base_topt;
    if (f.decay().kind == DecayClass::Gaussian)
      topt.max_step = std::min(topt.max_step,
                               0.3 * fam.grid->x_of(static_cast<int>(base) / fam.grid->ny()) /
                                   std::sqrt(std::max(f.decay().C, 1.0)));
    for (int k = 0; k < nl; ++k) {
      for (int l = 0; l < np; ++l) {
        const TraceInit init = family_init(metric, fam, static_cast<int>(base), k, l);
        const GeodesicPath path = trace(metric, init, topt);
        data[fam.data_index(static_cast<int>(base), k, l)] = forward(f, path);
      }
    }
  });
  return data;
}

std::vector<double> forward_family(const ConicMetric& metric,
                                   const std::function<double(double, const LinkPoint&)>& f,
                                   const DecayInfo& decay, const GeodesicFamily& fam) {
  const int nb = fam.n_base();
  const int nl = static_cast<int>(fam.lam_hat.size());
  const int np = static_cast<int>(fam.psi.size());
  std::vector<double> data(static_cast<std::size_t>(nb) * nl * np, 0.0);
  const TraceOptions base_topt = family_data_options(fam, decay);
  const LinkMetric& link = metric.link();
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t base) {
    TraceOptions topt = base_topt;
    // Panels must resolve the integrand width x / sqrt(C) near the tangency.
    if (decay.kind == DecayClass::Gaussian)
      topt.max_step = std::min(topt.max_step,
                               0.3 * fam.grid->x_of(static_cast<int>(base) / fam.grid->ny()) /
                                   std::sqrt(std::max(decay.C, 1.0)));
    for (int k = 0; k < nl; ++k) {
      for (int l = 0; l < np; ++l) {
        const TraceInit init = family_init(metric, fam, static_cast<int>(base), k, l);
        const GeodesicPath path = trace(metric, init, topt);
        double acc = 0.0;
        for (const auto& s : path.samples)
          if (s.weight != 0.0) acc += s.weight * f(s.x, link.coords(s.u)) / s.x;
        data[fam.data_index(static_cast<int>(base), k, l)] = acc;
      }
    }
  });
  return data;
}

}  // namespace conicxray
