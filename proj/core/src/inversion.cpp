#include "conicxray/inversion.hpp"

#include <cmath>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

struct SolveResult {
  Eigen::VectorXd x;
  std::vector<double> history;
  bool converged = false;
};

SolveResult cg_normal(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs, double rtol,
                      int max_iters) {
  SolveResult out;
  const double nrhs = rhs.norm();
  out.x = Eigen::VectorXd::Zero(M.cols());
  if (nrhs == 0.0) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd s = M.transpose() * r;
  Eigen::VectorXd p = s;
  double gamma = s.squaredNorm();
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd q = M * p;
    const double qn = q.squaredNorm();
    if (qn == 0.0) break;
    const double alpha = gamma / qn;
    out.x += alpha * p;
    r -= alpha * q;
    const double resid = r.norm() / nrhs;
    out.history.push_back(resid);
    if (resid <= rtol) {
      out.converged = true;
      break;
    }
    const std::size_t n = out.history.size();
    if (n > 50) {
      const double before = out.history[n - 51];
      if ((before - resid) / std::max(before, 1e-300) < 1e-3)
        throw StagnationError(
            "solver stagnation: relative residual " + format_g17(resid) + " after " +
            std::to_string(n) + " iterations (decrease < 1e-3 over the last 50)");
    }
    s = M.transpose() * r;
    const double gamma_new = s.squaredNorm();
    p = s + (gamma_new / gamma) * p;
    gamma = gamma_new;
  }
  return out;
}

SolveResult landweber(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs, double rtol,
                      int max_iters) {
  SolveResult out;
  const double nrhs = rhs.norm();
  out.x = Eigen::VectorXd::Zero(M.cols());
  if (nrhs == 0.0) {
    out.converged = true;
    return out;
  }
  // Spectral norm by power iteration with a fixed start.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.cols());
  for (int i = 0; i < M.cols(); ++i) v[i] += 0.1 * std::sin(i + 1.0);
  v.normalize();
  double s2 = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = M.transpose() * (M * v);
    const double n = w.norm();
    if (n == 0.0) break;
    v = w / n;
    s2 = n;
  }
  const double step = 0.9 / std::max(s2, 1e-300);
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd r = rhs - M * out.x;
    const double resid = r.norm() / nrhs;
    out.history.push_back(resid);
    if (resid <= rtol) {
      out.converged = true;
      break;
    }
    out.x += step * (M.transpose() * r);
  }
  return out;
}

// Conjugated-gauge nodal scale: e^{(Phi(x) - Phi(x_ref))/h} with the top node
// as the reference, so window factors stay representable.
Eigen::VectorXd w_scale_log(const WeightSpec& weight, const GridSpec& g, double h) {
  Eigen::VectorXd lg(g.nx());
  for (int i = 0; i < g.nx(); ++i) lg[i] = weight.exponent_delta(g.x_top(), g.x_of(i)) / h;
  return lg;  // <= 0, decreasing toward the boundary
}

}  // namespace

GridFunction make_rhs(const ConicMetric& metric, const ReconstructionConfig& cfg,
                      std::shared_ptr<const GridSpec> grid, const std::vector<double>& data) {
  NormalOperator op(metric, cfg.weight, cfg.loc, cfg.h, grid, cfg.op);
  const Eigen::VectorXd bp = op.backproject(data);
  GridFunction rhs(grid);
  const GridSpec& g = *grid;
  for (int i = 0; i < g.nx(); ++i) {
    // e^{-Phi(x_i)/h}; representability is the caller's configuration choice.
    const double w = std::exp(-cfg.weight.phi(g.x_of(i)) / cfg.h);
    for (int j = 0; j < g.ny(); ++j) rhs.at(i, j) = w * bp[g.index(i, j)];
  }
  return rhs;
}

GridFunction make_rhs(const ConicMetric& metric, const ReconstructionConfig& cfg,
                      std::shared_ptr<const GridSpec> grid, const GridFunction& f_true) {
  NormalOperator op(metric, cfg.weight, cfg.loc, cfg.h, grid, cfg.op);
  return make_rhs(metric, cfg, grid, forward_family(metric, f_true, op.family()));
}

ReconstructionReport reconstruct(const ConicMetric& metric, const ReconstructionConfig& cfg,
                                 std::shared_ptr<const GridSpec> grid,
                                 const std::vector<double>& data, const GridFunction* f_true) {
  if (!metric.certified())
    throw CertificationError("reconstruct: metric is not certified; run certify first");
  NormalOperator op(metric, cfg.weight, cfg.loc, cfg.h, grid, cfg.op);
  const GridSpec& g = *grid;
  const bool conj = cfg.gauge == NormalOperator::InterpGauge::Conjugated;

  // Modal system in the configured gauge. Both forms are exactly similar to
  // A w = rhs; the gauge decides which variable the grid interpolates.
  const Eigen::MatrixXd K = op.assemble_modal(cfg.gauge);
  Eigen::VectorXd bp = op.backproject(data);
  if (conj) {
    // Conjugated variable: rhs_w = e^{-Phi/h} backprojection, normalized at
    // the top node so everything stays representable.
    const Eigen::VectorXd lg = w_scale_log(cfg.weight, g, cfg.h);
    for (int i = 0; i < g.nx(); ++i) {
      const double f = std::exp(-lg[i]);
      if (!std::isfinite(f))
        throw ArgumentError("reconstruct: conjugated gauge overflows on this grid; raise x_min");
      for (int j = 0; j < g.ny(); ++j) bp[g.index(i, j)] *= f;
    }
  }
  const Eigen::VectorXd rhs = g.project_modal(bp);

  SolveResult sol;
  if (cfg.solver == SolverKind::ConjugateGradientNormal)
    sol = cg_normal(K, rhs, cfg.rtol, cfg.max_iters);
  else
    sol = landweber(K, rhs, cfg.rtol, cfg.max_iters);

  ReconstructionReport rep;
  rep.h = cfg.h;
  rep.residual_history = sol.history;
  rep.iterations = static_cast<int>(sol.history.size());
  rep.converged = sol.converged;

  // Nodal reconstruction; in the conjugated gauge the solution is the scaled
  // w and f_rec = e^{Phi/h} w is evaluated at exponent level per node row.
  Eigen::VectorXd nodal = g.embed_modal(sol.x);
  if (conj) {
    const Eigen::VectorXd lg = w_scale_log(cfg.weight, g, cfg.h);
    for (int i = 0; i < g.nx(); ++i)
      for (int j = 0; j < g.ny(); ++j) nodal[g.index(i, j)] *= std::exp(lg[i]);
  }
  auto f_rec = std::make_shared<GridFunction>(grid);
  f_rec->set_flat(nodal);
  rep.f_rec = f_rec;

  rep.window_lo = cfg.x_report_lo > 0 ? cfg.x_report_lo : 2.0 * g.x_min();
  // Exclude one interpolation stencil at the top: the boundary rows absorb
  // the collar-truncation fringe just as the smallest rows absorb the
  // conjugation fringe.
  const double du = std::log(g.x_top() / g.x_min()) / (g.nx() - 1);
  rep.window_hi = cfg.x_report_hi > 0 ? cfg.x_report_hi : g.x_top() * std::exp(-3.0 * du);
  if (f_true) {
    bool nonempty = false;
    for (int i = 0; i < g.nx(); ++i)
      if (g.x_of(i) >= rep.window_lo && g.x_of(i) <= rep.window_hi) nonempty = true;
    if (!nonempty)
      throw ArgumentError("reconstruct: empty reporting window [" + format_g17(rep.window_lo) +
                          ", " + format_g17(rep.window_hi) + "]; widen the grid");
    // Plain f-space metric: rows where steep classes underflow contribute
    // exactly their (negligible) weight.
    rep.rel_l2_error = relative_l2_error(*f_rec, *f_true, rep.window_lo, rep.window_hi);
    // Conjugated-variable metric, normalized at the top node so the factors
    // e^{(Phi(top) - Phi(x))/h} >= 1 stay representable on the window.
    const Eigen::VectorXd lg = w_scale_log(cfg.weight, g, cfg.h);
    double wnum = 0.0, wden = 0.0;
    for (int i = 0; i < g.nx(); ++i) {
      const double x = g.x_of(i);
      if (x < rep.window_lo || x > rep.window_hi) continue;
      const double wscale = std::exp(std::min(-lg[i], 300.0));
      for (int j = 0; j < g.ny(); ++j) {
        const double m = g.measure_weight(i, j);
        const double wd = (f_rec->at(i, j) - f_true->at(i, j)) * wscale;
        const double wt = f_true->at(i, j) * wscale;
        wnum += m * wd * wd;
        wden += m * wt * wt;
      }
    }
    rep.weighted_error = wden > 0 ? std::sqrt(wnum / wden) : std::sqrt(wnum);
  }
  return rep;
}

ReconstructionReport reconstruct_from_truth(
    const ConicMetric& metric, const ReconstructionConfig& cfg,
    std::shared_ptr<const GridSpec> grid,
    const std::function<double(double, const LinkPoint&)>& truth, const DecayInfo& decay) {
  NormalOperator op(metric, cfg.weight, cfg.loc, cfg.h, grid, cfg.op);
  const std::vector<double> data = forward_family(metric, truth, decay, op.family());
  const GridFunction f_true = GridFunction::from_function(grid, truth, decay);
  return reconstruct(metric, cfg, grid, data, &f_true);
}

double RandomClassFn::operator()(double x, const LinkPoint& y) const {
  std::vector<double> modes(basis->n_modes());
  basis->eval_modes(y, modes.data());
  double poly = 1.0;
  for (std::size_t l = 1; l < coeffs.size(); ++l) poly += coeffs[l] * modes[l];
  // Radial modulation in log x; exercises the radial frequencies where a bad
  // localizer loses ellipticity.
  double radial = 1.0;
  const double u = std::log(x);
  for (std::size_t k = 0; k < radial_coeffs.size(); ++k)
    radial += radial_coeffs[k] * std::cos((k + 1.0) * radial_freq * u + radial_phase[k]);
  return std::exp(-C / (x * x)) * poly * radial;
}

RandomClassFn random_gaussian_class(const LinkBasis& basis, double C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomClassFn f;
  f.C = C;
  f.basis = &basis;
  auto uni = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; };
  const int n_modes = std::min(basis.n_modes(), 7);
  f.coeffs.assign(n_modes, 0.0);
  // Uniform coefficients keep the draw bit-reproducible across platforms.
  for (int l = 1; l < n_modes; ++l) f.coeffs[l] = uni() * 0.6 / n_modes;
  f.radial_freq = 3.0 + 2.0 * (uni() + 0.5);
  f.radial_coeffs.assign(3, 0.0);
  f.radial_phase.assign(3, 0.0);
  for (int k = 0; k < 3; ++k) {
    f.radial_coeffs[k] = uni() * 0.5 / (k + 1.0);
    f.radial_phase[k] = 2.0 * M_PI * (uni() + 0.5);
  }
  return f;
}

ProbeReport injectivity_probe(const ConicMetric& metric, const ReconstructionConfig& cfg,
                              std::shared_ptr<const GridSpec> grid, int n_trials, double C,
                              double threshold) {
  ProbeReport rep;
  rep.threshold = threshold;
  // The conjugation-adapted class: w = e^{-Phi/h} f stays bounded for
  // C >= 1/(2h), and C = 1/(2h) is the grid-resolvable choice.
  rep.C = C > 0.0 ? C : 1.0 / (2.0 * cfg.h);
  if (rep.C < 1.0 / (2.0 * cfg.h) - 1e-12)
    throw ArgumentError("injectivity_probe: need C >= 1/(2h) for bounded w");
  ReconstructionConfig pc = cfg;
  pc.gauge = NormalOperator::InterpGauge::Conjugated;

  NormalOperator op(metric, pc.weight, pc.loc, pc.h, grid, pc.op);
  rep.sigma_min_rescaled = sigma_min(diag_rescaled(op.assemble_modal(
      NormalOperator::InterpGauge::Conjugated)));

  const DecayInfo decay{DecayClass::Gaussian, rep.C, 1.0, 0.0, 0.0};
  bool all_ok = true;
  for (int trial = 0; trial < n_trials; ++trial) {
    const RandomClassFn f = random_gaussian_class(grid->basis(), rep.C, pc.seed + trial);
    ReconstructionReport r;
    try {
      r = reconstruct_from_truth(metric, pc, grid, f, decay);
    } catch (const StagnationError&) {
      rep.trial_errors.push_back(std::numeric_limits<double>::infinity());
      all_ok = false;
      continue;
    }
    rep.trial_errors.push_back(r.rel_l2_error);
    if (!(r.rel_l2_error < threshold)) all_ok = false;
  }
  rep.pass = (n_trials == 0) || (all_ok && rep.sigma_min_rescaled > rep.c0);
  return rep;
}

}  // namespace conicxray
