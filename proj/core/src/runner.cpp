#include "conicxray/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

namespace fs = std::filesystem;

struct Manifest {
  std::map<std::string, std::string> kv;
  void set(const std::string& k, const std::string& v) { kv[k] = v; }
  void set(const std::string& k, double v) { kv[k] = format_g17(v); }
  void write(const fs::path& dir) const {
    std::ofstream os(dir / "manifest.txt");
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  }
};

Manifest base_manifest(const std::string& sub, const ExperimentConfig& cfg) {
  Manifest m;
  m.set("version", std::string(kVersion));
  m.set("subcommand", sub);
  m.set("config_hash", std::to_string(cfg.config_hash));
  m.set("seed", std::to_string(cfg.seed));
  m.set("module.link_geometry", "1");
  m.set("module.conic_manifold", "1");
  m.set("module.geodesic_flow", "1");
  m.set("module.xray_transform", "1");
  m.set("module.normal_operator", "1");
  m.set("module.onecusp_calculus", "1");
  m.set("module.inversion", "1");
  m.set("module.cli_runner", "1");
  return m;
}

void record_constants(Manifest& m, const FoliationReport& rep) {
  m.set("c_concavity", rep.c_concavity);
  m.set("C3", rep.C3);
  m.set("C4", rep.C4);
  m.set("C5", rep.C5);
  m.set("Cw", rep.Cw);
}

// e^{-C/x^2} (1 + 0.3 * first link harmonic): the reference test function.
std::function<double(double, const LinkPoint&)> truth_function(const ExperimentConfig& cfg) {
  const double C = cfg.c_true;
  return [C](double x, const LinkPoint& y) {
    return std::exp(-C / (x * x)) * (1.0 + 0.3 * std::cos(y.a));
  };
}

int cmd_trace(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const auto grid = cfg.make_grid(metric);
  const double x = grid->x_of(grid->nx() / 2);
  const LinkPoint y = grid->y_of(0);
  const double slopes[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  std::ofstream os(out / "trace.csv");
  os << "path_id,t,x,y_a,y_b,tau,mu_norm,exponent\r\n";
  int id = 0;
  double max_drift = 0.0;
  std::size_t total = 0;
  for (double s : slopes) {
    const LinkTangent dir = unit_direction(metric, x, y, 0.0);
    const TraceInit init = init_from_slope(metric, x, y, s, dir);
    TraceOptions topt;
    topt.max_param = 12.0;
    const GeodesicPath path = trace(metric, init, topt);
    max_drift = std::max(max_drift, path.max_drift);
    for (const auto& ps : path.samples) {
      if (ps.weight == 0.0 && std::abs(ps.t) > 0) continue;
      const LinkPoint yy = metric.link().coords(ps.u);
      os << id << ',' << format_g17(ps.t) << ',' << format_g17(ps.x) << ',' << format_g17(yy.a)
         << ',' << format_g17(yy.b) << ',' << format_g17(ps.tau) << ',' << format_g17(ps.mu_norm)
         << ',' << format_g17(ps.exponent) << "\r\n";
      ++total;
    }
    ++id;
  }
  man.set("max_drift", max_drift);
  std::cout << "trace: paths=" << id << " samples=" << total << " max_drift=" << max_drift
            << "\n";
  return 0;
}

int cmd_certify(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const FoliationReport rep = certify(metric);
  record_constants(man, rep);
  std::ofstream os(out / "certify.txt");
  os << "passes=" << (rep.passes ? 1 : 0) << "\n";
  os << "warning_empty=" << (rep.warning_empty ? 1 : 0) << "\n";
  os << "c_concavity=" << format_g17(rep.c_concavity) << "\n";
  os << "C3=" << format_g17(rep.C3) << "\nC4=" << format_g17(rep.C4)
     << "\nC5=" << format_g17(rep.C5) << "\nCw=" << format_g17(rep.Cw) << "\n";
  os << "single_maximum_ok=" << (rep.single_maximum_ok ? 1 : 0) << "\n";

  // Link conjugate-point scan and the collar-level non-degeneracy check.
  const LinkMetric& link = metric.link();
  LinkState state;
  if (link.dim() == 1) {
    state.y = {0.0, 0.0};
    state.mu_hat = {link.radius(), 0.0};
  } else {
    state.y = {M_PI / 2, 0.0};
    const Vec3 u = link.embed(state.y);
    const double len = link.radius() * std::sqrt(link.conformal(u));
    state.mu_hat = {len, 0.0};
  }
  const auto conj = conjugate_scan(link, state, M_PI / 2);
  os << "link_conjugate=" << (conj ? format_g17(*conj) : std::string("none")) << "\n";
  const bool cc = conjugate_check(metric, 0.7 * metric.x0(), state.y, -M_PI / 2 + 0.1,
                                  M_PI / 2 - 0.1);
  os << "conjugate_check_ok=" << (cc ? 1 : 0) << "\n";

  std::ofstream ac(out / "alphas.csv");
  ac << "index,alpha\r\n";
  for (std::size_t i = 0; i < rep.alphas.size(); ++i)
    ac << i << ',' << format_g17(rep.alphas[i]) << "\r\n";

  const bool ok = rep.passes && !conj.has_value() && cc;
  std::cout << "certify: passes=" << (ok ? 1 : 0) << " c_concavity=" << format_g17(rep.c_concavity)
            << " C5=" << format_g17(rep.C5) << " Cw=" << format_g17(rep.Cw) << "\n";
  return ok ? 0 : 2;
}

int cmd_forward(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  if (!certify(metric).passes) return 2;
  const auto grid = cfg.make_grid(metric);
  NormalOperator op(metric, cfg.make_weight(), cfg.make_localizer(), cfg.h_list.front(), grid,
                    cfg.make_recon(cfg.h_list.front()).op);
  const DecayInfo decay{DecayClass::Gaussian, cfg.c_true, 1.0, 0.0, 0.0};
  const std::vector<double> data = forward_family(metric, truth_function(cfg), decay, op.family());
  std::ofstream os(out / "forward.csv");
  os << "base_i,base_j,k_lambda,l_psi,value\r\n";
  const GeodesicFamily& fam = op.family();
  for (int b = 0; b < fam.n_base(); ++b)
    for (std::size_t k = 0; k < fam.lam_hat.size(); ++k)
      for (std::size_t l = 0; l < fam.psi.size(); ++l)
        os << b / grid->ny() << ',' << b % grid->ny() << ',' << k << ',' << l << ','
           << format_g17(data[fam.data_index(b, static_cast<int>(k), static_cast<int>(l))])
           << "\r\n";
  double mx = 0;
  for (double v : data) mx = std::max(mx, std::abs(v));
  man.set("forward_max", mx);
  std::cout << "forward: rays=" << data.size() << " max=" << format_g17(mx) << "\n";
  return 0;
}

int cmd_symbol(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const auto grid = cfg.make_grid(metric);
  const std::vector<double> xi = {0, 0.5, -0.5, 1, -1, 2, -2, 5, -5, 10, -10, 20, -20};
  const std::vector<double> eta = {0, 0.5, 1, 2, 5, 10, 20};
  const std::vector<double> xs = {grid->x_of(grid->nx() / 2)};
  const LinkPoint y = grid->y_of(0);
  const EllipticityScan scan =
      ellipticity_scan(metric, cfg.make_localizer(), xs, y, xi, eta, 8, 0.05);
  write_scan_csv((out / "symbol_scan.csv").string(), scan);
  std::ofstream os(out / "symbol_summary.txt");
  os << "pass=" << (scan.pass ? 1 : 0) << "\n";
  os << "fiber_infinity_supported=" << (scan.fiber_infinity_supported ? 1 : 0) << "\n";
  os << "min_normalized=" << format_g17(scan.min_normalized) << "\n";
  os << "threshold=" << format_g17(scan.threshold) << "\n";
  os << "c_prime=" << format_g17(scan.c_prime) << "\n";
  os << "closed_form_max_rel_err=" << format_g17(scan.max_closed_form_rel_err) << "\n";
  os << "decay_slope=" << format_g17(scan.decay_slope) << "\n";
  man.set("c_prime", scan.c_prime);
  std::cout << "symbol: pass=" << (scan.pass ? 1 : 0)
            << " min_normalized=" << format_g17(scan.min_normalized)
            << " decay_slope=" << format_g17(scan.decay_slope) << "\n";
  return scan.pass ? 0 : 2;
}

int cmd_assemble(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const FoliationReport rep = certify(metric);
  record_constants(man, rep);
  if (!rep.passes) return 2;
  const auto grid = cfg.make_grid(metric);
  const double h = cfg.h_list.front();
  NormalOperator op(metric, cfg.make_weight(), cfg.make_localizer(), h, grid,
                    cfg.make_recon(h).op);
  const Eigen::MatrixXd A = op.assemble();
  save_matrix((out / "normal_operator.bin").string(), A, h, metric.p(),
              cfg.weight == "one_cusp" ? 0 : 1, grid->hash());
  const double smin = sigma_min(diag_rescaled(A));
  man.set("sigma_min_rescaled", smin);
  std::cout << "assemble: N=" << A.rows() << " sigma_min_rescaled=" << format_g17(smin) << "\n";
  return 0;
}

int cmd_invert(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const FoliationReport rep = certify(metric);
  record_constants(man, rep);
  if (!rep.passes) return 2;
  const auto grid = cfg.make_grid(metric);
  const double h = cfg.h_list.front();
  const DecayInfo decay{DecayClass::Gaussian, cfg.c_true, 1.0, 0.0, 0.0};
  const ReconstructionReport rr =
      reconstruct_from_truth(metric, cfg.make_recon(h), grid, truth_function(cfg), decay);
  rr.f_rec->save((out / "f_rec.gfn").string());
  std::ofstream os(out / "residuals.csv");
  os << "iteration,relative_residual\r\n";
  for (std::size_t i = 0; i < rr.residual_history.size(); ++i)
    os << i << ',' << format_g17(rr.residual_history[i]) << "\r\n";
  std::ofstream su(out / "invert_summary.txt");
  su << "rel_l2_error=" << format_g17(rr.rel_l2_error) << "\n";
  su << "weighted_error=" << format_g17(rr.weighted_error) << "\n";
  su << "iterations=" << rr.iterations << "\nconverged=" << (rr.converged ? 1 : 0) << "\n";
  su << "window_lo=" << format_g17(rr.window_lo) << "\nwindow_hi=" << format_g17(rr.window_hi)
     << "\n";
  man.set("rel_l2_error", rr.rel_l2_error);
  const bool ok = rr.rel_l2_error < cfg.threshold;
  std::cout << "invert: rel_l2_error=" << format_g17(rr.rel_l2_error)
            << " iterations=" << rr.iterations << " pass=" << (ok ? 1 : 0) << "\n";
  return ok ? 0 : 2;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, Manifest& man) {
  const ConicMetric metric = cfg.make_metric();
  const FoliationReport rep = certify(metric);
  record_constants(man, rep);
  if (!rep.passes) return 2;
  const auto grid = cfg.make_grid(metric);
  const DecayInfo decay{DecayClass::Gaussian, cfg.c_true, 1.0, 0.0, 0.0};
  std::vector<double> hs = cfg.h_list;
  std::sort(hs.rbegin(), hs.rend());  // descending h
  std::ofstream os(out / "sweep.csv");
  os << "h,rel_l2_error,iterations,converged\r\n";
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double h : hs) {
    const ReconstructionReport rr =
        reconstruct_from_truth(metric, cfg.make_recon(h), grid, truth_function(cfg), decay);
    os << format_g17(h) << ',' << format_g17(rr.rel_l2_error) << ',' << rr.iterations << ','
       << (rr.converged ? 1 : 0) << "\r\n";
    if (rr.rel_l2_error > prev * 1.1) monotone = false;  // 10% slack
    prev = rr.rel_l2_error;
  }
  man.set("sweep_monotone", monotone ? 1.0 : 0.0);
  std::cout << "sweep: monotone=" << (monotone ? 1 : 0) << "\n";
  return monotone ? 0 : 2;
}

}  // namespace

int run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                   const std::string& out_dir) {
  const fs::path out = out_dir.empty() ? fs::path(cfg.out_dir) : fs::path(out_dir);
  fs::create_directories(out);
  Manifest man = base_manifest(name, cfg);
  int code = 0;
  if (name == "trace") code = cmd_trace(cfg, out, man);
  else if (name == "certify") code = cmd_certify(cfg, out, man);
  else if (name == "forward") code = cmd_forward(cfg, out, man);
  else if (name == "symbol") code = cmd_symbol(cfg, out, man);
  else if (name == "assemble") code = cmd_assemble(cfg, out, man);
  else if (name == "invert") code = cmd_invert(cfg, out, man);
  else if (name == "sweep") code = cmd_sweep(cfg, out, man);
  else if (name == "all") {
    for (const char* sub : {"certify", "symbol", "assemble", "invert"}) {
      const int c = run_subcommand(sub, cfg, (out / sub).string());
      if (c != 0) return c;
    }
    man.write(out);
    return 0;
  } else {
    throw ArgumentError("unknown subcommand: " + name);
  }
  man.write(out);
  return code;
}

}  // namespace conicxray
