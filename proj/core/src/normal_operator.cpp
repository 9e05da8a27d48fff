#include "conicxray/normal_operator.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstring>
#include <fstream>

#include "conicxray/errors.hpp"

namespace conicxray {

Localizer::Localizer(double S, double alpha0, Kind kind) : S_(S), alpha0_(alpha0), kind_(kind) {
  if (!(S > 0)) throw ArgumentError("Localizer: S must be positive");
  if (!(alpha0 < 0)) throw ArgumentError("Localizer: alpha0 must be negative");
}

double Localizer::chi(double s) const {
  const double base = std::exp(s * s / (2.0 * alpha0_)) * bump(s / S_);
  if (kind_ == Kind::Gaussian) return base;
  // Vanishing center: quartic zero at s = 0 (peak rescaled to ~1), so the
  // fiber-infinity ellipticity loss is visible well inside |xi| <= 20.
  return 0.25 * M_E * M_E * s * s * s * s * base;
}

bool Localizer::sanity_sampled() const {
  for (int i = 0; i <= 400; ++i) {
    const double s = -1.5 * S_ + 3.0 * S_ * i / 400.0;
    const double v = chi(s);
    if (v < 0.0) return false;
    if (std::abs(v - chi(-s)) > 1e-14) return false;
    if (std::abs(s) >= S_ && v != 0.0) return false;
  }
  if (kind_ == Kind::Gaussian && std::abs(chi(0.0) - 1.0) > 1e-14) return false;
  return true;
}

WeightSpec WeightSpec::one_cusp(double p) {
  if (!(p > 0)) throw ArgumentError("WeightSpec: p must be positive");
  WeightSpec w;
  w.kind_ = Kind::OneCusp;
  w.p_ = p;
  return w;
}

WeightSpec WeightSpec::combined(double xbar0) {
  if (!(xbar0 > 0)) throw ArgumentError("WeightSpec: xbar0 must be positive");
  WeightSpec w;
  w.kind_ = Kind::Combined;
  w.p_ = 1.0;
  w.xbar0_ = xbar0;
  w.build_join();
  return w;
}

namespace {
double hermite(double xa, double xb, double fa, double fb, double da, double db, double x) {
  const double t = (x - xa) / (xb - xa);
  const double h = xb - xa;
  const double t2 = t * t, t3 = t2 * t;
  return fa * (2 * t3 - 3 * t2 + 1) + fb * (-2 * t3 + 3 * t2) + da * h * (t3 - 2 * t2 + t) +
         db * h * (t3 - t2);
}
}  // namespace

double WeightSpec::logfp(double x) const {
  if (x <= join_a_) return -3.0 * std::log(x);
  if (x >= join_b_) return -2.0 * std::log(xbar0_ - x);
  const double la = -3.0 * std::log(join_a_);
  const double lb = -2.0 * std::log(xbar0_ - join_b_);
  const double da = -3.0 / join_a_;
  const double db = 2.0 / (xbar0_ - join_b_);
  const double q = (x - join_a_) * (join_b_ - x);
  const double qn = q * q / std::pow((join_b_ - join_a_) / 2.0, 4);
  return hermite(join_a_, join_b_, la, lb, da, db, x) + kappa_ * qn;
}

void WeightSpec::build_join() {
  join_a_ = 0.3 * xbar0_;
  join_b_ = 0.7 * xbar0_;
  const double target = 1.0 / (xbar0_ - join_b_) + 1.0 / (2.0 * join_a_ * join_a_);
  const GaussRule gl = gauss_legendre(5);
  auto join_integral = [&](double kappa) {
    kappa_ = kappa;
    double acc = 0.0;
    const int panels = 64;
    for (int p = 0; p < panels; ++p) {
      const double a = join_a_ + (join_b_ - join_a_) * p / panels;
      const double b = join_a_ + (join_b_ - join_a_) * (p + 1) / panels;
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        const double x = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k];
        acc += 0.5 * (b - a) * gl.weights[k] * std::exp(logfp(x));
      }
    }
    return acc;
  };
  double lo = -60.0, hi = 60.0;
  if (join_integral(lo) > target || join_integral(hi) < target)
    throw Error("WeightSpec::combined: join calibration bracket failed");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (join_integral(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  kappa_ = 0.5 * (lo + hi);

  // Cumulative table of F over the join for phi evaluations.
  const int n_tab = 512;
  join_x_.resize(n_tab + 1);
  join_F_.resize(n_tab + 1);
  double acc = -1.0 / (2.0 * join_a_ * join_a_);
  join_x_[0] = join_a_;
  join_F_[0] = acc;
  for (int i = 0; i < n_tab; ++i) {
    const double a = join_a_ + (join_b_ - join_a_) * i / n_tab;
    const double b = join_a_ + (join_b_ - join_a_) * (i + 1) / n_tab;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k];
      acc += 0.5 * (b - a) * gl.weights[k] * std::exp(logfp(x));
    }
    join_x_[i + 1] = b;
    join_F_[i + 1] = acc;
  }
}

double WeightSpec::phi(double x) const {
  if (kind_ == Kind::OneCusp) return -1.0 / (2.0 * p_ * std::pow(x, 2.0 * p_));
  if (!(x > 0) || !(x < xbar0_)) throw DomainError("WeightSpec::phi: x outside (0, xbar0)");
  if (x <= join_a_) return -1.0 / (2.0 * x * x);
  if (x >= join_b_) return 1.0 / (xbar0_ - x);
  // Table lookup plus a short Gauss panel for the remainder.
  const int n_tab = static_cast<int>(join_x_.size()) - 1;
  const double s = (x - join_a_) / (join_b_ - join_a_) * n_tab;
  const int i = std::min(static_cast<int>(s), n_tab - 1);
  double acc = join_F_[i];
  static const GaussRule gl = gauss_legendre(5);
  const double a = join_x_[i];
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double t = 0.5 * (a + x) + 0.5 * (x - a) * gl.nodes[k];
    acc += 0.5 * (x - a) * gl.weights[k] * std::exp(logfp(t));
  }
  return acc;
}

double WeightSpec::phi_prime(double x) const {
  if (kind_ == Kind::OneCusp) return std::pow(x, -2.0 * p_ - 1.0);
  if (!(x > 0) || !(x < xbar0_)) throw DomainError("WeightSpec::phi_prime: x outside (0, xbar0)");
  return std::exp(logfp(x));
}

double WeightSpec::exponent_delta(double x_from, double x_to) const {
  if (kind_ == Kind::OneCusp) {
    const double tp = 2.0 * p_;
    return (std::pow(x_from, -tp) - std::pow(x_to, -tp)) / tp;
  }
  return phi(x_to) - phi(x_from);
}

double WeightSpec::lambda_scale(double x, double h, double alpha) const {
  if (kind_ == Kind::OneCusp) return std::sqrt(h) * std::pow(x, p_);
  return std::sqrt(h) * std::sqrt(std::abs(alpha)) / (std::sqrt(x) * std::sqrt(phi_prime(x)));
}

bool WeightSpec::monotone_sampled(int n) const {
  if (kind_ == Kind::OneCusp) return true;
  for (int i = 1; i < n; ++i) {
    const double x = xbar0_ * i / n;
    if (!(phi_prime(x) > 0.0)) return false;
  }
  return true;
}

double localizer_value(const Localizer& loc, const WeightSpec& weight, double x, double lambda,
                       double h, double alpha) {
  if (!(h > 0)) throw ArgumentError("localizer_value: h must be positive");
  if (weight.kind() == WeightSpec::Kind::OneCusp)
    return loc.chi(lambda / (std::sqrt(h) * std::pow(x, weight.p())));
  return loc.chi(std::sqrt(x) * lambda * std::sqrt(weight.phi_prime(x)) /
                 (std::sqrt(h) * std::sqrt(std::abs(alpha))));
}

NormalOperator::NormalOperator(const ConicMetric& metric, const WeightSpec& weight,
                               const Localizer& loc, double h,
                               std::shared_ptr<const GridSpec> grid, NormalOperatorOptions opts)
    : metric_(metric), weight_(weight), loc_(loc), h_(h), grid_(std::move(grid)), opts_(opts) {
  if (!(h > 0)) throw ArgumentError("NormalOperator: h must be positive");
  if (!metric.certified())
    throw CertificationError("NormalOperator: metric is not certified; run certify first");
  if (opts_.n_omega % 2) throw ArgumentError("NormalOperator: n_omega must be even");

  family_.grid = grid_;
  const GaussRule gl = gauss_legendre(opts_.n_lambda, -loc_.S(), loc_.S());
  family_.lam_hat = gl.nodes;
  family_.lam_w = gl.weights;
  const int np = metric.link().dim() == 1 ? 2 : opts_.n_omega;
  for (int l = 0; l < np; ++l) family_.psi.push_back(2.0 * M_PI * l / np);

  // alpha enters the combined localizer scale; reference value otherwise.
  if (weight_.kind() == WeightSpec::Kind::Combined) {
    auto cache = std::make_shared<std::vector<double>>();
    cache->resize(static_cast<std::size_t>(grid_->size()) * np);
    const auto& g = *grid_;
    const ConicMetric* m = &metric_;
    auto& psi = family_.psi;
    for (int base = 0; base < g.size(); ++base) {
      const int i = base / g.ny(), j = base % g.ny();
      for (int l = 0; l < np; ++l) {
        (*cache)[base * np + l] = expansion_alpha(
            *m, g.x_of(i), g.y_of(j), unit_direction(*m, g.x_of(i), g.y_of(j), psi[l]));
      }
    }
    const WeightSpec w = weight_;
    const double hh = h_;
    auto gridp = grid_;
    family_.lambda_scale = [cache, w, hh, gridp, np](double x, const LinkPoint& y, double psi_v) {
      // Locate the cached alpha by nearest node; the family only asks at nodes.
      const GridSpec& gs = *gridp;
      int bi = 0;
      double best = 1e300;
      for (int i = 0; i < gs.nx(); ++i) {
        const double d = std::abs(gs.x_of(i) - x);
        if (d < best) {
          best = d;
          bi = i;
        }
      }
      int bj = 0;
      best = 1e300;
      for (int j = 0; j < gs.ny(); ++j) {
        const double d = std::hypot(gs.y_of(j).a - y.a, gs.y_of(j).b - y.b);
        if (d < best) {
          best = d;
          bj = j;
        }
      }
      int bl = 0;
      best = 1e300;
      for (int l = 0; l < np; ++l) {
        const double d = std::abs(2.0 * M_PI * l / np - psi_v);
        if (d < best) {
          best = d;
          bl = l;
        }
      }
      return w.lambda_scale(x, hh, (*cache)[(bi * gs.ny() + bj) * np + bl]);
    };
  } else {
    const WeightSpec w = weight_;
    const double hh = h_;
    family_.lambda_scale = [w, hh](double x, const LinkPoint&, double) {
      return w.lambda_scale(x, hh, -0.5);
    };
  }

  family_.trace_opts.rel_tol = opts_.rel_tol;
  family_.trace_opts.abs_tol = opts_.abs_tol;
  family_.trace_opts.refine = opts_.refine;
  family_.trace_opts.max_param = 20.0;
  family_.trace_opts.max_step = opts_.max_step;
  family_.trace_opts.exponent_cutoff = opts_.exp_sigma * h_;

  // Collar headroom: rays from the top row turn around at x/sqrt(1-lambda^2);
  // truncating them at x0 would kink the direction quadrature.
  const double xt = grid_->x_top();
  const double lam_max =
      loc_.S() * family_.lambda_scale(xt, grid_->y_of(0), family_.psi.front());
  if (!(lam_max < 1.0) || xt / std::sqrt(1.0 - lam_max * lam_max) > metric.x0() * (1.0 + 1e-9))
    throw ArgumentError(
        "NormalOperator: localizer support reaches above the collar bound x0 "
        "(x_top too large for this h); reduce x_top, S, or h");
}

void NormalOperator::accumulate_rows(
    bool with_exponent, const std::function<void(int row, const Eigen::VectorXd&)>& sink) const {
  const GridSpec& g = *grid_;
  const int np = static_cast<int>(family_.psi.size());
  const int half = np / 2;
  const double psi_w = metric_.link().dim() == 1 ? 1.0 : 2.0 * M_PI / np;

  parallel_for(static_cast<std::size_t>(g.size()), [&](std::size_t row) {
    Eigen::VectorXd Q = Eigen::VectorXd::Zero(g.size());
    std::vector<std::pair<int, double>> stencil;
    const int i = static_cast<int>(row) / g.ny();
    const int j = static_cast<int>(row) % g.ny();
    const double x = g.x_of(i);
    const LinkPoint y = g.y_of(j);
    TraceOptions topt = family_.trace_opts;
    // Panels must resolve the Gaussian damping width sqrt(h) x in t.
    topt.max_step = std::min(topt.max_step, 0.35 * std::sqrt(h_) * x);
    for (int k = 0; k < static_cast<int>(family_.lam_hat.size()); ++k) {
      const double chiv = loc_.chi(family_.lam_hat[k]);
      if (chiv == 0.0) continue;
      for (int l = 0; l < half; ++l) {  // reversal symmetry: half directions, weight 2
        const double scale = family_.lambda_scale(x, y, family_.psi[l]);
        const TraceInit init = family_init(metric_, family_, static_cast<int>(row), k, l);
        const GeodesicPath path = trace(metric_, init, topt);
        const double dirw = 2.0 * family_.lam_w[k] * psi_w * scale * chiv;
        for (const PathSample& s : path.samples) {
          if (s.weight == 0.0) continue;
          if (s.x > g.x0() * (1.0 + 1e-12)) continue;
          const LinkPoint ys = metric_.link().coords(s.u);
          g.interp_row(s.x, ys, stencil);
          double wq = dirw * s.weight / s.x;
          if (with_exponent) {
            const double arg = weight_.exponent_delta(x, s.x) / h_;
            if (arg < -36.0) continue;
            wq *= std::exp(arg);
          }
          for (const auto& [idx, w] : stencil) Q[idx] += wq * w;
        }
      }
    }
    sink(static_cast<int>(row), Q);
  });
}

Eigen::MatrixXd NormalOperator::assemble_impl(int kind) const {
  // kind: 1 = M (function gauge, exponential-free rows),
  //       2 = A (conjugated kernel e^{E/h}, plain interpolation).
  const GridSpec& g = *grid_;
  if (g.size() > opts_.matrix_cap)
    throw SizeError("assemble: grid size " + std::to_string(g.size()) + " exceeds cap " +
                    std::to_string(opts_.matrix_cap) + "; use the matrix-free apply");
  Eigen::MatrixXd A(g.size(), g.size());
  A.setZero();
  accumulate_rows(kind == 2,
                  [&](int row, const Eigen::VectorXd& Q) { A.row(row) = Q.transpose(); });
  return A;
}

Eigen::MatrixXd NormalOperator::assemble() const { return assemble_impl(2); }
Eigen::MatrixXd NormalOperator::assemble_gauged() const { return assemble_impl(1); }

Eigen::MatrixXd NormalOperator::assemble_modal(InterpGauge gauge) const {
  const GridSpec& g = *grid_;
  const LinkBasis& b = g.basis();
  const int nm = b.n_modes();
  const Eigen::MatrixXd M = gauge == InterpGauge::Function ? assemble_gauged() : assemble();
  // K = P M B with P, B block-diagonal over x-levels.
  Eigen::MatrixXd MB(g.size(), g.nx() * nm);
  for (int i = 0; i < g.nx(); ++i)
    MB.middleCols(i * nm, nm) = M.middleCols(i * g.ny(), g.ny()) * b.node_matrix();
  Eigen::MatrixXd K(g.nx() * nm, g.nx() * nm);
  for (int i = 0; i < g.nx(); ++i)
    K.middleRows(i * nm, nm) = b.projector() * MB.middleRows(i * g.ny(), g.ny());
  return K;
}

GridFunction NormalOperator::apply(const GridFunction& v) const {
  const GridSpec& g = *grid_;
  if (v.spec().hash() != g.hash()) throw ContractViolation("apply: grid mismatch");
  Eigen::VectorXd out(g.size());
  const Eigen::VectorXd vf = v.flat();
  accumulate_rows(true, [&](int row, const Eigen::VectorXd& Q) { out[row] = Q.dot(vf); });
  GridFunction r(grid_);
  r.set_flat(out);
  return r;
}

GridFunction NormalOperator::apply_gauged(const GridFunction& f) const {
  const GridSpec& g = *grid_;
  if (f.spec().hash() != g.hash()) throw ContractViolation("apply_gauged: grid mismatch");
  Eigen::VectorXd out(g.size());
  const Eigen::VectorXd vf = f.flat();
  accumulate_rows(false, [&](int row, const Eigen::VectorXd& Q) { out[row] = Q.dot(vf); });
  GridFunction r(grid_);
  r.set_flat(out);
  return r;
}

Eigen::VectorXd NormalOperator::backproject(const std::vector<double>& data) const {
  const GridSpec& g = *grid_;
  const int nl = static_cast<int>(family_.lam_hat.size());
  const int np = static_cast<int>(family_.psi.size());
  if (data.size() != static_cast<std::size_t>(g.size()) * nl * np)
    throw ContractViolation("backproject: data size does not match the family");
  const double psi_w = metric_.link().dim() == 1 ? 1.0 : 2.0 * M_PI / np;
  Eigen::VectorXd out(g.size());
  for (int base = 0; base < g.size(); ++base) {
    const int i = base / g.ny();
    const LinkPoint y = g.y_of(base % g.ny());
    double acc = 0.0;
    for (int k = 0; k < nl; ++k) {
      const double chiv = loc_.chi(family_.lam_hat[k]);
      if (chiv == 0.0) continue;
      for (int l = 0; l < np; ++l) {
        const double scale = family_.lambda_scale(g.x_of(i), y, family_.psi[l]);
        acc += family_.lam_w[k] * psi_w * scale * chiv * data[family_.data_index(base, k, l)];
      }
    }
    out[base] = acc;
  }
  return out;
}

Eigen::VectorXd NormalOperator::log_gauge() const {
  const GridSpec& g = *grid_;
  Eigen::VectorXd lg(g.size());
  for (int base = 0; base < g.size(); ++base)
    lg[base] = weight_.exponent_delta(g.x_of(base / g.ny()), g.x_top()) / h_;
  return lg;
}

GridFunction apply_normal(const ConicMetric& metric, const WeightSpec& weight,
                          const Localizer& loc, double h, const GridFunction& v,
                          NormalOperatorOptions opts) {
  NormalOperator op(metric, weight, loc, h, v.spec_ptr(), opts);
  return op.apply(v);
}

Eigen::MatrixXd assemble_matrix(const ConicMetric& metric, const WeightSpec& weight,
                                const Localizer& loc, double h,
                                std::shared_ptr<const GridSpec> grid, NormalOperatorOptions opts) {
  NormalOperator op(metric, weight, loc, h, std::move(grid), opts);
  return op.assemble();
}

Eigen::MatrixXd diag_rescaled(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = 1.0 / std::sqrt(std::max(std::abs(A(i, i)), 1e-300));
  return d.asDiagonal() * A * d.asDiagonal();
}

double sigma_min(const Eigen::MatrixXd& A) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().tail(1)(0);
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& A, double h, double p,
                 int weight_kind, std::uint64_t grid_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_matrix: cannot open " + path);
  os.write("NOP1", 4);
  const std::uint32_t n = static_cast<std::uint32_t>(A.rows());
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&h), 8);
  os.write(reinterpret_cast<const char*>(&p), 8);
  const std::uint32_t wk = static_cast<std::uint32_t>(weight_kind);
  os.write(reinterpret_cast<const char*>(&wk), 4);
  os.write(reinterpret_cast<const char*>(&grid_hash), 8);
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) {
      const double v = A(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_matrix: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::strncmp(magic, "NOP1", 4) != 0) throw FormatError("load_matrix: bad magic");
  std::uint32_t n = 0, wk = 0;
  double h = 0, p = 0;
  std::uint64_t gh = 0;
  is.read(reinterpret_cast<char*>(&n), 4);
  is.read(reinterpret_cast<char*>(&h), 8);
  is.read(reinterpret_cast<char*>(&p), 8);
  is.read(reinterpret_cast<char*>(&wk), 4);
  is.read(reinterpret_cast<char*>(&gh), 8);
  Eigen::MatrixXd A(n, n);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), 8);
      A(i, j) = v;
    }
  if (!is) throw FormatError("load_matrix: truncated file");
  return A;
}

}  // namespace conicxray
