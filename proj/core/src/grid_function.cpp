#include "conicxray/grid_function.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

// Associated Legendre P_l^m(x) (no Condon-Shortley phase), m >= 0.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double sh_norm(int l, int m) {
  double fac = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) fac *= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) / fac);
}

// Factor ny as n_theta * n_phi with n_phi even and aspect near 3:2.
void factor_nodes(int ny, int& n_theta, int& n_phi) {
  int best_t = 0, best_p = 0;
  double best_score = -1.0;
  for (int t = 1; t <= ny; ++t) {
    if (ny % t) continue;
    const int p = ny / t;
    if (p % 2) continue;
    const double aspect = double(p) / t;
    const double score = -std::abs(std::log(aspect / 1.5));
    if (score > best_score) {
      best_score = score;
      best_t = t;
      best_p = p;
    }
  }
  if (best_t == 0) throw ArgumentError("LinkBasis: ny must have an even factor");
  n_theta = best_t;
  n_phi = best_p;
}

}  // namespace

LinkBasis::LinkBasis(const LinkMetric& link, int n_nodes) : link_(link) {
  if (n_nodes < 1) throw ArgumentError("LinkBasis: need at least one node");
  if (link.dim() == 1) {
    n_theta_ = n_nodes;
    n_phi_ = 0;
    const int kmax = (n_nodes - 1) / 2;
    max_degree_ = kmax;
    n_modes_ = 1 + 2 * kmax;
    for (int j = 0; j < n_nodes; ++j) {
      nodes_.push_back({2.0 * M_PI * j / n_nodes, 0.0});
      weights_.push_back(2.0 * M_PI / n_nodes);
    }
  } else {
    factor_nodes(n_nodes, n_theta_, n_phi_);
    max_degree_ = std::min(n_theta_ - 1, n_phi_ / 2 - 1);
    if (max_degree_ < 0) max_degree_ = 0;
    n_modes_ = (max_degree_ + 1) * (max_degree_ + 1);
    const GaussRule gr = gauss_legendre(n_theta_, -1.0, 1.0);
    for (int it = 0; it < n_theta_; ++it) {
      const double theta = std::acos(gr.nodes[n_theta_ - 1 - it]);  // ascending theta
      const double wz = gr.weights[n_theta_ - 1 - it];
      for (int ip = 0; ip < n_phi_; ++ip) {
        nodes_.push_back({theta, 2.0 * M_PI * ip / n_phi_});
        weights_.push_back(wz * 2.0 * M_PI / n_phi_);
      }
    }
  }
  node_modes_.resize(n_nodes, n_modes_);
  std::vector<double> row(n_modes_);
  for (int j = 0; j < n_nodes; ++j) {
    eval_modes(nodes_[j], row.data());
    for (int l = 0; l < n_modes_; ++l) node_modes_(j, l) = row[l];
  }
  proj_.resize(n_modes_, n_nodes);
  for (int l = 0; l < n_modes_; ++l)
    for (int j = 0; j < n_nodes; ++j) proj_(l, j) = node_modes_(j, l) * weights_[j];
}

void LinkBasis::eval_modes(const LinkPoint& y, double* out) const {
  if (link_.dim() == 1) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    int idx = 0;
    out[idx++] = inv_sqrt_2pi;
    for (int k = 1; k <= max_degree_; ++k) {
      out[idx++] = std::cos(k * y.a) * inv_sqrt_pi;
      out[idx++] = std::sin(k * y.a) * inv_sqrt_pi;
    }
    return;
  }
  const double ct = std::cos(y.a);
  int idx = 0;
  for (int l = 0; l <= max_degree_; ++l) {
    out[idx++] = sh_norm(l, 0) * assoc_legendre(l, 0, ct);
    for (int m = 1; m <= l; ++m) {
      const double nl = std::sqrt(2.0) * sh_norm(l, m) * assoc_legendre(l, m, ct);
      out[idx++] = nl * std::cos(m * y.b);
      out[idx++] = nl * std::sin(m * y.b);
    }
  }
}

void LinkBasis::kernel_row(const LinkPoint& y, double* out) const {
  std::vector<double> modes(n_modes_);
  eval_modes(y, modes.data());
  for (int j = 0; j < n_nodes(); ++j) {
    double acc = 0.0;
    for (int l = 0; l < n_modes_; ++l) acc += modes[l] * node_modes_(j, l);
    out[j] = acc * weights_[j];
  }
}

GridSpec::GridSpec(const ConicMetric& metric, int nx, int ny, double x_min, double x_top)
    : x0_(metric.x0()), basis_(metric.link(), ny) {
  if (nx < 2) throw ArgumentError("GridSpec: nx must be >= 2");
  if (!(x_min > 0) || !(x_min < x_top) || !(x_top <= metric.x0()))
    throw ArgumentError("GridSpec: require 0 < x_min < x_top <= x0");
  x_nodes_.resize(nx);
  for (int i = 0; i < nx; ++i) {
    const double u = std::log(x_top) + (std::log(x_min) - std::log(x_top)) * i / (nx - 1);
    x_nodes_[i] = std::exp(u);  // strictly decreasing
  }
  log_x_.resize(nx);
  for (int i = 0; i < nx; ++i) log_x_[i] = std::log(x_nodes_[nx - 1 - i]);
}

int GridSpec::x_stencil(double x, int* idx, double* w) const {
  const int nx = static_cast<int>(x_nodes_.size());
  const double u = std::log(x);
  // Position in the ascending log grid.
  int k = static_cast<int>(std::lower_bound(log_x_.begin(), log_x_.end(), u) - log_x_.begin());
  int lo = std::clamp(k - 2, 0, nx - std::min(nx, 4));
  const int m = std::min(nx, 4);
  for (int a = 0; a < m; ++a) {
    double L = 1.0;
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      L *= (u - log_x_[lo + b]) / (log_x_[lo + a] - log_x_[lo + b]);
    }
    idx[a] = nx - 1 - (lo + a);  // back to decreasing-order indices
    w[a] = L;
  }
  return m;
}

void GridSpec::interp_row(double x, const LinkPoint& y,
                          std::vector<std::pair<int, double>>& out) const {
  out.clear();
  int xi[4];
  double xw[4];
  const int m = x_stencil(x, xi, xw);
  std::vector<double> krow(ny());
  basis_.kernel_row(y, krow.data());
  for (int a = 0; a < m; ++a)
    for (int j = 0; j < ny(); ++j)
      if (xw[a] * krow[j] != 0.0) out.push_back({index(xi[a], j), xw[a] * krow[j]});
}

double GridSpec::measure_weight(int i, int j) const {
  // Trapezoid in log x with the collar density x^{-(n+1)} sqrt(h) absorbed
  // into a plain product measure: dx dy -> x du * w_link. Relative errors in
  // reports are insensitive to the global normalization.
  const int n = nx();
  const double du = (n > 1) ? std::abs(std::log(x_nodes_[0] / x_nodes_[n - 1])) / (n - 1) : 1.0;
  double wx = du;
  if (i == 0 || i == n - 1) wx *= 0.5;
  const LinkPoint& y = y_of(j);
  double area = basis_.weights()[j];
  if (link().dim() == 2) {
    area *= link().conformal(link().embed(y)) * link().radius() * link().radius();
  } else {
    area *= link().radius();
  }
  return wx * x_of(i) * area;
}

Eigen::VectorXd GridSpec::project_modal(const Eigen::VectorXd& nodal) const {
  const LinkBasis& b = basis_;
  Eigen::VectorXd out(n_modes_total());
  for (int i = 0; i < nx(); ++i)
    out.segment(i * b.n_modes(), b.n_modes()) =
        b.projector() * nodal.segment(i * ny(), ny());
  return out;
}

Eigen::VectorXd GridSpec::embed_modal(const Eigen::VectorXd& modal) const {
  const LinkBasis& b = basis_;
  Eigen::VectorXd out(size());
  for (int i = 0; i < nx(); ++i)
    out.segment(i * ny(), ny()) = b.node_matrix() * modal.segment(i * b.n_modes(), b.n_modes());
  return out;
}

std::uint64_t GridSpec::hash() const {
  std::vector<double> blob;
  blob.push_back(static_cast<double>(nx()));
  blob.push_back(static_cast<double>(ny()));
  blob.push_back(x0_);
  for (double x : x_nodes_) blob.push_back(x);
  for (const auto& y : basis_.nodes()) {
    blob.push_back(y.a);
    blob.push_back(y.b);
  }
  return fnv1a(blob.data(), blob.size() * sizeof(double));
}

GridFunction::GridFunction(std::shared_ptr<const GridSpec> spec, DecayInfo decay)
    : spec_(std::move(spec)), values_(Eigen::MatrixXd::Zero(spec_->nx(), spec_->ny())),
      decay_(decay) {}

GridFunction GridFunction::from_function(std::shared_ptr<const GridSpec> spec,
                                         const std::function<double(double, const LinkPoint&)>& f,
                                         DecayInfo decay) {
  GridFunction g(std::move(spec), decay);
  for (int i = 0; i < g.spec().nx(); ++i)
    for (int j = 0; j < g.spec().ny(); ++j)
      g.at(i, j) = f(g.spec().x_of(i), g.spec().y_of(j));
  return g;
}

Eigen::VectorXd GridFunction::flat() const {
  Eigen::VectorXd v(spec_->size());
  for (int i = 0; i < spec_->nx(); ++i)
    for (int j = 0; j < spec_->ny(); ++j) v(spec_->index(i, j)) = values_(i, j);
  return v;
}

void GridFunction::set_flat(const Eigen::VectorXd& v) {
  if (v.size() != spec_->size()) throw ArgumentError("GridFunction::set_flat: size mismatch");
  for (int i = 0; i < spec_->nx(); ++i)
    for (int j = 0; j < spec_->ny(); ++j) values_(i, j) = v(spec_->index(i, j));
  coeffs_dirty_ = true;
}

void GridFunction::refresh_coeffs() const {
  if (!coeffs_dirty_) return;
  const LinkBasis& b = spec_->basis();
  mode_coeffs_.resize(spec_->nx(), b.n_modes());
  Eigen::MatrixXd proj = b.projector();
  for (int i = 0; i < spec_->nx(); ++i)
    mode_coeffs_.row(i) = (proj * values_.row(i).transpose()).transpose();
  coeffs_dirty_ = false;
}

double GridFunction::eval(double x, const LinkPoint& y) const {
  if (x > spec_->x0() * (1.0 + 1e-12))
    throw DomainError("GridFunction::eval: x above the collar bound x0");
  if (!(x > 0)) throw DomainError("GridFunction::eval: x must be positive");
  if (decay_.kind == DecayClass::Gaussian && x < spec_->x_min() * (1.0 - 1e-12)) return 0.0;
  refresh_coeffs();
  int xi[4];
  double xw[4];
  const int m = spec_->x_stencil(x, xi, xw);
  const LinkBasis& b = spec_->basis();
  std::vector<double> modes(b.n_modes());
  b.eval_modes(y, modes.data());
  double acc = 0.0;
  for (int a = 0; a < m; ++a) {
    double row = 0.0;
    for (int l = 0; l < b.n_modes(); ++l) row += mode_coeffs_(xi[a], l) * modes[l];
    acc += xw[a] * row;
  }
  return acc;
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void GridFunction::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("GridFunction::save: cannot open " + path);
  os.write("GFN1", 4);
  const GridSpec& s = *spec_;
  put<std::uint32_t>(os, s.nx());
  put<std::uint32_t>(os, s.ny());
  put<std::uint32_t>(os, s.link().dim());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.link().kind()));
  put<double>(os, s.link().radius());
  put<double>(os, s.link().amplitude());
  put<std::uint32_t>(os, s.link().harmonic_degree());
  put<double>(os, s.x0());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(decay_.kind));
  put<double>(os, decay_.kind == DecayClass::Compact ? decay_.x_lo : decay_.C);
  put<double>(os, decay_.kind == DecayClass::Compact ? decay_.x_hi : decay_.p);
  for (double x : s.x_nodes()) put<double>(os, x);
  for (int j = 0; j < s.ny(); ++j) {
    put<double>(os, s.y_of(j).a);
    put<double>(os, s.y_of(j).b);
    put<double>(os, s.basis().weights()[j]);
  }
  for (int i = 0; i < s.nx(); ++i)
    for (int j = 0; j < s.ny(); ++j) put<double>(os, values_(i, j));
}

GridFunction GridFunction::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("GridFunction::load: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::strncmp(magic, "GFN1", 4) != 0) throw FormatError("GridFunction::load: bad magic");
  const auto nx = get<std::uint32_t>(is);
  const auto ny = get<std::uint32_t>(is);
  const auto ydim = get<std::uint32_t>(is);
  const auto kind = get<std::uint32_t>(is);
  const double radius = get<double>(is);
  const double amplitude = get<double>(is);
  const auto degree = get<std::uint32_t>(is);
  const double x0 = get<double>(is);
  const auto dkind = get<std::uint32_t>(is);
  const double d1 = get<double>(is);
  const double d2 = get<double>(is);
  (void)ydim;
  LinkMetric link = kind == 0 ? LinkMetric::circle(radius)
                    : kind == 1 ? LinkMetric::round_sphere(radius)
                                : LinkMetric::perturbed_sphere(radius, amplitude, degree);
  std::vector<double> xs(nx);
  for (auto& x : xs) x = get<double>(is);
  // Skip stored nodes; the spec is rebuilt deterministically and must match.
  for (std::uint32_t j = 0; j < ny; ++j) {
    get<double>(is);
    get<double>(is);
    get<double>(is);
  }
  ConicMetric metric(link, x0);
  auto spec = std::make_shared<GridSpec>(metric, nx, ny, xs.back(), xs.front());
  DecayInfo decay;
  decay.kind = static_cast<DecayClass>(dkind);
  if (decay.kind == DecayClass::Compact) {
    decay.x_lo = d1;
    decay.x_hi = d2;
  } else {
    decay.C = d1;
    decay.p = d2;
  }
  GridFunction g(spec, decay);
  for (std::uint32_t i = 0; i < nx; ++i)
    for (std::uint32_t j = 0; j < ny; ++j) g.at(i, j) = get<double>(is);
  if (!is) throw FormatError("GridFunction::load: truncated file");
  return g;
}

double relative_l2_error(const GridFunction& f, const GridFunction& g, double x_lo, double x_hi) {
  const GridSpec& s = f.spec();
  if (&s != &g.spec() && s.hash() != g.spec().hash())
    throw ContractViolation("relative_l2_error: mismatched grids");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < s.nx(); ++i) {
    const double x = s.x_of(i);
    if (x < x_lo || x > x_hi) continue;
    for (int j = 0; j < s.ny(); ++j) {
      const double w = s.measure_weight(i, j);
      const double d = f.at(i, j) - g.at(i, j);
      num += w * d * d;
      den += w * g.at(i, j) * g.at(i, j);
    }
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace conicxray
