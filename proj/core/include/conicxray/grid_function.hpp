#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

#include "conicxray/conic_manifold.hpp"

namespace conicxray {

/// Interpolation/quadrature basis on the link: real spherical harmonics on a
/// Gauss-Legendre x uniform grid (spheres) or Fourier modes on a uniform
/// angle grid (circle). Quadrature weights refer to the round unit measure.
class LinkBasis {
 public:
  LinkBasis(const LinkMetric& link, int n_nodes);

  const LinkMetric& link() const { return link_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_modes() const { return n_modes_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  int max_degree() const { return max_degree_; }
  const std::vector<LinkPoint>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Basis functions evaluated at y; out must hold n_modes() values.
  void eval_modes(const LinkPoint& y, double* out) const;
  /// Interpolation kernel row K(y, y_j) = sum_l Y_l(y) Y_l(y_j) w_j.
  void kernel_row(const LinkPoint& y, double* out) const;
  /// Projection of nodal values onto mode coefficients.
  const Eigen::MatrixXd& projector() const { return proj_; }
  /// Mode values at the nodes (n_nodes x n_modes).
  const Eigen::MatrixXd& node_matrix() const { return node_modes_; }

 private:
  LinkMetric link_;
  std::vector<LinkPoint> nodes_;
  std::vector<double> weights_;
  int n_modes_ = 0;
  int n_theta_ = 0;
  int n_phi_ = 0;
  int max_degree_ = 0;
  Eigen::MatrixXd node_modes_;  // n_nodes x n_modes
  Eigen::MatrixXd proj_;        // n_modes x n_nodes = B^T diag(w)
};

/// Tensor grid over the collar: log-spaced x nodes (strictly decreasing) and
/// link quadrature nodes.
class GridSpec {
 public:
  GridSpec(const ConicMetric& metric, int nx, int ny, double x_min, double x_top);

  int nx() const { return static_cast<int>(x_nodes_.size()); }
  int ny() const { return basis_.n_nodes(); }
  int size() const { return nx() * ny(); }
  double x0() const { return x0_; }
  double x_top() const { return x_nodes_.front(); }
  double x_min() const { return x_nodes_.back(); }
  const std::vector<double>& x_nodes() const { return x_nodes_; }  // decreasing
  const LinkBasis& basis() const { return basis_; }
  const LinkMetric& link() const { return basis_.link(); }

  int index(int i, int j) const { return i * ny() + j; }
  double x_of(int i) const { return x_nodes_[i]; }
  const LinkPoint& y_of(int j) const { return basis_.nodes()[j]; }

  /// Cubic Lagrange stencil in log x; up to 4 (index, weight) pairs.
  int x_stencil(double x, int* idx, double* w) const;
  /// Combined stencil over grid indices for a point (x, y).
  void interp_row(double x, const LinkPoint& y, std::vector<std::pair<int, double>>& out) const;

  /// Quadrature weight of node (i, j) for collar L^2 norms (trapezoid in
  /// log x, link quadrature with the metric area factor).
  double measure_weight(int i, int j) const;

  /// Mode-coefficient representation: nx blocks of basis().n_modes(). The
  /// nodal grid overdetermines the link modes, so solvers work here.
  int n_modes_total() const { return nx() * basis().n_modes(); }
  Eigen::VectorXd project_modal(const Eigen::VectorXd& nodal) const;
  Eigen::VectorXd embed_modal(const Eigen::VectorXd& modal) const;

  std::uint64_t hash() const;

 private:
  double x0_ = 0.0;
  std::vector<double> x_nodes_;
  std::vector<double> log_x_;  // ascending, log of reversed nodes
  LinkBasis basis_;
};

enum class DecayClass { None, Gaussian, Compact };

struct DecayInfo {
  DecayClass kind = DecayClass::None;
  double C = 0.0;     // gaussian: |f| <~ exp(-C/(p x^{2p}))
  double p = 1.0;
  double x_lo = 0.0;  // compact support window
  double x_hi = 0.0;
};

/// Values of a function on the tensor grid, with tensor interpolation: cubic
/// in log x, spherical-harmonic (or trigonometric) in y.
class GridFunction {
 public:
  GridFunction(std::shared_ptr<const GridSpec> spec, DecayInfo decay = {});
  static GridFunction from_function(std::shared_ptr<const GridSpec> spec,
                                    const std::function<double(double, const LinkPoint&)>& f,
                                    DecayInfo decay = {});

  const GridSpec& spec() const { return *spec_; }
  std::shared_ptr<const GridSpec> spec_ptr() const { return spec_; }
  const DecayInfo& decay() const { return decay_; }

  double at(int i, int j) const { return values_(i, j); }
  double& at(int i, int j) { coeffs_dirty_ = true; return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { coeffs_dirty_ = true; return values_; }
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& v);

  /// Tensor interpolation; 0 below the smallest node for the gaussian class.
  double eval(double x, const LinkPoint& y) const;

  double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

  void save(const std::string& path) const;
  static GridFunction load(const std::string& path);

 private:
  std::shared_ptr<const GridSpec> spec_;
  Eigen::MatrixXd values_;  // nx x ny
  DecayInfo decay_;
  mutable Eigen::MatrixXd mode_coeffs_;  // nx x n_modes
  mutable bool coeffs_dirty_ = true;
  void refresh_coeffs() const;
};

/// Relative L^2 distance between two grid functions over a reporting window
/// [x_lo, x_hi], using the grid measure.
double relative_l2_error(const GridFunction& f, const GridFunction& g, double x_lo, double x_hi);

}  // namespace conicxray
