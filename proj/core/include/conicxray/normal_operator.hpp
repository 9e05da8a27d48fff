#pragma once

#include "conicxray/xray_transform.hpp"

namespace conicxray {

/// Compactly supported even localizer profile chi on [-S, S]:
/// chi(s) = exp(s^2/(2 alpha0)) bump(s/S) with alpha0 < 0, chi(0) = 1.
/// The vanishing-center variant (chi(0) = 0) is a deliberate negative control.
class Localizer {
 public:
  enum class Kind { Gaussian, VanishingCenter };

  explicit Localizer(double S = 4.0, double alpha0 = -0.5, Kind kind = Kind::Gaussian);

  double chi(double s) const;
  double S() const { return S_; }
  double alpha0() const { return alpha0_; }
  Kind kind() const { return kind_; }

  /// Sampled invariants: even, nonnegative, chi(0) value, support in [-S, S].
  bool sanity_sampled() const;

 private:
  double S_ = 4.0;
  double alpha0_ = -0.5;
  Kind kind_ = Kind::Gaussian;
};

/// Exponential weight Phi: pure 1-cusp Phi = -1/(2p x^{2p}) or the combined
/// artificial-boundary form F with F = -1/(2x^2) near 0, F = 1/(xbar0 - x)
/// near xbar0, joined monotonically on [0.3 xbar0, 0.7 xbar0].
class WeightSpec {
 public:
  enum class Kind { OneCusp, Combined };

  static WeightSpec one_cusp(double p = 1.0);
  static WeightSpec combined(double xbar0);

  Kind kind() const { return kind_; }
  double p() const { return p_; }
  double xbar0() const { return xbar0_; }

  double phi(double x) const;
  double phi_prime(double x) const;
  /// phi(x_to) - phi(x_from); for the one-cusp weight this is the path
  /// exponent -E with base x_from.
  double exponent_delta(double x_from, double x_to) const;

  /// Rescaled-slope scale s with lambda = s * lambda_hat, chosen so the
  /// localizer argument is exactly lambda_hat.
  double lambda_scale(double x, double h, double alpha) const;

  /// F' > 0 sampled at n points across (0, xbar0).
  bool monotone_sampled(int n = 1000) const;

 private:
  WeightSpec() = default;
  void build_join();
  Kind kind_ = Kind::OneCusp;
  double p_ = 1.0;
  double xbar0_ = 0.0;
  // Combined-join data: log F' is a cubic Hermite plus kappa * bump term on
  // [a, b]; F on the join is tabulated cumulatively.
  double join_a_ = 0.0, join_b_ = 0.0, kappa_ = 0.0;
  std::vector<double> join_x_, join_F_;
  double logfp(double x) const;
};

/// chi~ evaluated at (x, lambda): one_cusp chi(lambda/(h^{1/2} x^p));
/// combined chi(x^{1/2} lambda sqrt(F'(x)) / (h^{1/2} |alpha|^{1/2})).
double localizer_value(const Localizer& loc, const WeightSpec& weight, double x, double lambda,
                       double h, double alpha = -0.5);

struct NormalOperatorOptions {
  int n_lambda = 32;  // Gauss-Legendre nodes in lambda_hat over [-S, S]
  int n_omega = 12;   // uniform link directions (even)
  // Path cutoff: drop where E/h < -exp_sigma. Deep enough that the kernel
  // tail e^{-2 C h exp_sigma} stays negligible for unit-order decay classes
  // even at the smallest h in the sweeps.
  double exp_sigma = 80.0;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.1;
  int refine = 0;
  int matrix_cap = 4096;
};

/// Modified normal operator A_h = e^{-Phi/h} L chi~ I e^{Phi/h} bound to a
/// grid. All entry points share one deterministic path-quadrature pass; the
/// conjugation is handled entirely at exponent level.
class NormalOperator {
 public:
  NormalOperator(const ConicMetric& metric, const WeightSpec& weight, const Localizer& loc,
                 double h, std::shared_ptr<const GridSpec> grid, NormalOperatorOptions opts = {});

  const GeodesicFamily& family() const { return family_; }
  double h() const { return h_; }
  const WeightSpec& weight() const { return weight_; }
  const Localizer& localizer() const { return loc_; }

  /// A_h v for nodal data v interpreted as values of the conjugated variable.
  GridFunction apply(const GridFunction& v) const;

  /// M f with M = D^{-1} A D (gauge-free action on plain function values).
  /// Equivalently: A w measured in the conjugated norm with w = D f, which is
  /// the gauge-invariant way to read off operator magnitudes.
  GridFunction apply_gauged(const GridFunction& f) const;

  /// Dense matrix of A_h on the nodal basis (column j = apply on e_j).
  Eigen::MatrixXd assemble() const;

  /// The diagonally gauged matrix M = D^{-1} A D with D = diag(e^{-Phi/h}):
  /// the discretization of L chi~ I on plain function values. Exactly similar
  /// to assemble() by construction; all entries are exponential-free.
  Eigen::MatrixXd assemble_gauged() const;

  /// Kernel e^{E/h} applied to plainly interpolated nodal values: the literal
  /// conjugated discretization. It models the conjugated variable w as the
  /// interpolable one, which is the right gauge for decay classes near
  /// C = 1/(2h); assemble_gauged() models plain f instead.
  Eigen::MatrixXd assemble_conjugated() const;

  /// Gauged operator restricted to the link-mode coefficient space. The node
  /// grid overdetermines the modes, so the nodal matrices carry a structural
  /// aliasing null space; this square full-rank form is what solvers and
  /// singular-value bounds use.
  enum class InterpGauge { Function, Conjugated };
  Eigen::MatrixXd assemble_modal(InterpGauge gauge = InterpGauge::Function) const;

  /// z -> sum over directions of chi~ * data (the f-gauge backprojection,
  /// i.e. e^{Phi/h} * make_rhs).
  Eigen::VectorXd backproject(const std::vector<double>& data) const;

  /// Gauge factors g_i = (Phi(x_top) - Phi(x_i))/h >= 0 with A = D M D^{-1},
  /// D_ii = exp(g_i + const).
  Eigen::VectorXd log_gauge() const;

 private:
  const ConicMetric& metric_;
  WeightSpec weight_;
  Localizer loc_;
  double h_;
  std::shared_ptr<const GridSpec> grid_;
  NormalOperatorOptions opts_;
  GeodesicFamily family_;

  // Accumulates quadrature rows; with_exponent weights each ray sample by
  // e^{E/h} (the conjugated-gauge rows), otherwise rows are exponential-free.
  void accumulate_rows(bool with_exponent,
                       const std::function<void(int row, const Eigen::VectorXd&)>& sink) const;
  Eigen::MatrixXd assemble_impl(int kind) const;
};

/// apply_normal per the operator contract; requires a certified metric.
GridFunction apply_normal(const ConicMetric& metric, const WeightSpec& weight,
                          const Localizer& loc, double h, const GridFunction& v,
                          NormalOperatorOptions opts = {});

Eigen::MatrixXd assemble_matrix(const ConicMetric& metric, const WeightSpec& weight,
                                const Localizer& loc, double h,
                                std::shared_ptr<const GridSpec> grid,
                                NormalOperatorOptions opts = {});

/// Symmetric diagonal rescaling A_ij / sqrt(A_ii A_jj).
Eigen::MatrixXd diag_rescaled(const Eigen::MatrixXd& A);

/// Smallest singular value.
double sigma_min(const Eigen::MatrixXd& A);

void save_matrix(const std::string& path, const Eigen::MatrixXd& A, double h, double p,
                 int weight_kind, std::uint64_t grid_hash);
Eigen::MatrixXd load_matrix(const std::string& path);

}  // namespace conicxray
