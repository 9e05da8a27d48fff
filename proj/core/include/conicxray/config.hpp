#pragma once

#include <string>
#include <vector>

#include "conicxray/inversion.hpp"

namespace conicxray {

/// Parsed experiment configuration (line-oriented key = value file with
/// [section] headers; [metric] and [grid] are required).
struct ExperimentConfig {
  // [metric]
  std::string link_kind = "sphere";  // circle | sphere | perturbed_sphere
  double radius = 1.0;
  double amplitude = 0.0;
  int harmonic_degree = 2;
  std::vector<double> warp_coeffs;  // c(x) = 1 + sum_k coeffs[k-1] x^k
  double x0 = 0.5;
  double p = 1.0;
  // [grid]
  int nx = 16;
  int ny = 12;
  double x_min = 0.15;
  double x_top = 0.0;  // 0 -> 0.7 * x0
  // [operator]
  std::vector<double> h_list = {0.05};
  double S = 4.0;
  int n_lambda = 32;
  int n_omega = 12;
  std::string weight = "one_cusp";  // one_cusp | combined
  double xbar0 = 0.0;               // 0 -> x_top
  std::string localizer = "gaussian";  // gaussian | vanishing_center
  // [solver]
  std::string solver = "cg";  // cg | landweber
  int max_iters = 20000;
  double rtol = 1e-8;
  int trials = 5;
  double c_true = 1.0;
  double threshold = 0.05;
  // [output]
  std::string out_dir = "out";
  // top level
  std::uint64_t seed = 42;

  std::uint64_t config_hash = 0;

  ConicMetric make_metric() const;
  std::shared_ptr<GridSpec> make_grid(const ConicMetric& metric) const;
  Localizer make_localizer() const;
  WeightSpec make_weight() const;
  ReconstructionConfig make_recon(double h) const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

}  // namespace conicxray
