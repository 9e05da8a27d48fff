#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace conicxray {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Legendre polynomial P_k(x) with first and second derivatives.
struct LegendreEval {
  double p, dp, ddp;
};
LegendreEval legendre(int k, double x);

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Gauss-Legendre rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

/// Smooth even cutoff: 1 on |u| <= 1/2, 0 on |u| >= 1, C^inf in between.
double bump(double u);
double bump_derivative(double u);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Adaptive 1D quadrature (Gauss-Kronrod style bisection on GL7 vs GL15).
double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-12, double abs_tol = 1e-300, int max_depth = 40);

/// Format a double with 17 significant digits (round-trip exact).
std::string format_g17(double v);

/// FNV-1a hash of a byte string; manifests record it for config files.
std::uint64_t fnv1a(const void* data, std::size_t n);

/// Run fn(i) for i in [0, n) on the configured worker count. Each index writes
/// only its own output slots, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Global worker count used by parallel_for (0 = hardware concurrency).
void set_thread_count(int n);
int thread_count();

}  // namespace conicxray
