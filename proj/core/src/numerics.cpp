#include "conicxray/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "conicxray/errors.hpp"

namespace conicxray {

LegendreEval legendre(int k, double x) {
  if (k < 0) throw ArgumentError("legendre: negative degree");
  double pm1 = 0.0, p = 1.0;  // P_{-1}, P_0
  for (int j = 1; j <= k; ++j) {
    const double pj = ((2 * j - 1) * x * p - (j - 1) * pm1) / j;
    pm1 = p;
    p = pj;
  }
  LegendreEval out{p, 0.0, 0.0};
  if (k >= 1) {
    // (1-x^2) P_k' = k (P_{k-1} - x P_k); fall back to the pole limit.
    const double om = 1.0 - x * x;
    if (std::abs(om) > 1e-12) {
      out.dp = k * (pm1 - x * p) / om;
      // Legendre ODE: (1-x^2) P'' - 2x P' + k(k+1) P = 0.
      out.ddp = (2.0 * x * out.dp - k * (k + 1) * p) / om;
    } else {
      // Endpoint limits: P_k'(1) = k(k+1)/2, P_k''(1) = (k-1)k(k+1)(k+2)/8,
      // with parity factors (-1)^{k-1}, (-1)^k at x = -1.
      const double dp1 = k * (k + 1) / 2.0;
      const double ddp1 = (k - 1.0) * k * (k + 1) * (k + 2) / 8.0;
      out.dp = (x > 0) ? dp1 : ((k % 2 == 0) ? -dp1 : dp1);
      out.ddp = (x > 0) ? ddp1 : ((k % 2 == 0) ? ddp1 : -ddp1);
    }
  }
  return out;
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw ArgumentError("gauss_legendre: n must be positive");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess, Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const LegendreEval e = legendre(n, x);
      dp = e.dp;
      const double dx = e.p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const LegendreEval e = legendre(n, x);
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * e.dp * e.dp);
  }
  // Newton sweep above goes from +1 side down; store ascending.
  std::reverse(rule.nodes.begin(), rule.nodes.end());
  std::reverse(rule.weights.begin(), rule.weights.end());
  return rule;
}

GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

namespace {
inline double psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double psi_prime(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
}  // namespace

double bump(double u) {
  const double s = u * u;
  if (s <= 0.25) return 1.0;
  if (s >= 1.0) return 0.0;
  const double a = psi(1.0 - s);
  const double b = psi(s - 0.25);
  return a / (a + b);
}

double bump_derivative(double u) {
  const double s = u * u;
  if (s <= 0.25 || s >= 1.0) return 0.0;
  const double a = psi(1.0 - s), b = psi(s - 0.25);
  const double da = -psi_prime(1.0 - s) * 2.0 * u;
  const double db = psi_prime(s - 0.25) * 2.0 * u;
  return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("fit_slope: need >= 2 points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / x.size(), my = sy / y.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

namespace {

struct PanelResult {
  double coarse, fine;
};

PanelResult panel_eval(const std::function<double(double)>& f, double a, double b,
                       const GaussRule& g7, const GaussRule& g15) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  PanelResult r{0.0, 0.0};
  for (std::size_t i = 0; i < g7.nodes.size(); ++i)
    r.coarse += half * g7.weights[i] * f(mid + half * g7.nodes[i]);
  for (std::size_t i = 0; i < g15.nodes.size(); ++i)
    r.fine += half * g15.weights[i] * f(mid + half * g15.nodes[i]);
  return r;
}

double adaptive_rec(const std::function<double(double)>& f, double a, double b, double tol,
                    const GaussRule& g7, const GaussRule& g15, int depth, int max_depth) {
  const PanelResult r = panel_eval(f, a, b, g7, g15);
  if (depth >= max_depth || std::abs(r.fine - r.coarse) <= tol) return r.fine;
  const double mid = 0.5 * (a + b);
  return adaptive_rec(f, a, mid, tol * 0.5, g7, g15, depth + 1, max_depth) +
         adaptive_rec(f, mid, b, tol * 0.5, g7, g15, depth + 1, max_depth);
}

}  // namespace

double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                     double rel_tol, double abs_tol, int max_depth) {
  static const GaussRule g7 = gauss_legendre(7);
  static const GaussRule g15 = gauss_legendre(15);
  const PanelResult first = panel_eval(f, a, b, g7, g15);
  const double tol = std::max(abs_tol, rel_tol * std::abs(first.fine));
  return adaptive_rec(f, a, b, std::max(tol, 1e-300), g7, g15, 0, max_depth);
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() {
  int n = g_threads.load();
  if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace conicxray
