#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "conicxray/errors.hpp"

namespace conicxray {

/// Magnitude used by the step controller; overloaded for dual numbers.
inline double rk45_abs(double x) { return std::abs(x); }

/// Options for the embedded Dormand-Prince 5(4) pair.
struct Rk45Options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_step = 1e-3;
  double max_step = 0.25;
  double min_step = 1e-14;
};

/// One controlled Dormand-Prince step attempt.
/// State must support: size(), operator[], and be copyable.
template <typename State, typename Rhs>
struct Rk45Stepper {
  Rhs rhs;  // rhs(const State&, State& dydt)
  Rk45Options opts;
  double h = 0.0;

  explicit Rk45Stepper(Rhs f, const Rk45Options& o) : rhs(f), opts(o), h(o.initial_step) {}

  // Returns the accepted step size; advances y and t. Throws IntegrationError on
  // step underflow. If t_limit is finite the step is clipped to land on it.
  double step(State& y, double& t, double direction, double t_limit) {
    State k1(y), k2(y), k3(y), k4(y), k5(y), k6(y), k7(y), ytmp(y), y5(y), err(y);
    rhs(y, k1);
    for (int attempt = 0; attempt < 80; ++attempt) {
      double hs = std::min(h, opts.max_step);
      bool clipped = false;
      if (std::isfinite(t_limit)) {
        const double room = (t_limit - t) * direction;
        if (room <= 0) return 0.0;
        if (hs >= room) {
          hs = room;
          clipped = true;
        }
      }
      const double hd = hs * direction;

      auto axpy = [&](State& out, std::initializer_list<std::pair<double, const State*>> terms) {
        for (std::size_t i = 0; i < y.size(); ++i) {
          auto acc = y[i];
          for (const auto& [c, v] : terms) acc += hd * c * (*v)[i];
          out[i] = acc;
        }
      };

      axpy(ytmp, {{1.0 / 5, &k1}});
      rhs(ytmp, k2);
      axpy(ytmp, {{3.0 / 40, &k1}, {9.0 / 40, &k2}});
      rhs(ytmp, k3);
      axpy(ytmp, {{44.0 / 45, &k1}, {-56.0 / 15, &k2}, {32.0 / 9, &k3}});
      rhs(ytmp, k4);
      axpy(ytmp, {{19372.0 / 6561, &k1}, {-25360.0 / 2187, &k2}, {64448.0 / 6561, &k3}, {-212.0 / 729, &k4}});
      rhs(ytmp, k5);
      axpy(ytmp, {{9017.0 / 3168, &k1}, {-355.0 / 33, &k2}, {46732.0 / 5247, &k3}, {49.0 / 176, &k4},
                  {-5103.0 / 18656, &k5}});
      rhs(ytmp, k6);
      axpy(y5, {{35.0 / 384, &k1}, {500.0 / 1113, &k3}, {125.0 / 192, &k4}, {-2187.0 / 6784, &k5},
                {11.0 / 84, &k6}});
      rhs(y5, k7);

      // Embedded 4th-order difference.
      static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                              e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
      double err_norm = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const auto e = hd * e1 * k1[i] + hd * e3 * k3[i] + hd * e4 * k4[i] + hd * e5 * k5[i] +
                       hd * e6 * k6[i] + hd * e7 * k7[i];
        const double sc = opts.abs_tol + opts.rel_tol * std::max(rk45_abs(y[i]), rk45_abs(y5[i]));
        err_norm = std::max(err_norm, rk45_abs(e) / sc);
      }

      if (err_norm <= 1.0) {
        y = y5;
        t += hd;
        const double fac = std::clamp(0.9 * std::pow(std::max(err_norm, 1e-10), -0.2), 0.2, 5.0);
        h = clipped ? std::max(h, hs) : hs * fac;
        return hs;
      }
      h = hs * std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9);
      if (h < opts.min_step)
        throw IntegrationError("rk45: step size underflow", t);
    }
    throw IntegrationError("rk45: no accepted step after 80 attempts", t);
  }

  // Rigid advance of length hs*direction in n_sub equal 5th-order steps (no
  // error control); used for landing exactly on quadrature subnodes inside an
  // already accepted step.
  void rigid_advance(State& y, double hs, double direction, int n_sub) const {
    for (int i = 0; i < n_sub; ++i) rigid_step(y, hs / n_sub, direction);
  }

  void rigid_step(State& y, double hs, double direction) const {
    State k1(y), k2(y), k3(y), k4(y), k5(y), k6(y), ytmp(y);
    const double hd = hs * direction;
    auto axpy = [&](State& out, std::initializer_list<std::pair<double, const State*>> terms) {
      for (std::size_t i = 0; i < y.size(); ++i) {
        auto acc = y[i];
        for (const auto& [c, v] : terms) acc += hd * c * (*v)[i];
        out[i] = acc;
      }
    };
    rhs(y, k1);
    axpy(ytmp, {{1.0 / 5, &k1}});
    rhs(ytmp, k2);
    axpy(ytmp, {{3.0 / 40, &k1}, {9.0 / 40, &k2}});
    rhs(ytmp, k3);
    axpy(ytmp, {{44.0 / 45, &k1}, {-56.0 / 15, &k2}, {32.0 / 9, &k3}});
    rhs(ytmp, k4);
    axpy(ytmp, {{19372.0 / 6561, &k1}, {-25360.0 / 2187, &k2}, {64448.0 / 6561, &k3}, {-212.0 / 729, &k4}});
    rhs(ytmp, k5);
    axpy(ytmp, {{9017.0 / 3168, &k1}, {-355.0 / 33, &k2}, {46732.0 / 5247, &k3}, {49.0 / 176, &k4},
                {-5103.0 / 18656, &k5}});
    rhs(ytmp, k6);
    axpy(y, {{35.0 / 384, &k1}, {500.0 / 1113, &k3}, {125.0 / 192, &k4}, {-2187.0 / 6784, &k5},
             {11.0 / 84, &k6}});
  }
};

}  // namespace conicxray
