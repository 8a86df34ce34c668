#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "xmed/errors.hpp"
#include "xmed/grid.hpp"

namespace xmed {

// Two-variable FitzHugh-Nagumo kinetics. Units are fixed: time in ms, space
// in mm, diffusivities in mm^2/ms.
//
// cubic_sign selects the sign of the u^3/3 term in f. The default -1 is the
// standard FitzHugh form u - u^3/3 - v, which is the excitable regime; +1 is
// selectable for fidelity experiments.
struct FhnParams {
  double epsilon = 0.3;
  double a = 0.5;
  double b = 0.68;
  int cubic_sign = -1;
  double d_u = 1.0;  // mm^2/ms
  double d_v = 0.0;  // mm^2/ms

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("model: epsilon must be > 0");
    if (cubic_sign != 1 && cubic_sign != -1)
      throw ConfigError("model: cubic_sign must be +1 or -1");
    if (d_u < 0.0 || d_v < 0.0)
      throw ConfigError("model: diffusivities must be >= 0");
  }
};

struct StatePair {
  double u = 0.0;
  double v = 0.0;
};

// Time derivatives (f, g) in ms^-1:
//   f = (u + cubic_sign * u^3/3 - v) / epsilon
//   g = epsilon * (u - a*v + b)
inline StatePair reaction(const FhnParams& p, const StatePair& s) {
  StatePair d;
  d.u = (1.0 / p.epsilon) *
        (s.u + static_cast<double>(p.cubic_sign) * (s.u * s.u * s.u) * (1.0 / 3.0) -
         s.v);
  d.v = p.epsilon * (s.u - p.a * s.v + p.b);
  return d;
}

// Root of f = g = 0. Eliminating v via g = 0 (v = (u+b)/a) reduces the
// system to a scalar cubic in u; solved by damped Newton with a bisection
// fallback on an expanding bracket.
inline StatePair resting_state(const FhnParams& p) {
  p.validate();
  if (p.a == 0.0) throw NumericsError("resting_state: a must be nonzero");
  const double s = static_cast<double>(p.cubic_sign);
  auto phi = [&](double u) { return u + s * u * u * u / 3.0 - (u + p.b) / p.a; };
  auto dphi = [&](double u) { return 1.0 + s * u * u - 1.0 / p.a; };

  // bracket a sign change
  double lo = -1.0, hi = 1.0;
  int expand = 0;
  while (phi(lo) * phi(hi) > 0.0) {
    lo *= 2.0;
    hi *= 2.0;
    if (++expand > 60)
      throw NumericsError("resting_state: failed to bracket a root");
  }
  if (phi(lo) == 0.0) return {lo, (lo + p.b) / p.a};
  if (phi(hi) == 0.0) return {hi, (hi + p.b) / p.a};

  // keep phi(lo) and phi(hi) of opposite sign throughout
  bool lo_negative = phi(lo) < 0.0;
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = phi(u);
    if (f == 0.0) break;
    if ((f < 0.0) == lo_negative)
      lo = u;
    else
      hi = u;
    const double d = dphi(u);
    double next = d != 0.0 ? u - f / d : 0.5 * (lo + hi);
    if (!(next > std::min(lo, hi) && next < std::max(lo, hi)))
      next = 0.5 * (lo + hi);
    if (next == u) break;
    u = next;
  }

  StatePair rest{u, (u + p.b) / p.a};
  const StatePair r = reaction(p, rest);
  if (std::hypot(r.u, r.v) > 1e-12)
    throw NumericsError("resting_state: no convergence, residual " +
                        std::to_string(std::hypot(r.u, r.v)) + " at u=" +
                        std::to_string(u));
  return rest;
}

// Explicit-Euler diffusion stability bound h^2 / (2 N max(d_u, d_v)).
// Unbounded (infinity) when nothing diffuses.
inline double stability_limit(const FhnParams& p, const GridSpec& grid) {
  const double dmax = std::max(p.d_u, p.d_v);
  if (dmax == 0.0) return std::numeric_limits<double>::infinity();
  return grid.spacing() * grid.spacing() / (2.0 * grid.ndim() * dmax);
}

}  // namespace xmed
