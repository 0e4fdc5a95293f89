#pragma once

// Scalar-function oracle for the delta calculus, 1-D: deltas become narrow
// Gaussians, operator factors become fixed smooth Gaussian test functions,
// bound labels become numerical integrals. Sifting must preserve the value
// to O(sigma^2). Derivatives of the Gaussian kernels use the probabilists'
// Hermite recurrence, so no finite differencing enters anywhere.

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>

#include "massop/expr.hpp"

namespace massop::testing {

/// n-th derivative of exp(-(x-c)^2 / (2 s^2)) / norm, exact.
inline double gaussian_deriv(double x, double c, double s, int n,
                             bool normalized) {
  double t = (x - c) / s;
  // He_n via recurrence; d^n/dx^n G = (-1)^n He_n(t) / s^n * G.
  double h0 = 1.0, h1 = t;
  double hn = n == 0 ? h0 : h1;
  for (int k = 2; k <= n; ++k) {
    double h2 = t * h1 - (k - 1) * h0;
    h0 = h1;
    h1 = h2;
    hn = h2;
  }
  if (n == 0) hn = 1.0;
  double g = std::exp(-0.5 * t * t);
  if (normalized) g /= s * std::sqrt(2.0 * M_PI);
  double sign = (n % 2 == 0) ? 1.0 : -1.0;
  return sign * hn / std::pow(s, n) * g;
}

struct MollifierConfig {
  double sigma = 5e-4;               // delta mollification width
  double global_halfwidth = 8.0;     // window for non-localized integrals
  int panels = 4000;                 // Simpson panels per 1-D integral
  std::map<std::string, double> atoms{{"m1", 1.0}, {"m2", 1.5}, {"m3", 2.3}};
};

class MollifierOracle {
 public:
  explicit MollifierOracle(MollifierConfig cfg = {}) : cfg_(cfg) {}

  /// Numeric value of a 1-D expression with all free labels bound to points.
  std::complex<double> eval(const Expr& e,
                            const std::map<std::string, double>& frees) const {
    std::complex<double> total = 0.0;
    for (const auto& t : e.terms) {
      auto asg = frees;
      total += eval_term(t, asg);
    }
    return total;
  }

 private:
  std::complex<double> eval_term(const Term& t,
                                 std::map<std::string, double>& asg) const {
    // Pick the next unassigned bound label, preferring one localized by a
    // delta whose partner is already assigned.
    const std::string* next = nullptr;
    double center = 0.0;
    bool localized = false;
    for (const auto& b : t.bound) {
      if (asg.count(b)) continue;
      if (!next) next = &b;
      for (const auto& d : t.deltas) {
        const bool hit_l = d.lhs == b && asg.count(d.rhs);
        const bool hit_r = d.rhs == b && asg.count(d.lhs);
        if (hit_l || hit_r) {
          next = &b;
          center = asg.at(hit_l ? d.rhs : d.lhs);
          localized = true;
          break;
        }
      }
      if (localized) break;
    }
    if (!next) return concrete_value(t, asg);

    const double hw = localized ? 14.0 * cfg_.sigma : cfg_.global_halfwidth;
    const double lo = (localized ? center : 0.0) - hw;
    const int n = cfg_.panels;  // Simpson: even panel count
    const double h = 2.0 * hw / n;
    std::complex<double> sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      asg[*next] = lo + i * h;
      double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      sum += w * eval_term(t, asg);
    }
    asg.erase(*next);
    return sum * (h / 3.0);
  }

  std::complex<double> concrete_value(const Term& t,
                                      const std::map<std::string, double>& asg) const {
    auto at = [&](const std::string& l) {
      auto it = asg.find(l);
      if (it == asg.end()) throw std::invalid_argument("unassigned label " + l);
      return it->second;
    };
    std::complex<double> v = t.coeff.eval(cfg_.atoms);
    for (const auto& d : t.deltas)
      v *= gaussian_deriv(at(d.lhs), at(d.rhs), cfg_.sigma, order(d.deriv), true);
    for (const auto& k : t.kernels) v *= kernel_value(k, at(k.label));
    for (const auto& op : t.ops) {
      // Smooth stand-in u_{s,dagger}: unit-width Gaussian with a center
      // depending on species and dagger flag. Noncommutativity is irrelevant
      // here; sifting never reorders the word.
      double c = 0.37 * op.species + (op.dagger ? 0.21 : -0.13);
      v *= gaussian_deriv(at(op.label), c, 1.0, order(op.deriv), false);
    }
    return v;
  }

  double kernel_value(const KernelFactor& k, double x) const {
    switch (k.kind) {
      case KernelKind::ComponentPower:
        return std::pow(x, k.power);
      case KernelKind::Energy: {
        double m = cfg_.atoms.at("m" + std::to_string(k.species));
        return std::pow(std::sqrt(x * x + m * m), k.power);
      }
      case KernelKind::Opaque: {
        double c = 0.05 * double((k.name.empty() ? 0 : k.name[0]) % 7) - 0.1;
        return std::pow(gaussian_deriv(x, c, 1.0, order(k.deriv), false), k.power);
      }
    }
    return 0.0;
  }

  MollifierConfig cfg_;
};

}  // namespace massop::testing
