#pragma once

// Independent numeric oracle for the symbolic layer: expressions are
// evaluated as operators on an untruncated sparse bosonic Fock space over
// discrete 1-D grid modes. The dictionary is
//     a_s(k_g)        ->  A_{s,g} / sqrt(dk)
//     delta(k_g-k_h)  ->  delta_gh / dk
//     d/dk            ->  periodic central difference
// which satisfies the CCR exactly, so any operator identity produced by
// normal ordering or sifting must hold to rounding error. This file never
// touches the engine's rewrite rules.

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "massop/expr.hpp"

namespace massop::testing {

using Cplx = std::complex<double>;
using Occ = std::vector<int>;            // occupation per mode
using State = std::map<Occ, Cplx>;       // sparse Fock vector

struct OracleGrid {
  int npoints = 6;
  double box = 3.0;  // momenta in [-box, box)
  std::vector<double> masses{1.0, 1.5, 2.3};

  double dk() const { return 2.0 * box / npoints; }
  double momentum(int g) const { return -box + g * dk(); }
  int wrap(int g) const {
    int m = g % npoints;
    return m < 0 ? m + npoints : m;
  }
  int mode(int species, int g) const { return (species - 1) * npoints + g; }
  int total_modes() const { return int(masses.size()) * npoints; }
};

/// Central-difference stencil weights for the r-th derivative, as offsets
/// relative to the evaluation point.
inline std::map<int, double> stencil(int r, double dk) {
  std::map<int, double> w{{0, 1.0}};
  for (int i = 0; i < r; ++i) {
    std::map<int, double> nw;
    for (const auto& [o, v] : w) {
      nw[o + 1] += v / (2.0 * dk);
      nw[o - 1] -= v / (2.0 * dk);
    }
    w = std::move(nw);
  }
  return w;
}

inline void add_scaled(State& dst, const State& src, Cplx c) {
  for (const auto& [occ, v] : src) {
    Cplx& slot = dst[occ];
    slot += c * v;
  }
}

struct ModeOp {
  bool dagger;
  int mode;
};

inline State apply_word(const std::vector<ModeOp>& word, const State& in,
                        int total_modes) {
  State cur = in;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    State next;
    for (const auto& [occ, v] : cur) {
      Occ o = occ;
      if (int(o.size()) < total_modes) o.resize(total_modes, 0);
      int n = o[it->mode];
      if (it->dagger) {
        o[it->mode] = n + 1;
        next[o] += v * std::sqrt(double(n + 1));
      } else {
        if (n == 0) continue;
        o[it->mode] = n - 1;
        next[o] += v * std::sqrt(double(n));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

class FockOracle {
 public:
  explicit FockOracle(OracleGrid grid) : grid_(grid) {
    for (std::size_t i = 0; i < grid_.masses.size(); ++i)
      atoms_["m" + std::to_string(i + 1)] = grid_.masses[i];
  }

  /// Applies the expression to a state, with every free label bound to a
  /// grid index and every bound label summed with weight dk.
  State apply(const Expr& e, const std::map<std::string, int>& assignment,
              const State& in) const {
    State out;
    for (const auto& t : e.terms) {
      auto asg = assignment;
      apply_term(t, asg, in, out, 1.0);
    }
    return out;
  }

  static double max_abs_difference(const State& a, const State& b) {
    double m = 0.0;
    auto scan = [&](const State& x, const State& y) {
      for (const auto& [occ, v] : x) {
        auto it = y.find(occ);
        Cplx w = it == y.end() ? Cplx{} : it->second;
        m = std::max(m, std::abs(v - w));
      }
    };
    scan(a, b);
    scan(b, a);
    return m;
  }

 private:
  void apply_term(const Term& t, std::map<std::string, int>& asg,
                  const State& in, State& out, double weight) const {
    // Integrate bound labels: sum over the grid with weight dk.
    for (const auto& b : t.bound) {
      if (asg.count(b)) continue;
      for (int g = 0; g < grid_.npoints; ++g) {
        asg[b] = g;
        apply_term(t, asg, in, out, weight * grid_.dk());
      }
      asg.erase(b);
      return;
    }

    auto at = [&](const std::string& label) {
      auto it = asg.find(label);
      if (it == asg.end())
        throw std::invalid_argument("unassigned label " + label);
      return it->second;
    };

    Cplx scalar = t.coeff.eval(atoms_) * weight;
    for (const auto& k : t.kernels) scalar *= kernel_value(k, at(k.label));
    for (const auto& d : t.deltas) scalar *= delta_value(d, at(d.lhs), at(d.rhs));
    if (scalar == Cplx{}) return;

    // Expand derivative operators into stencil combinations of modes.
    std::vector<std::vector<std::pair<double, ModeOp>>> choices;
    for (const auto& op : t.ops) {
      if (op.discrete())
        throw std::invalid_argument("fock oracle is continuum-only");
      auto w = stencil(op.deriv[0], grid_.dk());
      if (op.deriv[1] || op.deriv[2])
        throw std::invalid_argument("fock oracle is 1-D");
      std::vector<std::pair<double, ModeOp>> alt;
      int g = at(op.label);
      for (const auto& [o, v] : w)
        alt.push_back({v / std::sqrt(grid_.dk()),
                       ModeOp{op.dagger, grid_.mode(op.species, grid_.wrap(g + o))}});
      choices.push_back(std::move(alt));
    }

    std::vector<ModeOp> word(choices.size(), ModeOp{false, 0});
    expand(choices, 0, scalar, word, in, out);
  }

  void expand(const std::vector<std::vector<std::pair<double, ModeOp>>>& choices,
              std::size_t i, Cplx coeff, std::vector<ModeOp>& word,
              const State& in, State& out) const {
    if (i == choices.size()) {
      add_scaled(out, apply_word(word, in, grid_.total_modes()), coeff);
      return;
    }
    for (const auto& [c, op] : choices[i]) {
      word[i] = op;
      expand(choices, i + 1, coeff * c, word, in, out);
    }
  }

  double kernel_value(const KernelFactor& k, int g) const {
    double kv = grid_.momentum(g);
    switch (k.kind) {
      case KernelKind::ComponentPower:
        return std::pow(kv, k.power);
      case KernelKind::Energy: {
        double m = grid_.masses.at(k.species - 1);
        return std::pow(std::sqrt(kv * kv + m * m), k.power);
      }
      case KernelKind::Opaque:
        throw std::invalid_argument("opaque kernels unsupported in fock oracle");
    }
    return 0.0;
  }

  double delta_value(const DeltaFactor& d, int g, int h) const {
    auto w = stencil(order(d.deriv), grid_.dk());
    double v = 0.0;
    for (const auto& [o, c] : w)
      if (grid_.wrap(g + o) == grid_.wrap(h)) v += c;
    return v / grid_.dk();
  }

  OracleGrid grid_;
  std::map<std::string, double> atoms_;
};

/// Convenience: compares two expressions as operators on a set of probe
/// states under one label assignment. Returns the max absolute deviation.
inline double compare_on_fock(const Expr& lhs, const Expr& rhs,
                              const std::map<std::string, int>& assignment,
                              const OracleGrid& grid) {
  FockOracle oracle(grid);
  std::vector<State> probes;
  probes.push_back({{Occ{}, 1.0}});  // vacuum
  State one;
  one[Occ(grid.total_modes(), 0)] = 0.0;
  for (int m = 0; m < grid.total_modes(); m += grid.npoints / 2 + 1) {
    Occ o(grid.total_modes(), 0);
    o[m] = 1;
    one[o] = 0.5 / (1.0 + m);
  }
  probes.push_back(one);
  State two;
  {
    Occ o(grid.total_modes(), 0);
    o[0] = 2;
    two[o] = 0.8;
    Occ p(grid.total_modes(), 0);
    p[1] = 1;
    if (grid.total_modes() > grid.npoints) p[grid.npoints] = 1;
    two[p] = Cplx(0.1, 0.4);
  }
  probes.push_back(two);

  double worst = 0.0;
  for (const auto& s : probes) {
    State a = oracle.apply(lhs, assignment, s);
    State b = oracle.apply(rhs, assignment, s);
    worst = std::max(worst, FockOracle::max_abs_difference(a, b));
  }
  return worst;
}

}  // namespace massop::testing
