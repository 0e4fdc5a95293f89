#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "massop/expr.hpp"

namespace massop {

/// Normal ordering under the bosonic CCR
///   [a_u(k), a+_v(k')] = delta_uv delta(k - k'),
/// with derivative factors contracting into derivative deltas:
///   [d^a a_u(k), d^b a+_v(k')] = delta_uv (-1)^|b| d^(a+b)/dk^(a+b) delta(k-k').
/// Every daggered factor ends up left of every undaggered one; the value is
/// preserved and the rewrite terminates (each swap lowers the inversion
/// count at fixed or smaller operator count).
inline Expr normal_order(const Expr& e) {
  std::vector<Term> done;
  std::vector<Term> work = canonicalize(e).terms;
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();

    bool has_discrete = false, has_continuum = false;
    for (const auto& op : t.ops) (op.discrete() ? has_discrete : has_continuum) = true;
    if (has_discrete && has_continuum)
      throw std::invalid_argument(
          "mixed discrete/continuum operators in one product");

    std::size_t i = t.ops.size();
    for (std::size_t j = 0; j + 1 < t.ops.size(); ++j) {
      if (!t.ops[j].dagger && t.ops[j + 1].dagger) {
        i = j;
        break;
      }
    }
    if (i == t.ops.size()) {
      done.push_back(std::move(t));
      continue;
    }

    const OperatorFactor a = t.ops[i];      // annihilator
    const OperatorFactor c = t.ops[i + 1];  // creator

    Term swapped = t;
    std::swap(swapped.ops[i], swapped.ops[i + 1]);
    work.push_back(std::move(swapped));

    if (a.species == c.species) {
      Term contraction = t;
      contraction.ops.erase(contraction.ops.begin() + i,
                            contraction.ops.begin() + i + 2);
      if (a.discrete()) {
        work.push_back(std::move(contraction));
      } else {
        if (order(c.deriv) % 2 != 0) contraction.coeff = -contraction.coeff;
        contraction.deltas.push_back({a.label, c.label, a.deriv + c.deriv});
        work.push_back(std::move(contraction));
      }
    }
  }
  return canonicalize(Expr{std::move(done)});
}

/// normal_order(a b + sign b a): sign -1 is the commutator, +1 the
/// anticommutator. Bound labels are hygienically renamed by the product.
inline Expr bracket(const Expr& a, const Expr& b, int sign) {
  if (sign != -1 && sign != 1)
    throw std::invalid_argument("bracket sign must be -1 or +1");
  return normal_order(a * b + Scalar(sign) * (b * a));
}

inline Expr commutator(const Expr& a, const Expr& b) { return bracket(a, b, -1); }
inline Expr anticommutator(const Expr& a, const Expr& b) { return bracket(a, b, 1); }

}  // namespace massop
