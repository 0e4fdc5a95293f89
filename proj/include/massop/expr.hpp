#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "massop/scalar.hpp"
#include "massop/session.hpp"

namespace massop {

/// Derivative orders per momentum component. Components beyond the session
/// dimension must stay zero.
using MultiIndex = std::array<int, 3>;

inline constexpr MultiIndex kNoDeriv{0, 0, 0};

inline int order(const MultiIndex& m) { return m[0] + m[1] + m[2]; }
inline bool is_zero(const MultiIndex& m) { return order(m) == 0; }

inline MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline MultiIndex unit_index(int axis) {
  MultiIndex m{0, 0, 0};
  m[axis - 1] = 1;
  return m;
}

/// Expands a multi-index into its list of axes, lowest axis first,
/// e.g. {2,0,1} -> [1,1,3].
inline std::vector<int> axes_of(const MultiIndex& m) {
  std::vector<int> axes;
  for (int a = 1; a <= 3; ++a)
    for (int r = 0; r < m[a - 1]; ++r) axes.push_back(a);
  return axes;
}

/// The label "." marks a discrete oscillator mode (no momentum argument).
inline const std::string kDiscreteLabel = ".";

/// Creation/annihilation factor a_s(k), a+_s(k) or a derivative thereof.
struct OperatorFactor {
  int species = 1;
  bool dagger = false;
  std::string label;
  MultiIndex deriv = kNoDeriv;

  bool discrete() const { return label == kDiscreteLabel; }

  friend bool operator==(const OperatorFactor&, const OperatorFactor&) = default;
  friend auto operator<=>(const OperatorFactor&, const OperatorFactor&) = default;
};

/// delta(lhs - rhs) with derivatives taken w.r.t. the lhs components.
/// Canonical form keeps lhs <= rhs; a swap contributes (-1)^|deriv|.
struct DeltaFactor {
  std::string lhs;
  std::string rhs;
  MultiIndex deriv = kNoDeriv;

  friend bool operator==(const DeltaFactor&, const DeltaFactor&) = default;
  friend auto operator<=>(const DeltaFactor&, const DeltaFactor&) = default;
};

enum class KernelKind { ComponentPower, Energy, Opaque };

/// Commuting kernel attached to one momentum label:
///   ComponentPower: k_axis^power
///   Energy:         (k^2 + m_species^2)^(power/2)   (power = any integer)
///   Opaque:         named smooth profile, possibly differentiated,
///                   raised to an integer power
struct KernelFactor {
  KernelKind kind = KernelKind::ComponentPower;
  std::string label;
  int axis = 0;          // ComponentPower
  int species = 0;       // Energy
  std::string name;      // Opaque
  MultiIndex deriv = kNoDeriv;  // Opaque
  int power = 1;

  static KernelFactor component(std::string label, int axis, int power = 1) {
    KernelFactor f;
    f.kind = KernelKind::ComponentPower;
    f.label = std::move(label);
    f.axis = axis;
    f.power = power;
    return f;
  }
  static KernelFactor energy(std::string label, int species, int power = 1) {
    KernelFactor f;
    f.kind = KernelKind::Energy;
    f.label = std::move(label);
    f.species = species;
    f.power = power;
    return f;
  }
  static KernelFactor opaque(std::string label, std::string name,
                             MultiIndex deriv = kNoDeriv, int power = 1) {
    KernelFactor f;
    f.kind = KernelKind::Opaque;
    f.label = std::move(label);
    f.name = std::move(name);
    f.deriv = deriv;
    f.power = power;
    return f;
  }

  /// Key identifying mergeable factors (powers add on a match).
  auto merge_key() const {
    return std::tie(label, kind, axis, species, name, deriv);
  }

  friend bool operator==(const KernelFactor&, const KernelFactor&) = default;
  friend auto operator<=>(const KernelFactor&, const KernelFactor&) = default;
};

/// One summand: exact coefficient x commuting kernels x deltas x an ordered
/// operator word, integrated over its own bound labels.
struct Term {
  Scalar coeff = Scalar(1);
  std::vector<KernelFactor> kernels;
  std::vector<DeltaFactor> deltas;
  std::vector<OperatorFactor> ops;
  std::vector<std::string> bound;  // sorted; each occurs in some factor

  friend bool operator==(const Term&, const Term&) = default;
};

/// Sum of terms. Always handled through canonicalize() which merges like
/// terms, fixes factor order, removes zeros and alpha-renames bound labels.
struct Expr {
  std::vector<Term> terms;

  bool empty() const { return terms.empty(); }

  friend bool operator==(const Expr&, const Expr&) = default;
};

// ---------------------------------------------------------------------------
// Label utilities

namespace detail {

template <typename F>
void for_each_label(const Term& t, F&& f) {
  for (const auto& op : t.ops)
    if (!op.discrete()) f(op.label);
  for (const auto& d : t.deltas) {
    f(d.lhs);
    f(d.rhs);
  }
  for (const auto& k : t.kernels) f(k.label);
}

inline std::set<std::string> labels_of(const Term& t) {
  std::set<std::string> s;
  for_each_label(t, [&](const std::string& l) { s.insert(l); });
  return s;
}

inline void rename_label(Term& t, const std::string& from, const std::string& to) {
  for (auto& op : t.ops)
    if (op.label == from) op.label = to;
  for (auto& d : t.deltas) {
    if (d.lhs == from) d.lhs = to;
    if (d.rhs == from) d.rhs = to;
  }
  for (auto& k : t.kernels)
    if (k.label == from) k.label = to;
  for (auto& b : t.bound)
    if (b == from) b = to;
}

}  // namespace detail

inline std::set<std::string> free_labels(const Term& t) {
  auto all = detail::labels_of(t);
  for (const auto& b : t.bound) all.erase(b);
  return all;
}

inline std::set<std::string> free_labels(const Expr& e) {
  std::set<std::string> s;
  for (const auto& t : e.terms) s.merge(free_labels(t));
  return s;
}

// ---------------------------------------------------------------------------
// Canonicalization

namespace detail {

inline auto term_key(const Term& t) {
  // Atoms are part of the monomial, so terms differing only in e.g. m1 vs m2
  // never merge; the Gaussian-rational parts are what addition combines.
  return std::tie(t.ops, t.deltas, t.kernels, t.bound, t.coeff.atoms());
}

inline bool term_less(const Term& a, const Term& b) {
  auto ka = term_key(a), kb = term_key(b);
  if (ka != kb) return ka < kb;
  return std::tie(a.coeff) < std::tie(b.coeff);
}

inline void validate(const Term& t) {
  const int dim = Session::dimension();
  auto check_index = [&](const MultiIndex& m) {
    for (int a = dim; a < 3; ++a)
      if (m[a] != 0)
        throw std::invalid_argument("derivative axis exceeds session dimension");
    for (int a = 0; a < 3; ++a)
      if (m[a] < 0) throw std::invalid_argument("negative derivative order");
  };
  for (const auto& op : t.ops) {
    if (op.species < 1) throw std::invalid_argument("species must be >= 1");
    if (op.discrete() && !is_zero(op.deriv))
      throw std::invalid_argument("discrete operator with derivative index");
    check_index(op.deriv);
  }
  for (const auto& d : t.deltas) {
    if (d.lhs == kDiscreteLabel || d.rhs == kDiscreteLabel)
      throw std::invalid_argument("delta over discrete label");
    check_index(d.deriv);
  }
  for (const auto& k : t.kernels) {
    if (k.label == kDiscreteLabel)
      throw std::invalid_argument("kernel over discrete label");
    if (k.kind == KernelKind::ComponentPower && (k.axis < 1 || k.axis > dim))
      throw std::invalid_argument("kernel axis exceeds session dimension");
    check_index(k.deriv);
  }
  auto all = labels_of(t);
  std::set<std::string> seen;
  for (const auto& b : t.bound) {
    if (!all.count(b))
      throw std::invalid_argument("bound label absent from term: " + b);
    if (!seen.insert(b).second)
      throw std::invalid_argument("duplicate bound label: " + b);
  }
}

/// Merges mergeable kernels (powers add) and drops vanished factors.
inline void merge_kernels(Term& t) {
  std::sort(t.kernels.begin(), t.kernels.end());
  std::vector<KernelFactor> out;
  for (auto& k : t.kernels) {
    if (!out.empty() && out.back().merge_key() == k.merge_key())
      out.back().power += k.power;
    else
      out.push_back(k);
  }
  std::erase_if(out, [](const KernelFactor& k) { return k.power == 0; });
  t.kernels = std::move(out);
}

/// Rewrites one Energy factor with positive even power 2n as
/// (sum_j k_j^2 + m^2) * Energy^(2n-2). Returns the expansion or nullopt
/// when no such factor exists.
inline std::optional<std::vector<Term>> expand_one_energy(const Term& t) {
  const int dim = Session::dimension();
  for (std::size_t i = 0; i < t.kernels.size(); ++i) {
    const auto& k = t.kernels[i];
    if (k.kind != KernelKind::Energy || k.power <= 0 || k.power % 2 != 0)
      continue;
    std::vector<Term> out;
    auto reduced = t;
    if (k.power == 2)
      reduced.kernels.erase(reduced.kernels.begin() + i);
    else
      reduced.kernels[i].power -= 2;
    for (int axis = 1; axis <= dim; ++axis) {
      Term u = reduced;
      u.kernels.push_back(KernelFactor::component(k.label, axis, 2));
      out.push_back(std::move(u));
    }
    Term u = reduced;
    u.coeff *= Scalar::atom("m" + std::to_string(k.species), 2);
    out.push_back(std::move(u));
    return out;
  }
  return std::nullopt;
}

/// Delta swaps, factor sorts, zero-coefficient detection. Assumes kernels
/// are already merged and Energy factors expanded. Operators of equal dagger
/// flag commute exactly (bosons), so each maximal same-dagger run is sorted.
inline void tidy(Term& t) {
  for (auto& d : t.deltas) {
    if (d.rhs < d.lhs) {
      std::swap(d.lhs, d.rhs);
      if (order(d.deriv) % 2 != 0) t.coeff = -t.coeff;
    }
  }
  std::sort(t.deltas.begin(), t.deltas.end());
  std::sort(t.kernels.begin(), t.kernels.end());
  std::sort(t.bound.begin(), t.bound.end());
  auto run = t.ops.begin();
  while (run != t.ops.end()) {
    auto end = run + 1;
    while (end != t.ops.end() && end->dagger == run->dagger) ++end;
    std::sort(run, end);
    run = end;
  }
}

/// Canonical bound-label names b1, b2, ... skipping any free label of the
/// term that already uses one of those names.
inline std::vector<std::string> canonical_bound_names(const Term& t, std::size_t n) {
  auto taken = free_labels(t);
  std::vector<std::string> names;
  for (int i = 1; names.size() < n; ++i) {
    std::string cand = "b" + std::to_string(i);
    if (!taken.count(cand)) names.push_back(std::move(cand));
  }
  return names;
}

constexpr std::size_t kBoundPermutationLimit = 7;

/// Renames bound labels to the canonical b1..bn assignment that minimizes
/// the term key. Returns nullopt when the term is antisymmetric under a
/// bound-label permutation (the integral vanishes identically).
inline std::optional<Term> canonicalize_bound(Term t) {
  tidy(t);
  if (t.coeff.is_zero()) return std::nullopt;
  if (t.bound.empty()) return t;

  const auto names = canonical_bound_names(t, t.bound.size());
  const auto bound = t.bound;

  auto apply = [&](const std::vector<std::size_t>& perm) {
    Term u = t;
    // Two-phase rename: bound labels may already use target names.
    for (std::size_t j = 0; j < bound.size(); ++j)
      rename_label(u, bound[j], "\x01tmp" + std::to_string(j));
    for (std::size_t j = 0; j < bound.size(); ++j)
      rename_label(u, "\x01tmp" + std::to_string(j), names[perm[j]]);
    tidy(u);
    return u;
  };

  std::vector<std::size_t> perm(bound.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  if (bound.size() > kBoundPermutationLimit) return apply(perm);

  std::optional<Term> best;
  do {
    Term cand = apply(perm);
    if (!best) {
      best = std::move(cand);
      continue;
    }
    if (term_key(cand) == term_key(*best) && !(cand.coeff == best->coeff)) {
      // t = -t under a dummy-label permutation: the term is zero.
      return std::nullopt;
    }
    if (term_less(cand, *best)) best = std::move(cand);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

/// Canonical form: validated, Energy^2n expanded, kernels merged, deltas in
/// lhs <= rhs order, bound labels alpha-renamed, like terms merged, zero
/// terms removed, terms sorted. Idempotent.
inline Expr canonicalize(const Expr& e) {
  std::vector<Term> flat;
  std::vector<Term> work = e.terms;
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();
    detail::validate(t);
    if (t.coeff.is_zero()) continue;
    detail::merge_kernels(t);
    if (auto expansion = detail::expand_one_energy(t)) {
      for (auto& u : *expansion) work.push_back(std::move(u));
      continue;
    }
    if (auto canon = detail::canonicalize_bound(std::move(t)))
      flat.push_back(std::move(*canon));
  }

  std::sort(flat.begin(), flat.end(), detail::term_less);
  std::vector<Term> merged;
  for (auto& t : flat) {
    if (!merged.empty() && detail::term_key(merged.back()) == detail::term_key(t))
      merged.back().coeff = merged.back().coeff + t.coeff;
    else
      merged.push_back(std::move(t));
  }
  std::erase_if(merged, [](const Term& t) { return t.coeff.is_zero(); });
  return Expr{std::move(merged)};
}

// ---------------------------------------------------------------------------
// Arithmetic

inline Expr operator+(const Expr& a, const Expr& b) {
  Expr r = a;
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  return canonicalize(r);
}

inline Expr operator-(const Expr& a, const Expr& b) {
  Expr r = a;
  for (auto t : b.terms) {
    t.coeff = -t.coeff;
    r.terms.push_back(std::move(t));
  }
  return canonicalize(r);
}

inline Expr operator*(const Scalar& c, const Expr& e) {
  Expr r = e;
  for (auto& t : r.terms) t.coeff *= c;
  return canonicalize(r);
}

namespace detail {

/// Product of two terms with bound-label hygiene: every bound label on
/// either side is first moved to a fresh name so that no capture can occur.
inline Term term_product(const Term& a, const Term& b) {
  Term ta = a, tb = b;
  std::set<std::string> used;
  for_each_label(ta, [&](const std::string& l) { used.insert(l); });
  for_each_label(tb, [&](const std::string& l) { used.insert(l); });

  int counter = 0;
  auto fresh = [&] {
    std::string n;
    do {
      n = "\x01u" + std::to_string(counter++);
    } while (used.count(n));
    used.insert(n);
    return n;
  };
  for (const auto& bl : std::vector<std::string>(ta.bound))
    rename_label(ta, bl, fresh());
  for (const auto& bl : std::vector<std::string>(tb.bound))
    rename_label(tb, bl, fresh());

  Term r;
  r.coeff = ta.coeff * tb.coeff;
  r.kernels = ta.kernels;
  r.kernels.insert(r.kernels.end(), tb.kernels.begin(), tb.kernels.end());
  r.deltas = ta.deltas;
  r.deltas.insert(r.deltas.end(), tb.deltas.begin(), tb.deltas.end());
  r.ops = ta.ops;
  r.ops.insert(r.ops.end(), tb.ops.begin(), tb.ops.end());
  r.bound = ta.bound;
  r.bound.insert(r.bound.end(), tb.bound.begin(), tb.bound.end());
  return r;
}

}  // namespace detail

/// Non-commutative operator product (a's factors left of b's).
inline Expr operator*(const Expr& a, const Expr& b) {
  Expr r;
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms)
      r.terms.push_back(detail::term_product(ta, tb));
  return canonicalize(r);
}

/// Syntactic equality after canonicalization (not equality modulo CCR).
inline bool exprs_equal(const Expr& a, const Expr& b) {
  return (a - b).empty();
}

// ---------------------------------------------------------------------------
// Formal differentiation (product rule over every factor carrying the label)

namespace detail {

/// d/d(label_axis) of a single term; the label may be free or bound-victim
/// during sifting. Returns the sum of product-rule contributions.
inline std::vector<Term> term_derivative(const Term& t, const std::string& label,
                                         int axis) {
  std::vector<Term> out;
  for (std::size_t i = 0; i < t.ops.size(); ++i) {
    if (t.ops[i].label != label) continue;
    Term u = t;
    u.ops[i].deriv[axis - 1] += 1;
    out.push_back(std::move(u));
  }
  for (std::size_t i = 0; i < t.deltas.size(); ++i) {
    const auto& d = t.deltas[i];
    if (d.lhs == d.rhs) continue;  // delta(0): constant in every label
    if (d.lhs == label) {
      Term u = t;
      u.deltas[i].deriv[axis - 1] += 1;
      out.push_back(std::move(u));
    } else if (d.rhs == label) {
      Term u = t;
      u.deltas[i].deriv[axis - 1] += 1;
      u.coeff = -u.coeff;
      out.push_back(std::move(u));
    }
  }
  for (std::size_t i = 0; i < t.kernels.size(); ++i) {
    const auto& k = t.kernels[i];
    if (k.label != label) continue;
    switch (k.kind) {
      case KernelKind::ComponentPower: {
        if (k.axis != axis) break;
        Term u = t;
        u.coeff *= Scalar(k.power);
        if (k.power == 1)
          u.kernels.erase(u.kernels.begin() + i);
        else
          u.kernels[i].power -= 1;
        out.push_back(std::move(u));
        break;
      }
      case KernelKind::Energy: {
        // d/dk_l (k^2+m^2)^(n/2) = n k_l (k^2+m^2)^((n-2)/2)
        Term u = t;
        u.coeff *= Scalar(k.power);
        if (k.power == 2)
          u.kernels.erase(u.kernels.begin() + i);
        else
          u.kernels[i].power -= 2;
        u.kernels.push_back(KernelFactor::component(label, axis, 1));
        out.push_back(std::move(u));
        break;
      }
      case KernelKind::Opaque: {
        Term u = t;
        auto dk = k;
        dk.deriv[axis - 1] += 1;
        dk.power = 1;
        if (k.power == 1)
          u.kernels[i] = dk;
        else {
          u.coeff *= Scalar(k.power);
          u.kernels[i].power -= 1;
          u.kernels.push_back(dk);
        }
        out.push_back(std::move(u));
        break;
      }
    }
  }
  return out;
}

inline std::vector<Term> term_derivative(const Term& t, const std::string& label,
                                         const MultiIndex& idx) {
  std::vector<Term> cur{t};
  for (int axis : axes_of(idx)) {
    std::vector<Term> next;
    for (const auto& u : cur) {
      auto d = term_derivative(u, label, axis);
      next.insert(next.end(), d.begin(), d.end());
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace detail

/// d/d(label_axis). The label must be free in the expression.
inline Expr formal_derivative(const Expr& e, const std::string& label, int axis) {
  for (const auto& t : e.terms)
    if (std::find(t.bound.begin(), t.bound.end(), label) != t.bound.end())
      throw std::invalid_argument("cannot differentiate in bound label " + label);
  Expr r;
  for (const auto& t : e.terms) {
    auto d = detail::term_derivative(t, label, axis);
    r.terms.insert(r.terms.end(), d.begin(), d.end());
  }
  return canonicalize(r);
}

// ---------------------------------------------------------------------------
// Integration: bound labels and delta sifting

/// Marks a free label as integrated over. Every term must contain it.
inline Expr integrate(const Expr& e, const std::string& label) {
  Expr r = e;
  for (auto& t : r.terms) {
    if (!free_labels(t).count(label))
      throw std::invalid_argument("integration label absent or already bound: " +
                                  label);
    t.bound.push_back(label);
  }
  return canonicalize(r);
}

inline Expr integrate(const Expr& e, std::initializer_list<std::string> labels) {
  Expr r = e;
  for (const auto& l : labels) r = integrate(r, l);
  return r;
}

/// Eliminates every delta that pairs a bound label with a distinct partner,
/// via int dq delta(k-q) f(q) = f(k); derivative deltas resolve through
/// integration by parts. Non-removable deltas stay.
inline Expr apply_sifting(const Expr& e) {
  std::vector<Term> done;
  std::vector<Term> work = canonicalize(e).terms;
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();

    std::size_t di = t.deltas.size();
    std::string victim, partner;
    for (std::size_t i = 0; i < t.deltas.size() && di == t.deltas.size(); ++i) {
      const auto& d = t.deltas[i];
      if (d.lhs == d.rhs) continue;
      bool lb = std::find(t.bound.begin(), t.bound.end(), d.lhs) != t.bound.end();
      bool rb = std::find(t.bound.begin(), t.bound.end(), d.rhs) != t.bound.end();
      if (!lb && !rb) continue;
      di = i;
      // Substitute toward the free (or lhs) side.
      victim = lb ? d.lhs : d.rhs;
      partner = lb ? d.rhs : d.lhs;
    }
    if (di == t.deltas.size()) {
      done.push_back(std::move(t));
      continue;
    }

    const DeltaFactor d = t.deltas[di];
    const bool victim_is_lhs = (victim == d.lhs);
    Term rest = t;
    rest.deltas.erase(rest.deltas.begin() + di);
    std::erase(rest.bound, victim);

    std::vector<Term> pieces;
    if (is_zero(d.deriv)) {
      pieces.push_back(std::move(rest));
    } else {
      // int dq d^g/dq^g delta(q-p) R(q) = (-1)^|g| [d^g R/dq^g]_{q=p};
      // with derivatives on the lhs stored convention, the rhs-victim case
      // carries no sign.
      pieces = detail::term_derivative(rest, victim, d.deriv);
      if (victim_is_lhs && order(d.deriv) % 2 != 0)
        for (auto& p : pieces) p.coeff = -p.coeff;
    }
    for (auto& p : pieces) {
      detail::rename_label(p, victim, partner);
      work.push_back(std::move(p));
    }
  }
  return canonicalize(Expr{std::move(done)});
}

// ---------------------------------------------------------------------------
// Small builders used across the workbench and the tests

inline OperatorFactor ann(int species, std::string label,
                          MultiIndex deriv = kNoDeriv) {
  return {species, false, std::move(label), deriv};
}
inline OperatorFactor cre(int species, std::string label,
                          MultiIndex deriv = kNoDeriv) {
  return {species, true, std::move(label), deriv};
}

inline Expr make_expr(Term t) { return canonicalize(Expr{{std::move(t)}}); }

inline Expr make_word(Scalar coeff, std::vector<OperatorFactor> ops) {
  Term t;
  t.coeff = std::move(coeff);
  t.ops = std::move(ops);
  return make_expr(std::move(t));
}

inline Expr zero_expr() { return Expr{}; }

inline Expr one_expr() {
  Term t;
  t.coeff = Scalar(1);
  return Expr{{t}};
}

}  // namespace massop
