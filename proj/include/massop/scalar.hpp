#pragma once

#include <algorithm>
#include <complex>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "massop/rational.hpp"

namespace massop {

/// Opaque real symbol raised to an integer power, e.g. ("m1", 2) for m_1^2.
struct Atom {
  std::string name;
  int exp = 0;

  friend bool operator==(const Atom&, const Atom&) = default;
  friend auto operator<=>(const Atom&, const Atom&) = default;
};

/// Exact coefficient: Gaussian rational times a monomial in opaque real
/// symbols. Atoms are sorted by name, zero exponents removed, and a zero
/// value carries no atoms.
class Scalar {
 public:
  Scalar() = default;
  Scalar(std::int64_t n) : re_(n) {}
  Scalar(Rational re) : re_(std::move(re)) {}
  Scalar(Rational re, Rational im) : re_(std::move(re)), im_(std::move(im)) {}

  static Scalar i() { return Scalar(Rational(0), Rational(1)); }

  static Scalar atom(std::string name, int exp = 1) {
    Scalar s(1);
    if (exp != 0) s.atoms_.push_back({std::move(name), exp});
    return s;
  }

  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  bool is_zero() const { return re_.is_zero() && im_.is_zero(); }
  bool is_one() const { return re_.is_one() && im_.is_zero() && atoms_.empty(); }
  bool is_real() const { return im_.is_zero(); }

  friend Scalar operator*(const Scalar& a, const Scalar& b) {
    Scalar r(a.re_ * b.re_ - a.im_ * b.im_, a.re_ * b.im_ + a.im_ * b.re_);
    if (r.is_zero()) return r;
    r.atoms_ = merge_atoms(a.atoms_, b.atoms_);
    return r;
  }
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }

  Scalar operator-() const {
    Scalar r = *this;
    r.re_ = -r.re_;
    r.im_ = -r.im_;
    return r;
  }

  /// Sum of the Gaussian-rational parts. Only defined for equal monomials;
  /// terms with different atoms never merge.
  friend Scalar operator+(const Scalar& a, const Scalar& b) {
    if (a.atoms_ != b.atoms_ && !a.is_zero() && !b.is_zero())
      throw std::logic_error("scalar addition across distinct monomials");
    Scalar r(a.re_ + b.re_, a.im_ + b.im_);
    if (!r.is_zero()) r.atoms_ = a.is_zero() ? b.atoms_ : a.atoms_;
    return r;
  }

  friend bool operator==(const Scalar&, const Scalar&) = default;
  friend auto operator<=>(const Scalar&, const Scalar&) = default;

  /// Numeric value with every atom bound. Throws on an unbound atom.
  std::complex<double> eval(const std::map<std::string, double>& bindings) const {
    double mono = 1.0;
    for (const auto& a : atoms_) {
      auto it = bindings.find(a.name);
      if (it == bindings.end())
        throw std::invalid_argument("unbound atom: " + a.name);
      mono *= std::pow(it->second, a.exp);
    }
    return {re_.to_double() * mono, im_.to_double() * mono};
  }

 private:
  static std::vector<Atom> merge_atoms(const std::vector<Atom>& a,
                                       const std::vector<Atom>& b) {
    std::vector<Atom> out;
    auto ia = a.begin(), ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
      if (ib == b.end() || (ia != a.end() && ia->name < ib->name)) {
        out.push_back(*ia++);
      } else if (ia == a.end() || ib->name < ia->name) {
        out.push_back(*ib++);
      } else {
        int e = ia->exp + ib->exp;
        if (e != 0) out.push_back({ia->name, e});
        ++ia;
        ++ib;
      }
    }
    return out;
  }

  Rational re_;
  Rational im_;
  std::vector<Atom> atoms_;
};

}  // namespace massop
