#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "massop/expr.hpp"

namespace massop {

/// Rejection with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int col)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + what),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

namespace detail {

enum class Tok {
  Number, Ident, Plus, Minus, Slash, Caret, LParen, RParen, LBracket,
  RBracket, LBrace, RBrace, Comma, Underscore, Prime, Dot, Dollar, End
};

struct Token {
  Tok kind;
  std::string text;
  int line = 1;
  int col = 1;
};

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string text, int l, int c) {
    out.push_back({k, std::move(text), l, c});
  };
  while (i < src.size()) {
    char ch = src[i];
    int l = line, c = col;
    if (ch == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::string num;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) {
        num += src[i++];
        ++col;
      }
      push(Tok::Number, num, l, c);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      std::string id;
      while (i < src.size() &&
             std::isalnum(static_cast<unsigned char>(src[i]))) {
        id += src[i++];
        ++col;
      }
      // "a+_" / "da+_" spell daggered operators; fold '+' into the token.
      if ((id == "a" || id == "da") && i + 1 < src.size() && src[i] == '+' &&
          src[i + 1] == '_') {
        id += '+';
        ++i;
        ++col;
      }
      push(Tok::Ident, id, l, c);
      continue;
    }
    Tok k;
    switch (ch) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case '{': k = Tok::LBrace; break;
      case '}': k = Tok::RBrace; break;
      case ',': k = Tok::Comma; break;
      case '_': k = Tok::Underscore; break;
      case '\'': k = Tok::Prime; break;
      case '.': k = Tok::Dot; break;
      case '$': k = Tok::Dollar; break;
      default:
        throw ParseError(std::string("unexpected character '") + ch + "'", l, c);
    }
    push(k, std::string(1, ch), l, c);
    ++i;
    ++col;
  }
  push(Tok::End, "", line, col);
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  Expr run() {
    Expr e = zero_expr();
    bool neg = accept(Tok::Minus);
    e = e + parse_term(neg);
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      bool minus = next().kind == Tok::Minus;
      e = e + parse_term(minus);
    }
    expect(Tok::End, "end of input");
    return e;
  }

 private:
  const Token& peek(int ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok k, const std::string& what) {
    if (peek().kind != k)
      throw ParseError("expected " + what, peek().line, peek().col);
    return toks_[pos_++];
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }

  long long number() {
    const Token& t = expect(Tok::Number, "number");
    return std::stoll(t.text);
  }

  int species() {
    expect(Tok::Underscore, "'_'");
    const Token& t = peek();
    long long s = number();
    if (s < 1 || s > Session::species())
      throw ParseError("species " + std::to_string(s) + " out of 1.." +
                           std::to_string(Session::species()),
                       t.line, t.col);
    return static_cast<int>(s);
  }

  std::string label() {
    if (accept(Tok::Dot)) return kDiscreteLabel;
    const Token& t = expect(Tok::Ident, "label");
    std::string name = t.text;
    while (accept(Tok::Prime)) name += '\'';
    return name;
  }

  MultiIndex axes_list() {
    expect(Tok::LBracket, "'['");
    MultiIndex m = kNoDeriv;
    while (true) {
      const Token& t = peek();
      long long a = number();
      if (a < 1 || a > Session::dimension())
        throw ParseError("axis " + std::to_string(a) + " out of 1.." +
                             std::to_string(Session::dimension()),
                         t.line, t.col);
      m[a - 1] += 1;
      if (!accept(Tok::Comma)) break;
    }
    expect(Tok::RBracket, "']'");
    return m;
  }

  int exponent() {  // optional ^[-]N; defaults to 1
    if (!accept(Tok::Caret)) return 1;
    bool neg = accept(Tok::Minus);
    const Token& t = peek();
    long long v = number();
    if (v == 0) throw ParseError("zero exponent", t.line, t.col);
    return static_cast<int>(neg ? -v : v);
  }

  Scalar parse_simple() {
    if (peek().kind == Tok::Ident && peek().text == "i") {
      next();
      return Scalar::i();
    }
    const Token& t = peek();
    long long n = number();
    Rational r(n);
    if (accept(Tok::Slash)) {
      long long d = number();
      if (d == 0) throw ParseError("zero denominator", t.line, t.col);
      r = Rational(n, d);
    }
    if (peek().kind == Tok::Ident && peek().text == "i") {
      next();
      return Scalar(Rational(0), r);
    }
    return Scalar(r);
  }

  Scalar parse_coeff() {
    if (accept(Tok::LParen)) {
      Scalar s = parse_simple();
      if (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
        bool minus = next().kind == Tok::Minus;
        Scalar s2 = parse_simple();
        s = minus ? s + (-s2) : s + s2;
      }
      expect(Tok::RParen, "')'");
      return s;
    }
    return parse_simple();
  }

  bool at_coeff_start() const {
    const Token& t = peek();
    return t.kind == Tok::Number || t.kind == Tok::LParen ||
           (t.kind == Tok::Ident && t.text == "i");
  }
  bool at_factor_start() const {
    return peek().kind == Tok::Ident || peek().kind == Tok::Dollar;
  }

  Expr parse_term(bool negated) {
    std::vector<std::string> bounds;
    while (peek().kind == Tok::Ident && peek().text == "int") {
      next();
      expect(Tok::LParen, "'('");
      bounds.push_back(label());
      expect(Tok::RParen, "')'");
    }
    Scalar coeff(1);
    bool have_any = false;
    if (at_coeff_start()) {
      coeff = parse_coeff();
      have_any = true;
    }
    Expr acc = make_expr(Term{coeff, {}, {}, {}, {}});
    while (at_factor_start()) {
      acc = acc * parse_factor();
      have_any = true;
    }
    if (!have_any) fail("expected a term");
    if (negated) acc = Scalar(-1) * acc;
    for (const auto& b : bounds) {
      const Token& t = peek();
      try {
        acc = integrate(acc, b);
      } catch (const std::invalid_argument& ex) {
        throw ParseError(ex.what(), t.line, t.col);
      }
    }
    return acc;
  }

  Expr parse_factor() {
    if (accept(Tok::Dollar)) {
      const Token& t = expect(Tok::Ident, "atom name");
      int e = exponent();
      return make_expr(Term{Scalar::atom(t.text, e), {}, {}, {}, {}});
    }
    const Token& head = expect(Tok::Ident, "factor");
    const std::string& id = head.text;
    if (id == "a" || id == "a+" || id == "da" || id == "da+")
      return parse_operator(id, head);
    if (id == "delta") return parse_delta();
    if (id == "k") return parse_component_kernel();
    if (id == "w") return parse_energy_kernel();
    if (id == "fn") return parse_opaque_kernel();
    if (id == "E" || id == "Elow" || id == "Eup") return parse_macro(id);
    throw ParseError("unknown factor '" + id + "'", head.line, head.col);
  }

  Expr parse_operator(const std::string& id, const Token& head) {
    bool dagger = id.back() == '+';
    bool with_deriv = id[0] == 'd';
    int s = species();
    MultiIndex deriv = kNoDeriv;
    if (with_deriv) deriv = axes_list();
    expect(Tok::LParen, "'('");
    std::string l = label();
    expect(Tok::RParen, "')'");
    if (l == kDiscreteLabel && with_deriv)
      throw ParseError("derivative of a discrete operator", head.line, head.col);
    Term t;
    t.ops.push_back({s, dagger, std::move(l), deriv});
    return make_expr(std::move(t));
  }

  Expr parse_delta() {
    expect(Tok::LParen, "'('");
    std::string l1 = label();
    expect(Tok::Comma, "','");
    std::string l2 = label();
    expect(Tok::RParen, "')'");
    MultiIndex deriv = kNoDeriv;
    if (accept(Tok::Prime)) deriv = axes_list();
    Term t;
    t.deltas.push_back({std::move(l1), std::move(l2), deriv});
    return make_expr(std::move(t));
  }

  Expr parse_component_kernel() {
    expect(Tok::LBracket, "'['");
    const Token& t = peek();
    long long a = number();
    if (a < 1 || a > Session::dimension())
      throw ParseError("axis out of range", t.line, t.col);
    expect(Tok::RBracket, "']'");
    expect(Tok::LParen, "'('");
    std::string l = label();
    expect(Tok::RParen, "')'");
    int p = exponent();
    Term term;
    term.kernels.push_back(
        KernelFactor::component(std::move(l), static_cast<int>(a), p));
    return make_expr(std::move(term));
  }

  Expr parse_energy_kernel() {
    int s = species();
    expect(Tok::LParen, "'('");
    std::string l = label();
    expect(Tok::RParen, "')'");
    int p = exponent();
    Term term;
    term.kernels.push_back(KernelFactor::energy(std::move(l), s, p));
    return make_expr(std::move(term));
  }

  Expr parse_opaque_kernel() {
    expect(Tok::Underscore, "'_'");
    const Token& t = expect(Tok::Ident, "profile name");
    MultiIndex deriv = kNoDeriv;
    if (accept(Tok::Prime)) deriv = axes_list();
    expect(Tok::LParen, "'('");
    std::string l = label();
    expect(Tok::RParen, "')'");
    int p = exponent();
    Term term;
    term.kernels.push_back(KernelFactor::opaque(std::move(l), t.text, deriv, p));
    return make_expr(std::move(term));
  }

  Expr parse_macro(const std::string& id) {
    int mu, nu;
    if (id == "E") {
      mu = species();
      expect(Tok::Caret, "'^'");
      const Token& t = peek();
      long long s = number();
      if (s < 1 || s > Session::species())
        throw ParseError("species out of range", t.line, t.col);
      nu = static_cast<int>(s);
    } else {
      if (id == "Elow")
        expect(Tok::Underscore, "'_'");
      else
        expect(Tok::Caret, "'^'");
      expect(Tok::LBrace, "'{'");
      const Token& t1 = peek();
      long long m = number();
      expect(Tok::Comma, "','");
      const Token& t2 = peek();
      long long n = number();
      expect(Tok::RBrace, "'}'");
      if (m < 1 || m > Session::species())
        throw ParseError("species out of range", t1.line, t1.col);
      if (n < 1 || n > Session::species())
        throw ParseError("species out of range", t2.line, t2.col);
      mu = static_cast<int>(m);
      nu = static_cast<int>(n);
    }
    expect(Tok::LParen, "'('");
    std::string l1 = label();
    expect(Tok::Comma, "','");
    std::string l2 = label();
    expect(Tok::RParen, "')'");

    Expr e;
    if (id == "E") {
      // (1/2)[a_mu(l1), a+_nu(l2)]_+
      Term t1;
      t1.coeff = Scalar(Rational(1, 2));
      t1.ops = {ann(mu, l1), cre(nu, l2)};
      Term t2;
      t2.coeff = Scalar(Rational(1, 2));
      t2.ops = {cre(nu, l2), ann(mu, l1)};
      e.terms = {t1, t2};
    } else if (id == "Elow") {
      Term t;
      t.ops = {ann(mu, l1), ann(nu, l2)};
      e.terms = {t};
    } else {
      Term t;
      t.ops = {cre(mu, l1), cre(nu, l2)};
      e.terms = {t};
    }
    return canonicalize(e);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses one expression in the workbench grammar; result is canonical.
inline Expr parse(const std::string& src) { return detail::Parser(src).run(); }

namespace detail {

inline std::string render_rational(const Rational& r) { return r.str(); }

inline void render_axes(std::string& out, const MultiIndex& m) {
  out += '[';
  bool first = true;
  for (int a : axes_of(m)) {
    if (!first) out += ',';
    out += std::to_string(a);
    first = false;
  }
  out += ']';
}

inline void render_exponent(std::string& out, int p) {
  if (p == 1) return;
  out += '^';
  out += std::to_string(p);
}

inline std::string render_term_body(const Term& t, bool& coeff_only) {
  std::vector<std::string> parts;
  for (const auto& b : t.bound) parts.push_back("int(" + b + ")");

  // Sign is handled by the caller; here the coefficient is sign-free.
  const Scalar& c = t.coeff;
  bool has_factors = !t.kernels.empty() || !t.deltas.empty() || !t.ops.empty() ||
                     !c.atoms().empty();
  if (c.im().is_zero()) {
    if (!c.re().is_one() || !has_factors)
      parts.push_back(render_rational(c.re()));
  } else if (c.re().is_zero()) {
    if (!c.im().is_one()) parts.push_back(render_rational(c.im()));
    parts.push_back("i");
  } else {
    std::string lit = "(" + render_rational(c.re());
    Rational im = c.im();
    lit += im < Rational(0) ? " - " : " + ";
    Rational mag = im < Rational(0) ? -im : im;
    if (!mag.is_one()) lit += render_rational(mag) + " ";
    lit += "i)";
    parts.push_back(std::move(lit));
  }
  coeff_only = !has_factors;

  for (const auto& a : c.atoms()) {
    std::string s = "$" + a.name;
    render_exponent(s, a.exp);
    parts.push_back(std::move(s));
  }
  for (const auto& k : t.kernels) {
    std::string s;
    switch (k.kind) {
      case KernelKind::ComponentPower:
        s = "k[" + std::to_string(k.axis) + "](" + k.label + ")";
        break;
      case KernelKind::Energy:
        s = "w_" + std::to_string(k.species) + "(" + k.label + ")";
        break;
      case KernelKind::Opaque:
        s = "fn_" + k.name;
        if (!is_zero(k.deriv)) {
          s += '\'';
          render_axes(s, k.deriv);
        }
        s += "(" + k.label + ")";
        break;
    }
    render_exponent(s, k.power);
    parts.push_back(std::move(s));
  }
  for (const auto& d : t.deltas) {
    std::string s = "delta(" + d.lhs + "," + d.rhs + ")";
    if (!is_zero(d.deriv)) {
      s += '\'';
      render_axes(s, d.deriv);
    }
    parts.push_back(std::move(s));
  }
  for (const auto& op : t.ops) {
    std::string s = op.dagger ? "a+" : "a";
    if (!is_zero(op.deriv)) s = "d" + s;
    s += "_" + std::to_string(op.species);
    if (!is_zero(op.deriv)) render_axes(s, op.deriv);
    s += "(" + op.label + ")";
    parts.push_back(std::move(s));
  }

  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ' ';
    out += parts[i];
  }
  return out;
}

}  // namespace detail

/// Deterministic canonical rendering; parse(render(e)) == e for canonical e.
inline std::string render(const Expr& e) {
  if (e.terms.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : e.terms) {
    const Scalar& c = t.coeff;
    bool neg = !c.re().is_zero() ? c.re() < Rational(0) : c.im() < Rational(0);
    Term u = t;
    if (neg) u.coeff = -u.coeff;
    if (first) {
      if (neg) out += "-";
    } else {
      out += neg ? " - " : " + ";
    }
    bool coeff_only = false;
    out += detail::render_term_body(u, coeff_only);
    first = false;
  }
  return out;
}

}  // namespace massop
