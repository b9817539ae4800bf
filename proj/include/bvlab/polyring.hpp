#ifndef BVLAB_POLYRING_HPP
#define BVLAB_POLYRING_HPP

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/rational.hpp"

namespace bvlab {

using Exponent = std::vector<int>;

enum class MonomialOrder { Grevlex, Lex };

/** \brief True when a > b in the given order. */
inline bool order_greater(const Exponent& a, const Exponent& b, MonomialOrder ord)
{
  if (ord == MonomialOrder::Lex) return a > b;
  int da = 0, db = 0;
  for (int e : a) da += e;
  for (int e : b) db += e;
  if (da != db) return da > db;
  for (std::size_t i = a.size(); i-- > 0;)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

inline bool exp_divides(const Exponent& a, const Exponent& b)
{
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

inline Exponent exp_lcm(const Exponent& a, const Exponent& b)
{
  Exponent r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = std::max(a[i], b[i]);
  return r;
}

/** \brief Sparse polynomial in nvars variables with rational coefficients. */
class MPoly {
 public:
  using TermMap = std::map<Exponent, Rational>;

  explicit MPoly(int nvars = 0) : n_(nvars)
  {
    if (nvars < 0) throw InputError("negative variable count");
  }

  static MPoly constant(int nvars, const Rational& c)
  {
    MPoly p(nvars);
    p.add_term(Exponent(nvars, 0), c);
    return p;
  }
  static MPoly var(int nvars, int i, int power = 1)
  {
    MPoly p(nvars);
    Exponent e(nvars, 0);
    e.at(i) = power;
    p.add_term(e, Rational(1));
    return p;
  }
  static MPoly monomial(const Exponent& e, const Rational& c)
  {
    MPoly p(static_cast<int>(e.size()));
    p.add_term(e, c);
    return p;
  }

  int nvars() const { return n_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  void add_term(const Exponent& e, const Rational& c)
  {
    if (static_cast<int>(e.size()) != n_) throw InputError("exponent length mismatch");
    if (c == 0) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      terms_.emplace(e, c);
    } else {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Rational coeff(const Exponent& e) const
  {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  int total_degree() const
  {
    int d = -1;
    for (const auto& [e, c] : terms_) {
      int s = 0;
      for (int x : e) s += x;
      d = std::max(d, s);
    }
    return d;
  }

  const Exponent& leading_exponent(MonomialOrder ord = MonomialOrder::Grevlex) const
  {
    if (terms_.empty()) throw DomainError("leading term of the zero polynomial");
    auto best = terms_.begin();
    for (auto it = std::next(best); it != terms_.end(); ++it)
      if (order_greater(it->first, best->first, ord)) best = it;
    return best->first;
  }
  const Rational& leading_coeff(MonomialOrder ord = MonomialOrder::Grevlex) const
  {
    return terms_.at(leading_exponent(ord));
  }

  MPoly& operator+=(const MPoly& o)
  {
    check(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  MPoly& operator-=(const MPoly& o)
  {
    check(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  MPoly& operator*=(const Rational& s)
  {
    if (s == 0) terms_.clear();
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }
  friend MPoly operator+(MPoly a, const MPoly& b) { return a += b; }
  friend MPoly operator-(MPoly a, const MPoly& b) { return a -= b; }
  friend MPoly operator*(MPoly a, const Rational& s) { return a *= s; }
  friend MPoly operator*(const Rational& s, MPoly a) { return a *= s; }
  MPoly operator-() const { return *this * Rational(-1); }

  friend MPoly operator*(const MPoly& a, const MPoly& b)
  {
    a.check(b);
    MPoly r(a.n_);
    Exponent e(a.n_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        for (int i = 0; i < a.n_; ++i) e[i] = ea[i] + eb[i];
        r.add_term(e, ca * cb);
      }
    return r;
  }

  /** \brief Multiply by c * x^e. */
  MPoly mul_term(const Exponent& e, const Rational& c) const
  {
    MPoly r(n_);
    if (c == 0) return r;
    Exponent f(n_);
    for (const auto& [ea, ca] : terms_) {
      for (int i = 0; i < n_; ++i) f[i] = ea[i] + e[i];
      r.terms_.emplace_hint(r.terms_.end(), f, ca * c);
    }
    return r;
  }

  bool operator==(const MPoly& o) const { return n_ == o.n_ && terms_ == o.terms_; }

  Rational evaluate(const std::vector<Rational>& x) const
  {
    if (static_cast<int>(x.size()) != n_) throw InputError("evaluation point has wrong length");
    Rational r = 0;
    for (const auto& [e, c] : terms_) {
      Rational t = c;
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < e[i]; ++k) t *= x[i];
      r += t;
    }
    return r;
  }

  MPoly derivative(int i) const
  {
    MPoly r(n_);
    for (const auto& [e, c] : terms_)
      if (e.at(i) > 0) {
        Exponent f = e;
        --f[i];
        r.add_term(f, c * e[i]);
      }
    return r;
  }

  MPoly pow(int k) const
  {
    if (k < 0) throw InputError("negative polynomial power");
    MPoly r = constant(n_, 1), b = *this;
    while (k) {
      if (k & 1) r = r * b;
      k >>= 1;
      if (k) b = b * b;
    }
    return r;
  }

 private:
  void check(const MPoly& o) const
  {
    if (n_ != o.n_) throw InputError("polynomials have different variable counts");
  }

  int n_;
  TermMap terms_;
};

/** \brief Terms in descending grevlex order, e.g. "3/2*x^2*y - z". */
inline std::string to_string(const MPoly& p, const std::vector<std::string>& vars)
{
  if (static_cast<int>(vars.size()) != p.nvars()) throw InputError("variable name count mismatch");
  if (p.is_zero()) return "0";
  std::vector<std::pair<Exponent, Rational>> ts(p.terms().begin(), p.terms().end());
  std::sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) {
    return order_greater(a.first, b.first, MonomialOrder::Grevlex);
  });
  std::string out;
  bool first = true;
  for (const auto& [e, c] : ts) {
    Rational a = abs(c);
    if (first)
      out += c < 0 ? "-" : "";
    else
      out += c < 0 ? " - " : " + ";
    first = false;
    std::string mono;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e[i]) continue;
      if (!mono.empty()) mono += "*";
      mono += vars[i];
      if (e[i] > 1) mono += "^" + std::to_string(e[i]);
    }
    if (mono.empty())
      out += a.get_str();
    else if (a == 1)
      out += mono;
    else
      out += a.get_str() + "*" + mono;
  }
  return out;
}

namespace detail {

class PolyParser {
 public:
  PolyParser(const std::string& s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

  MPoly parse()
  {
    MPoly p = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return p;
  }

 private:
  int n() const { return static_cast<int>(vars_.size()); }

  [[noreturn]] void fail(const std::string& msg) const
  {
    throw InputError("polynomial parse error at position " + std::to_string(i_) + ": " + msg);
  }

  void skip()
  {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  bool eat(char c)
  {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  MPoly expr()
  {
    MPoly p = term();
    for (;;) {
      if (eat('+'))
        p += term();
      else if (eat('-'))
        p -= term();
      else
        return p;
    }
  }

  MPoly term()
  {
    MPoly p = factor();
    for (;;) {
      if (eat('*')) {
        p = p * factor();
      } else if (eat('/')) {
        MPoly d = factor();
        if (d.is_zero()) fail("division by zero");
        if (d.size() != 1 || d.total_degree() != 0) fail("division by a non-constant");
        p *= Rational(1) / d.terms().begin()->second;
      } else {
        return p;
      }
    }
  }

  MPoly factor()
  {
    if (eat('-')) return -factor();
    if (eat('+')) return factor();
    MPoly b = primary();
    if (eat('^')) {
      skip();
      std::size_t j = i_;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      if (j == i_) fail("expected a nonnegative integer exponent");
      if (i_ - j > 4) fail("exponent too large");
      b = b.pow(std::stoi(s_.substr(j, i_ - j)));
    }
    return b;
  }

  MPoly primary()
  {
    skip();
    if (i_ >= s_.size()) fail("unexpected end of input");
    char c = s_[i_];
    if (c == '(') {
      ++i_;
      MPoly p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i_;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      return MPoly::constant(n(), Rational(mpz_class(s_.substr(j, i_ - j))));
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (i_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
        ++i_;
      std::string name = s_.substr(j, i_ - j);
      auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it == vars_.end()) fail("undeclared variable '" + name + "'");
      return MPoly::var(n(), static_cast<int>(it - vars_.begin()));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline MPoly parse_poly(const std::string& text, const std::vector<std::string>& vars)
{
  std::set<std::string> seen;
  for (const auto& v : vars) {
    if (v.empty() || !(std::isalpha(static_cast<unsigned char>(v[0])) || v[0] == '_'))
      throw InputError("bad variable name '" + v + "'");
    if (!seen.insert(v).second) throw InputError("duplicate variable '" + v + "'");
  }
  return detail::PolyParser(text, vars).parse();
}

inline std::vector<MPoly> partials(const MPoly& W)
{
  if (W.nvars() < 1) throw InputError("partials: need at least one variable");
  std::vector<MPoly> out;
  for (int i = 0; i < W.nvars(); ++i) out.push_back(W.derivative(i));
  return out;
}

/** \brief Polynomial with its expression in terms of a fixed generating list. */
struct TrackedPoly {
  MPoly p;
  std::vector<MPoly> rep;
};

namespace detail {

inline void axpy(TrackedPoly& f, const TrackedPoly& g, const Exponent& e, const Rational& c,
                 bool track)
{
  f.p -= g.p.mul_term(e, c);
  if (track)
    for (std::size_t k = 0; k < f.rep.size(); ++k) f.rep[k] -= g.rep[k].mul_term(e, c);
}

inline void scale(TrackedPoly& f, const Rational& c, bool track)
{
  f.p *= c;
  if (track)
    for (auto& r : f.rep) r *= c;
}

/** \brief Full reduction of f by G; quotients are accumulated into f.rep when tracking. */
inline TrackedPoly full_reduce(TrackedPoly f, const std::vector<TrackedPoly>& G, MonomialOrder ord,
                               bool track)
{
  TrackedPoly rem{MPoly(f.p.nvars()), f.rep};
  while (!f.p.is_zero()) {
    const Exponent lt = f.p.leading_exponent(ord);
    const Rational lc = f.p.coeff(lt);
    bool reduced = false;
    for (const auto& g : G) {
      const Exponent& lg = g.p.leading_exponent(ord);
      if (!exp_divides(lg, lt)) continue;
      Exponent q(lt.size());
      for (std::size_t i = 0; i < lt.size(); ++i) q[i] = lt[i] - lg[i];
      axpy(f, g, q, lc / g.p.coeff(lg), track);
      reduced = true;
      break;
    }
    if (!reduced) {
      rem.p.add_term(lt, lc);
      MPoly t(f.p.nvars());
      t.add_term(lt, lc);
      f.p -= t;
    }
  }
  rem.rep = f.rep;
  return rem;
}

}  // namespace detail

/** \brief Reduced Groebner basis with each element expressed in the input generators. */
struct GroebnerResult {
  std::vector<MPoly> generators;
  std::vector<TrackedPoly> basis;
  MonomialOrder order = MonomialOrder::Grevlex;
};

inline GroebnerResult groebner_tracked(const std::vector<MPoly>& gens,
                                       MonomialOrder ord = MonomialOrder::Grevlex,
                                       bool track = true)
{
  if (gens.empty()) throw InputError("groebner: empty generator list");
  const int n = gens[0].nvars();
  const std::size_t m = gens.size();
  std::vector<TrackedPoly> G;
  for (std::size_t k = 0; k < m; ++k) {
    if (gens[k].nvars() != n) throw InputError("groebner: variable count mismatch");
    if (gens[k].is_zero()) continue;
    TrackedPoly t{gens[k], {}};
    if (track) {
      t.rep.assign(m, MPoly(n));
      t.rep[k] = MPoly::constant(n, 1);
    }
    G.push_back(std::move(t));
  }
  GroebnerResult res{gens, {}, ord};
  if (G.empty()) return res;

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 1; j < G.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) pairs.insert({i, j});

  auto lt = [&](std::size_t i) -> const Exponent& { return G[i].p.leading_exponent(ord); };
  auto pending = [&](std::size_t i, std::size_t j) {
    return pairs.count({std::min(i, j), std::max(i, j)}) > 0;
  };

  while (!pairs.empty()) {
    auto [i, j] = *pairs.begin();
    pairs.erase(pairs.begin());
    Exponent L = exp_lcm(lt(i), lt(j));
    bool coprime = true;
    for (int v = 0; v < n; ++v)
      if (lt(i)[v] && lt(j)[v]) coprime = false;
    if (coprime) continue;
    bool chain = false;
    for (std::size_t k = 0; k < G.size() && !chain; ++k)
      if (k != i && k != j && exp_divides(lt(k), L) && !pending(i, k) && !pending(j, k))
        chain = true;
    if (chain) continue;

    Exponent qi(n), qj(n);
    for (int v = 0; v < n; ++v) qi[v] = L[v] - lt(i)[v], qj[v] = L[v] - lt(j)[v];
    TrackedPoly s{G[i].p.mul_term(qi, Rational(1) / G[i].p.coeff(lt(i))), {}};
    if (track) {
      s.rep.assign(m, MPoly(n));
      for (std::size_t k = 0; k < m; ++k)
        s.rep[k] = G[i].rep[k].mul_term(qi, Rational(1) / G[i].p.coeff(lt(i)));
    }
    detail::axpy(s, G[j], qj, Rational(1) / G[j].p.coeff(lt(j)), track);
    TrackedPoly r = detail::full_reduce(std::move(s), G, ord, track);
    if (r.p.is_zero()) continue;
    G.push_back(std::move(r));
    for (std::size_t k = 0; k + 1 < G.size(); ++k) pairs.insert({k, G.size() - 1});
  }

  // minimalize: drop elements whose leading term is divisible by another's
  std::vector<TrackedPoly> M;
  for (std::size_t i = 0; i < G.size(); ++i) {
    bool drop = false;
    for (std::size_t k = 0; k < G.size() && !drop; ++k) {
      if (k == i) continue;
      if (exp_divides(lt(k), lt(i)) && (lt(k) != lt(i) || k < i)) drop = true;
    }
    if (!drop) M.push_back(G[i]);
  }
  // interreduce and normalize leading coefficients
  for (std::size_t i = 0; i < M.size(); ++i) {
    std::vector<TrackedPoly> others;
    for (std::size_t k = 0; k < M.size(); ++k)
      if (k != i) others.push_back(M[k]);
    const Exponent head = M[i].p.leading_exponent(ord);
    const Rational hc = M[i].p.coeff(head);
    TrackedPoly tail = M[i];
    MPoly h(n);
    h.add_term(head, hc);
    tail.p -= h;
    TrackedPoly r = detail::full_reduce(std::move(tail), others, ord, track);
    r.p += h;
    detail::scale(r, Rational(1) / hc, track);
    M[i] = std::move(r);
  }
  std::sort(M.begin(), M.end(), [&](const TrackedPoly& a, const TrackedPoly& b) {
    return order_greater(b.p.leading_exponent(ord), a.p.leading_exponent(ord), ord);
  });
  res.basis = std::move(M);
  return res;
}

inline std::vector<MPoly> groebner(const std::vector<MPoly>& gens,
                                   MonomialOrder ord = MonomialOrder::Grevlex)
{
  std::vector<MPoly> out;
  for (auto& t : groebner_tracked(gens, ord, false).basis) out.push_back(std::move(t.p));
  return out;
}

inline MPoly normal_form(const MPoly& f, const std::vector<MPoly>& basis,
                         MonomialOrder ord = MonomialOrder::Grevlex)
{
  std::vector<TrackedPoly> G;
  for (const auto& g : basis)
    if (!g.is_zero()) G.push_back({g, {}});
  return detail::full_reduce({f, {}}, G, ord, false).p;
}

/** \brief Cofactors a_i with f = sum a_i gens_i; throws NotInIdeal otherwise. */
inline std::vector<MPoly> membership_with_cofactors(const MPoly& f, const GroebnerResult& gb)
{
  const std::size_t m = gb.generators.size();
  TrackedPoly t{f, std::vector<MPoly>(m, MPoly(f.nvars()))};
  TrackedPoly r = detail::full_reduce(std::move(t), gb.basis, gb.order, true);
  if (!r.p.is_zero()) throw NotInIdeal("polynomial is not in the ideal");
  // r.rep holds -sum q_k rep_k
  std::vector<MPoly> a(m, MPoly(f.nvars()));
  for (std::size_t k = 0; k < m; ++k) a[k] = -r.rep[k];
  MPoly check(f.nvars());
  for (std::size_t k = 0; k < m; ++k) check += a[k] * gb.generators[k];
  if (!(check == f)) throw std::logic_error("cofactor re-expansion failed");
  return a;
}

inline std::vector<MPoly> membership_with_cofactors(const MPoly& f, const std::vector<MPoly>& gens)
{
  return membership_with_cofactors(f, groebner_tracked(gens));
}

/** \brief Jacobian-ring data: basis, standard monomials, Milnor number. */
struct JacobianData {
  int nvars = 0;
  MonomialOrder order = MonomialOrder::Grevlex;
  std::vector<MPoly> groebner_basis;
  std::vector<Exponent> quotient_monomials;
  int milnor = 0;

  MPoly normal_form(const MPoly& f) const { return bvlab::normal_form(f, groebner_basis, order); }
};

inline JacobianData quotient_basis(const std::vector<MPoly>& basis, int nvars,
                                   MonomialOrder ord = MonomialOrder::Grevlex,
                                   std::size_t max_monomials = 1000000)
{
  JacobianData J;
  J.nvars = nvars;
  J.order = ord;
  J.groebner_basis = basis;
  std::vector<Exponent> lts;
  for (const auto& g : basis)
    if (!g.is_zero()) lts.push_back(g.leading_exponent(ord));
  if (lts.empty())
    throw NonIsolatedCriticalLocus("non-isolated critical locus: zero ideal, quotient is infinite-dimensional");
  Exponent bound(nvars, -1);
  for (const auto& e : lts) {
    int nz = -1, cnt = 0;
    for (int v = 0; v < nvars; ++v)
      if (e[v]) nz = v, ++cnt;
    if (cnt == 0) {
      J.milnor = 0;  // unit ideal
      return J;
    }
    if (cnt == 1 && (bound[nz] < 0 || e[nz] < bound[nz])) bound[nz] = e[nz];
  }
  for (int v = 0; v < nvars; ++v)
    if (bound[v] < 0)
      throw NonIsolatedCriticalLocus("non-isolated critical locus: no pure power of variable " +
                                     std::to_string(v) + " among leading terms");
  Exponent e(nvars, 0);
  for (;;) {
    bool standard = true;
    for (const auto& l : lts)
      if (exp_divides(l, e)) {
        standard = false;
        break;
      }
    if (standard) {
      J.quotient_monomials.push_back(e);
      if (J.quotient_monomials.size() > max_monomials)
        throw ResourceError("quotient basis exceeds the configured size");
    }
    int v = 0;
    while (v < nvars && ++e[v] >= bound[v]) e[v++] = 0;
    if (v == nvars) break;
  }
  std::sort(J.quotient_monomials.begin(), J.quotient_monomials.end(),
            [&](const Exponent& a, const Exponent& b) { return order_greater(b, a, ord); });
  J.milnor = static_cast<int>(J.quotient_monomials.size());
  return J;
}

inline JacobianData jacobian(const MPoly& W, MonomialOrder ord = MonomialOrder::Grevlex)
{
  return quotient_basis(groebner(partials(W), ord), W.nvars(), ord);
}

}  // namespace bvlab

#endif  // BVLAB_POLYRING_HPP
