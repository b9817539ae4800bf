#ifndef BVLAB_SUPERALG_HPP
#define BVLAB_SUPERALG_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/rational.hpp"

namespace bvlab {

struct Generator {
  std::string name;
  int degree = 0;
  bool operator==(const Generator&) const = default;
};

/** \brief Finite graded space; generators are ordered and the order fixes the Koszul normal form. */
class GradedSpace {
 public:
  GradedSpace() = default;

  explicit GradedSpace(std::vector<Generator> gens) : gens_(std::move(gens))
  {
    for (std::size_t i = 0; i < gens_.size(); ++i) {
      if (gens_[i].name.empty()) throw InputError("generator with empty name");
      if (!index_.emplace(gens_[i].name, i).second)
        throw InputError("duplicate generator name '" + gens_[i].name + "'");
    }
  }

  std::size_t size() const { return gens_.size(); }
  const Generator& operator[](std::size_t i) const { return gens_[i]; }
  const std::vector<Generator>& generators() const { return gens_; }
  int degree(std::size_t i) const { return gens_[i].degree; }
  bool odd(std::size_t i) const { return (gens_[i].degree & 1) != 0; }

  std::optional<std::size_t> find(const std::string& name) const
  {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(const std::string& name) const
  {
    auto i = find(name);
    if (!i) throw InputError("unknown generator '" + name + "'");
    return *i;
  }

  bool operator==(const GradedSpace& o) const { return gens_ == o.gens_; }

 private:
  std::vector<Generator> gens_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SpacePtr = std::shared_ptr<const GradedSpace>;

inline SpacePtr make_space(std::vector<Generator> gens)
{
  return std::make_shared<const GradedSpace>(std::move(gens));
}

inline bool same_space(const SpacePtr& a, const SpacePtr& b)
{
  return a == b || (a && b && *a == *b);
}

/** \brief Exponent vector in declaration order. */
using Monomial = std::vector<std::uint8_t>;

inline int word_length(const Monomial& m)
{
  int n = 0;
  for (auto e : m) n += e;
  return n;
}

struct TermKey {
  int hbar = 0;
  Monomial mono;

  std::strong_ordering operator<=>(const TermKey& o) const
  {
    if (auto c = hbar <=> o.hbar; c != 0) return c;
    int la = word_length(mono), lb = word_length(o.mono);
    if (auto c = la <=> lb; c != 0) return c;
    // larger exponents on earlier generators come first
    for (std::size_t i = 0; i < mono.size() && i < o.mono.size(); ++i)
      if (mono[i] != o.mono[i]) return o.mono[i] <=> mono[i];
    return mono.size() <=> o.mono.size();
  }
  bool operator==(const TermKey&) const = default;
};

/**
 * \brief Truncated graded-commutative power series with exact rational coefficients
 * and a Laurent window in hbar.
 */
class Functional {
 public:
  using TermMap = std::map<TermKey, Rational>;

  Functional() = default;

  explicit Functional(SpacePtr space, int D = 4, int hbar_min = -4, int hbar_max = 2)
      : space_(std::move(space)), D_(D), hmin_(hbar_min), hmax_(hbar_max)
  {
    if (!space_) throw ConfigError("functional without a space");
    if (D_ < 0) throw ConfigError("negative truncation degree");
    if (hmin_ > hmax_) throw ConfigError("empty hbar window");
  }

  static Functional constant(const SpacePtr& s, const Rational& c, int D = 4, int hmin = -4,
                             int hmax = 2, int hbar = 0)
  {
    Functional f(s, D, hmin, hmax);
    f.add_term(Monomial(s->size(), 0), hbar, c);
    return f;
  }

  static Functional generator(const SpacePtr& s, std::size_t i, int D = 4, int hmin = -4,
                              int hmax = 2)
  {
    Functional f(s, D, hmin, hmax);
    Monomial m(s->size(), 0);
    m[i] = 1;
    f.add_term(m, 0, Rational(1));
    return f;
  }

  /** \brief Empty functional with the same space and truncation parameters. */
  Functional zero_like() const { return Functional(space_, D_, hmin_, hmax_); }

  const SpacePtr& space() const { return space_; }
  int truncation() const { return D_; }
  int hbar_min() const { return hmin_; }
  int hbar_max() const { return hmax_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  bool compatible(const Functional& o) const
  {
    return same_space(space_, o.space_) && D_ == o.D_ && hmin_ == o.hmin_ && hmax_ == o.hmax_;
  }

  void require_compatible(const Functional& o, const char* op) const
  {
    if (!compatible(o))
      throw ConfigError(std::string(op) + ": mismatched spaces or truncation parameters");
  }

  bool in_range(const Monomial& m, int hbar) const
  {
    return hbar >= hmin_ && hbar <= hmax_ && word_length(m) <= D_;
  }

  /** \brief Add c times a normalized monomial; out-of-window terms are dropped. */
  void add_term(const Monomial& m, int hbar, const Rational& c)
  {
    if (c == 0 || !in_range(m, hbar)) return;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] > 1 && space_->odd(i)) return;
    TermKey k{hbar, m};
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(std::move(k), c);
    } else {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  /** \brief Add c times the product of generators in the given order (Koszul sign applied). */
  void add_word(const std::vector<std::size_t>& word, int hbar, const Rational& c)
  {
    Monomial m(space_->size(), 0);
    int sign = 1;
    // bubble into declaration order, counting odd transpositions
    std::vector<std::size_t> w = word;
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t j = 0; j + 1 < w.size() - i; ++j)
        if (w[j] > w[j + 1]) {
          if (space_->odd(w[j]) && space_->odd(w[j + 1])) sign = -sign;
          std::swap(w[j], w[j + 1]);
        }
    for (auto g : w) {
      if (g >= space_->size()) throw InputError("generator index out of range");
      if (space_->odd(g) && m[g] == 1) return;
      ++m[g];
    }
    add_term(m, hbar, sign > 0 ? c : Rational(-c));
  }

  Rational coeff(const Monomial& m, int hbar) const
  {
    auto it = terms_.find(TermKey{hbar, m});
    return it == terms_.end() ? Rational(0) : it->second;
  }

  int mono_degree(const Monomial& m) const
  {
    int d = 0;
    for (std::size_t i = 0; i < m.size(); ++i) d += m[i] * space_->degree(i);
    return d;
  }

  int mono_parity(const Monomial& m) const
  {
    int p = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (space_->odd(i)) p ^= (m[i] & 1);
    return p;
  }

  /** \brief Common degree of all terms, or nullopt if inhomogeneous (zero counts as degree 0). */
  std::optional<int> degree() const
  {
    std::optional<int> d;
    for (const auto& [k, c] : terms_) {
      int dk = mono_degree(k.mono);
      if (d && *d != dk) return std::nullopt;
      d = dk;
    }
    return d ? d : std::optional<int>(0);
  }

  template <class Pred>
  Functional filter(Pred keep) const
  {
    Functional r = zero_like();
    for (const auto& [k, c] : terms_)
      if (keep(k)) r.terms_.emplace(k, c);
    return r;
  }

  Functional parity_part(int p) const
  {
    return filter([&](const TermKey& k) { return mono_parity(k.mono) == p; });
  }
  Functional word_length_part(int n) const
  {
    return filter([&](const TermKey& k) { return word_length(k.mono) == n; });
  }
  Functional hbar_part(int p) const
  {
    return filter([&](const TermKey& k) { return k.hbar == p; });
  }

  /** \brief Multiply by hbar^k; terms leaving the window are dropped. */
  Functional shift_hbar(int k) const
  {
    Functional r = zero_like();
    for (const auto& [key, c] : terms_) r.add_term(key.mono, key.hbar + k, c);
    return r;
  }

  /** \brief Explicit re-truncation to new parameters. */
  Functional retruncate(int D, int hmin, int hmax) const
  {
    Functional r(space_, D, hmin, hmax);
    for (const auto& [k, c] : terms_) r.add_term(k.mono, k.hbar, c);
    return r;
  }

  Functional& operator+=(const Functional& o)
  {
    require_compatible(o, "add");
    for (const auto& [k, c] : o.terms_) add_term(k.mono, k.hbar, c);
    return *this;
  }
  Functional& operator-=(const Functional& o)
  {
    require_compatible(o, "subtract");
    for (const auto& [k, c] : o.terms_) add_term(k.mono, k.hbar, Rational(-c));
    return *this;
  }
  Functional& operator*=(const Rational& s)
  {
    if (s == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    return *this;
  }
  friend Functional operator+(Functional a, const Functional& b) { return a += b; }
  friend Functional operator-(Functional a, const Functional& b) { return a -= b; }
  friend Functional operator*(Functional a, const Rational& s) { return a *= s; }
  friend Functional operator*(const Rational& s, Functional a) { return a *= s; }
  Functional operator-() const { return *this * Rational(-1); }

  bool operator==(const Functional& o) const { return compatible(o) && terms_ == o.terms_; }

 private:
  SpacePtr space_;
  int D_ = 4;
  int hmin_ = -4;
  int hmax_ = 2;
  TermMap terms_;
};

namespace detail {

/** \brief Sign of m1 * m2 -> sorted, 0 if an odd generator repeats. */
inline int product_sign(const GradedSpace& s, const Monomial& a, const Monomial& b)
{
  int sign = 1;
  int odd_after = 0;  // odd generators of a with index greater than current
  for (std::size_t i = a.size(); i-- > 0;) {
    if (!s.odd(i)) continue;
    if (a[i] && b[i]) return 0;
    if (b[i] && (odd_after & 1)) sign = -sign;
    if (a[i]) ++odd_after;
  }
  return sign;
}

}  // namespace detail

/** \brief Graded-commutative product, truncated to D and the hbar window. */
inline Functional mul(const Functional& f, const Functional& g)
{
  f.require_compatible(g, "mul");
  Functional r = f.zero_like();
  const GradedSpace& s = *f.space();
  const int D = f.truncation();
  for (const auto& [ka, ca] : f.terms()) {
    int la = word_length(ka.mono);
    for (const auto& [kb, cb] : g.terms()) {
      if (la + word_length(kb.mono) > D) continue;
      int h = ka.hbar + kb.hbar;
      if (h < f.hbar_min() || h > f.hbar_max()) continue;
      int sg = detail::product_sign(s, ka.mono, kb.mono);
      if (!sg) continue;
      Monomial m = ka.mono;
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += kb.mono[i];
      Rational c = ca * cb;
      if (sg < 0) c = -c;
      r.add_term(m, h, c);
    }
  }
  return r;
}

/** \brief Left partial derivative with respect to generator a. */
inline Functional derivative(const Functional& f, std::size_t a)
{
  Functional r = f.zero_like();
  const GradedSpace& s = *f.space();
  const bool odd_a = s.odd(a);
  for (const auto& [k, c] : f.terms()) {
    if (!k.mono[a]) continue;
    int sign = 1;
    if (odd_a)
      for (std::size_t i = 0; i < a; ++i)
        if (s.odd(i) && k.mono[i]) sign = -sign;
    Monomial m = k.mono;
    Rational coef = c * static_cast<unsigned long>(m[a]);
    --m[a];
    r.add_term(m, k.hbar, sign > 0 ? coef : Rational(-coef));
  }
  return r;
}

/** \brief Graded-symmetric 2-tensor; degree = -(|a|+|b|) in the generator grading. */
class Kernel {
 public:
  using Entries = std::map<std::pair<std::size_t, std::size_t>, Rational>;

  Kernel() = default;
  explicit Kernel(SpacePtr space) : space_(std::move(space)) {}

  const SpacePtr& space() const { return space_; }
  const Entries& entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }

  /** \brief Set entry(a,b) = c and entry(b,a) = (-1)^{|a||b|} c. */
  void set(std::size_t a, std::size_t b, const Rational& c)
  {
    if (a >= space_->size() || b >= space_->size()) throw InputError("kernel index out of range");
    int d = -(space_->degree(a) + space_->degree(b));
    if (c != 0 && deg_ && *deg_ != d) throw InputError("inhomogeneous kernel entry");
    if (a == b && space_->odd(a) && c != 0)
      throw InputError("diagonal kernel entry on an odd generator must vanish");
    assign(a, b, c);
    if (a != b) assign(b, a, (space_->odd(a) && space_->odd(b)) ? Rational(-c) : c);
    if (c != 0) deg_ = d;
    if (entries_.empty()) deg_.reset();
  }

  void add(std::size_t a, std::size_t b, const Rational& c) { set(a, b, entry(a, b) + c); }

  Rational entry(std::size_t a, std::size_t b) const
  {
    auto it = entries_.find({a, b});
    return it == entries_.end() ? Rational(0) : it->second;
  }

  std::optional<int> degree() const { return deg_; }

  Kernel& operator+=(const Kernel& o)
  {
    if (!same_space(space_, o.space_)) throw ConfigError("kernel space mismatch");
    for (const auto& [ab, c] : o.entries_)
      if (ab.first <= ab.second) add(ab.first, ab.second, c);
    return *this;
  }
  Kernel& operator*=(const Rational& s)
  {
    Kernel r(space_);
    for (const auto& [ab, c] : entries_)
      if (ab.first <= ab.second) r.set(ab.first, ab.second, c * s);
    return *this = r;
  }
  friend Kernel operator+(Kernel a, const Kernel& b) { return a += b; }
  friend Kernel operator-(Kernel a, Kernel b) { return a += (b *= Rational(-1)); }
  friend Kernel operator*(Kernel a, const Rational& s) { return a *= s; }

 private:
  void assign(std::size_t a, std::size_t b, const Rational& c)
  {
    if (c == 0)
      entries_.erase({a, b});
    else
      entries_[{a, b}] = c;
  }

  SpacePtr space_;
  Entries entries_;
  std::optional<int> deg_;
};

/** \brief Contraction with k: (1/2) sum_{a,b} k^{ab} d_a d_b f (left derivatives, d_b acts first). */
inline Functional contract(const Functional& f, const Kernel& k)
{
  if (!same_space(f.space(), k.space())) throw ConfigError("contract: space mismatch");
  Functional r = f.zero_like();
  std::map<std::size_t, Functional> first;
  for (const auto& [ab, c] : k.entries()) {
    auto it = first.find(ab.second);
    if (it == first.end()) it = first.emplace(ab.second, derivative(f, ab.second)).first;
    if (it->second.is_zero()) continue;
    r += derivative(it->second, ab.first) * c;
  }
  return r * Rational(1, 2);
}

/** \brief BV Laplacian: contraction with an odd kernel. */
inline Functional bv_laplacian(const Functional& f, const Kernel& k)
{
  if (k.degree() && (*k.degree() & 1) == 0)
    throw ConfigError("bv_laplacian: kernel has even degree");
  return contract(f, k);
}

/**
 * \brief Odd bracket with (-1)^{|f|}{f,g} = D(fg) - (Df)g - (-1)^{|f|} f(Dg).
 *
 * Evaluated as (-1)^{|f|} sum k^{ab} (-1)^{|b||f|} (d_a f)(d_b g), which never forms the
 * untruncated product fg.  Graded antisymmetric: {f,g} = -(-1)^{(|f|+1)(|g|+1)} {g,f}.
 */
inline Functional bv_bracket(const Functional& f, const Functional& g, const Kernel& k)
{
  f.require_compatible(g, "bv_bracket");
  if (!same_space(f.space(), k.space())) throw ConfigError("bv_bracket: space mismatch");
  if (k.degree() && (*k.degree() & 1) == 0)
    throw ConfigError("bv_bracket: kernel has even degree");
  const GradedSpace& s = *f.space();
  Functional r = f.zero_like();
  std::map<std::size_t, Functional> dg;
  for (int p = 0; p < 2; ++p) {
    Functional fp = f.parity_part(p);
    if (fp.is_zero()) continue;
    std::map<std::size_t, Functional> df;
    for (const auto& [ab, c] : k.entries()) {
      auto ia = df.find(ab.first);
      if (ia == df.end()) ia = df.emplace(ab.first, derivative(fp, ab.first)).first;
      if (ia->second.is_zero()) continue;
      auto ib = dg.find(ab.second);
      if (ib == dg.end()) ib = dg.emplace(ab.second, derivative(g, ab.second)).first;
      if (ib->second.is_zero()) continue;
      bool neg = (p && s.odd(ab.second)) != (p == 1);
      r += mul(ia->second, ib->second) * (neg ? Rational(-c) : c);
    }
  }
  return r;
}

/** \brief Derivation given by its values on generators; missing generators map to zero. */
class Derivation {
 public:
  Derivation() = default;
  Derivation(SpacePtr space, int degree) : space_(std::move(space)), degree_(degree) {}

  const SpacePtr& space() const { return space_; }
  int degree() const { return degree_; }
  const std::map<std::size_t, Functional>& images() const { return images_; }

  void set_image(std::size_t i, Functional f)
  {
    if (!same_space(space_, f.space())) throw ConfigError("derivation image in wrong space");
    auto d = f.degree();
    if (!f.is_zero() && (!d || *d != space_->degree(i) + degree_))
      throw InputError("derivation image of '" + (*space_)[i].name + "' has wrong degree");
    if (f.is_zero())
      images_.erase(i);
    else
      images_.insert_or_assign(i, std::move(f));
  }

  const Functional* image(std::size_t i) const
  {
    auto it = images_.find(i);
    return it == images_.end() ? nullptr : &it->second;
  }

 private:
  SpacePtr space_;
  int degree_ = 0;
  std::map<std::size_t, Functional> images_;
};

/** \brief Graded Leibniz extension of d applied to f. */
inline Functional apply_derivation(const Derivation& d, const Functional& f)
{
  if (!same_space(d.space(), f.space())) throw ConfigError("apply_derivation: space mismatch");
  Functional r = f.zero_like();
  const GradedSpace& s = *f.space();
  const bool odd_d = (d.degree() & 1) != 0;
  for (const auto& [k, c] : f.terms()) {
    int prefix_parity = 0;
    for (std::size_t a = 0; a < k.mono.size(); ++a) {
      int e = k.mono[a];
      if (!e) continue;
      const Functional* img = d.image(a);
      if (img && img->compatible(f)) {
        Monomial pre(k.mono.size(), 0), post(k.mono.size(), 0);
        for (std::size_t i = 0; i < a; ++i) pre[i] = k.mono[i];
        pre[a] = static_cast<std::uint8_t>(e - 1);
        for (std::size_t i = a + 1; i < k.mono.size(); ++i) post[i] = k.mono[i];
        Functional P = f.zero_like(), S = f.zero_like();
        P.add_term(pre, k.hbar, Rational(1));
        S.add_term(post, 0, Rational(1));
        Rational coef = c * static_cast<unsigned long>(e);
        if (odd_d && prefix_parity) coef = -coef;
        r += mul(mul(P, *img), S) * coef;
      } else if (img) {
        throw ConfigError("apply_derivation: image truncation differs from argument");
      }
      if (s.odd(a)) prefix_parity ^= (e & 1);
    }
  }
  return r;
}

/**
 * \brief Coefficient of the fermion line among terms free of killed generators,
 * other generators evaluated at the base point. Returned per hbar power.
 */
inline std::map<int, Rational> lagrangian_restrict(const Functional& f,
                                                   const std::vector<std::size_t>& fermion_line,
                                                   const std::set<std::size_t>& kill_set)
{
  const GradedSpace& s = *f.space();
  Monomial line(s.size(), 0);
  std::vector<std::size_t> word;
  for (auto g : fermion_line) {
    if (g >= s.size()) throw InputError("fermion line generator out of range");
    if (!s.odd(g)) throw InputError("fermion line contains even generator '" + s[g].name + "'");
    if (line[g]) throw InputError("fermion line repeats generator '" + s[g].name + "'");
    if (kill_set.count(g)) throw InputError("fermion line meets the kill set");
    line[g] = 1;
    word.push_back(g);
  }
  // the line as written may differ from canonical order by a Koszul sign
  Functional probe(f.space(), std::max<int>(f.truncation(), static_cast<int>(word.size())), 0, 0);
  probe.add_word(word, 0, Rational(1));
  Rational orient = probe.is_zero() ? Rational(0) : probe.terms().begin()->second;
  std::map<int, Rational> out;
  for (const auto& [k, c] : f.terms()) {
    if (k.mono != line) continue;
    out[k.hbar] += c * orient;
  }
  for (auto it = out.begin(); it != out.end();)
    it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

}  // namespace bvlab

#endif  // BVLAB_SUPERALG_HPP
