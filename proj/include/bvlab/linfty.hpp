#ifndef BVLAB_LINFTY_HPP
#define BVLAB_LINFTY_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/polyring.hpp"
#include "bvlab/superalg.hpp"

namespace bvlab {

/**
 * \brief Finite curved L-infinity algebra given on g[1].
 *
 * Generator X_i has degree d_i in g[1]; the Chevalley-Eilenberg coordinate x^i has
 * degree -d_i and the dual generator in g^v has degree -1-d_i.  The homological vector
 * field is Q^i = sum_k 1/k! l_k(x,...,x)^i.  A table entry stores l_k(X_{j1},...,X_{jk})
 * for a nondecreasing index tuple.
 */
class CurvedLInftyModel {
 public:
  using Key = std::pair<std::size_t, std::vector<std::size_t>>;  // (output, sorted inputs)
  using Table = std::map<Key, Rational>;

  CurvedLInftyModel() : CurvedLInftyModel(std::vector<Generator>{}) {}

  explicit CurvedLInftyModel(std::vector<Generator> gens, std::vector<Rational> pairing = {})
      : gens_(gens), pairing_(std::move(pairing))
  {
    g_space_ = make_space(gens);
    std::vector<Generator> ce, dual;
    for (const auto& g : gens) {
      ce.push_back({g.name, -g.degree});
      dual.push_back({g.name + "^", -1 - g.degree});
    }
    ce_space_ = make_space(ce);
    dual_space_ = make_space(dual);
    if (pairing_.empty()) pairing_.assign(gens.size(), Rational(1));
    if (pairing_.size() != gens.size()) throw InputError("pairing size mismatch");
    for (const auto& p : pairing_)
      if (p == 0) throw InputError("degenerate pairing");
  }

  std::size_t dim() const { return gens_.size(); }
  int degree(std::size_t i) const { return gens_[i].degree; }
  const std::vector<Generator>& generators() const { return gens_; }
  const SpacePtr& g_space() const { return g_space_; }
  const SpacePtr& dual_space() const { return dual_space_; }
  const SpacePtr& ce_space() const { return ce_space_; }
  const Rational& pairing(std::size_t i) const { return pairing_[i]; }
  const std::map<int, Table>& brackets() const { return brackets_; }

  int kmax() const { return brackets_.empty() ? 0 : brackets_.rbegin()->first; }

  /** \brief Set l_k(X_inputs) component on X_out; inputs in any order (Koszul sign applied). */
  void set_bracket(std::size_t out, std::vector<std::size_t> inputs, const Rational& value)
  {
    if (out >= dim()) throw InputError("bracket output index out of range");
    int deg = 1;
    for (auto j : inputs) {
      if (j >= dim()) throw InputError("bracket input index out of range");
      deg += degree(j);
    }
    if (value != 0 && deg != degree(out))
      throw InputError("bracket entry violates degree +1: output '" + gens_[out].name + "'");
    int sign = 1;
    for (std::size_t a = 0; a < inputs.size(); ++a)
      for (std::size_t b = 0; b + 1 < inputs.size() - a; ++b)
        if (inputs[b] > inputs[b + 1]) {
          if ((degree(inputs[b]) & 1) && (degree(inputs[b + 1]) & 1)) sign = -sign;
          std::swap(inputs[b], inputs[b + 1]);
        }
    for (std::size_t b = 0; b + 1 < inputs.size(); ++b)
      if (inputs[b] == inputs[b + 1] && (degree(inputs[b]) & 1) && value != 0)
        throw InputError("bracket must vanish on repeated odd inputs");
    Table& t = brackets_[static_cast<int>(inputs.size())];
    Key key{out, inputs};
    Rational v = sign > 0 ? value : Rational(-value);
    if (v == 0)
      t.erase(key);
    else
      t[key] = v;
    if (t.empty()) brackets_.erase(static_cast<int>(inputs.size()));
  }

  Rational bracket(std::size_t out, std::vector<std::size_t> sorted_inputs) const
  {
    auto it = brackets_.find(static_cast<int>(sorted_inputs.size()));
    if (it == brackets_.end()) return 0;
    auto jt = it->second.find({out, sorted_inputs});
    return jt == it->second.end() ? Rational(0) : jt->second;
  }

  /** \brief k-th Taylor component of Q^i on the CE space. */
  Functional ce_component(std::size_t i, int k, int D, int hmin = -4, int hmax = 2) const
  {
    Functional f(ce_space_, D, hmin, hmax);
    auto it = brackets_.find(k);
    if (it == brackets_.end()) return f;
    for (const auto& [key, v] : it->second) {
      if (key.first != i) continue;
      Monomial m(dim(), 0);
      for (auto j : key.second) ++m[j];
      Rational c = v;
      for (auto e : m) c /= factorial(e);
      f.add_term(m, 0, c);
    }
    return f;
  }

  Functional ce_image(std::size_t i, int D, int hmin = -4, int hmax = 2) const
  {
    Functional f(ce_space_, D, hmin, hmax);
    for (const auto& [k, t] : brackets_) f += ce_component(i, k, D, hmin, hmax);
    return f;
  }

  /** \brief Matrix of l_1: Q_1 x^i = sum_j M(i,j) x^j. */
  Rational l1_matrix(std::size_t i, std::size_t j) const { return bracket(i, {j}); }

 private:
  std::vector<Generator> gens_;
  std::vector<Rational> pairing_;
  SpacePtr g_space_, ce_space_, dual_space_;
  std::map<int, Table> brackets_;
};

/** \brief Chevalley-Eilenberg differential as a degree +1 derivation on the CE space. */
inline Derivation chevalley_eilenberg(const CurvedLInftyModel& m, int D, int hmin = -4,
                                      int hmax = 2)
{
  Derivation d(m.ce_space(), 1);
  for (std::size_t i = 0; i < m.dim(); ++i) d.set_image(i, m.ce_image(i, D, hmin, hmax));
  return d;
}

struct ResidualEntry {
  std::string generator;
  std::vector<std::string> monomial;
  Rational coefficient;
};

struct LInftyReport {
  std::vector<ResidualEntry> residuals;
  bool valid() const { return residuals.empty(); }
};

namespace detail {

inline std::vector<std::string> monomial_names(const GradedSpace& s, const Monomial& m)
{
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (int e = 0; e < m[i]; ++e) out.push_back(s[i].name);
  return out;
}

inline LInftyReport square_report(const Derivation& d, int order)
{
  LInftyReport rep;
  const GradedSpace& s = *d.space();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Functional* qi = d.image(i);
    if (!qi) continue;
    Functional sq = apply_derivation(d, *qi);
    for (const auto& [k, c] : sq.terms())
      if (word_length(k.mono) <= order)
        rep.residuals.push_back({s[i].name, monomial_names(s, k.mono), c});
  }
  return rep;
}

}  // namespace detail

/** \brief Nonzero coefficients of d_CE^2 on each coordinate, up to word length `order`. */
inline LInftyReport validate_linfty(const CurvedLInftyModel& m, int order)
{
  return detail::square_report(chevalley_eilenberg(m, order + 1), order);
}

struct NotSquareZero : InputError {
  LInftyReport report;
  NotSquareZero(const std::string& what, LInftyReport r) : InputError(what), report(std::move(r)) {}
};

/**
 * \brief Read the L-infinity tables off a square-zero degree +1 derivation on a
 * coordinate space (coordinate degrees are minus the g[1] degrees).
 */
inline CurvedLInftyModel from_derivation(const Derivation& d)
{
  if (d.degree() != 1) throw InputError("from_derivation: derivation must have degree +1");
  const GradedSpace& s = *d.space();
  int D = 0;
  bool has_constant = false;
  for (const auto& [i, f] : d.images()) {
    D = f.truncation();
    for (const auto& [k, c] : f.terms()) {
      if (k.hbar != 0) throw InputError("from_derivation: images must be hbar-free");
      if (word_length(k.mono) == 0) has_constant = true;
    }
  }
  if (!d.images().empty()) {
    auto rep = detail::square_report(d, has_constant ? D - 1 : D);
    if (!rep.valid()) throw NotSquareZero("from_derivation: d^2 != 0", rep);
  }
  std::vector<Generator> gens;
  for (const auto& g : s.generators()) gens.push_back({g.name, -g.degree});
  CurvedLInftyModel m(gens);
  for (const auto& [i, f] : d.images())
    for (const auto& [k, c] : f.terms()) {
      std::vector<std::size_t> in;
      Rational v = c;
      for (std::size_t j = 0; j < k.mono.size(); ++j) {
        for (int e = 0; e < k.mono[j]; ++e) in.push_back(j);
        v *= factorial(k.mono[j]);
      }
      m.set_bracket(i, in, v);
    }
  return m;
}

/** \brief Cohomology ring of a genus-g surface with basis u, a_1..a_g, b_1..b_g, v. */
class SurfaceModel {
 public:
  explicit SurfaceModel(int genus = 0) : g_(genus)
  {
    if (genus < 0) throw InputError("negative genus");
    names_.push_back("u");
    degs_.push_back(0);
    for (int i = 1; i <= g_; ++i) names_.push_back("a" + std::to_string(i)), degs_.push_back(1);
    for (int i = 1; i <= g_; ++i) names_.push_back("b" + std::to_string(i)), degs_.push_back(1);
    names_.push_back("v");
    degs_.push_back(2);
  }

  int genus() const { return g_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t h) const { return names_[h]; }
  int degree(std::size_t h) const { return degs_[h]; }
  std::size_t unit() const { return 0; }
  std::size_t top() const { return names_.size() - 1; }
  std::size_t a(int i) const { return static_cast<std::size_t>(i); }
  std::size_t b(int i) const { return static_cast<std::size_t>(g_ + i); }

  /** \brief e_h1 e_h2 = sign * e_result; sign 0 when the product vanishes. */
  std::pair<int, std::size_t> wedge(std::size_t h1, std::size_t h2) const
  {
    if (h1 == unit()) return {1, h2};
    if (h2 == unit()) return {1, h1};
    if (degs_[h1] == 1 && degs_[h2] == 1) {
      bool a1 = h1 <= static_cast<std::size_t>(g_), a2 = h2 <= static_cast<std::size_t>(g_);
      std::size_t i1 = a1 ? h1 : h1 - g_, i2 = a2 ? h2 : h2 - g_;
      if (i1 != i2 || a1 == a2) return {0, 0};
      return {a1 ? 1 : -1, top()};
    }
    return {0, 0};
  }

  Rational integral(std::size_t h) const { return h == top() ? Rational(1) : Rational(0); }

  /** \brief Pairing partner: the unique h' with integral(e_h e_h') != 0. */
  std::size_t dual(std::size_t h) const
  {
    if (h == unit()) return top();
    if (h == top()) return unit();
    return h <= static_cast<std::size_t>(g_) ? h + g_ : h - g_;
  }

  Rational pairing(std::size_t h1, std::size_t h2) const
  {
    auto [s, r] = wedge(h1, h2);
    return s ? integral(r) * s : Rational(0);
  }

  int euler_characteristic() const { return 2 - 2 * g_; }

 private:
  int g_;
  std::vector<std::string> names_;
  std::vector<int> degs_;
};

/** \brief Element sum_h e_h * F_h of H(Sigma) tensor functionals (surface basis written left). */
using Superfield = std::vector<Functional>;

/**
 * \brief Harmonic field space H(Sigma_g) tensor (g[1] + g^v) with its BV kernel.
 *
 * Coordinates A(i,h) (degree -d_i-|h|) and B(i,h) (degree 1+d_i-|h|); the superfields are
 * x^i = sum_h A(i,h) e_h and xi_i = sum_h B(i,h) e_h, and functionals are integrals of
 * superfield polynomials.
 */
class FieldModel {
 public:
  FieldModel(CurvedLInftyModel m, SurfaceModel s, int D = 4, int hmin = -4, int hmax = 2)
      : model_(std::move(m)), surface_(std::move(s)), D_(D), hmin_(hmin), hmax_(hmax)
  {
    std::vector<Generator> gens;
    const std::size_t n = model_.dim(), H = surface_.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < H; ++h)
        gens.push_back({model_.generators()[i].name + "@" + surface_.name(h),
                        -model_.degree(i) - surface_.degree(h)});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < H; ++h)
        gens.push_back({model_.generators()[i].name + "^@" + surface_.name(h),
                        1 + model_.degree(i) - surface_.degree(h)});
    space_ = make_space(gens);
    kernel_ = Kernel(space_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < H; ++h) {
        std::size_t hd = surface_.dual(h);
        Rational eps = surface_.pairing(h, hd);
        if (((model_.degree(i) + 1) * surface_.degree(h)) & 1) eps = -eps;
        kernel_.set(alpha(i, h), beta(i, hd), eps / model_.pairing(i));
      }
  }

  const CurvedLInftyModel& model() const { return model_; }
  const SurfaceModel& surface() const { return surface_; }
  const SpacePtr& space() const { return space_; }
  const Kernel& bv_kernel() const { return kernel_; }
  int truncation() const { return D_; }
  int hbar_min() const { return hmin_; }
  int hbar_max() const { return hmax_; }

  std::size_t alpha(std::size_t i, std::size_t h) const { return i * surface_.size() + h; }
  std::size_t beta(std::size_t i, std::size_t h) const
  {
    return (model_.dim() + i) * surface_.size() + h;
  }

  Functional zero() const { return Functional(space_, D_, hmin_, hmax_); }
  Functional constant(const Rational& c, int hbar = 0) const
  {
    return Functional::constant(space_, c, D_, hmin_, hmax_, hbar);
  }
  Functional coord(std::size_t idx) const
  {
    return Functional::generator(space_, idx, D_, hmin_, hmax_);
  }

  Superfield sf_zero() const { return Superfield(surface_.size(), zero()); }

  Superfield xhat(std::size_t i) const { return hat(i, false); }
  Superfield xihat(std::size_t i) const { return hat(i, true); }

  Superfield sf_mul(const Superfield& X, const Superfield& Y) const
  {
    Superfield Z = sf_zero();
    for (std::size_t h1 = 0; h1 < X.size(); ++h1) {
      if (X[h1].is_zero()) continue;
      for (int p = 0; p < 2; ++p) {
        Functional xp = X[h1].parity_part(p);
        if (xp.is_zero()) continue;
        for (std::size_t h2 = 0; h2 < Y.size(); ++h2) {
          if (Y[h2].is_zero()) continue;
          auto [s, k] = surface_.wedge(h1, h2);
          if (!s) continue;
          if (p && (surface_.degree(h2) & 1)) s = -s;
          Z[k] += mul(xp, Y[h2]) * Rational(s);
        }
      }
    }
    return Z;
  }

  Functional integrate(const Superfield& X) const
  {
    Functional r = zero();
    for (std::size_t h = 0; h < X.size(); ++h)
      if (surface_.integral(h) != 0) r += X[h] * surface_.integral(h);
    return r;
  }

  /** \brief Substitute the superfields x^i into a functional on the CE space. */
  Superfield evaluate(const Functional& p) const
  {
    if (!same_space(p.space(), model_.ce_space()))
      throw ConfigError("evaluate: functional is not on the CE space");
    Superfield out = sf_zero();
    std::map<std::pair<std::size_t, int>, Superfield> powers;
    auto power = [&](std::size_t i, int e) -> const Superfield& {
      for (int k = 1; k <= e; ++k) {
        if (powers.count({i, k})) continue;
        powers.emplace(std::make_pair(i, k), k == 1 ? xhat(i) : sf_mul(powers.at({i, k - 1}), xhat(i)));
      }
      return powers.at({i, e});
    };
    for (const auto& [k, c] : p.terms()) {
      Superfield t = sf_zero();
      t[surface_.unit()] = constant(c, k.hbar);
      for (std::size_t i = 0; i < k.mono.size(); ++i)
        if (k.mono[i]) t = sf_mul(t, power(i, k.mono[i]));
      for (std::size_t h = 0; h < t.size(); ++h) out[h] += t[h];
    }
    return out;
  }

  /** \brief Integral of sum_i p_i xi_i Q^i(x) restricted to the given Taylor degrees. */
  Functional action_part(const std::vector<int>& ks) const
  {
    Functional r = zero();
    for (std::size_t i = 0; i < model_.dim(); ++i) {
      Functional q(model_.ce_space(), D_, hmin_, hmax_);
      for (int k : ks) q += model_.ce_component(i, k, D_, hmin_, hmax_);
      if (q.is_zero()) continue;
      r += integrate(sf_mul(xihat(i), evaluate(q))) * model_.pairing(i);
    }
    return r;
  }

  /** \brief Integral against the unit-volume class: B(x) restricted to degree-0 field slots. */
  Functional embed_zero_modes(const Functional& b) const
  {
    Superfield vol = sf_zero();
    vol[surface_.top()] = constant(1);
    return integrate(sf_mul(vol, evaluate(b)));
  }

 private:
  Superfield hat(std::size_t i, bool dual) const
  {
    Superfield X = sf_zero();
    for (std::size_t h = 0; h < surface_.size(); ++h) {
      std::size_t idx = dual ? beta(i, h) : alpha(i, h);
      Functional c = coord(idx);
      if ((*space_)[idx].degree & surface_.degree(h) & 1) c = -c;
      X[h] = c;
    }
    return X;
  }

  CurvedLInftyModel model_;
  SurfaceModel surface_;
  int D_, hmin_, hmax_;
  SpacePtr space_;
  Kernel kernel_;
};

/** \brief I_cl: sum over k != 1 of 1/k! times the integral of <l_k(alpha,...,alpha), beta>. */
inline Functional classical_interaction(const FieldModel& fm)
{
  int kmax = fm.model().kmax();
  if (kmax + 1 > fm.truncation())
    throw ConfigError("classical_interaction: truncation " + std::to_string(fm.truncation()) +
                      " cannot hold degree-" + std::to_string(kmax + 1) + " terms");
  std::vector<int> ks;
  for (const auto& [k, t] : fm.model().brackets())
    if (k != 1) ks.push_back(k);
  return fm.action_part(ks);
}

inline Functional free_action(const FieldModel& fm) { return fm.action_part({1}); }

/** \brief F_{l1} from the square of the l_1 matrix. */
inline Functional f_l1(const FieldModel& fm)
{
  const CurvedLInftyModel& m = fm.model();
  const std::size_t n = m.dim();
  Functional r = fm.zero();
  for (std::size_t i = 0; i < n; ++i) {
    Functional q(m.ce_space(), fm.truncation(), fm.hbar_min(), fm.hbar_max());
    for (std::size_t k = 0; k < n; ++k) {
      Rational sq = 0;
      for (std::size_t j = 0; j < n; ++j) sq += m.l1_matrix(i, j) * m.l1_matrix(j, k);
      if (sq != 0) {
        Monomial mono(n, 0);
        mono[k] = 1;
        q.add_term(mono, 0, sq);
      }
    }
    if (q.is_zero()) continue;
    Rational c = m.pairing(i);
    if (!(m.degree(i) & 1)) c = -c;
    r += fm.integrate(fm.sf_mul(fm.xihat(i), fm.evaluate(q))) * c;
  }
  return r;
}

/** \brief Q = {S_free, -} as a derivation on the field space. */
inline Derivation q_derivation(const FieldModel& fm)
{
  Functional sfree = free_action(fm);
  Derivation q(fm.space(), 1);
  for (std::size_t a = 0; a < fm.space()->size(); ++a)
    q.set_image(a, bv_bracket(sfree, fm.coord(a), fm.bv_kernel()));
  return q;
}

/** \brief Q I + 1/2 {I, I} + F_{l1}. */
inline Functional cme_residual(const FieldModel& fm, const Functional& I)
{
  Derivation q = q_derivation(fm);
  return apply_derivation(q, I) + bv_bracket(I, I, fm.bv_kernel()) * Rational(1, 2) + f_l1(fm);
}

inline Functional cme_residual(const FieldModel& fm) { return cme_residual(fm, classical_interaction(fm)); }

/** \brief CE-space functional for a polynomial in the first n model coordinates. */
inline Functional ce_polynomial(const CurvedLInftyModel& m, const MPoly& W, int D, int hmin = -4,
                                int hmax = 2)
{
  if (static_cast<std::size_t>(W.nvars()) != m.dim())
    throw InputError("polynomial has " + std::to_string(W.nvars()) + " variables, model has " +
                     std::to_string(m.dim()));
  Functional f(m.ce_space(), D, hmin, hmax);
  for (const auto& [e, c] : W.terms()) {
    Monomial mono(m.dim(), 0);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] > 255) throw InputError("exponent too large");
      mono[i] = static_cast<std::uint8_t>(e[i]);
    }
    f.add_term(mono, 0, c);
  }
  return f;
}

/** \brief I_W(alpha) = integral of W(alpha); no g^v slots. */
inline Functional lg_vertex(const FieldModel& fm, const MPoly& W)
{
  Functional w = ce_polynomial(fm.model(), W, fm.truncation(), fm.hbar_min(), fm.hbar_max());
  return fm.integrate(fm.evaluate(w));
}

inline Functional lg_twist(const Functional& I, const MPoly& W, const FieldModel& fm)
{
  return I + lg_vertex(fm, W);
}

}  // namespace bvlab

#endif  // BVLAB_LINFTY_HPP
