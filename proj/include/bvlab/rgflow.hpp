#ifndef BVLAB_RGFLOW_HPP
#define BVLAB_RGFLOW_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/graphs.hpp"
#include "bvlab/linalg.hpp"
#include "bvlab/linfty.hpp"
#include "bvlab/superalg.hpp"

namespace bvlab {

/** \brief A derivative slot: which vertex factor it hits and which generator. */
struct SlotOp {
  std::size_t vertex;
  std::size_t gen;
};

namespace detail {

/**
 * \brief Sign relating (ops in string order) applied to f_1...f_n with the ordered product of
 * (G_v f_v), where G_v collects the ops at v in their original relative order.
 */
inline int slot_sign(const GradedSpace& s, const std::vector<SlotOp>& ops,
                     const std::vector<int>& factor_parity)
{
  int sign = 1;
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = i + 1; j < ops.size(); ++j)
      if (ops[i].vertex > ops[j].vertex && s.odd(ops[i].gen) && s.odd(ops[j].gen)) sign = -sign;
  std::vector<int> gpar(factor_parity.size(), 0);
  for (const auto& o : ops)
    if (s.odd(o.gen)) gpar[o.vertex] ^= 1;
  int before = 0;
  for (std::size_t v = 0; v < factor_parity.size(); ++v) {
    if (gpar[v] && before) sign = -sign;
    before ^= factor_parity[v];
  }
  return sign;
}

/** \brief Memoized iterated left derivatives of one parity-homogeneous factor. */
class DerivativeCache {
 public:
  explicit DerivativeCache(Functional f) { memo_.emplace(std::vector<std::size_t>{}, std::move(f)); }

  /** \brief d_{seq.back()} ... d_{seq.front()} f, i.e. seq lists generators in application order. */
  const Functional& get(const std::vector<std::size_t>& seq)
  {
    auto it = memo_.find(seq);
    if (it != memo_.end()) return it->second;
    std::vector<std::size_t> prefix(seq.begin(), seq.end() - 1);
    Functional d = derivative(get(prefix), seq.back());
    return memo_.emplace(seq, std::move(d)).first->second;
  }

 private:
  std::map<std::vector<std::size_t>, Functional> memo_;
};

/**
 * \brief Contract vertex factors along the graph.
 *
 * The operator string is (tail ops in tail order, then for each edge (h1,h2) in half-edge order
 * k^{ab} d^{(pi h1)}_a d^{(pi h2)}_b); it acts on the ordered product of vertex factors.
 */
inline Functional contract_graph(const FeynGraph& g, const std::vector<const Kernel*>& edge_kernels,
                                 const std::vector<Functional>& factors,
                                 const std::vector<std::size_t>& tail_inputs)
{
  const std::size_t n = g.num_vertices();
  if (factors.size() != n) throw InputError("one vertex label per vertex required");
  const auto edges = g.edges();
  if (edge_kernels.size() != edges.size()) throw InputError("one kernel per edge required");
  const auto tails = g.tails();
  if (!tail_inputs.empty() && tail_inputs.size() != tails.size())
    throw InputError("one input per tail required");
  Functional result = factors.at(0).zero_like();
  const GradedSpace& s = *result.space();
  for (const auto* k : edge_kernels)
    if (!k || !same_space(k->space(), result.space()))
      throw ConfigError("edge kernel on a different space");

  std::vector<std::vector<Functional>> parts(n);
  for (std::size_t v = 0; v < n; ++v)
    for (int p = 0; p < 2; ++p) parts[v].push_back(factors[v].parity_part(p));

  std::vector<SlotOp> fixed_ops;
  for (std::size_t t = 0; t < tail_inputs.size(); ++t) {
    if (tail_inputs[t] >= s.size()) throw InputError("tail input out of range");
    fixed_ops.push_back({static_cast<std::size_t>(g.pi()[tails[t]]), tail_inputs[t]});
  }

  std::vector<int> par(n, 0);
  auto over_parities = [&](auto&& self, std::size_t v) -> void {
    if (v < n) {
      for (int p = 0; p < 2; ++p) {
        if (parts[v][p].is_zero()) continue;
        par[v] = p;
        self(self, v + 1);
      }
      return;
    }
    std::vector<DerivativeCache> cache;
    for (std::size_t w = 0; w < n; ++w) cache.emplace_back(parts[w][par[w]]);
    std::vector<std::vector<std::size_t>> applied(n);
    std::vector<SlotOp> ops(fixed_ops);
    ops.resize(fixed_ops.size() + 2 * edges.size());
    auto apply = [&](std::size_t vert, std::size_t gen) -> bool {
      applied[vert].push_back(gen);
      return !cache[vert].get(applied[vert]).is_zero();
    };
    // edges are chosen from the last to the first: the rightmost operator acts first
    auto dfs2 = [&](auto&& dself, std::size_t e_left, Rational coef) -> void {
      if (e_left == 0) {
        std::vector<std::size_t> mark(n);
        for (std::size_t x = 0; x < n; ++x) mark[x] = applied[x].size();
        bool alive = true;
        for (std::size_t t = fixed_ops.size(); t-- > 0 && alive;)
          alive = apply(fixed_ops[t].vertex, fixed_ops[t].gen);
        if (alive) {
          Functional prod = Functional::constant(result.space(), Rational(1), result.truncation(),
                                                 result.hbar_min(), result.hbar_max());
          for (std::size_t x = 0; x < n && !prod.is_zero(); ++x)
            prod = mul(prod, cache[x].get(applied[x]));
          if (!prod.is_zero()) {
            int sg = slot_sign(s, ops, par);
            result += prod * (sg > 0 ? coef : Rational(-coef));
          }
        }
        for (std::size_t x = 0; x < n; ++x) applied[x].resize(mark[x]);
        return;
      }
      const std::size_t e = e_left - 1;
      const std::size_t v = g.pi()[edges[e].first], w = g.pi()[edges[e].second];
      const std::size_t mv = applied[v].size(), mw = applied[w].size();
      for (const auto& [ab, c] : edge_kernels[e]->entries()) {
        ops[fixed_ops.size() + 2 * e] = {v, ab.first};
        ops[fixed_ops.size() + 2 * e + 1] = {w, ab.second};
        if (apply(w, ab.second) && apply(v, ab.first)) dself(dself, e_left - 1, coef * c);
        applied[v].resize(mv);
        applied[w].resize(v == w ? mv : mw);
      }
    };
    dfs2(dfs2, edges.size(), Rational(1));
  };
  over_parities(over_parities, 0);
  return result;
}

/** \brief Restrict each vertex label to the word length of its valence. */
inline std::vector<Functional> valence_labels(const FeynGraph& g, const std::vector<Functional>& labels)
{
  if (labels.size() != g.num_vertices()) throw InputError("one vertex label per vertex required");
  std::vector<Functional> out;
  for (std::size_t v = 0; v < labels.size(); ++v) out.push_back(labels[v].word_length_part(g.valence(v)));
  return out;
}

}  // namespace detail

/**
 * \brief Full contraction of the vertex labels along the edges against the tail inputs.
 *
 * Each label contributes its component of word length equal to the vertex valence; the
 * result maps hbar powers to coefficients.
 */
inline std::map<int, Rational> feynman_weight(const FeynGraph& g,
                                              const std::vector<const Kernel*>& edge_kernels,
                                              const std::vector<Functional>& vertex_labels,
                                              const std::vector<std::size_t>& inputs)
{
  if (inputs.size() != g.tails().size())
    throw InputError("feynman_weight: " + std::to_string(inputs.size()) + " inputs for " +
                     std::to_string(g.tails().size()) + " tails");
  Functional f = detail::contract_graph(g, edge_kernels, detail::valence_labels(g, vertex_labels), inputs);
  std::map<int, Rational> out;
  for (const auto& [k, c] : f.terms())
    if (word_length(k.mono) == 0) out[k.hbar] += c;
  return out;
}

/** \brief Contraction along the edges with the tails left as free fields. */
inline Functional graph_functional(const FeynGraph& g, const std::vector<const Kernel*>& edge_kernels,
                                   const std::vector<Functional>& vertex_labels)
{
  return detail::contract_graph(g, edge_kernels, detail::valence_labels(g, vertex_labels), {});
}

/**
 * \brief Bounds for the flow.  Output terms hbar^g (word length n) are kept when g <= max_genus
 * and 2g - 2 + n <= max_vertices; every graph that can contribute to such a term has at most
 * max_vertices vertices, so the kept part is exact.  max_vertices = 0 selects 2 max_genus - 2 + D.
 */
struct FlowBounds {
  int max_genus = 1;
  int max_vertices = 0;
  unsigned threads = 1;
};

struct GraphContribution {
  std::size_t graph_id = 0;
  FeynGraph graph;
  long long automorphisms = 1;  // tails free to permute
  Rational weight;              // prod_v t_v! / |Aut|
  int genus = 0;
  Functional value;
};

struct FlowResult {
  Functional W;
  std::vector<GraphContribution> ledger;
};

namespace detail {

/**
 * \brief Leftover tails of a contracted label carry 1/t_v!, so the symmetry factor
 * 1/|Aut| of the tensor contraction becomes prod t_v!/|Aut| here.
 */
inline Rational graph_weight(const FeynGraph& g, long long aut)
{
  Rational w(1, static_cast<unsigned long>(aut));
  for (std::size_t v = 0; v < g.num_vertices(); ++v) w *= factorial(g.tails_at(v));
  return w;
}

inline int euler_weight(int hbar, int word) { return 2 * hbar - 2 + word; }

inline int resolved_cap(const FlowBounds& b, int D)
{
  if (b.max_genus < 0) throw ConfigError("max_genus must be non-negative");
  int cap = b.max_vertices > 0 ? b.max_vertices : std::max(1, 2 * b.max_genus - 2 + D);
  return cap;
}

/** \brief Stable terms inside the bounds; these become vertices. */
inline bool flows(const TermKey& k, int G, int cap)
{
  int n = word_length(k.mono);
  if (k.hbar < 0 || k.hbar > G) return false;
  int chi = euler_weight(k.hbar, n);
  return chi >= 1 && chi <= cap;
}

}  // namespace detail

/**
 * \brief W(P, I) as the sum over stable connected graphs of hbar^{g(gamma)}/|Aut| times the
 * contraction of the vertex tensors.  Terms of I outside the bounds or unstable pass through unchanged.
 */
inline FlowResult rg_flow_ledger(const Kernel& P, const Functional& I, const FlowBounds& b = {})
{
  if (!same_space(P.space(), I.space())) throw ConfigError("rg_flow: kernel and functional spaces differ");
  const int D = I.truncation(), G = b.max_genus, cap = detail::resolved_cap(b, D);
  Functional stable = I.filter([&](const TermKey& k) { return detail::flows(k, G, cap); });
  FlowResult res{I - stable, {}};

  GraphBounds gb;
  gb.max_genus = G;
  gb.max_vertices = cap;
  gb.max_tails = D;
  std::vector<FeynGraph> graphs;
  for (auto& g : enumerate_stable(gb)) {
    int n = static_cast<int>(g.tails().size());
    if (detail::euler_weight(genus(g), n) <= cap) graphs.push_back(std::move(g));
  }

  std::map<std::pair<int, int>, Functional> parts;  // (hbar, word) -> component
  auto component = [&](int h, int n) -> const Functional& {
    auto it = parts.find({h, n});
    if (it == parts.end())
      it = parts.emplace(std::make_pair(h, n), stable.filter([&](const TermKey& k) {
                            return k.hbar == h && word_length(k.mono) == n;
                          })).first;
    return it->second;
  };
  for (const auto& g : graphs)
    for (std::size_t v = 0; v < g.num_vertices(); ++v) component(g.vertex_genus()[v], g.valence(v));

  std::vector<GraphContribution> out(graphs.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < graphs.size(); i += stride) {
      const FeynGraph& g = graphs[i];
      std::vector<Functional> labels;
      bool dead = false;
      for (std::size_t v = 0; v < g.num_vertices(); ++v) {
        labels.push_back(parts.at({g.vertex_genus()[v], g.valence(v)}));
        dead = dead || labels.back().is_zero();
      }
      GraphContribution c;
      c.graph_id = i;
      c.graph = g;
      c.genus = genus(g);
      c.automorphisms = automorphism_order(g, TailMode::Unlabeled);
      c.weight = detail::graph_weight(g, c.automorphisms);
      if (dead || (g.num_edges() > 0 && P.is_zero())) {
        c.value = I.zero_like();
      } else {
        std::vector<const Kernel*> ks(g.num_edges(), &P);
        c.value = detail::contract_graph(g, ks, labels, {}).shift_hbar(g.first_betti()) * c.weight;
        c.value = c.value.filter([&](const TermKey& k) {
          return k.hbar <= G && detail::euler_weight(k.hbar, word_length(k.mono)) <= cap;
        });
      }
      out[i] = std::move(c);
    }
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(b.threads, static_cast<unsigned>(graphs.size())));
  if (nt <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (unsigned t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        try {
          work(t, nt);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  for (auto& c : out) {
    res.W += c.value;
    if (!c.value.is_zero()) res.ledger.push_back(std::move(c));
  }
  return res;
}

inline Functional rg_flow(const Kernel& P, const Functional& I, const FlowBounds& b = {})
{
  return rg_flow_ledger(P, I, b).W;
}

/**
 * \brief W(P2, W(P1, I)) - W(P1 + P2, I) at word length <= D.
 *
 * A genus-g output term of word length n needs intermediate terms of word length up to n + 2g,
 * so both sides are evaluated at truncation D + 2 max_genus with the vertex cap fixed by D.
 */
inline Functional rge_check(const Kernel& P1, const Kernel& P2, const Functional& I, const FlowBounds& b = {})
{
  const int D = I.truncation();
  FlowBounds wide = b;
  wide.max_vertices = detail::resolved_cap(b, D);
  Functional J = I.retruncate(D + 2 * b.max_genus, I.hbar_min(), I.hbar_max());
  Functional r = rg_flow(P2, rg_flow(P1, J, wide), wide) - rg_flow(P1 + P2, J, wide);
  return r.retruncate(D, I.hbar_min(), I.hbar_max());
}

/** \brief A finite effective theory on a harmonic field space. */
struct EffectiveTheory {
  SpacePtr field_space;
  Functional interaction;
  Kernel propagator;
  Kernel bv_kernel;
  Derivation q_operator;
  Functional curvature_term;              // F_{l1}
  Functional tagged_low_order;            // hbar^0 terms of word length < 3 allowed in I
  std::optional<Derivation> q_correction;  // user-supplied part of Q_L beyond Q

  /** \brief Every hbar^0 term of word length < 3 must be a tagged curvature or twist term. */
  void validate() const
  {
    if (!same_space(interaction.space(), field_space) || !same_space(bv_kernel.space(), field_space))
      throw ConfigError("effective theory: components live on different spaces");
    if (bv_kernel.degree() && (*bv_kernel.degree() & 1) == 0)
      throw ConfigError("effective theory: BV kernel must be odd");
    for (const auto& [k, c] : interaction.terms()) {
      if (k.hbar != 0 || word_length(k.mono) >= 3) continue;
      if (tagged_low_order.coeff(k.mono, 0) != c)
        throw InputError("interaction is not at least cubic modulo hbar: untagged term of word length " +
                         std::to_string(word_length(k.mono)));
    }
  }

  static EffectiveTheory from_field_model(const FieldModel& fm, const Functional& I,
                                          const std::optional<Kernel>& P = std::nullopt,
                                          const std::optional<Functional>& extra_tagged = std::nullopt)
  {
    EffectiveTheory t{fm.space(), I, P ? *P : Kernel(fm.space()), fm.bv_kernel(), q_derivation(fm),
                      f_l1(fm), fm.zero(), std::nullopt};
    Functional low = fm.action_part({0});
    for (const auto& [k, tb] : fm.model().brackets())
      if (k >= 2) low += fm.action_part({k});
    if (extra_tagged) low += *extra_tagged;
    t.tagged_low_order = low.filter([](const TermKey& k) { return k.hbar == 0 && word_length(k.mono) < 3; });
    t.validate();
    return t;
  }
};

struct QmeReport {
  Functional residual;
  Functional R;  // field-independent part, divided by hbar
};

/**
 * \brief Terms involving no generator paired by the kernel.  Unpaired generators play the role
 * of the base ring, so on a harmonic field space this is the constant part.
 */
inline Functional field_independent_part(const Functional& f, const Kernel& K)
{
  std::vector<bool> field(f.space()->size(), false);
  for (const auto& [ab, c] : K.entries()) field[ab.first] = field[ab.second] = true;
  return f.filter([&](const TermKey& k) {
    for (std::size_t i = 0; i < k.mono.size(); ++i)
      if (k.mono[i] && field[i]) return false;
    return true;
  });
}

/** \brief Q I + 1/2 {I,I} + hbar Delta I + F_{l1}, with the field-independent part split off as hbar R. */
inline QmeReport qme_residual(const EffectiveTheory& T)
{
  const Functional& I = T.interaction;
  Functional total = apply_derivation(T.q_operator, I) + bv_bracket(I, I, T.bv_kernel) * Rational(1, 2) +
                     bv_laplacian(I, T.bv_kernel).shift_hbar(1) + T.curvature_term;
  if (T.q_correction) total += apply_derivation(*T.q_correction, I);
  Functional constant = field_independent_part(total, T.bv_kernel);
  return {total - constant, constant.shift_hbar(-1)};
}

/** \brief {(I_qc)_1, l~_0}: the constant term predicted from the field-linear part of the correction. */
inline Functional qme_constant_term(const Functional& I_qc, const Functional& l0_term, const Kernel& K)
{
  std::vector<bool> field(I_qc.space()->size(), false);
  for (const auto& [ab, c] : K.entries()) field[ab.first] = field[ab.second] = true;
  Functional linear = I_qc.filter([&](const TermKey& k) {
    int n = 0;
    for (std::size_t i = 0; i < k.mono.size(); ++i)
      if (field[i]) n += k.mono[i];
    return n == 1;
  });
  return field_independent_part(bv_bracket(linear, l0_term, K), K);
}

/** \brief Identity on functionals already written over harmonic generators. */
inline Functional harmonic_restrict(const FieldModel& fm, const Functional& I)
{
  if (!same_space(fm.space(), I.space())) throw ConfigError("harmonic_restrict: not a harmonic functional");
  return I;
}

/**
 * \brief Delta L on the CE space: L = sum_i p_i xi_i Q^i on the point model with coordinates
 * x^i and xi_i, contracted with the odd kernel pairing them.
 */
inline Functional delta_L_functional(const CurvedLInftyModel& m, int D, int hmin = -4, int hmax = 2)
{
  const std::size_t n = m.dim();
  std::vector<Generator> gens;
  for (const auto& g : m.generators()) gens.push_back({g.name, -g.degree});
  for (const auto& g : m.generators()) gens.push_back({g.name + "^", 1 + g.degree});
  SpacePtr pt = make_space(gens);
  Kernel K(pt);
  for (std::size_t i = 0; i < n; ++i) K.set(i, n + i, Rational(1) / m.pairing(i));
  Functional L(pt, D + 1, hmin, hmax);
  for (std::size_t i = 0; i < n; ++i) {
    Functional q = m.ce_image(i, D + 1, hmin, hmax);
    Functional lifted(pt, D + 1, hmin, hmax);
    for (const auto& [k, c] : q.terms()) {
      Monomial mono(2 * n, 0);
      std::copy(k.mono.begin(), k.mono.end(), mono.begin());
      lifted.add_term(mono, k.hbar, c);
    }
    L += mul(Functional::generator(pt, n + i, D + 1, hmin, hmax), lifted) * m.pairing(i);
  }
  Functional dl = bv_laplacian(L, K);
  Functional out(m.ce_space(), D, hmin, hmax);
  for (const auto& [k, c] : dl.terms()) {
    Monomial mono(k.mono.begin(), k.mono.begin() + n);
    out.add_term(mono, k.hbar, c);
  }
  return out;
}

/** \brief The quantum-correction equation has no solution; the witness certifies it. */
struct ObstructionNonzero : std::runtime_error {
  Functional rhs;      // right-hand side of d_CE B = c Delta L
  Functional witness;  // linear form (coefficients on monomials) killing im d_CE but not rhs
  ObstructionNonzero(const std::string& what, Functional r, Functional w)
      : std::runtime_error(what), rhs(std::move(r)), witness(std::move(w))
  {
  }
};

/**
 * \brief Factor c in d_CE B = c Delta L.  With the bracket, kernel and embedding conventions used
 * here, I_cl + hbar (integral of vol B) satisfies the quantum master equation for c = -(2-2g).
 */
inline Rational quantum_correction_factor(int genus) { return Rational(2 * genus - 2); }

/**
 * \brief Degree-0 B with d_CE B = c Delta L modulo constants, B of word length 1..D and
 * the equation imposed at word length 1..D-1 (where it is complete).
 */
inline Functional solve_quantum_correction(const CurvedLInftyModel& m, int genus, int D)
{
  if (genus < 0) throw DomainError("genus must be non-negative");
  if (D < 2) throw ConfigError("solve_quantum_correction needs truncation >= 2");
  const GradedSpace& ce = *m.ce_space();
  const std::size_t n = m.dim();
  Functional rhs = delta_L_functional(m, D) * quantum_correction_factor(genus);
  rhs = rhs.filter([&](const TermKey& k) { int w = word_length(k.mono); return w >= 1 && w <= D - 1; });

  auto monomials = [&](int deg, int wmin, int wmax) {
    std::vector<Monomial> out;
    Monomial cur(n, 0);
    auto rec = [&](auto&& self, std::size_t i, int w) -> void {
      if (i == n) {
        if (w >= wmin) {
          int d = 0;
          for (std::size_t j = 0; j < n; ++j) d += cur[j] * ce.degree(j);
          if (d == deg) out.push_back(cur);
        }
        return;
      }
      int emax = ce.odd(i) ? 1 : wmax - w;
      for (int e = 0; e <= std::min(emax, wmax - w); ++e) {
        cur[i] = static_cast<std::uint8_t>(e);
        self(self, i + 1, w + e);
      }
      cur[i] = 0;
    };
    rec(rec, 0, 0);
    return out;
  };
  const auto unknowns = monomials(0, 1, D);
  const auto rows = monomials(1, 1, D - 1);
  std::map<Monomial, std::size_t> row_of;
  for (std::size_t r = 0; r < rows.size(); ++r) row_of[rows[r]] = r;

  Derivation dce = chevalley_eilenberg(m, D);
  QMatrix A(rows.size(), unknowns.size());
  for (std::size_t j = 0; j < unknowns.size(); ++j) {
    Functional b(m.ce_space(), D);
    b.add_term(unknowns[j], 0, Rational(1));
    const Functional db = apply_derivation(dce, b);
    for (const auto& [k, c] : db.terms()) {
      auto it = row_of.find(k.mono);
      if (it != row_of.end()) A(it->second, j) += c;
    }
  }
  std::vector<Rational> bvec(rows.size());
  for (const auto& [k, c] : rhs.terms()) {
    auto it = row_of.find(k.mono);
    if (it == row_of.end()) throw InputError("Delta L has a term of unexpected degree");
    bvec[it->second] += c;
  }
  auto x = solve(A, bvec);
  if (!x) {
    // left-kernel vector y with y^T A = 0 and y^T b != 0
    QMatrix T(A.cols + 1, A.rows + 1);
    for (std::size_t i = 0; i < A.rows; ++i) {
      for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
      T(A.cols, i) = bvec[i];
    }
    T(A.cols, A.rows) = Rational(-1);
    auto y = solve(QMatrix([&] {
                     QMatrix M(T.rows, A.rows);
                     for (std::size_t r = 0; r < T.rows; ++r)
                       for (std::size_t c = 0; c < A.rows; ++c) M(r, c) = T(r, c);
                     return M;
                   }()),
                   [&] {
                     std::vector<Rational> e(T.rows);
                     e[A.cols] = Rational(1);
                     return e;
                   }());
    Functional w(m.ce_space(), D);
    if (y)
      for (std::size_t r = 0; r < rows.size(); ++r) w.add_term(rows[r], 0, (*y)[r]);
    throw ObstructionNonzero("one-loop obstruction: (2g-2) Delta L is not d_CE-exact at truncation " +
                                 std::to_string(D),
                             rhs, w);
  }
  Functional B(m.ce_space(), D);
  for (std::size_t j = 0; j < unknowns.size(); ++j) B.add_term(unknowns[j], 0, (*x)[j]);
  return B;
}

/** \brief Cycle graphs with at least two genus-0 vertices, each carrying at least one tail. */
inline std::vector<FeynGraph> wheel_graphs(int max_tails)
{
  GraphBounds gb;
  gb.max_genus = 1;
  gb.max_vertices = std::min(max_tails, 8);
  gb.max_tails = max_tails;
  std::vector<FeynGraph> out;
  if (max_tails < 2) return out;
  for (auto& g : enumerate_stable(gb)) {
    if (g.num_vertices() < 2 || g.first_betti() != 1) continue;
    bool ok = true;
    for (std::size_t v = 0; v < g.num_vertices(); ++v)
      ok = ok && g.vertex_genus()[v] == 0 && g.valence(v) - g.tails_at(v) == 2;
    if (ok) out.push_back(std::move(g));
  }
  return out;
}

/**
 * \brief Sum over wheels of 1/|Aut| times the weight with one edge carrying K_diff and the
 * others P, plus Delta_{K_diff} I.  Uses the hbar^0 part of I; returns the hbar^1 coefficient.
 */
inline Functional one_loop_anomaly(const Kernel& P, const Kernel& K_diff, const Functional& I)
{
  if (!same_space(P.space(), I.space()) || !same_space(K_diff.space(), I.space()))
    throw ConfigError("one_loop_anomaly: space mismatch");
  Functional I0 = I.hbar_part(0);
  Functional out = contract(I0, K_diff);
  if (P.is_zero()) return out;
  for (const auto& g : wheel_graphs(I.truncation())) {
    const Rational w = detail::graph_weight(g, automorphism_order(g, TailMode::Unlabeled));
    std::vector<Functional> labels(g.num_vertices(), I0);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      std::vector<const Kernel*> ks(g.num_edges(), &P);
      ks[e] = &K_diff;
      out += graph_functional(g, ks, labels) * w;
    }
  }
  return out;
}

struct WheelSplit {
  Functional forward;   // edge pairs (a,b) < (c,d)
  Functional backward;  // edge pairs (a,b) > (c,d)
  Functional total() const { return forward + backward; }
};

/**
 * \brief Two vertices f, g joined by two edges both carrying the odd kernel K, split by the
 * relative order of the two kernel entries.  The diagonal vanishes since each edge operator is odd.
 */
inline WheelSplit two_vertex_wheel(const Kernel& K, const Functional& f, const Functional& g)
{
  if (K.degree() && (*K.degree() & 1) == 0) throw ConfigError("two_vertex_wheel: kernel must be odd");
  const GradedSpace& s = *f.space();
  WheelSplit r{f.zero_like(), f.zero_like()};
  for (int pf = 0; pf < 2; ++pf)
    for (int pg = 0; pg < 2; ++pg) {
      Functional fp = f.parity_part(pf), gp = g.parity_part(pg);
      if (fp.is_zero() || gp.is_zero()) continue;
      detail::DerivativeCache cf(fp), cg(gp);
      for (const auto& [e1, c1] : K.entries())
        for (const auto& [e2, c2] : K.entries()) {
          if (e1 == e2) continue;
          // string: d^{(0)}_a d^{(1)}_b d^{(0)}_c d^{(1)}_d acting on f g
          std::vector<SlotOp> ops{{0, e1.first}, {1, e1.second}, {0, e2.first}, {1, e2.second}};
          const Functional& df = cf.get({e2.first, e1.first});
          if (df.is_zero()) continue;
          const Functional& dg = cg.get({e2.second, e1.second});
          if (dg.is_zero()) continue;
          Functional t = mul(df, dg) * (c1 * c2);
          if (detail::slot_sign(s, ops, {pf, pg}) < 0) t = -t;
          (e1 < e2 ? r.forward : r.backward) += t;
        }
    }
  return r;
}

}  // namespace bvlab

#endif  // BVLAB_RGFLOW_HPP
