#ifndef BVLAB_GRAPHS_HPP
#define BVLAB_GRAPHS_HPP

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bvlab/errors.hpp"

namespace bvlab {

/** \brief How automorphisms and isomorphisms treat tails. */
enum class TailMode {
  Labeled,   ///< tails fixed pointwise (tail k maps to tail k, in half-edge order)
  Unlabeled  ///< tails may be permuted
};

/**
 * \brief Half-edge graph: involution sigma, vertex map pi, vertex genus.
 *
 * Fixed points of sigma are tails; 2-cycles are internal edges.
 */
class FeynGraph {
 public:
  FeynGraph() = default;

  FeynGraph(std::vector<int> sigma, std::vector<int> pi, std::vector<int> vertex_genus)
      : sigma_(std::move(sigma)), pi_(std::move(pi)), genus_(std::move(vertex_genus))
  {
    validate();
  }

  /**
   * \brief Graph from a decorated multigraph.  Half-edges are numbered edge by edge
   * (pairs i <= j in row order, loops included), then tails vertex by vertex.
   */
  static FeynGraph from_multigraph(const std::vector<int>& vertex_genus,
                                   const std::vector<int>& tails,
                                   const std::vector<std::vector<int>>& mult)
  {
    const std::size_t n = vertex_genus.size();
    if (tails.size() != n || mult.size() != n) throw InputError("multigraph size mismatch");
    std::vector<int> sigma, pi;
    for (std::size_t i = 0; i < n; ++i) {
      if (mult[i].size() != n) throw InputError("multiplicity matrix is not square");
      for (std::size_t j = i; j < n; ++j) {
        if (mult[i][j] != mult[j][i]) throw InputError("multiplicity matrix is not symmetric");
        for (int e = 0; e < mult[i][j]; ++e) {
          int h = static_cast<int>(sigma.size());
          sigma.push_back(h + 1);
          sigma.push_back(h);
          pi.push_back(static_cast<int>(i));
          pi.push_back(static_cast<int>(j));
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (int t = 0; t < tails[i]; ++t) {
        sigma.push_back(static_cast<int>(sigma.size()));
        pi.push_back(static_cast<int>(i));
      }
    return FeynGraph(sigma, pi, vertex_genus);
  }

  std::size_t num_half_edges() const { return sigma_.size(); }
  std::size_t num_vertices() const { return genus_.size(); }
  const std::vector<int>& sigma() const { return sigma_; }
  const std::vector<int>& pi() const { return pi_; }
  const std::vector<int>& vertex_genus() const { return genus_; }

  bool is_tail(int h) const { return sigma_[h] == h; }

  std::vector<int> tails() const
  {
    std::vector<int> t;
    for (std::size_t h = 0; h < sigma_.size(); ++h)
      if (sigma_[h] == static_cast<int>(h)) t.push_back(static_cast<int>(h));
    return t;
  }

  /** \brief Internal edges as (h, sigma(h)) with h < sigma(h), in half-edge order. */
  std::vector<std::pair<int, int>> edges() const
  {
    std::vector<std::pair<int, int>> e;
    for (std::size_t h = 0; h < sigma_.size(); ++h)
      if (sigma_[h] > static_cast<int>(h)) e.push_back({static_cast<int>(h), sigma_[h]});
    return e;
  }

  std::size_t num_edges() const { return edges().size(); }

  int valence(std::size_t v) const
  {
    return static_cast<int>(std::count(pi_.begin(), pi_.end(), static_cast<int>(v)));
  }

  int tails_at(std::size_t v) const
  {
    int c = 0;
    for (std::size_t h = 0; h < sigma_.size(); ++h)
      if (pi_[h] == static_cast<int>(v) && sigma_[h] == static_cast<int>(h)) ++c;
    return c;
  }

  /** \brief Symmetric matrix of edge multiplicities; the diagonal counts loops. */
  std::vector<std::vector<int>> multiplicity() const
  {
    std::vector<std::vector<int>> m(num_vertices(), std::vector<int>(num_vertices(), 0));
    for (auto [a, b] : edges()) {
      int v = pi_[a], w = pi_[b];
      ++m[v][w];
      if (v != w) ++m[w][v];
    }
    return m;
  }

  int num_components() const
  {
    std::vector<int> parent(num_vertices());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (auto [a, b] : edges()) parent[find(pi_[a])] = find(pi_[b]);
    int c = 0;
    for (std::size_t v = 0; v < num_vertices(); ++v)
      if (find(static_cast<int>(v)) == static_cast<int>(v)) ++c;
    return c;
  }

  bool connected() const { return num_vertices() > 0 && num_components() == 1; }

  int first_betti() const
  {
    return static_cast<int>(num_edges()) - static_cast<int>(num_vertices()) + num_components();
  }

 private:
  void validate() const
  {
    if (pi_.size() != sigma_.size()) throw InputError("sigma and pi have different lengths");
    const int H = static_cast<int>(sigma_.size());
    for (int h = 0; h < H; ++h) {
      if (sigma_[h] < 0 || sigma_[h] >= H) throw InputError("sigma out of range");
      if (sigma_[sigma_[h]] != h) throw InputError("sigma is not an involution");
      if (pi_[h] < 0 || pi_[h] >= static_cast<int>(genus_.size()))
        throw InputError("pi maps to a nonexistent vertex");
    }
    for (int g : genus_)
      if (g < 0) throw InputError("negative vertex genus");
  }

  std::vector<int> sigma_, pi_, genus_;
};

/** \brief b1 plus the sum of vertex genera. */
inline int genus(const FeynGraph& g)
{
  int s = g.first_betti();
  for (int x : g.vertex_genus()) s += x;
  return s;
}

/** \brief Genus-0 vertices at least trivalent, genus-1 vertices at least univalent. */
inline bool is_stable(const FeynGraph& g)
{
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    int gv = g.vertex_genus()[v], val = g.valence(v);
    if (gv == 0 && val < 3) return false;
    if (gv == 1 && val < 1) return false;
  }
  return true;
}

/**
 * \brief Isomorphism-invariant encoding: minimum over vertex orderings of
 * (genera, per-vertex tail data, multiplicity matrix).
 */
using CanonicalForm = std::vector<int>;

namespace detail {

inline std::vector<std::vector<int>> tail_ordinals(const FeynGraph& g)
{
  std::vector<std::vector<int>> t(g.num_vertices());
  int k = 0;
  for (int h : g.tails()) t[g.pi()[h]].push_back(k++);
  return t;
}

/** \brief Visit every vertex permutation that preserves a cheap invariant. */
template <class F>
void for_each_class_permutation(const FeynGraph& g, TailMode mode, F&& visit)
{
  const std::size_t n = g.num_vertices();
  auto mult = g.multiplicity();
  auto tord = tail_ordinals(g);
  std::vector<std::vector<int>> inv(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<int> row(mult[v]);
    row.erase(row.begin() + static_cast<long>(v));
    std::sort(row.begin(), row.end());
    inv[v] = {g.vertex_genus()[v], g.valence(v), mult[v][v], g.tails_at(v)};
    inv[v].insert(inv[v].end(), row.begin(), row.end());
    if (mode == TailMode::Labeled) inv[v].insert(inv[v].end(), tord[v].begin(), tord[v].end());
  }
  // positions sorted by invariant; each position may take any vertex of the same invariant
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return inv[a] < inv[b]; });
  std::vector<std::size_t> perm(n);
  std::vector<bool> used(n, false);
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (pos == n) {
      visit(perm);
      return;
    }
    for (std::size_t v = 0; v < n; ++v)
      if (!used[v] && inv[v] == inv[order[pos]]) {
        used[v] = true;
        perm[pos] = v;
        self(self, pos + 1);
        used[v] = false;
      }
  };
  rec(rec, 0);
}

inline CanonicalForm encode(const FeynGraph& g, TailMode mode, const std::vector<std::size_t>& perm,
                            const std::vector<std::vector<int>>& mult,
                            const std::vector<std::vector<int>>& tord)
{
  const std::size_t n = perm.size();
  CanonicalForm c{static_cast<int>(n)};
  for (std::size_t i = 0; i < n; ++i) c.push_back(g.vertex_genus()[perm[i]]);
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == TailMode::Labeled) {
      c.push_back(static_cast<int>(tord[perm[i]].size()));
      c.insert(c.end(), tord[perm[i]].begin(), tord[perm[i]].end());
    } else {
      c.push_back(g.tails_at(perm[i]));
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) c.push_back(mult[perm[i]][perm[j]]);
  return c;
}

}  // namespace detail

inline CanonicalForm canonical_form(const FeynGraph& g, TailMode mode = TailMode::Labeled)
{
  auto mult = g.multiplicity();
  auto tord = detail::tail_ordinals(g);
  CanonicalForm best;
  bool first = true;
  detail::for_each_class_permutation(g, mode, [&](const std::vector<std::size_t>& perm) {
    CanonicalForm c = detail::encode(g, mode, perm, mult, tord);
    if (first || c < best) best = std::move(c);
    first = false;
  });
  return best;
}

inline long long factorial_ll(int n)
{
  long long f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/** \brief Number of vertex permutations preserving genera, tails and multiplicities. */
inline long long vertex_automorphisms(const FeynGraph& g, TailMode mode = TailMode::Labeled)
{
  auto mult = g.multiplicity();
  auto tord = detail::tail_ordinals(g);
  // orderings are visited relative to an invariant-sorted base, so compare with the first one
  std::optional<CanonicalForm> ref;
  long long count = 0;
  detail::for_each_class_permutation(g, mode, [&](const std::vector<std::size_t>& perm) {
    CanonicalForm c = detail::encode(g, mode, perm, mult, tord);
    if (!ref) ref = c;
    if (c == *ref) ++count;
  });
  return count;
}

/**
 * \brief Order of the group of half-edge permutations commuting with sigma, compatible with
 * pi and the vertex genera.  Tails are fixed pointwise in Labeled mode.
 */
inline long long automorphism_order(const FeynGraph& g, TailMode mode = TailMode::Labeled)
{
  if (!g.connected()) throw InputError("automorphism_order: graph is not connected");
  long long a = vertex_automorphisms(g, mode);
  auto mult = g.multiplicity();
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    for (std::size_t w = v + 1; w < g.num_vertices(); ++w) a *= factorial_ll(mult[v][w]);
    a *= factorial_ll(mult[v][v]) << mult[v][v];
    if (mode == TailMode::Unlabeled) a *= factorial_ll(g.tails_at(v));
  }
  return a;
}

/** \brief Hard limits for enumeration. */
struct GraphBounds {
  int max_genus = 1;
  int max_vertices = 4;
  int max_tails = 4;

  static constexpr int kMaxGenus = 4;
  static constexpr int kMaxVertices = 8;
  static constexpr int kMaxTails = 10;

  void check() const
  {
    if (max_genus < 0 || max_vertices < 0 || max_tails < 0)
      throw ConfigError("graph bounds must be nonnegative");
    if (max_genus > kMaxGenus || max_vertices > kMaxVertices || max_tails > kMaxTails)
      throw ResourceError("graph bounds exceed hard limits (genus " + std::to_string(kMaxGenus) +
                          ", vertices " + std::to_string(kMaxVertices) + ", tails " +
                          std::to_string(kMaxTails) + ")");
  }
};

/**
 * \brief All connected stable graphs with genus, vertex count and tail count within the bounds,
 * up to isomorphism with unlabeled tails.  Ordered by (genus, vertices, edges, tails, form).
 */
inline std::vector<FeynGraph> enumerate_stable(const GraphBounds& b)
{
  b.check();
  std::map<std::vector<int>, FeynGraph> found;
  for (int n = 1; n <= b.max_vertices; ++n) {
    const int npairs = n * (n + 1) / 2;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) pairs.push_back({i, j});
    // vertex genera: nondecreasing is enough up to isomorphism
    std::vector<int> gen(n, 0);
    auto genus_rec = [&](auto&& self, int i, int left) -> void {
      if (i == n) {
        int gsum = 0;
        for (int x : gen) gsum += x;
        for (int E = n - 1; E <= n - 1 + b.max_genus - gsum; ++E) {
          std::vector<int> m(npairs, 0);
          auto edge_rec = [&](auto&& eself, int p, int left_e) -> void {
            if (p == npairs - 1) {
              m[p] = left_e;
              std::vector<std::vector<int>> mult(n, std::vector<int>(n, 0));
              for (int q = 0; q < npairs; ++q) {
                auto [x, y] = pairs[q];
                mult[x][y] = mult[y][x] = m[q];
              }
              std::vector<int> t0(n, 0);
              FeynGraph core = FeynGraph::from_multigraph(gen, t0, mult);
              if (!core.connected()) return;
              std::vector<int> need(n);
              int need_sum = 0;
              for (int v = 0; v < n; ++v) {
                int val = core.valence(v);
                int req = gen[v] == 0 ? 3 : gen[v] == 1 ? 1 : 0;
                need[v] = std::max(0, req - val);
                need_sum += need[v];
              }
              if (need_sum > b.max_tails) return;
              std::vector<int> t(n, 0);
              auto tail_rec = [&](auto&& tself, int v, int left_t) -> void {
                if (v == n) {
                  FeynGraph g = FeynGraph::from_multigraph(gen, t, mult);
                  auto c = canonical_form(g, TailMode::Unlabeled);
                  int tt = 0;
                  for (int x : t) tt += x;
                  std::vector<int> key{genus(g), n, E, tt};
                  key.insert(key.end(), c.begin(), c.end());
                  found.emplace(std::move(key), std::move(g));
                  return;
                }
                for (int k = need[v]; k <= left_t; ++k) {
                  t[v] = k;
                  tself(tself, v + 1, left_t - k);
                }
                t[v] = 0;
              };
              tail_rec(tail_rec, 0, b.max_tails);
              return;
            }
            for (int k = 0; k <= left_e; ++k) {
              m[p] = k;
              eself(eself, p + 1, left_e - k);
            }
            m[p] = 0;
          };
          edge_rec(edge_rec, 0, E);
        }
        return;
      }
      for (int x = i ? gen[i - 1] : 0; x <= left; ++x) {
        gen[i] = x;
        self(self, i + 1, left - x);
      }
      gen[i] = 0;
    };
    genus_rec(genus_rec, 0, b.max_genus);
  }
  std::vector<FeynGraph> out;
  for (auto& [k, g] : found) out.push_back(std::move(g));
  return out;
}

inline std::string to_dot(const FeynGraph& g, const std::string& name = "G")
{
  std::ostringstream os;
  os << "graph " << name << " {\n";
  for (std::size_t v = 0; v < g.num_vertices(); ++v)
    os << "  v" << v << " [label=\"g=" << g.vertex_genus()[v] << "\"];\n";
  for (auto [a, b] : g.edges()) os << "  v" << g.pi()[a] << " -- v" << g.pi()[b] << ";\n";
  for (int h : g.tails())
    os << "  t" << h << " [shape=point];\n  v" << g.pi()[h] << " -- t" << h << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace bvlab

#endif  // BVLAB_GRAPHS_HPP
