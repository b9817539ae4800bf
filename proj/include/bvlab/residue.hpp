#ifndef BVLAB_RESIDUE_HPP
#define BVLAB_RESIDUE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/linalg.hpp"
#include "bvlab/polyring.hpp"

namespace bvlab {

/**
 * \brief Global residue functional of a zero-dimensional Jacobian ideal via the transformation law.
 *
 * Each g_i is univariate in z_i and lies in the Jacobian ideal, g_i = sum_j A(i,j) d_jW.  When all
 * g_i are pure powers z_i^N, `power` holds N.
 */
struct ResidueFunctional {
  MPoly W;
  JacobianData jacobian;
  std::vector<MPoly> g;
  std::vector<std::vector<MPoly>> A;
  MPoly detA;
  std::optional<int> power;
};

namespace detail {

inline MPoly det_poly(const std::vector<std::vector<MPoly>>& M, int nvars)
{
  const std::size_t n = M.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  MPoly d(nvars);
  do {
    int inv = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (perm[i] > perm[j]) ++inv;
    MPoly t = MPoly::constant(nvars, inv & 1 ? -1 : 1);
    for (std::size_t i = 0; i < n && !t.is_zero(); ++i) t = t * M[i][perm[i]];
    d += t;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return d;
}

/** \brief Monic univariate polynomial of least degree in z_i lying in the ideal. */
inline MPoly minimal_univariate(const JacobianData& J, int i)
{
  const int n = J.nvars;
  std::map<Exponent, std::size_t> col;
  for (std::size_t k = 0; k < J.quotient_monomials.size(); ++k) col[J.quotient_monomials[k]] = k;
  const std::size_t mu = J.quotient_monomials.size();
  std::vector<std::vector<Rational>> vecs;
  for (int k = 0; k <= static_cast<int>(mu); ++k) {
    MPoly nf = J.normal_form(MPoly::var(n, i, k));
    std::vector<Rational> v(mu);
    for (const auto& [e, c] : nf.terms()) v[col.at(e)] = c;
    if (!vecs.empty()) {
      QMatrix A(mu, vecs.size());
      for (std::size_t r = 0; r < mu; ++r)
        for (std::size_t c = 0; c < vecs.size(); ++c) A(r, c) = vecs[c][r];
      if (auto x = solve(A, v)) {
        MPoly g = MPoly::var(n, i, k);
        for (std::size_t c = 0; c < x->size(); ++c)
          g -= MPoly::var(n, i, static_cast<int>(c)) * (*x)[c];
        return g;
      }
    } else if (nf.is_zero()) {
      return MPoly::constant(n, 1);
    }
    vecs.push_back(std::move(v));
  }
  throw std::logic_error("minimal polynomial search exceeded the Milnor number");
}

inline bool is_pure_power(const MPoly& g, int i)
{
  return g.size() == 1 && g.leading_coeff() == 1 && g.total_degree() == g.terms().begin()->first[i];
}

}  // namespace detail

/** \brief Residue data using the given univariate elements g_i of the Jacobian ideal. */
inline ResidueFunctional build_residue_from(const MPoly& W, std::vector<MPoly> g)
{
  ResidueFunctional R{W, jacobian(W), std::move(g), {}, MPoly(W.nvars()), std::nullopt};
  if (static_cast<int>(R.g.size()) != W.nvars()) throw InputError("need one element per variable");
  GroebnerResult gb = groebner_tracked(partials(W));
  for (const auto& gi : R.g) R.A.push_back(membership_with_cofactors(gi, gb));
  R.detA = detail::det_poly(R.A, W.nvars());
  return R;
}

/** \brief Residue data with a common power: z_i^N in the Jacobian ideal for all i. */
inline ResidueFunctional build_residue_with_power(const MPoly& W, int N)
{
  std::vector<MPoly> g;
  for (int i = 0; i < W.nvars(); ++i) g.push_back(MPoly::var(W.nvars(), i, N));
  ResidueFunctional R = build_residue_from(W, g);
  R.power = N;
  return R;
}

inline ResidueFunctional build_residue(const MPoly& W)
{
  JacobianData J = jacobian(W);
  if (J.milnor == 0) throw DomainError("Jacobian ideal is the unit ideal: no critical points");
  std::vector<MPoly> g;
  bool pure = true;
  int N = 0;
  for (int i = 0; i < W.nvars(); ++i) {
    g.push_back(detail::minimal_univariate(J, i));
    pure = pure && detail::is_pure_power(g.back(), i);
    N = std::max(N, g.back().total_degree());
  }
  if (pure) return build_residue_with_power(W, N);
  return build_residue_from(W, g);
}

/** \brief Sum over critical points of Res(f dz / prod d_iW). */
inline Rational global_residue(const MPoly& f, const ResidueFunctional& R)
{
  if (f.nvars() != R.W.nvars()) throw InputError("observable has wrong variable count");
  MPoly h = R.jacobian.normal_form(f) * R.detA;
  h = normal_form(h, R.g, MonomialOrder::Lex);
  Exponent top(f.nvars());
  Rational lc = 1;
  for (int i = 0; i < f.nvars(); ++i) {
    top[i] = R.g[i].total_degree() - 1;
    lc *= R.g[i].leading_coeff(MonomialOrder::Lex);
  }
  return h.coeff(top) / lc;
}

/** \brief det of the matrix of second partials. */
inline MPoly hessian_det(const MPoly& W)
{
  const int n = W.nvars();
  std::vector<std::vector<MPoly>> H(n, std::vector<MPoly>(n, MPoly(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H[i][j] = W.derivative(i).derivative(j);
  return detail::det_poly(H, n);
}

/** \brief Power of hbar attached to correlator values. */
enum class HbarPolicy { Omitted, ProofExponent };

struct Correlator {
  Rational value;
  int hbar_exponent = 0;
  int milnor = 0;
};

inline Correlator vafa_correlator(const ResidueFunctional& R, const std::vector<MPoly>& obs,
                                  int genus, HbarPolicy policy = HbarPolicy::Omitted)
{
  if (genus < 0) throw InputError("negative genus");
  const JacobianData& J = R.jacobian;
  MPoly f = MPoly::constant(R.W.nvars(), 1);
  for (const auto& o : obs) f = J.normal_form(f * J.normal_form(o));
  MPoly hess = J.normal_form(hessian_det(R.W));
  for (int k = 0; k < genus; ++k) f = J.normal_form(f * hess);
  Correlator c{global_residue(f, R), 0, J.milnor};
  if (policy == HbarPolicy::ProofExponent) c.hbar_exponent = -(genus + 1) * R.W.nvars();
  return c;
}

inline Correlator vafa_correlator(const MPoly& W, const std::vector<MPoly>& obs, int genus,
                                  HbarPolicy policy = HbarPolicy::Omitted)
{
  return vafa_correlator(build_residue(W), obs, genus, policy);
}

struct GramReport {
  QMatrix gram;
  std::size_t rank = 0;
};

inline GramReport residue_pairing_gram(const ResidueFunctional& R)
{
  const auto& B = R.jacobian.quotient_monomials;
  GramReport g{QMatrix(B.size(), B.size()), 0};
  for (std::size_t a = 0; a < B.size(); ++a)
    for (std::size_t b = a; b < B.size(); ++b) {
      Exponent e(B[a].size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = B[a][i] + B[b][i];
      g.gram(a, b) = g.gram(b, a) = global_residue(MPoly::monomial(e, 1), R);
    }
  g.rank = rank(g.gram);
  return g;
}

/**
 * \brief Finite graded-commutative Frobenius-type algebra with a trace.
 *
 * product[a][b] lists coefficients of mu_a * mu_b in the basis; the trace is supported on
 * degree 2*dim.
 */
struct FrobeniusData {
  std::vector<std::string> names;
  std::vector<int> degrees;
  std::vector<std::vector<std::vector<Rational>>> product;
  std::vector<Rational> trace;
  int dim = 0;

  std::size_t size() const { return names.size(); }

  void validate() const
  {
    const std::size_t n = size();
    if (degrees.size() != n || trace.size() != n || product.size() != n)
      throw InputError("Frobenius data: inconsistent table sizes");
    for (std::size_t a = 0; a < n; ++a) {
      if (product[a].size() != n) throw InputError("Frobenius data: product table is not square");
      for (std::size_t b = 0; b < n; ++b) {
        if (product[a][b].size() != n) throw InputError("Frobenius data: bad product entry");
        for (std::size_t c = 0; c < n; ++c)
          if (product[a][b][c] != 0 && degrees[c] != degrees[a] + degrees[b])
            throw InputError("Frobenius data: product does not preserve degree");
      }
      if (trace[a] != 0 && degrees[a] != 2 * dim)
        throw InputError("Frobenius data: trace is nonzero below top degree on '" + names[a] + "'");
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        int s = (degrees[a] * degrees[b]) & 1 ? -1 : 1;
        for (std::size_t c = 0; c < n; ++c)
          if (product[a][b][c] != s * product[b][a][c])
            throw InputError("Frobenius data: product is not graded-commutative");
        for (std::size_t c = 0; c < n; ++c) {
          std::vector<Rational> l = mul(mul(unit_vec(a), unit_vec(b)), unit_vec(c));
          std::vector<Rational> r = mul(unit_vec(a), mul(unit_vec(b), unit_vec(c)));
          if (l != r) throw InputError("Frobenius data: product is not associative");
        }
      }
  }

  std::vector<Rational> unit_vec(std::size_t a) const
  {
    std::vector<Rational> v(size());
    v.at(a) = 1;
    return v;
  }

  std::vector<Rational> mul(const std::vector<Rational>& x, const std::vector<Rational>& y) const
  {
    std::vector<Rational> z(size());
    for (std::size_t a = 0; a < size(); ++a) {
      if (x[a] == 0) continue;
      for (std::size_t b = 0; b < size(); ++b) {
        if (y[b] == 0) continue;
        for (std::size_t c = 0; c < size(); ++c) z[c] += x[a] * y[b] * product[a][b][c];
      }
    }
    return z;
  }

  std::size_t index(const std::string& name) const
  {
    for (std::size_t a = 0; a < size(); ++a)
      if (names[a] == name) return a;
    throw InputError("unknown class '" + name + "'");
  }
};

struct TaggedValue {
  Rational value;
  int hbar_exponent = 0;
};

/** \brief Trace of the product of the classes, tagged with hbar^dim; 0 off the degree constraint. */
inline TaggedValue cy_correlator_genus0(const FrobeniusData& F, const std::vector<std::size_t>& classes)
{
  F.validate();
  TaggedValue out{0, F.dim};
  int total = 0;
  for (auto c : classes) {
    if (c >= F.size()) throw InputError("class index out of range");
    total += F.degrees[c];
  }
  if (total != 2 * F.dim) return out;
  std::vector<Rational> p(F.size());
  std::size_t unit = F.size();
  for (std::size_t a = 0; a < F.size() && unit == F.size(); ++a) {
    bool is_unit = true;
    for (std::size_t b = 0; b < F.size() && is_unit; ++b)
      if (F.mul(F.unit_vec(a), F.unit_vec(b)) != F.unit_vec(b)) is_unit = false;
    if (is_unit) unit = a;
  }
  if (classes.empty()) {
    if (unit == F.size()) throw InputError("Frobenius data has no unit");
    p = F.unit_vec(unit);
  } else {
    p = F.unit_vec(classes[0]);
    for (std::size_t k = 1; k < classes.size(); ++k) p = F.mul(p, F.unit_vec(classes[k]));
  }
  for (std::size_t a = 0; a < F.size(); ++a) out.value += p[a] * F.trace[a];
  return out;
}

/** \brief Jac(W) with the residue trace, all classes in degree 0. */
inline FrobeniusData frobenius_from_jacobian(const ResidueFunctional& R,
                                             const std::vector<std::string>& vars)
{
  const auto& B = R.jacobian.quotient_monomials;
  const std::size_t n = B.size();
  FrobeniusData F;
  std::map<Exponent, std::size_t> col;
  for (std::size_t a = 0; a < n; ++a) {
    col[B[a]] = a;
    F.names.push_back(to_string(MPoly::monomial(B[a], 1), vars));
    F.degrees.push_back(0);
    F.trace.push_back(global_residue(MPoly::monomial(B[a], 1), R));
  }
  F.product.assign(n, std::vector<std::vector<Rational>>(n, std::vector<Rational>(n)));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      MPoly nf = R.jacobian.normal_form(MPoly::monomial(B[a], 1) * MPoly::monomial(B[b], 1));
      for (const auto& [e, c] : nf.terms()) F.product[a][b][col.at(e)] = c;
    }
  return F;
}

/** \brief Genus-one partition function of the CY model: the supplied Euler characteristic. */
inline long elliptic_partition(long chi) { return chi; }

}  // namespace bvlab

#endif  // BVLAB_RESIDUE_HPP
