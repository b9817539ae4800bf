#include <gtest/gtest.h>

#include <random>

#include "bvlab/residue.hpp"

using namespace bvlab;

namespace {

using Rng = std::mt19937_64;

Rational frac(long a, long b)
{
  Rational r(a, b);
  r.canonicalize();
  return r;
}

MPoly P(const std::string& s, const std::vector<std::string>& vars) { return parse_poly(s, vars); }

MPoly random_poly(Rng& rng, int nvars, int max_deg, int terms)
{
  std::uniform_int_distribution<int> d(0, max_deg), c(-5, 5), q(1, 3);
  MPoly p(nvars);
  for (int t = 0; t < terms; ++t) {
    Exponent e(nvars);
    for (auto& x : e) x = d(rng);
    p.add_term(e, frac(c(rng), q(rng)));
  }
  return p;
}

MPoly a_n(int n) { return MPoly::var(1, 0, n + 1) * Rational(1, n + 1); }

// For W = sum z_i^{a_i}/a_i the ideal is (z_i^{a_i-1}); Res(z^e) = prod [e_i == a_i - 2]
Rational diagonal_residue_oracle(const MPoly& f, const std::vector<int>& a)
{
  Rational out = 0;
  for (const auto& [e, c] : f.terms()) {
    bool hit = true;
    for (std::size_t i = 0; i < a.size(); ++i) hit = hit && e[i] == a[i] - 2;
    if (hit) out += c;
  }
  return out;
}

MPoly laplace_det(const std::vector<std::vector<MPoly>>& M, int nvars)
{
  const std::size_t n = M.size();
  if (n == 0) return MPoly::constant(nvars, 1);
  MPoly out(nvars);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::vector<MPoly>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<MPoly> row;
      for (std::size_t c = 0; c < n; ++c)
        if (c != j) row.push_back(M[r][c]);
      minor.push_back(row);
    }
    MPoly term = M[0][j] * laplace_det(minor, nvars);
    out += (j % 2 ? -term : term);
  }
  return out;
}

// smallest N with z_i^N in the Jacobian ideal for every i, if one exists below the cap
std::optional<int> smallest_common_power(const MPoly& W, int cap)
{
  auto gens = partials(W);
  for (int N = 1; N <= cap; ++N) {
    bool all = true;
    for (int i = 0; i < W.nvars() && all; ++i) {
      try {
        membership_with_cofactors(MPoly::var(W.nvars(), i, N), gens);
      } catch (const NotInIdeal&) {
        all = false;
      }
    }
    if (all) return N;
  }
  return std::nullopt;
}

}  // namespace

TEST(Residue, BuildExamples)
{
  ResidueFunctional r = build_residue(P("z^3/3", {"z"}));
  ASSERT_TRUE(r.power.has_value());
  EXPECT_EQ(*r.power, 2);
  EXPECT_EQ(r.A[0][0], P("1", {"z"}));

  std::vector<std::string> xy{"x", "y"};
  ResidueFunctional s = build_residue(P("(x^3 + y^3)/3", xy));
  EXPECT_EQ(*s.power, 2);
  EXPECT_EQ(s.A[0][0], P("1", xy));
  EXPECT_TRUE(s.A[0][1].is_zero());
  EXPECT_TRUE(s.A[1][0].is_zero());
  EXPECT_EQ(s.A[1][1], P("1", xy));

  // deformed example: cofactor rows re-expand exactly
  MPoly W = P("x^2*y + y^4 + x^3/5", xy);
  ResidueFunctional t = build_residue(W);
  auto d = partials(W);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(t.A[i][0] * d[0] + t.A[i][1] * d[1], t.g[i]);

  EXPECT_THROW(build_residue(P("x^2*y", xy)), NonIsolatedCriticalLocus);
}

TEST(Residue, UnivariateExamples)
{
  ResidueFunctional r = build_residue(P("z^3/3", {"z"}));
  EXPECT_EQ(global_residue(P("z", {"z"}), r), 1);
  EXPECT_EQ(global_residue(P("1", {"z"}), r), 0);
  EXPECT_EQ(global_residue(P("1", {"z"}), build_residue(P("z^2/2", {"z"}))), 1);
  EXPECT_THROW(global_residue(P("x", {"x", "y"}), r), InputError);
}

TEST(Residue, DiagonalOracle)
{
  Rng rng(81);
  std::vector<std::vector<int>> cases{{3}, {5}, {3, 3}, {3, 4}, {4, 5}, {3, 3, 4}};
  for (const auto& a : cases) {
    const int n = static_cast<int>(a.size());
    MPoly W(n);
    for (int i = 0; i < n; ++i) W += MPoly::var(n, i, a[i]) * Rational(1, a[i]);
    ResidueFunctional R = build_residue(W);
    for (int s = 0; s < 20; ++s) {
      MPoly f = random_poly(rng, n, 5, 6);
      ASSERT_EQ(global_residue(f, R), diagonal_residue_oracle(f, a));
    }
  }
}

TEST(Residue, IndependentOfPowerAndCofactors)
{
  Rng rng(82);
  std::vector<std::string> xy{"x", "y"};
  for (const char* w : {"(x^3 + y^3)/3", "x^2*y + y^4", "x^3 + x*y^3 + y^2", "x^4 + y^5 + x^2*y^2"}) {
    MPoly W = P(w, xy);
    ResidueFunctional base = build_residue(W);
    std::vector<ResidueFunctional> Rs;
    // other univariate elements of the ideal: g_i times a univariate factor
    std::vector<MPoly> g1 = base.g, g2 = base.g;
    for (int i = 0; i < 2; ++i) {
      MPoly z = MPoly::var(2, i);
      g1[i] = g1[i] * z;
      g2[i] = g2[i] * (z * z - z * Rational(3) + MPoly::constant(2, 2));
    }
    Rs.push_back(build_residue_from(W, g1));
    Rs.push_back(build_residue_from(W, g2));
    if (auto N = smallest_common_power(W, 8)) {
      Rs.push_back(build_residue_with_power(W, *N + 1));
      Rs.push_back(build_residue_with_power(W, *N + 3));
      EXPECT_THROW(build_residue_with_power(W, *N - 1), NotInIdeal);
    }
    for (int s = 0; s < 100; ++s) {
      MPoly f = random_poly(rng, 2, 6, 4);
      Rational r0 = global_residue(f, base);
      for (std::size_t k = 0; k < Rs.size(); ++k) ASSERT_EQ(global_residue(f, Rs[k]), r0) << w << " system " << k;
    }
  }
}

TEST(Residue, VanishesOnJacobianIdeal)
{
  Rng rng(83);
  std::vector<std::string> xy{"x", "y"};
  for (const char* w : {"(x^3 + y^3)/3", "x^2*y + y^4", "x^3 + x*y^3 + y^2"}) {
    MPoly W = P(w, xy);
    ResidueFunctional R = build_residue(W);
    auto d = partials(W);
    for (int s = 0; s < 50; ++s) {
      MPoly h = random_poly(rng, 2, 4, 4);
      ASSERT_EQ(global_residue(d[s % 2] * h, R), 0);
    }
  }
}

TEST(Residue, LinearInObservable)
{
  Rng rng(84);
  ResidueFunctional R = build_residue(P("x^2*y + y^4", {"x", "y"}));
  for (int s = 0; s < 30; ++s) {
    MPoly f = random_poly(rng, 2, 5, 4), g = random_poly(rng, 2, 5, 4);
    Rational c = frac(s - 11, 4);
    ASSERT_EQ(global_residue(f + g * c, R), global_residue(f, R) + c * global_residue(g, R));
  }
}

TEST(Residue, HessianDeterminant)
{
  EXPECT_EQ(hessian_det(P("z^3/3", {"z"})), P("2*z", {"z"}));
  EXPECT_EQ(hessian_det(P("(x^3 + y^3)/3", {"x", "y"})), P("4*x*y", {"x", "y"}));
  Rng rng(85);
  for (int n = 1; n <= 3; ++n)
    for (int s = 0; s < 10; ++s) {
      MPoly W = random_poly(rng, n, 3, 6);
      std::vector<std::vector<MPoly>> H(n, std::vector<MPoly>(n, MPoly(n)));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) H[i][j] = W.derivative(i).derivative(j);
      ASSERT_EQ(hessian_det(W), laplace_det(H, n));
    }
}

TEST(Residue, VafaUnivariateFamily)
{
  for (int n = 2; n <= 6; ++n) {
    ResidueFunctional R = build_residue(a_n(n));
    EXPECT_EQ(vafa_correlator(R, {}, 1).value, n);
    EXPECT_EQ(vafa_correlator(R, {MPoly::var(1, 0, n - 1)}, 0).value, 1);
    EXPECT_EQ(vafa_correlator(R, {}, 0).value, 0);
    for (int g = 0; g <= 4; ++g) {
      // hess^g = n^g z^{g(n-1)}; the residue picks the z^{n-1} coefficient
      Rational expected = g * (n - 1) == n - 1 ? Rational(mpz_class(n)) : Rational(0);
      EXPECT_EQ(vafa_correlator(R, {}, g).value, expected) << "n " << n << " g " << g;
    }
    EXPECT_EQ(vafa_correlator(R, {}, 1).milnor, n);
  }
  Correlator c = vafa_correlator(P("(x^3 + y^3)/3", {"x", "y"}), {}, 1);
  EXPECT_EQ(c.value, 4);
  EXPECT_EQ(c.milnor, 4);
  EXPECT_THROW(vafa_correlator(a_n(2), {}, -1), InputError);
}

TEST(Residue, VafaFactorization)
{
  Rng rng(86);
  MPoly W = P("x^2*y + y^4", {"x", "y"});
  ResidueFunctional R = build_residue(W);
  for (int s = 0; s < 20; ++s) {
    MPoly f1 = random_poly(rng, 2, 3, 3), f2 = random_poly(rng, 2, 3, 3);
    for (int g = 0; g <= 2; ++g)
      ASSERT_EQ(vafa_correlator(R, {f1, f2}, g).value,
                vafa_correlator(R, {R.jacobian.normal_form(f1 * f2)}, g).value);
  }
}

TEST(Residue, HbarPolicy)
{
  ResidueFunctional R = build_residue(P("(x^3 + y^3)/3", {"x", "y"}));
  EXPECT_EQ(vafa_correlator(R, {}, 1).hbar_exponent, 0);
  for (int g = 0; g <= 3; ++g)
    EXPECT_EQ(vafa_correlator(R, {}, g, HbarPolicy::ProofExponent).hbar_exponent, -(g + 1) * 2);
}

TEST(Residue, GramMatrix)
{
  for (int n = 2; n <= 6; ++n) {
    GramReport g = residue_pairing_gram(build_residue(a_n(n)));
    ASSERT_EQ(g.rank, static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) EXPECT_EQ(g.gram(a, b), a + b == n - 1 ? 1 : 0);
  }
  std::vector<std::string> xy{"x", "y"};
  for (const char* w : {"(x^3 + y^3)/3", "x^2*y + y^4", "x^3 + y^4", "x^3 + x*y^3", "x^4 + y^5 + x^2*y^2"}) {
    ResidueFunctional R = build_residue(P(w, xy));
    EXPECT_EQ(residue_pairing_gram(R).rank, static_cast<std::size_t>(R.jacobian.milnor)) << w;
  }
}

TEST(Residue, FrobeniusValidationAndCorrelator)
{
  FrobeniusData F;
  F.names = {"1", "z", "z2"};
  F.degrees = {0, 2, 4};
  F.trace = {0, 0, 1};
  F.dim = 2;
  F.product.assign(3, std::vector<std::vector<Rational>>(3, std::vector<Rational>(3)));
  for (std::size_t a = 0; a < 3; ++a) F.product[0][a][a] = F.product[a][0][a] = 1;
  F.product[1][1][2] = 1;

  EXPECT_EQ(cy_correlator_genus0(F, {2}).value, 1);
  EXPECT_EQ(cy_correlator_genus0(F, {2}).hbar_exponent, 2);
  EXPECT_EQ(cy_correlator_genus0(F, {1, 1}).value, 1);
  EXPECT_EQ(cy_correlator_genus0(F, {1}).value, 0);  // degree mismatch
  EXPECT_EQ(cy_correlator_genus0(F, {}).value, 0);
  EXPECT_THROW(cy_correlator_genus0(F, {7}), InputError);

  FrobeniusData bad = F;
  bad.trace = {1, 0, 1};
  EXPECT_THROW(bad.validate(), InputError);
  bad = F;
  bad.product[1][1][2] = 0;
  bad.product[1][1][1] = 1;
  EXPECT_THROW(bad.validate(), InputError);
  bad = F;
  bad.degrees = {0, 1, 2};
  bad.dim = 1;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Residue, FrobeniusFromJacobianMatchesVafa)
{
  for (int n = 2; n <= 6; ++n) {
    ResidueFunctional R = build_residue(a_n(n));
    FrobeniusData F = frobenius_from_jacobian(R, {"z"});
    ASSERT_NO_THROW(F.validate());
    EXPECT_EQ(cy_correlator_genus0(F, {}).value, vafa_correlator(R, {}, 0).value);
    for (std::size_t a = 0; a < F.size(); ++a)
      for (std::size_t b = 0; b < F.size(); ++b) {
        const auto& B = R.jacobian.quotient_monomials;
        Rational v = vafa_correlator(R, {MPoly::monomial(B[a], 1), MPoly::monomial(B[b], 1)}, 0).value;
        ASSERT_EQ(cy_correlator_genus0(F, {a, b}).value, v);
      }
  }
}

TEST(Residue, EllipticPartition)
{
  EXPECT_EQ(elliptic_partition(0), 0);
  EXPECT_EQ(elliptic_partition(24), 24);
  for (int n = 2; n <= 6; ++n) EXPECT_EQ(vafa_correlator(a_n(n), {}, 1).value, elliptic_partition(n));
}
