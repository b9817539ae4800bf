#include <gtest/gtest.h>

#include <numeric>

#include "bvlab/rgflow.hpp"
#include "random_models.hpp"

using namespace bvlab;
using namespace bvlab::testing;

namespace {

SpacePtr flow_space() { return make_space({{"x", 0}, {"y", 0}, {"t", 1}, {"e", -1}}); }

/** \brief Random stable interaction on flow_space with hbar <= G, word <= D. */
Functional random_interaction(Rng& rng, const SpacePtr& sp, int G, int D)
{
  const int cap = 2 * G - 2 + D;
  Functional I(sp, D);
  for (int h = 0; h <= G; ++h)
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; a + b <= 4; ++b)
        for (int c = 0; c <= 1; ++c) {
          int n = a + b + 2 * c, chi = 2 * h - 2 + n;
          if (n > D || chi < 1 || chi > cap || rng() % 2) continue;
          Monomial m{static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c),
                     static_cast<std::uint8_t>(c)};
          I.add_term(m, h, small_rational(rng));
        }
  return I;
}

Kernel random_even_kernel(Rng& rng, const SpacePtr& sp)
{
  Kernel K(sp);
  K.set(0, 0, small_rational(rng));
  K.set(0, 1, small_rational(rng));
  K.set(1, 1, small_rational(rng));
  K.set(2, 3, small_rational(rng));
  return K;
}

Functional weight_filter(const Functional& f, int cap, int D)
{
  return f.filter([&](const TermKey& k) { return 2 * k.hbar + word_length(k.mono) <= cap && word_length(k.mono) <= D; });
}

/** \brief hbar log(exp(hbar contract_P) exp(I/hbar)), from truncated power series. */
Functional exponential_oracle(const Kernel& P, const Functional& I, int G, int D)
{
  const int cap = 2 * G - 2 + D;
  const auto sp = I.space();
  const int Db = 3 * cap + 2, hmin = -cap - 1, hmax = cap;
  Functional X = I.retruncate(Db, hmin, hmax).shift_hbar(-1);
  Functional one = Functional::constant(sp, 1, Db, hmin, hmax);
  Functional Z = one, term = one;
  for (int k = 1; k <= cap; ++k) {
    term = weight_filter(mul(term, X), cap, Db) * Rational(1, k);
    Z += term;
  }
  Functional acc = Z, t2 = Z;
  for (int k = 1; k <= Db; ++k) {
    t2 = contract(t2, P).shift_hbar(1) * Rational(1, k);
    if (t2.is_zero()) break;
    acc += t2;
  }
  Functional Y = acc - one, L = Y.zero_like(), pw = one;
  for (int k = 1; k <= cap; ++k) {
    pw = weight_filter(mul(pw, Y), cap, Db);
    L += pw * Rational(k % 2 ? 1 : -1, k);
  }
  return L.shift_hbar(1)
      .filter([&](const TermKey& k) {
        return k.hbar <= G && word_length(k.mono) <= D && 2 * k.hbar - 2 + word_length(k.mono) <= cap;
      })
      .retruncate(D, I.hbar_min(), I.hbar_max());
}

/** \brief Random functional of word length <= 3 on any space. */
Functional random_small(Rng& rng, const SpacePtr& s, int D)
{
  Functional f(s, D, 0, 0);
  for (int deg = -3; deg <= 3; ++deg)
    for (const auto& m : monomials_of_degree(*s, 1, 3, deg))
      if (rng() % 4 == 0) f.add_term(m, 0, small_rational(rng));
  return f;
}

CurvedLInftyModel two_dim_lie()
{
  CurvedLInftyModel m({{"e1", -1}, {"e2", -1}});
  m.set_bracket(1, {0, 1}, 1);
  return m;
}

CurvedLInftyModel heisenberg()
{
  CurvedLInftyModel m({{"e1", -1}, {"e2", -1}, {"e3", -1}});
  m.set_bracket(2, {0, 1}, 1);
  return m;
}

}  // namespace

TEST(RgFlow, FeynmanWeightExamples)
{
  auto sp = make_space({{"x", 0}});
  Functional f(sp, 4);
  f.add_word({0, 0, 0}, 0, Rational(2, 3));
  Kernel P(sp);
  P.set(0, 0, 5);
  auto corolla = FeynGraph::from_multigraph({0}, {3}, {{0}});
  auto w = feynman_weight(corolla, {}, {f}, {0, 0, 0});
  EXPECT_EQ(w.at(0), 4);  // third derivative of (2/3) x^3
  auto tree = FeynGraph::from_multigraph({0, 0}, {2, 2}, {{0, 1}, {1, 0}});
  auto wt = feynman_weight(tree, {&P}, {f, f}, {0, 0, 0, 0});
  EXPECT_EQ(wt.at(0), 4 * 4 * 5);
  EXPECT_THROW(feynman_weight(tree, {&P}, {f, f}, {0, 0}), InputError);
}

TEST(RgFlow, FeynmanWeightInvariantUnderRelabeling)
{
  auto sp = make_space({{"x", 0}, {"y", 0}});
  Rng rng(41);
  Functional f(sp, 4);
  for (const auto& m : monomials_of_degree(*sp, 3, 4, 0)) f.add_term(m, 0, small_rational(rng));
  Kernel P(sp);
  P.set(0, 1, 2);
  P.set(1, 1, -1);
  auto g = FeynGraph::from_multigraph({0, 0}, {1, 1}, {{0, 2}, {2, 0}});
  // reverse every half-edge label and swap the two vertices
  const std::size_t H = g.num_half_edges();
  std::vector<int> sigma(H), pi(H);
  for (std::size_t h = 0; h < H; ++h) {
    sigma[H - 1 - h] = static_cast<int>(H - 1) - g.sigma()[h];
    pi[H - 1 - h] = 1 - g.pi()[h];
  }
  FeynGraph r(sigma, pi, {0, 0});
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      // tails in half-edge order: vertex 0 tail first in g, vertex 1 tail first in r
      auto wg = feynman_weight(g, {&P, &P}, {f, f}, {a, b});
      auto wr = feynman_weight(r, {&P, &P}, {f, f}, {a, b});
      EXPECT_EQ(wg, wr);
    }
}

TEST(RgFlow, ZeroPropagatorIsIdentity)
{
  Rng rng(42);
  auto sp = flow_space();
  for (int t = 0; t < 10; ++t) {
    auto I = random_interaction(rng, sp, 1, 4);
    EXPECT_EQ(rg_flow(Kernel(sp), I), I);
  }
}

TEST(RgFlow, TreeLevelTwoVertexOracle)
{
  Rng rng(43);
  auto sp = make_space({{"x", 0}, {"y", 0}});
  for (int t = 0; t < 10; ++t) {
    Functional I(sp, 4, 0, 0);
    for (const auto& m : monomials_of_degree(*sp, 3, 3, 0))
      if (rng() % 2) I.add_term(m, 0, small_rational(rng));
    Kernel P(sp);
    P.set(0, 0, small_rational(rng));
    P.set(0, 1, small_rational(rng));
    P.set(1, 1, small_rational(rng));
    FlowBounds b;
    b.max_genus = 0;
    b.max_vertices = 2;
    Functional expected = I;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t c = 0; c < 2; ++c)
        expected += mul(derivative(I, a), derivative(I, c)) * (P.entry(a, c) / 2);
    EXPECT_EQ(rg_flow(P, I, b), expected) << "sample " << t;
  }
}

TEST(RgFlow, MatchesExponentialOracle)
{
  Rng rng(44);
  auto sp = flow_space();
  for (int t = 0; t < 6; ++t) {
    auto I = random_interaction(rng, sp, 1, 4);
    auto P = random_even_kernel(rng, sp);
    ASSERT_EQ(rg_flow(P, I), exponential_oracle(P, I, 1, 4)) << "sample " << t;
  }
}

TEST(RgFlow, GroupLaw)
{
  Rng rng(45);
  auto sp = flow_space();
  for (int t = 0; t < 5; ++t) {
    auto I = random_interaction(rng, sp, 1, 4);
    auto P1 = random_even_kernel(rng, sp), P2 = random_even_kernel(rng, sp);
    EXPECT_TRUE(rge_check(P1, P2, I).is_zero()) << "sample " << t;
    EXPECT_TRUE(rge_check(P1, Kernel(sp), I).is_zero());
  }
}

TEST(RgFlow, GroupLawNeedsWiderIntermediateTruncation)
{
  Rng rng(46);
  auto sp = flow_space();
  int broken = 0;
  for (int t = 0; t < 5; ++t) {
    auto I = random_interaction(rng, sp, 1, 4);
    auto P1 = random_even_kernel(rng, sp), P2 = random_even_kernel(rng, sp);
    Functional naive = rg_flow(P2, rg_flow(P1, I)) - rg_flow(P1 + P2, I);
    broken += !naive.is_zero();
  }
  EXPECT_GT(broken, 0);
}

TEST(RgFlow, ThreadedLedgerIsDeterministic)
{
  Rng rng(47);
  auto sp = flow_space();
  auto I = random_interaction(rng, sp, 1, 4);
  auto P = random_even_kernel(rng, sp);
  FlowBounds one, three;
  three.threads = 3;
  auto a = rg_flow_ledger(P, I, one), b = rg_flow_ledger(P, I, three);
  EXPECT_EQ(a.W, b.W);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t k = 0; k < a.ledger.size(); ++k) {
    EXPECT_EQ(a.ledger[k].graph_id, b.ledger[k].graph_id);
    EXPECT_EQ(a.ledger[k].value, b.ledger[k].value);
  }
}

TEST(RgFlow, UnstableTermsPassThroughAndGenusIsBounded)
{
  auto sp = flow_space();
  Functional I(sp, 4);
  I.add_word({0, 0}, 0, 3);  // word 2 at hbar^0
  I.add_word({0, 0, 0}, 0, 1);
  Kernel P(sp);
  P.set(0, 0, 1);
  Functional W = rg_flow(P, I);
  EXPECT_EQ(W.coeff(Monomial{2, 0, 0, 0}, 0), 3);
  for (const auto& [k, c] : W.terms()) EXPECT_LE(k.hbar, 1);
}

TEST(RgFlow, QuantumMasterEquationExamples)
{
  CurvedLInftyModel ab({{"x", 0}, {"y", -1}});
  FieldModel fa(ab, SurfaceModel(1), 4);
  auto Ta = EffectiveTheory::from_field_model(fa, classical_interaction(fa));
  auto ra = qme_residual(Ta);
  EXPECT_TRUE(ra.residual.is_zero());
  EXPECT_TRUE(ra.R.is_zero());

  CurvedLInftyModel lg({{"z", 0}, {"w", 0}});
  FieldModel fm(lg, SurfaceModel(1), 4);
  auto W = parse_poly("z^3/3 + w^2*z - w", {"z", "w"});
  Functional Iw = lg_vertex(fm, W);
  auto T = EffectiveTheory::from_field_model(fm, Iw, std::nullopt, Iw);
  auto rep = qme_residual(T);
  EXPECT_TRUE(rep.residual.is_zero());
  EXPECT_TRUE(rep.R.is_zero());
}

TEST(RgFlow, QmeDetectsJacobiViolation)
{
  CurvedLInftyModel m({{"e1", -1}, {"e2", -1}, {"e3", -1}});
  m.set_bracket(2, {0, 1}, 1);
  m.set_bracket(0, {1, 2}, 1);
  m.set_bracket(0, {0, 2}, 1);
  FieldModel fm(m, SurfaceModel(0), 4);
  auto T = EffectiveTheory::from_field_model(fm, classical_interaction(fm));
  EXPECT_FALSE(qme_residual(T).residual.is_zero());
}

TEST(RgFlow, TwistAddsExactlyTheExpectedTerms)
{
  Rng rng(48);
  for (int t = 0; t < 10; ++t) {
    auto m = random_nontrivial_model(rng, 2, 3);
    // a superpotential needs degree-0 coordinates; pad with a flat z
    std::vector<Generator> gens = m.generators();
    gens.push_back({"z", 0});
    CurvedLInftyModel mz(gens);
    for (const auto& [k, table] : m.brackets())
      for (const auto& [key, v] : table) mz.set_bracket(key.first, key.second, v);
    FieldModel fm(mz, SurfaceModel(t % 2), std::max(4, mz.kmax() + 1));
    MPoly W(3);
    W += MPoly::var(3, 2, 3) * Rational(1, 3);
    Functional I = classical_interaction(fm), Iw = lg_vertex(fm, W);
    const Kernel& K = fm.bv_kernel();
    auto base = qme_residual(EffectiveTheory::from_field_model(fm, I));
    auto twisted = qme_residual(EffectiveTheory::from_field_model(fm, I + Iw, std::nullopt, Iw));
    Functional extra = apply_derivation(q_derivation(fm), Iw) + bv_bracket(I, Iw, K) +
                       bv_bracket(Iw, Iw, K) * Rational(1, 2) + bv_laplacian(Iw, K).shift_hbar(1);
    EXPECT_EQ((twisted.residual + twisted.R.shift_hbar(1)) - (base.residual + base.R.shift_hbar(1)), extra);
    EXPECT_TRUE(bv_bracket(Iw, Iw, K).is_zero());
  }
}

TEST(RgFlow, UntaggedLowOrderTermsRejected)
{
  CurvedLInftyModel m({{"x", 0}});
  FieldModel fm(m, SurfaceModel(0), 4);
  Functional I = fm.zero();
  I.add_word({0, 0}, 0, 1);
  EXPECT_THROW(EffectiveTheory::from_field_model(fm, I), InputError);
  EXPECT_NO_THROW(EffectiveTheory::from_field_model(fm, I, std::nullopt, I));
}

TEST(RgFlow, DeltaLMatchesDivergence)
{
  auto check = [](const CurvedLInftyModel& m) {
    const int D = 3;
    Functional div(m.ce_space(), D);
    for (std::size_t i = 0; i < m.dim(); ++i) div += derivative(m.ce_image(i, D + 1).retruncate(D, -4, 2), i);
    return delta_L_functional(m, D) == div;
  };
  EXPECT_TRUE(check(two_dim_lie()));
  EXPECT_TRUE(check(heisenberg()));
  Rng rng(49);
  for (int t = 0; t < 20; ++t) EXPECT_TRUE(check(random_nontrivial_model(rng, 3, 3)));

  EXPECT_TRUE(delta_L_functional(CurvedLInftyModel({{"a", 0}, {"b", -1}}), 3).is_zero());
  EXPECT_TRUE(delta_L_functional(heisenberg(), 3).is_zero());
  // trace of ad(e1) is 1: a single linear term
  Functional dl = delta_L_functional(two_dim_lie(), 3);
  ASSERT_EQ(dl.size(), 1u);
  EXPECT_EQ(abs(dl.coeff(Monomial{1, 0}, 0)), 1);
}

TEST(RgFlow, QuantumCorrectionObstruction)
{
  const auto m = two_dim_lie();
  for (int g : {0, 2}) {
    try {
      solve_quantum_correction(m, g, 3);
      FAIL() << "expected an obstruction at genus " << g;
    } catch (const ObstructionNonzero& e) {
      // witness pairs nontrivially with the right-hand side and kills d_CE of every degree-0 monomial
      Rational pair = 0;
      for (const auto& [k, c] : e.rhs.terms()) pair += c * e.witness.coeff(k.mono, 0);
      EXPECT_NE(pair, 0);
      Derivation d = chevalley_eilenberg(m, 3);
      for (const auto& mono : monomials_of_degree(*m.ce_space(), 1, 3, 0)) {
        Functional b(m.ce_space(), 3);
        b.add_term(mono, 0, 1);
        Functional db = apply_derivation(d, b);
        Rational s = 0;
        for (const auto& [k, c] : db.terms())
          if (word_length(k.mono) <= 2) s += c * e.witness.coeff(k.mono, 0);
        EXPECT_EQ(s, 0);
      }
    }
  }
  EXPECT_EQ(quantum_correction_factor(1), 0);
  Functional B1 = solve_quantum_correction(m, 1, 3);
  EXPECT_TRUE(apply_derivation(chevalley_eilenberg(m, 3), B1).is_zero());
  EXPECT_NO_THROW(solve_quantum_correction(heisenberg(), 0, 3));
  EXPECT_TRUE(solve_quantum_correction(CurvedLInftyModel({{"a", 0}, {"b", -1}}), 0, 3).is_zero());
  EXPECT_THROW(solve_quantum_correction(m, -1, 3), DomainError);
}

TEST(RgFlow, QuantumCorrectionSolvesMasterEquation)
{
  Rng rng(11);
  int solved = 0;
  for (int it = 0; it < 200 && solved < 6; ++it) {
    auto m = random_nontrivial_model(rng, 3, 3);
    auto dl = delta_L_functional(m, 3);
    if (dl.filter([](const TermKey& k) { return word_length(k.mono) > 0; }).is_zero()) continue;
    for (int g : {0, 2}) {
      Functional B;
      try {
        B = solve_quantum_correction(m, g, 3);
      } catch (const ObstructionNonzero&) {
        continue;
      }
      Functional lhs = apply_derivation(chevalley_eilenberg(m, 3), B);
      Functional rhs = dl * quantum_correction_factor(g);
      auto low = [](const Functional& f) {
        return f.filter([](const TermKey& k) { int w = word_length(k.mono); return w >= 1 && w <= 2; });
      };
      ASSERT_EQ(low(lhs), low(rhs));
      FieldModel fm(m, SurfaceModel(g), std::max(m.kmax() + 1, 3));
      Functional I = classical_interaction(fm) + fm.embed_zero_modes(B).shift_hbar(1);
      auto rep = qme_residual(EffectiveTheory::from_field_model(fm, I));
      Functional r1 = rep.residual.hbar_part(1).filter([](const TermKey& k) { return word_length(k.mono) <= 1; });
      EXPECT_TRUE(r1.is_zero()) << "model " << it << " genus " << g;
      ++solved;
    }
  }
  EXPECT_GT(solved, 0);
}

TEST(RgFlow, OneLoopAnomalyIsEulerCharacteristicTimesDeltaL)
{
  Rng rng(5);
  for (int it = 0; it < 20; ++it) {
    auto m = random_nontrivial_model(rng, 3, 3);
    int Df = std::max(m.kmax() + 1, 3);
    for (int g : {0, 1, 2}) {
      FieldModel fm(m, SurfaceModel(g), Df);
      Functional an = one_loop_anomaly(Kernel(fm.space()), fm.bv_kernel(), classical_interaction(fm));
      Functional dl = fm.embed_zero_modes(delta_L_functional(m, Df));
      ASSERT_EQ(an, dl * Rational(2 - 2 * g)) << "model " << it << " genus " << g;
    }
  }
  CurvedLInftyModel ab({{"a", 0}, {"b", -1}});
  FieldModel fa(ab, SurfaceModel(0), 3);
  EXPECT_TRUE(one_loop_anomaly(Kernel(fa.space()), fa.bv_kernel(), classical_interaction(fa)).is_zero());
}

TEST(RgFlow, TwoVertexWheelCancels)
{
  Rng rng(50);
  auto sp = make_space({{"a", 0}, {"b", 1}, {"c", 1}, {"d", 0}});
  int nontrivial = 0;
  for (int t = 0; t < 20; ++t) {
    Kernel K(sp);
    K.set(0, 1, small_rational(rng) + 4);
    K.set(2, 3, small_rational(rng) - 4);
    Functional f = random_small(rng, sp, 6), g = random_small(rng, sp, 6);
    auto w = two_vertex_wheel(K, f, g);
    ASSERT_TRUE(w.total().is_zero()) << "sample " << t;
    ASSERT_EQ(w.forward, -w.backward);
    nontrivial += !w.forward.is_zero();
  }
  EXPECT_GT(nontrivial, 0);
  Kernel even(sp);
  even.set(0, 0, 1);
  EXPECT_THROW(two_vertex_wheel(even, Functional(sp, 6, 0, 0), Functional(sp, 6, 0, 0)), ConfigError);
}

TEST(RgFlow, ConstantTermOfSpectatorModel)
{
  Rng rng(9);
  auto sp = make_space({{"y1", 1}, {"y2", 1}, {"a1", 0}, {"a2", 1}, {"b1", -1}, {"b2", -2}});
  Kernel K(sp);
  K.set(2, 4, 1);
  K.set(3, 5, -2);
  auto field_word = [](const Monomial& m) { return m[2] + m[3] + m[4] + m[5]; };
  auto mons = monomials_of_degree(*sp, 1, 4, 0);
  int nonzero = 0;
  for (int it = 0; it < 10; ++it) {
    Functional I0(sp, 6), Iqc(sp, 6), l0(sp, 6);
    for (const auto& m : mons) {
      int fw = field_word(m);
      if (fw == 1 && m[4] == 1 && m[0] + m[1] == 1) {
        l0.add_term(m, 0, small_rational(rng));
      } else if (fw >= 3 && rng() % 3 == 0) {
        I0.add_term(m, 0, small_rational(rng));
      }
      if (fw >= 1 && fw <= 2 && rng() % 2) Iqc.add_term(m, 0, small_rational(rng));
    }
    EffectiveTheory T{sp, I0 + l0 + Iqc.shift_hbar(1), Kernel(sp), K, Derivation(sp, 1), Functional(sp, 6), l0,
                      std::nullopt};
    T.validate();
    auto rep = qme_residual(T);
    Functional lin(sp, 6);
    for (const auto& [k, c] : Iqc.terms())
      if (field_word(k.mono) == 1) lin.add_term(k.mono, 0, c);
    // bracket of an even linear term through the Laplacian's failure to be a derivation
    Functional br = contract(mul(lin, l0), K) - mul(contract(lin, K), l0) - mul(lin, contract(l0, K));
    Functional pred = br.filter([&](const TermKey& k) { return field_word(k.mono) == 0; });
    nonzero += !pred.is_zero();
    EXPECT_EQ(rep.R.hbar_part(0), pred);
    EXPECT_EQ(qme_constant_term(Iqc, l0, K), pred);
  }
  EXPECT_GT(nonzero, 0);
}

TEST(RgFlow, HarmonicRestriction)
{
  CurvedLInftyModel m({{"x", 0}});
  FieldModel fm(m, SurfaceModel(1), 4);
  Functional I = lg_vertex(fm, parse_poly("x^3", {"x"}));
  EXPECT_EQ(harmonic_restrict(fm, I), I);
  EXPECT_EQ(rg_flow(Kernel(fm.space()), harmonic_restrict(fm, I)), I);
  EXPECT_THROW(harmonic_restrict(fm, Functional(make_space({{"q", 0}}))), ConfigError);
}
