#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "bvlab/hyperbolic.hpp"

using namespace bvlab;
using namespace bvlab::hyperbolic;

namespace {

using Rng = std::mt19937_64;

HPoint random_point(Rng& rng)
{
  std::uniform_real_distribution<double> x(-3, 3), ly(-2, 2);
  return {x(rng), std::exp(ly(rng))};
}

double n2_oracle(double eps, double L)
{
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
      [&](double t1) {
        return gauss_kronrod<double, 61>::integrate(
            [&](double t2) { return t1 * t2 / std::pow(t1 + t2, 3); }, eps, L, 15, 1e-14);
      },
      eps, L, 15, 1e-13);
}

double n3_closed_form(double eps, double L)
{
  return 4 * std::sqrt(L) - 4 * std::sqrt(eps) * std::log(L / eps) - 4 * eps / std::sqrt(L);
}

}  // namespace

TEST(Hyperbolic, GeodesicSpotValues)
{
  EXPECT_EQ(geodesic_distance({0, 1}, {0, 1}), 0);
  EXPECT_NEAR(geodesic_distance({0, 1}, {0, 2}), std::acosh(1.5), 1e-15);
  EXPECT_NEAR(geodesic_distance({0, 1}, {1, 1}), std::acosh(2.0), 1e-15);
  EXPECT_NEAR(cosh_rho_minus_one({0, 1}, {1, 2}), 1.0, 1e-15);
  EXPECT_THROW(HPoint(0, 0), DomainError);
  EXPECT_THROW(HPoint(0, -1), DomainError);
}

TEST(Hyperbolic, GeodesicSymmetryAndTriangleInequality)
{
  Rng rng(61);
  for (int t = 0; t < 10000; ++t) {
    HPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
    double ab = geodesic_distance(a, b), bc = geodesic_distance(b, c), ac = geodesic_distance(a, c);
    ASSERT_GE(ab, 0);
    ASSERT_EQ(ab, geodesic_distance(b, a));
    ASSERT_LE(ac, ab + bc + 1e-12 * (1 + ac)) << "sample " << t;
  }
}

TEST(Hyperbolic, HeatKernelPositiveAndSymmetric)
{
  Rng rng(62);
  for (int i = 0; i < 50; ++i) {
    HPoint a = random_point(rng), b = random_point(rng);
    for (double t : {0.05, 0.5, 2.0}) {
      double k = scalar_heat_kernel(t, a, b);
      ASSERT_GE(k, 0);
      ASSERT_EQ(k, scalar_heat_kernel(t, b, a));
    }
  }
  for (double rho : {0.0, 0.5, 1.0, 3.0}) EXPECT_GT(scalar_heat_kernel(1.0, rho), 0);
  EXPECT_THROW(scalar_heat_kernel(0.0, 1.0), DomainError);
  EXPECT_THROW(scalar_heat_kernel(-1.0, 1.0), DomainError);
}

TEST(Hyperbolic, HeatKernelNormalization)
{
  for (double t : {0.25, 1.0}) EXPECT_NEAR(heat_kernel_mass(t), 1.0, 1e-6) << "t = " << t;
}

TEST(Hyperbolic, HeatKernelSolvesRadialHeatEquation)
{
  // d_t k = k'' + coth(rho) k' by central differences
  const double h = 1e-3;
  for (double t : {0.3, 1.0})
    for (double rho : {0.5, 1.0, 2.0}) {
      auto k = [&](double tt, double r) { return scalar_heat_kernel(tt, r); };
      double dt = (k(t + h, rho) - k(t - h, rho)) / (2 * h);
      double d1 = (k(t, rho + h) - k(t, rho - h)) / (2 * h);
      double d2 = (k(t, rho + h) - 2 * k(t, rho) + k(t, rho - h)) / (h * h);
      double lap = d2 + d1 / std::tanh(rho);
      EXPECT_NEAR(dt, lap, 1e-4 * std::abs(dt) + 1e-8) << "t " << t << " rho " << rho;
    }
}

TEST(Hyperbolic, HeatKernelSmallTimeDiagonal)
{
  // k_t(0) = (1/(4 pi t)) (1 - t/3 + O(t^2)) for curvature -1
  for (double t : {0.005, 0.01}) {
    double ratio = scalar_heat_kernel(t, 0.0) * 4 * pi * t;
    EXPECT_NEAR(ratio, 1 - t / 3, 5 * t * t);
  }
}

TEST(Hyperbolic, Semigroup)
{
  for (double d : {0.0, 0.7, 1.5}) {
    SemigroupSample s = heat_semigroup(0.3, 0.5, d);
    EXPECT_NEAR(s.composed, s.direct, 1e-4 * s.direct) << "d = " << d;
  }
}

TEST(Hyperbolic, PropagatorDecayAndSmallTimeScaling)
{
  double prev = std::abs(propagator_f(2.0, 1.0) * std::exp(4.0 / 8));
  for (double rho : {4.0, 8.0, 12.0}) {
    double v = std::abs(propagator_f(rho, 1.0) * std::exp(rho * rho / 8));
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-3);

  double lo = 1e300, hi = -1e300;
  for (double t = 0.01; t <= 0.1 + 1e-12; t += 0.01) {
    double s = std::log(std::abs(propagator_f(1.0, t))) + 1 / (4 * t) + 2 * std::log(t);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  EXPECT_LT(hi - lo, 1.0);
  EXPECT_LT(propagator_f(1.0, 0.5), 0);  // k decreases in rho
}

TEST(Hyperbolic, PropagatorNearZeroBranchesAgree)
{
  for (double t : {0.2, 1.0}) {
    double below = propagator_f(0.999e-3, t), above = propagator_f(1.001e-3, t);
    EXPECT_NEAR(below, above, 1e-6 * std::abs(above));
    EXPECT_NEAR(propagator_f(0.0, t), below, 1e-5 * std::abs(below));
  }
}

TEST(Hyperbolic, StarDifferentialMatchesFiniteDifferences)
{
  Rng rng(63);
  const double h = 1e-4;
  for (int i = 0; i < 10; ++i) {
    HPoint a = random_point(rng), b = random_point(rng);
    if (geodesic_distance(a, b) > 3) continue;
    for (double t : {0.5, 1.5}) {
      auto k = [&](double x1, double y1) { return scalar_heat_kernel(t, HPoint(x1, y1), b); };
      double dkdx = (k(a.x + h, a.y) - k(a.x - h, a.y)) / (2 * h);
      double dkdy = (k(a.x, a.y + h) - k(a.x, a.y - h)) / (2 * h);
      FormCoefficients c = propagator_density(a, b, t);
      double scale = std::abs(dkdx) + std::abs(dkdy) + 1e-12;
      EXPECT_NEAR(c.dy1, dkdx, 1e-4 * scale);
      EXPECT_NEAR(c.dx1, -dkdy, 1e-4 * scale);
    }
  }
}

TEST(Hyperbolic, PropagatorSymmetryAndDiagonal)
{
  HPoint a(0, 1), b(1, 2);
  PropagatorSample s = propagator_components(a, b, 0.01, 1.0), r = propagator_components(b, a, 0.01, 1.0);
  EXPECT_DOUBLE_EQ(s.f_integral, r.f_integral);
  EXPECT_DOUBLE_EQ(s.coefficients.dy1, r.coefficients.dy2);
  EXPECT_DOUBLE_EQ(s.coefficients.dy2, r.coefficients.dy1);
  EXPECT_DOUBLE_EQ(s.coefficients.dx1, r.coefficients.dx2);
  EXPECT_DOUBLE_EQ(s.coefficients.dx2, r.coefficients.dx1);

  // hand evaluation at (i, 1+2i): dy1 = -1, dx1 = 2, dy2 = 1, dx2 = -1/2
  EXPECT_NEAR(s.coefficients.dy1 / s.coefficients.dx1, -0.5, 1e-14);
  EXPECT_NEAR(s.coefficients.dy2 / s.coefficients.dx2, -2.0, 1e-14);

  // self-loop: the prefactors vanish on the diagonal
  PropagatorSample d = propagator_components(a, a, 0.01, 1.0);
  EXPECT_EQ(d.coefficients.dy1, 0);
  EXPECT_EQ(d.coefficients.dy2, 0);
  EXPECT_EQ(d.coefficients.dx1, 0);
  EXPECT_EQ(d.coefficients.dx2, 0);

  EXPECT_THROW(propagator_components(a, b, 1.0, 1.0), DomainError);
  EXPECT_THROW(propagator_components(a, b, 0.0, 1.0), DomainError);
}

TEST(Hyperbolic, TwoWheelConverges)
{
  auto tab = wheel_integral(2, {0.1, 0.05, 0.025});
  ASSERT_EQ(tab.rows.size(), 3u);
  for (const auto& r : tab.rows) {
    double oracle = n2_oracle(r.eps, 1.0);
    EXPECT_LE(std::abs(r.estimate - oracle), r.error) << "eps " << r.eps;
  }
  EXPECT_GE(std::abs(tab.rows[1].diff) / std::abs(tab.rows[2].diff), 1.5);
}

TEST(Hyperbolic, ThreeWheelMatchesClosedForm)
{
  auto tab = wheel_integral(3, {0.025, 0.0125, 0.00625, 0.003125});
  for (const auto& r : tab.rows) EXPECT_NEAR(r.estimate, n3_closed_form(r.eps, 1.0), std::max(r.error, 1e-9));
  for (std::size_t i = 2; i < tab.rows.size(); ++i)
    EXPECT_LT(std::abs(tab.rows[i].diff), std::abs(tab.rows[i - 1].diff));
  EXPECT_THROW(wheel_integral(4, {0.1}), DomainError);
  EXPECT_THROW(wheel_integral(2, {1.5}), DomainError);
}

TEST(Hyperbolic, GaussianDeterminant)
{
  DetReport one = gaussian_matrix_det({0.3}, 0.7);
  double a = 1 / 0.3 + 1 / 0.7;
  EXPECT_NEAR(one.closed_form, a * a / 16, 1e-14);
  EXPECT_LE(one.rel_deviation, 1e-12);

  Rng rng(64);
  std::uniform_real_distribution<double> lt(-3, 1);
  std::uniform_int_distribution<int> nd(1, 5);
  for (int s = 0; s < 100; ++s) {
    std::vector<double> t(nd(rng));
    for (auto& x : t) x = std::exp(lt(rng));
    DetReport r = gaussian_matrix_det(t, std::exp(lt(rng)));
    ASSERT_LE(r.rel_deviation, 1e-12) << "sample " << s;
  }

  // eps -> infinity: det -> (1/4)^{2m} / (prod t)^2
  std::vector<double> t{0.4, 1.1, 0.7};
  double prod = 0.4 * 1.1 * 0.7;
  DetReport big = gaussian_matrix_det(t, 1e9);
  EXPECT_NEAR(big.closed_form * prod * prod * std::pow(16.0, 3), 1.0, 1e-8);
  EXPECT_THROW(gaussian_matrix({}, 1.0), DomainError);
  EXPECT_THROW(gaussian_matrix({1.0}, 0.0), DomainError);
}

TEST(Hyperbolic, GaussianInverseBound)
{
  Rng rng(65);
  std::uniform_real_distribution<double> lt(-3, 1);
  std::uniform_int_distribution<int> nd(1, 5);
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> t(nd(rng));
    for (auto& x : t) x = std::exp(lt(rng));
    InverseBoundReport r = inverse_entry_bound_check(t, std::exp(lt(rng)));
    ASSERT_TRUE(r.holds) << "sample " << s << " ratio " << r.max_ratio;
    ASSERT_NEAR(r.m11_numeric, r.m11_formula, 1e-10 * std::abs(r.m11_formula));
  }
}

TEST(Hyperbolic, GaussianInverseShermanMorrison)
{
  std::vector<double> t{0.5, 0.2, 1.3};
  for (double eps : {1e-6, 0.3, 1e9}) {
    Eigen::MatrixXd Mi = gaussian_matrix(t, eps).inverse();
    double S = eps + 0.5 + 0.2 + 1.3;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double expected = 4 * ((i == j ? t[i] : 0) - t[i] * t[j] / S);
        EXPECT_NEAR(Mi(i, j), expected, 1e-9);
        EXPECT_NEAR(Mi(i + 3, j + 3), expected, 1e-9);
        EXPECT_NEAR(Mi(i, j + 3), 0, 1e-12);
      }
  }
  // off-diagonal entries vanish as eps -> infinity
  Eigen::MatrixXd far = gaussian_matrix(t, 1e12).inverse();
  EXPECT_LT(std::abs(far(0, 1)), 1e-10);
}

TEST(Hyperbolic, EllipticLatticeSums)
{
  using C = std::complex<double>;
  EXPECT_LE(std::abs(elliptic_lattice_sum(C(0, 1), 1, 1, 50)), 1e-12);
  EXPECT_LE(std::abs(elliptic_lattice_sum(C(0.3, 1.2), 1, 1, 50)), 1e-12);
  Rng rng(66);
  std::uniform_real_distribution<double> re(-0.5, 0.5), im(0.6, 2.0);
  for (int s = 0; s < 5; ++s) {
    C tau(re(rng), im(rng));
    for (int n = 0; n <= 2; ++n)
      for (int k = 0; k <= 2 * n + 1; ++k) ASSERT_LE(std::abs(elliptic_lattice_sum(tau, k, n, 30)), 1e-12);
  }
  // even total exponent: direct sum of |a tau + b|^{-4} is positive
  C control = lattice_sum(C(0, 1), 2, 2, 30);
  double direct = 0;
  for (int a = -30; a <= 30; ++a)
    for (int b = -30; b <= 30; ++b)
      if (a || b) direct += 1 / std::pow(static_cast<double>(a * a + b * b), 2);
  EXPECT_NEAR(control.real(), direct, 1e-12 * direct);
  EXPECT_GT(control.real(), 1);
  EXPECT_THROW(lattice_sum(C(0, -1), 1, 2, 10), DomainError);
  EXPECT_THROW(elliptic_lattice_sum(C(0, 1), 5, 1, 10), DomainError);
}
