#ifndef BVLAB_HYPERBOLIC_HPP
#define BVLAB_HYPERBOLIC_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bvlab/errors.hpp"

namespace bvlab::hyperbolic {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;
constexpr double pi = boost::math::constants::pi<double>();

/** \brief Point of the upper half plane. */
struct HPoint {
  double x = 0, y = 1;

  HPoint() = default;
  HPoint(double x_, double y_) : x(x_), y(y_)
  {
    if (!(y > 0) || !std::isfinite(x) || !std::isfinite(y))
      throw DomainError("point must satisfy y > 0, got y = " + std::to_string(y));
  }
};

/** \brief Tolerances for the 1-d adaptive quadratures. */
struct QuadratureOptions {
  double rel_tol = 1e-12;
  unsigned max_depth = 18;
};

/** \brief Compensated (Neumaier) running sum. */
class NeumaierSum {
 public:
  void add(double v)
  {
    double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};

inline double geodesic_distance(const HPoint& a, const HPoint& b)
{
  double dx = a.x - b.x, dy = a.y - b.y;
  double q = (dx * dx + dy * dy) / (a.y * b.y);
  // arcosh(1+q) = log1p(q + sqrt(q(q+2))) keeps accuracy for nearby points
  return std::log1p(q + std::sqrt(q * (q + 2)));
}

/** \brief cosh(rho) - 1 without cancellation. */
inline double cosh_rho_minus_one(const HPoint& a, const HPoint& b)
{
  double dx = a.x - b.x, dy = a.y - b.y;
  return (dx * dx + dy * dy) / (a.y * b.y);
}

namespace detail {

inline void check_time(double t)
{
  if (!(t > 0) || !std::isfinite(t)) throw DomainError("heat-kernel time must be positive");
}

inline double prefactor(double t) { return std::sqrt(2.0) / std::pow(4 * pi * t, 1.5) * std::exp(-t / 4); }

/** \brief Upper limit in u = sqrt(s - rho) beyond which exp(-s^2/4t) is negligible against the peak. */
inline double u_cutoff(double t, double rho) { return std::sqrt(std::sqrt(rho * rho + 4 * t * 745.0) - rho); }

/** \brief Integrand of k_t in u, divided by the Gaussian at s = rho. */
inline double heat_integrand(double u, double t, double rho)
{
  if (u == 0) return rho == 0 ? 0.0 : 2 * rho / std::sqrt(std::sinh(rho));
  double w = u * u, s = rho + w;
  double denom = std::sqrt(2 * std::sinh(rho + w / 2) * std::sinh(w / 2));
  return 2 * u * s * std::exp(-(s * s - rho * rho) / (4 * t)) / denom;
}

/** \brief d/d rho of the integrand of k_t, same normalization, valid for rho > 0. */
inline double heat_integrand_drho(double u, double t, double rho)
{
  double w = u * u, s = rho + w;
  if (u == 0) {
    // limit of the two terms as u -> 0
    double sh = std::sinh(rho);
    return 2 / std::sqrt(sh) - rho * std::cosh(rho) / std::pow(sh, 1.5);
  }
  double g = std::exp(-(s * s - rho * rho) / (4 * t));
  double dn2 = 2 * std::sinh(rho + w / 2) * std::sinh(w / 2);  // cosh s - cosh rho
  double dn = std::sqrt(dn2);
  double dsh = 2 * std::cosh(rho + w / 2) * std::sinh(w / 2);  // sinh s - sinh rho
  double N = 2 * u * s * g, dN = 2 * u * (1 - s * s / (2 * t)) * g;
  // the Gaussian at rho was factored out, which shifts dN by N rho/(2t)
  dN += N * rho / (2 * t);
  return dN / dn - N * dsh / (2 * dn * dn2);
}

}  // namespace detail

/** \brief Scalar heat kernel k_t(rho) on the hyperbolic plane (substitution s = rho + u^2). */
inline double scalar_heat_kernel(double t, double rho, const QuadratureOptions& q = {})
{
  detail::check_time(t);
  if (!(rho >= 0)) throw DomainError("geodesic distance must be non-negative");
  double gauss_peak = std::exp(-rho * rho / (4 * t));
  if (gauss_peak == 0) return 0;
  double U = detail::u_cutoff(t, rho);
  double v = gauss_kronrod<double, 61>::integrate([&](double u) { return detail::heat_integrand(u, t, rho); }, 0.0,
                                                  U, q.max_depth, q.rel_tol);
  return detail::prefactor(t) * gauss_peak * v;
}

inline double scalar_heat_kernel(double t, const HPoint& a, const HPoint& b, const QuadratureOptions& q = {})
{
  return scalar_heat_kernel(t, geodesic_distance(a, b), q);
}

/** \brief Total mass of k_t: integral of k_t(rho) 2 pi sinh(rho) d rho. */
inline double heat_kernel_mass(double t, const QuadratureOptions& q = {})
{
  detail::check_time(t);
  double R = 2 * std::sqrt(745.0 * t) + 2;
  return gauss_kronrod<double, 31>::integrate(
      [&](double r) { return scalar_heat_kernel(t, r, q) * 2 * pi * std::sinh(r); }, 0.0, R, 12, 1e-10);
}

struct SemigroupSample {
  double composed;  // integral of k_s(z,w) k_t(w,z') dvol(w)
  double direct;    // k_{s+t}(z,z')
};

/**
 * \brief Chapman-Kolmogorov check at distance d(z,z').  The w-integral uses geodesic polar
 * coordinates around z, with cosh d(w,z') from the hyperbolic law of cosines.
 */
inline SemigroupSample heat_semigroup(double s, double t, double d, double tol = 1e-8)
{
  detail::check_time(s);
  detail::check_time(t);
  QuadratureOptions q{1e-10, 15};
  double R = 2 * std::sqrt(745.0 * s) + 1;
  double outer = gauss_kronrod<double, 31>::integrate(
      [&](double r) {
        double ks = scalar_heat_kernel(s, r, q);
        if (ks == 0) return 0.0;
        double ang = gauss_kronrod<double, 31>::integrate(
            [&](double th) {
              double c = std::cosh(r) * std::cosh(d) - std::sinh(r) * std::sinh(d) * std::cos(th);
              return scalar_heat_kernel(t, std::acosh(std::max(1.0, c)), q);
            },
            0.0, pi, 8, tol);
        return 2 * ang * ks * std::sinh(r);
      },
      0.0, R, 10, tol);
  return {outer, scalar_heat_kernel(s + t, d)};
}

namespace detail {

/** \brief dk/drho by central differences (k is even in rho), Richardson in the step. */
inline double heat_kernel_drho_fd(double t, double rho, double h = 0.04)
{
  auto k = [&](double r) { return scalar_heat_kernel(t, std::abs(r)); };
  double D[3];
  for (int i = 0; i < 3; ++i) {
    double hi = h / (1 << i);
    D[i] = (k(rho + hi) - k(rho - hi)) / (2 * hi);
  }
  double R1 = (4 * D[1] - D[0]) / 3, R2 = (4 * D[2] - D[1]) / 3;
  return (16 * R2 - R1) / 15;
}

/** \brief k''(0) by Richardson on 2(k(h) - k(0))/h^2. */
inline double heat_kernel_d2_at_zero(double t, double h = 0.04)
{
  double k0 = scalar_heat_kernel(t, 0.0);
  double D[3];
  for (int i = 0; i < 3; ++i) {
    double hi = h / (1 << i);
    D[i] = 2 * (scalar_heat_kernel(t, hi) - k0) / (hi * hi);
  }
  double R1 = (4 * D[1] - D[0]) / 3, R2 = (4 * D[2] - D[1]) / 3;
  return (16 * R2 - R1) / 15;
}

}  // namespace detail

/**
 * \brief f(rho,t) = (1/sinh rho) dk_t/drho.  Differentiates under the integral for rho >= 1e-3 and
 * uses Richardson-extrapolated central differences below; f(0,t) = k_t''(0).
 */
inline double propagator_f(double rho, double t, const QuadratureOptions& q = {})
{
  detail::check_time(t);
  if (!(rho >= 0)) throw DomainError("geodesic distance must be non-negative");
  if (rho == 0) return detail::heat_kernel_d2_at_zero(t);
  if (rho < 1e-3) return detail::heat_kernel_drho_fd(t, rho) / std::sinh(rho);
  double peak = std::exp(-rho * rho / (4 * t));
  if (peak == 0) return 0;
  double U = detail::u_cutoff(t, rho);
  double v = gauss_kronrod<double, 61>::integrate(
      [&](double u) { return detail::heat_integrand_drho(u, t, rho); }, 0.0, U, q.max_depth, q.rel_tol);
  // the factored Gaussian contributes -rho/(2t) k
  double k = scalar_heat_kernel(t, rho, q);
  return (detail::prefactor(t) * peak * v - rho / (2 * t) * k) / std::sinh(rho);
}

/** \brief Coefficients of dy1, dy2, dx1, dx2 multiplying the scalar factor. */
struct FormCoefficients {
  double dy1 = 0, dy2 = 0, dx1 = 0, dx2 = 0;
};

/**
 * \brief Hodge-starred differential of cosh rho in each slot: the (1,0) part is
 * (d cosh rho / dx1) dy1 - (d cosh rho / dy1) dx1, and symmetrically for the second point.
 */
inline FormCoefficients propagator_prefactors(const HPoint& a, const HPoint& b)
{
  double dx = a.x - b.x, y1 = a.y, y2 = b.y;
  FormCoefficients c;
  c.dy1 = 2 * dx / (y1 * y2);
  c.dy2 = -2 * dx / (y1 * y2);
  c.dx1 = -((y1 - y2) * (y1 + y2) - dx * dx) / (y1 * y1 * y2);
  c.dx2 = ((y1 - y2) * (y1 + y2) + dx * dx) / (y1 * y2 * y2);
  return c;
}

struct PropagatorSample {
  FormCoefficients coefficients;
  double f_integral = 0;  // integral of f(rho,t) dt over [eps, L]
};

/** \brief The propagator's integrand at a single time t: f(rho,t) times the prefactors. */
inline FormCoefficients propagator_density(const HPoint& a, const HPoint& b, double t)
{
  double f = propagator_f(geodesic_distance(a, b), t);
  FormCoefficients c = propagator_prefactors(a, b);
  return {f * c.dy1, f * c.dy2, f * c.dx1, f * c.dx2};
}

inline PropagatorSample propagator_components(const HPoint& a, const HPoint& b, double eps, double L)
{
  if (!(eps > 0) || !(eps < L)) throw DomainError("propagator cut-offs need 0 < eps < L");
  double rho = geodesic_distance(a, b);
  // integrate in log t: f has a Gaussian onset near t ~ rho^2
  double F = gauss_kronrod<double, 31>::integrate(
      [&](double s) {
        double t = std::exp(s);
        return propagator_f(rho, t, {1e-11, 15}) * t;
      },
      std::log(eps), std::log(L), 12, 1e-9);
  FormCoefficients c = propagator_prefactors(a, b);
  return {{F * c.dy1, F * c.dy2, F * c.dx1, F * c.dx2}, F};
}

/** \brief One row of a convergence table. */
struct WheelRow {
  double eps = 0;
  double estimate = 0;
  double error = 0;
  double diff = 0;  // estimate minus the previous row's estimate (0 for the first row)
};

struct WheelTable {
  int n = 2;
  double L = 1;
  std::vector<WheelRow> rows;
};

/**
 * \brief Leading-order model integrands of the wheel weights.  n = 2: t1 t2/(t1+t2)^3 on
 * [eps,L]^2; n = 3: t1^{-1/2} t2^{-1/2} t3^{-3/2} on eps <= t1 <= t2 <= t3 <= L.
 */
inline double wheel_model_integrand(int n, const std::vector<double>& t)
{
  if (n == 2) return t.at(0) * t.at(1) / std::pow(t[0] + t[1], 3);
  if (n == 3) return 1 / std::sqrt(t.at(0) * t.at(1)) / std::pow(t.at(2), 1.5);
  throw DomainError("wheel model available for n = 2 and n = 3 only");
}

namespace detail {

/** \brief Composite Gauss-Legendre on [a,b] in log t with `panels` panels; f receives (t, weight). */
template <class F>
void log_gauss_nodes(double a, double b, int panels, F&& f)
{
  const double la = std::log(a), lb = std::log(b), h = (lb - la) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = la + p * h, mid = lo + h / 2;
    const auto& x = gauss<double, 20>::abscissa();
    const auto& w = gauss<double, 20>::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      // abscissae are the non-negative half; mirror them (the zero node appears once)
      for (int sgn : {1, -1}) {
        if (sgn < 0 && x[i] == 0) continue;
        double s = mid + sgn * x[i] * h / 2, t = std::exp(s);
        f(t, w[i] * h / 2 * t);
      }
    }
  }
}

inline double wheel_tensor(int n, double eps, double L, int panels)
{
  NeumaierSum sum;
  if (n == 2) {
    log_gauss_nodes(eps, L, panels, [&](double t1, double w1) {
      log_gauss_nodes(eps, L, panels,
                      [&](double t2, double w2) { sum.add(w1 * w2 * wheel_model_integrand(2, {t1, t2})); });
    });
  } else {
    log_gauss_nodes(eps, L, panels, [&](double t1, double w1) {
      log_gauss_nodes(t1, L, panels, [&](double t2, double w2) {
        log_gauss_nodes(t2, L, panels,
                        [&](double t3, double w3) { sum.add(w1 * w2 * w3 * wheel_model_integrand(3, {t1, t2, t3})); });
      });
    });
  }
  return sum.value();
}

}  // namespace detail

/**
 * \brief Convergence table for the wheel model integral.  Each estimate uses tensor
 * Gauss-Legendre in log t with m and 2m panels; error = 4|Q_m - Q_2m| + 1e-10 |Q_2m|.
 */
inline WheelTable wheel_integral(int n, const std::vector<double>& eps_list, double L = 1.0, int panels = 4)
{
  if (n != 2 && n != 3) throw DomainError("wheel_integral supports n = 2 and n = 3");
  if (!(L > 0)) throw DomainError("L must be positive");
  if (panels < 1) throw ConfigError("panels must be positive");
  WheelTable tab{n, L, {}};
  for (double e : eps_list) {
    if (!(e > 0) || !(e < L)) throw DomainError("each eps must satisfy 0 < eps < L");
    double q1 = detail::wheel_tensor(n, e, L, panels), q2 = detail::wheel_tensor(n, e, L, 2 * panels);
    WheelRow r{e, q2, 4 * std::abs(q1 - q2) + 1e-10 * std::abs(q2), 0};
    if (!tab.rows.empty()) r.diff = r.estimate - tab.rows.back().estimate;
    tab.rows.push_back(r);
  }
  return tab;
}

/** \brief M(t,eps) = (1/4) diag(A, A) with A = diag(1/t_i) + (1/eps) 1 1^T. */
inline Eigen::MatrixXd gaussian_matrix(const std::vector<double>& t, double eps)
{
  if (t.empty()) throw DomainError("gaussian_matrix needs n >= 2");
  if (!(eps > 0)) throw DomainError("eps must be positive");
  const Eigen::Index m = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(m, m, 1 / eps);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(t[i] > 0)) throw DomainError("all t_i must be positive");
    A(i, i) += 1 / t[i];
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  M.topLeftCorner(m, m) = A / 4;
  M.bottomRightCorner(m, m) = A / 4;
  return M;
}

struct DetReport {
  double numeric = 0;
  double closed_form = 0;
  double rel_deviation = 0;
};

/** \brief det M by LU against (1/4)^{2(n-1)} ((sum t + eps)/(prod t eps))^2. */
inline DetReport gaussian_matrix_det(const std::vector<double>& t, double eps)
{
  Eigen::MatrixXd M = gaussian_matrix(t, eps);
  double num = M.partialPivLu().determinant();
  double sum = eps, prod = eps;
  for (double ti : t) sum += ti, prod *= ti;
  double closed = std::pow(0.25, 2.0 * static_cast<double>(t.size())) * std::pow(sum / prod, 2);
  if (!std::isfinite(num) || num == 0) throw DomainError("gaussian matrix is numerically singular");
  return {num, closed, std::abs(num - closed) / std::abs(closed)};
}

struct InverseBoundReport {
  bool holds = true;
  double max_ratio = 0;  // max over entries of |M^{-1}_ij| / (4 min(t_i, t_j))
  int worst_i = 0, worst_j = 0;
  double m11_numeric = 0;
  double m11_formula = 0;  // 4 t_1 (t_2 + ... + eps)/(t_1 + ... + eps)
};

/** \brief Entrywise check of |M^{-1}_ij| <= 4 min(t_i, t_j), indices read modulo n-1. */
inline InverseBoundReport inverse_entry_bound_check(const std::vector<double>& t, double eps)
{
  Eigen::MatrixXd M = gaussian_matrix(t, eps);
  Eigen::MatrixXd Mi = M.partialPivLu().inverse();
  const int m = static_cast<int>(t.size());
  InverseBoundReport r;
  for (int i = 0; i < 2 * m; ++i)
    for (int j = 0; j < 2 * m; ++j) {
      double bound = 4 * std::min(t[i % m], t[j % m]);
      double ratio = std::abs(Mi(i, j)) / bound;
      if (ratio > r.max_ratio) r.max_ratio = ratio, r.worst_i = i, r.worst_j = j;
    }
  // a relative slack of a few ulps absorbs rounding in the inverse
  r.holds = r.max_ratio <= 1 + 1e-12;
  double sum = eps;
  for (double ti : t) sum += ti;
  r.m11_numeric = Mi(0, 0);
  r.m11_formula = 4 * t[0] * (sum - t[0]) / sum;
  return r;
}

/**
 * \brief Partial sum of 1/((a tau + b)^p (a conj(tau) + b)^q) over 0 < max(|a|,|b|) <= N.
 */
inline std::complex<double> lattice_sum(std::complex<double> tau, int p, int q, int N)
{
  if (!(tau.imag() > 0)) throw DomainError("tau must lie in the upper half plane");
  if (N < 1) throw DomainError("cutoff must be positive");
  if (p < 0 || q < 0) throw DomainError("exponents must be non-negative");
  NeumaierSum re, im;
  const std::complex<double> tb = std::conj(tau);
  for (int a = -N; a <= N; ++a)
    for (int b = -N; b <= N; ++b) {
      if (a == 0 && b == 0) continue;
      std::complex<double> w1 = static_cast<double>(a) * tau + static_cast<double>(b);
      std::complex<double> w2 = static_cast<double>(a) * tb + static_cast<double>(b);
      std::complex<double> v = 1.0 / (std::pow(w1, p) * std::pow(w2, q));
      re.add(v.real());
      im.add(v.imag());
    }
  return {re.value(), im.value()};
}

/** \brief The odd-total-exponent sum with exponents k and 2n+1-k. */
inline std::complex<double> elliptic_lattice_sum(std::complex<double> tau, int k, int n, int N)
{
  if (n < 0 || k < 0 || k > 2 * n + 1) throw DomainError("need 0 <= k <= 2n+1");
  return lattice_sum(tau, k, 2 * n + 1 - k, N);
}

}  // namespace bvlab::hyperbolic

#endif  // BVLAB_HYPERBOLIC_HPP
