// Test-only reference computations. They avoid the library's
// grid projection, padding and convolution code paths.
#ifndef NLSQ_TESTS_ORACLES_HPP
#define NLSQ_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

struct Dense {
  explicit Dense(int m) : dim(m) {
    Mat b = Mat::Zero(m, m);
    for (int k = 0; k + 1 < m; ++k) b(k, k + 1) = std::sqrt(double(k + 1));
    q = (b + b.adjoint()) / std::numbers::sqrt2;
    p = cplx(0, 1) * (b.adjoint() - b) / std::numbers::sqrt2;
    a = b;
  }
  int dim;
  Mat a, q, p;

  Vec vacuum() const {
    Vec v = Vec::Zero(dim);
    v(0) = 1.0;
    return v;
  }

  /// e^{i gamma q^3}|0> by dense matrix exponential.
  Vec cubic(double gamma) const {
    const Mat q3 = q * q * q;
    const Mat u = (cplx(0, gamma) * q3).exp();
    return u * vacuum();
  }

  Vec coherent(cplx beta) const {
    const Mat gen = beta * a.adjoint() - std::conj(beta) * a;
    return gen.exp() * vacuum();
  }

  static double expect(const Vec& psi, const Mat& op) { return (psi.adjoint() * op * psi)(0, 0).real(); }

  Mat quadrature(double phi) const {
    return (a * std::polar(1.0, -phi) + a.adjoint() * std::polar(1.0, phi)) / std::numbers::sqrt2;
  }
};

/// Brute-force multinomial expansion of <(A + c_Q Q + c_E E)^n> over all
/// (k1, k2, k3) with k1 + k2 + k3 = n.
inline double multinomial_output_moment(int n, const std::vector<double>& mech, double c_q, double c_e,
                                        double n_bar) {
  auto fact = [](int k) { double f = 1; for (int i = 2; i <= k; ++i) f *= i; return f; };
  auto vac = [&](int k) { return k % 2 ? 0.0 : fact(k) / (fact(k / 2) * std::pow(2.0, k / 2)) * std::pow(0.5, k / 2); };
  auto th = [&](int k) {
    return k % 2 ? 0.0 : fact(k) / (fact(k / 2) * std::pow(2.0, k / 2)) * std::pow(n_bar + 0.5, k / 2);
  };
  double acc = 0;
  for (int k1 = 0; k1 <= n; ++k1) {
    for (int k2 = 0; k1 + k2 <= n; ++k2) {
      const int k3 = n - k1 - k2;
      const double coef = fact(n) / (fact(k1) * fact(k2) * fact(k3));
      acc += coef * vac(k1) * std::pow(c_q, k2) * mech[k2] * std::pow(c_e, k3) * th(k3);
    }
  }
  return acc;
}

}  // namespace oracle

#endif
