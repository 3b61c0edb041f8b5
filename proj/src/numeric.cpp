#include "bds/numeric.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace bds {

namespace {

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the orthogonal
// recurrence, weights come from the first eigenvector component.
static void golub_welsch(const Vec& diag, const Vec& offdiag, double mu0, Vec& nodes,
                         Vec& weights) {
  const int n = static_cast<int>(diag.size());
  Mat jacobi = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    jacobi(i, i) = diag(i);
    if (i + 1 < n) {
      jacobi(i, i + 1) = offdiag(i);
      jacobi(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  nodes = es.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double v0 = es.eigenvectors()(0, i);
    weights(i) = mu0 * v0 * v0;
  }
}

void gauss_legendre(int n, Vec& nodes, Vec& weights) {
  Vec diag = Vec::Zero(n), off(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  golub_welsch(diag, off, 2.0, nodes, weights);
}

void gauss_laguerre_normalized(int n, double alpha, Vec& nodes, Vec& weights) {
  if (alpha <= -1.0) throw std::invalid_argument("gauss_laguerre: alpha must exceed -1");
  Vec diag(n), off(n - 1 > 0 ? n - 1 : 0);
  for (int k = 0; k < n; ++k) diag(k) = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(k * (k + alpha));
  // mu0 = Gamma(alpha+1); normalizing to 1 gives a probability rule.
  golub_welsch(diag, off, 1.0, nodes, weights);
  weights /= weights.sum();
}

}  // namespace bds
