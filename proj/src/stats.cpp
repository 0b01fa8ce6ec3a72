#include "enetlts/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace enetlts {

double median(Vector v) {
  const Index n = v.size();
  if (n == 0) throw Error("median of empty vector");
  double* begin = v.data();
  double* end = v.data() + n;
  double* mid = begin + n / 2;
  std::nth_element(begin, mid, end);
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(begin, mid);
  return 0.5 * (lo + hi);
}

double mad(const Vector& v) {
  const double m = median(v);
  return 1.4826 * median((v.array() - m).abs().matrix());
}

namespace {

// Lanczos approximation of log Gamma.
double log_gamma(double x) {
  static const double coef[6] = {76.18009172947146,    -86.50532032941677,
                                 24.01409824083091,    -1.231739572450155,
                                 0.1208650973866179e-2, -0.5395239384953e-5};
  double y = x;
  double tmp = x + 5.5;
  tmp -= (x + 0.5) * std::log(tmp);
  double ser = 1.000000000190015;
  for (double c : coef) ser += c / ++y;
  return -tmp + std::log(2.5066282746310005 * ser / x);
}

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  const double gln = log_gamma(a);
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - gln);
  }
  throw NumericError("incomplete gamma series failed to converge");
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1
// (modified Lentz).
double gamma_q_contfrac(double a, double x) {
  const double gln = log_gamma(a);
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16)
      return std::exp(-x + a * std::log(x) - gln) * h;
  }
  throw NumericError("incomplete gamma continued fraction failed to converge");
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw Error("gamma_p requires x >= 0 and a > 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_cdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(double df, double p) {
  if (!(df > 0.0)) throw Error("chi2_quantile requires df > 0");
  if (!(p > 0.0 && p < 1.0)) throw Error("chi2_quantile requires p in (0,1)");
  double lo = 0.0;
  double hi = df + 10.0;
  while (chi2_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace enetlts
