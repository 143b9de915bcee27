#include "forge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forge/error.hpp"

namespace forge {

namespace {

using real = long double;

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
real beta_cf(real a, real b, real x) {
  constexpr int kMaxIter = 10000;
  constexpr real kEps = 1e-18L;
  constexpr real kTiny = 1e-300L;
  real qab = a + b, qap = a + 1, qam = a - 1;
  real c = 1, d = 1 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1 / d;
  real h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    real aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1 / d;
    real del = d * c;
    h *= del;
    if (std::fabs(del - 1) < kEps) break;
  }
  return h;
}

real incomplete_beta_l(real a, real b, real x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  real ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  real front = std::exp(ln_front);
  if (x < (a + 1) / (a + b + 2)) return front * beta_cf(a, b, x) / a;
  return 1 - front * beta_cf(b, a, 1 - x) / b;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  return static_cast<double>(incomplete_beta_l(a, b, x));
}

double student_t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0.0;
  real tt = static_cast<real>(t) * t;
  return static_cast<double>(incomplete_beta_l(static_cast<real>(df) / 2, 0.5L, df / (df + tt)));
}

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DegenerateInput("pearson: sample sizes differ");
  const size_t n = xs.size();
  if (n < 3) throw DegenerateInput("pearson: need at least 3 pairs");
  real mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  real sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    real dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) throw DegenerateInput("pearson: zero variance");
  real r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0L, 1.0L);
  PearsonResult out;
  out.r = static_cast<double>(r);
  real df = static_cast<real>(n - 2);
  real one_minus = 1 - r * r;
  if (one_minus <= 0) {
    out.p = 0.0;
  } else {
    // t^2 = r^2 df / (1 - r^2), so df / (df + t^2) = 1 - r^2.
    out.p = static_cast<double>(incomplete_beta_l(df / 2, 0.5L, one_minus));
  }
  return out;
}

ImprovementStats improvement_stats(const std::vector<std::pair<int, int>>& rating_pairs) {
  if (rating_pairs.empty()) throw EmptyInput("improvement_stats: no records");
  ImprovementStats s;
  s.n = static_cast<int>(rating_pairs.size());
  std::vector<int> gains;
  gains.reserve(rating_pairs.size());
  for (const auto& [initial, final_rating] : rating_pairs) gains.push_back(final_rating - initial);
  s.n_improved = static_cast<int>(std::count_if(gains.begin(), gains.end(), [](int g) { return g > 0; }));
  s.improvement_rate = 100.0 * s.n_improved / s.n;
  std::sort(gains.begin(), gains.end());
  s.median_gain = gains[(gains.size() - 1) / 2];
  s.max_gain = gains.back();
  return s;
}

}  // namespace forge
