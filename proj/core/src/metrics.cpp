#include "pdfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdfm/errors.hpp"

namespace pdfm::bench {

double r_squared(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw SchemaError("r_squared: length mismatch");
  if (y.size() < 2) throw MetricError("r_squared: needs at least 2 points");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw MetricError("r_squared: zero variance in y");
  return 1.0 - ss_res / ss_tot;
}

double pearson_r(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw SchemaError("pearson_r: length mismatch");
  if (y.size() < 2) throw MetricError("pearson_r: needs at least 2 points");
  const double n = static_cast<double>(y.size());
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += yhat[i];
  }
  my /= n;
  mh /= n;
  double sy = 0.0, sh = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y[i] - my;
    const double dh = yhat[i] - mh;
    sy += dy * dy;
    sh += dh * dh;
    cov += dy * dh;
  }
  if (sy == 0.0 || sh == 0.0) throw MetricError("pearson_r: constant input");
  return std::clamp(cov / std::sqrt(sy * sh), -1.0, 1.0);
}

IntraCountyResult intra_county_pearson(std::span<const double> y,
                                       std::span<const double> yhat,
                                       std::span<const std::string> county_of) {
  if (y.size() != yhat.size() || y.size() != county_of.size())
    throw SchemaError("intra_county_pearson: length mismatch");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < y.size(); ++i) groups[std::string(county_of[i])].push_back(i);

  IntraCountyResult result;
  double total = 0.0;
  for (const auto& [county, rows] : groups) {
    if (rows.size() < 3) {
      ++result.counties_skipped;
      continue;
    }
    std::vector<double> ys, hs;
    for (auto i : rows) {
      ys.push_back(y[i]);
      hs.push_back(yhat[i]);
    }
    const bool y_const = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys[0]; });
    const bool h_const = std::all_of(hs.begin(), hs.end(), [&](double v) { return v == hs[0]; });
    if (y_const || h_const) {
      ++result.counties_skipped;
      continue;
    }
    total += pearson_r(ys, hs);
    ++result.counties_used;
  }
  if (result.counties_used == 0)
    throw MetricError("intra_county_pearson: no qualifying county");
  result.mean_r = total / static_cast<double>(result.counties_used);
  return result;
}

double mape(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw SchemaError("mape: length mismatch");
  if (y.empty()) throw MetricError("mape: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) < 1e-9)
      throw MetricError("mape: near-zero actual at position " + std::to_string(i));
    total += std::abs((y[i] - yhat[i]) / y[i]);
  }
  return total / static_cast<double>(y.size());
}

namespace {

// Continued-fraction evaluation for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (dof <= 0.0) throw MetricError("student_t_cdf: dof must be positive");
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> errors_a,
                          std::span<const double> errors_b, int m_comparisons) {
  if (errors_a.size() != errors_b.size()) throw SchemaError("paired_t_test: length mismatch");
  if (errors_a.size() < 2) throw MetricError("paired_t_test: needs at least 2 pairs");
  if (m_comparisons < 1) throw ConfigError("paired_t_test: m_comparisons must be >= 1");

  const std::size_t n = errors_a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += errors_a[i] - errors_b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = errors_a[i] - errors_b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);

  TTestResult result;
  result.m_comparisons = m_comparisons;
  const double threshold = 0.05 / static_cast<double>(m_comparisons);
  if (var == 0.0) {
    result.degenerate = true;
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
      result.significant = false;
    } else {
      result.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
      result.significant = true;
    }
    return result;
  }
  result.t = mean / std::sqrt(var / static_cast<double>(n));
  const double dof = static_cast<double>(n - 1);
  result.p = 2.0 * (1.0 - student_t_cdf(std::abs(result.t), dof));
  result.significant = result.p < threshold;
  return result;
}

}  // namespace pdfm::bench
