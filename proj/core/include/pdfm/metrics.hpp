#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace pdfm::bench {

/// 1 - SS_res / SS_tot. May be negative; never clamped.
double r_squared(std::span<const double> y, std::span<const double> yhat);

/// Sample Pearson correlation in [-1, 1]; MetricError on constant input.
double pearson_r(std::span<const double> y, std::span<const double> yhat);

struct IntraCountyResult {
  double mean_r = 0.0;
  int counties_used = 0;
  int counties_skipped = 0;
};

/// Pearson r within each county having >= 3 test postal codes and nonconstant
/// values, averaged unweighted across qualifying counties. `county_of` maps
/// each position to its county id.
IntraCountyResult intra_county_pearson(std::span<const double> y,
                                       std::span<const double> yhat,
                                       std::span<const std::string> county_of);

/// Mean |(y - yhat) / y|; MetricError when any |y| < 1e-9.
double mape(std::span<const double> y, std::span<const double> yhat);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;            // two-sided
  bool significant = false;  // p < 0.05 / m_comparisons
  double alpha = 0.05;
  int m_comparisons = 1;
  bool degenerate = false;   // zero-variance differences
};

/// Paired two-sided Student t-test on d = a - b with Bonferroni threshold
/// 0.05 / m_comparisons.
TTestResult paired_t_test(std::span<const double> errors_a,
                          std::span<const double> errors_b, int m_comparisons);

/// Regularized incomplete beta function I_x(a, b) (continued fractions).
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

}  // namespace pdfm::bench
