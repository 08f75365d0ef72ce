#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace treecascade::stats {

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stddev() const { return std::sqrt(variance()); }
  double standard_error() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

RunningStats summarize(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope·x. Needs at least 2 points
/// with distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> xs);

/// Kolmogorov distribution tail Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²).
double kolmogorov_tail(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov–Smirnov test, asymptotic p-value with the Stephens
/// small-sample correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Smallest KS statistic rejected at level alpha for samples of size n, m.
double ks_critical_value(std::size_t n, std::size_t m, double alpha);

}  // namespace treecascade::stats
