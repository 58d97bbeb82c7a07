#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace angio {

/// Streaming mean and variance (Welford).
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& o);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance.
    double variance() const;
    double sd() const;
    /// Standard error of the mean.
    double se() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Sample covariance of paired data (unbiased).
double sample_covariance(std::span<const double> a, std::span<const double> b);

struct GofResult {
    double statistic = 0.0;
    double critical = 0.0;
    int dof = 0;
    bool pass = false;
};

/// Pearson chi-square of observed counts against expected probabilities. Cells
/// are merged left to right until each expected count is at least 5 (tail
/// cells fold into their neighbour). Probabilities need not sum to one; the
/// remainder is added as a final cell.
GofResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probs,
                         double level = 0.01);

/// Counts against Poisson(mean).
GofResult chi_square_poisson(std::span<const std::size_t> counts, double mean, double level = 0.01);

/// One-sample Kolmogorov-Smirnov statistic against U(0, 1), with the
/// asymptotic critical value at the given level (0.01 or 0.05).
struct KsResult {
    double statistic = 0.0;
    double critical = 0.0;
    bool pass = false;
};
KsResult ks_uniform(std::vector<double> samples, double level = 0.01);

/// Upper quantile of the chi-square law with `dof` degrees of freedom.
double chi_square_critical(int dof, double level);

/// Ordinary least squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace angio
