#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mkv {

// Pairwise (cascade) summation; the order depends only on the length, so
// results are reproducible regardless of how the values were produced.
double pairwise_sum(std::span<const double> x);
double pairwise_mean(std::span<const double> x);

struct MeanStderr {
    double mean = 0.0;
    double se = 0.0;
};

// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
MeanStderr mean_and_stderr(std::span<const double> x);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Slope of log|y| against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mkv
