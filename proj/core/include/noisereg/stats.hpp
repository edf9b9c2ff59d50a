#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace noisereg {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Two-sided 95% Student-t quantile for the given degrees of freedom.
double student_t95(std::size_t dof);

double mean(std::span<const double> v);

/// Standard error of the mean (sample standard deviation / sqrt(n)).
double standard_error(std::span<const double> v);

struct PairedMoments {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double stderr_difference = 0.0;
};

/// Means of a and b plus the standard error of mean(a - b) over paired samples.
PairedMoments paired_moments(std::span<const double> a, std::span<const double> b);

}  // namespace noisereg
