#include "noisereg/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "noisereg/error.hpp"

namespace noisereg {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InsufficientDataError("fit_line needs at least two paired points");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InsufficientDataError("fit_line: abscissae are all equal");
  LinearFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return fit;
}

double student_t95(std::size_t dof) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                     2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                     2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
  if (dof == 0) return std::numeric_limits<double>::infinity();
  if (dof <= 20) return table[dof - 1];
  return 1.96 + 2.4 / static_cast<double>(dof);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const auto n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

PairedMoments paired_moments(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ParameterError("paired_moments: size mismatch");
  PairedMoments out;
  out.mean_a = mean(a);
  out.mean_b = mean(b);
  if (a.size() < 2) return out;
  const double md = out.mean_a - out.mean_b;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - md;
    ss += d * d;
  }
  const auto n = static_cast<double>(a.size());
  out.stderr_difference = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

}  // namespace noisereg
