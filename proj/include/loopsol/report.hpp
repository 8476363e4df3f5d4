#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace loopsol {

// Outcome of checking one identity at a set of sample points.
// pass is derived, never set by hand: max_abs <= tolerance.
struct ResidualReport {
  std::string identity_name;
  long samples = 0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::optional<std::complex<double>> fitted_constant;
};

inline ResidualReport make_report(
    std::string name, const std::vector<double>& absvals, double tolerance,
    std::optional<std::complex<double>> fitted = std::nullopt) {
  ResidualReport r;
  r.identity_name = std::move(name);
  r.samples = static_cast<long>(absvals.size());
  for (double v : absvals) {
    if (v > r.max_abs) r.max_abs = v;
    r.mean_abs += v;
  }
  if (!absvals.empty()) r.mean_abs /= static_cast<double>(absvals.size());
  r.tolerance = tolerance;
  r.pass = r.max_abs <= tolerance;
  r.fitted_constant = fitted;
  return r;
}

}  // namespace loopsol
