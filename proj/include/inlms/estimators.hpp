#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <string>

#include "inlms/dsp_core.hpp"

namespace inlms {

/// One-pole power estimator with time constant N samples:
///   value(n) = (1 - 1/N) value(n-1) + (1/N) power(n)
/// Starts at zero. With N = 1 it tracks the latest input exactly.
class RecursiveVariance {
 public:
  explicit RecursiveVariance(unsigned time_constant) : n_(time_constant) {
    if (time_constant == 0) throw InputError("time constant must be >= 1");
  }

  void update(double power) {
    if (!std::isfinite(power) || power < 0.0) {
      throw InputError("power must be finite and >= 0, got " + std::to_string(power));
    }
    const double w = 1.0 / static_cast<double>(n_);
    value_ = (1.0 - w) * value_ + w * power;
  }

  double value() const noexcept { return value_; }
  unsigned time_constant() const noexcept { return n_; }

  /// For restoring a saved state; negative values are rejected.
  void reset(double value = 0.0) {
    if (!(value >= 0.0)) throw InputError("estimator value must be >= 0");
    value_ = value;
  }

 private:
  unsigned n_;
  double value_ = 0.0;
};

struct VarianceBounds {
  double echo;   // conservative (smallest) echo-estimate power
  double error;  // conservative (largest) error power
};

/// Picks the smallest echo-power estimate and the largest error-power
/// estimate, so that the derived learning rate errs low.
inline VarianceBounds variance_bounds(std::span<const double> echo_estimates,
                                      std::span<const double> error_estimates) {
  if (echo_estimates.empty() || error_estimates.empty()) {
    throw DimensionError("variance_bounds: empty estimate set");
  }
  return {*std::min_element(echo_estimates.begin(), echo_estimates.end()),
          *std::max_element(error_estimates.begin(), error_estimates.end())};
}

/// The estimator bank used by INLMS: E_3, E_10 of |yhat|^2 and E_1, E_3, E_10
/// of |e|^2.
class PowerEstimatorBank {
 public:
  void update(double echo_estimate, double error) {
    const double py = echo_estimate * echo_estimate;
    const double pe = error * error;
    for (auto& est : echo_) est.update(py);
    for (auto& est : error_) est.update(pe);
  }

  /// The error bound is floored at `error_floor` so it can divide safely.
  VarianceBounds bounds(double error_floor) const {
    const std::array<double, 2> ey{echo_[0].value(), echo_[1].value()};
    const std::array<double, 3> ee{error_[0].value(), error_[1].value(),
                                   error_[2].value()};
    auto b = variance_bounds(ey, ee);
    b.error = std::max(b.error, error_floor);
    return b;
  }

  const std::array<RecursiveVariance, 2>& echo() const noexcept { return echo_; }
  const std::array<RecursiveVariance, 3>& error() const noexcept { return error_; }

 private:
  std::array<RecursiveVariance, 2> echo_{RecursiveVariance{3}, RecursiveVariance{10}};
  std::array<RecursiveVariance, 3> error_{RecursiveVariance{1}, RecursiveVariance{3},
                                          RecursiveVariance{10}};
};

}  // namespace inlms
