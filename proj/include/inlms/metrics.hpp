#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include "inlms/dsp_core.hpp"

namespace inlms {

inline constexpr double kMisalignmentFloorDb = -200.0;

/// Normalised misalignment 10 log10(||h_hat - h||^2 / ||h||^2), floored at
/// -200 dB (an exact match would be -inf).
inline double misalignment_db(std::span<const double> h_hat, std::span<const double> h) {
  if (h_hat.size() != h.size()) throw DimensionError("misalignment: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double diff = h_hat[k] - h[k];
    num += diff * diff;
    den += h[k] * h[k];
  }
  if (!(den > 0.0)) throw std::domain_error("misalignment: reference has zero norm");
  if (num == 0.0) return kMisalignmentFloorDb;
  return std::max(10.0 * std::log10(num / den), kMisalignmentFloorDb);
}

inline double misalignment_db(const TapVector& h_hat, const TapVector& h) {
  return misalignment_db(h_hat.coeffs(), h.coeffs());
}

/// One decimated trace point.
struct TraceRecord {
  std::uint64_t sample = 0;  // samples consumed so far
  double time_s = 0.0;
  double misalignment_db = 0.0;
  double mu = 0.0;
  double control = 0.0;
  double sigma_e_sq = 0.0;
};

struct TraceSummary {
  double final_db = 0.0;
  double min_db = 0.0;
  std::optional<double> convergence_time_s;  // first record at or below threshold
  double max_regression_db = 0.0;            // worst rise above the running minimum
  bool diverged = false;
};

inline constexpr double kDivergenceRiseDb = 10.0;

/// Regression is only tracked after the trace first reaches the convergence
/// threshold; a trace that never gets there reports zero regression.
inline TraceSummary trace_summary(std::span<const TraceRecord> trace,
                                  double convergence_threshold_db,
                                  double divergence_rise_db = kDivergenceRiseDb) {
  if (trace.empty()) throw InputError("trace_summary: empty trace");
  TraceSummary s;
  s.final_db = trace.back().misalignment_db;
  s.min_db = std::numeric_limits<double>::infinity();
  double running_min = std::numeric_limits<double>::infinity();
  for (const auto& r : trace) {
    s.min_db = std::min(s.min_db, r.misalignment_db);
    if (!s.convergence_time_s && r.misalignment_db <= convergence_threshold_db) {
      s.convergence_time_s = r.time_s;
    }
    if (s.convergence_time_s) {
      running_min = std::min(running_min, r.misalignment_db);
      s.max_regression_db = std::max(s.max_regression_db, r.misalignment_db - running_min);
    }
  }
  s.diverged = s.max_regression_db >= divergence_rise_db;
  return s;
}

/// Records whose sample index falls in [first, last).
inline std::span<const TraceRecord> trace_window(std::span<const TraceRecord> trace,
                                                 std::uint64_t first, std::uint64_t last) {
  auto lo = std::find_if(trace.begin(), trace.end(),
                         [&](const TraceRecord& r) { return r.sample >= first; });
  auto hi = std::find_if(lo, trace.end(), [&](const TraceRecord& r) { return r.sample >= last; });
  return {lo, hi};
}

}  // namespace inlms
