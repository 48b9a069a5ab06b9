#pragma once

// Sample buffers, FIR inner products and input-energy tracking shared by all
// of the adaptive filters. Everything here is real-valued: conjugates and
// Hermitian transposes of the complex formulation reduce to plain products.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inlms {

/// Absolute regularizer added wherever an input energy ends up in a
/// denominator. Sized for unit-scale signals.
inline constexpr double kDefaultRegularizer = 1e-12;

/// Bad caller-supplied value (non-finite sample, negative power, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Vector lengths that must agree do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal quantity became non-finite. The run cannot continue.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InputError(std::string(what) + " is not finite");
  }
}

// ---------------------------------------------------------------------------
// TapVector

/// Fixed-length real FIR coefficient vector. Used for the estimated response,
/// the true echo path and the smoothed-gradient state.
class TapVector {
 public:
  explicit TapVector(std::size_t length) : coeffs_(length, 0.0) {
    if (length == 0) throw DimensionError("TapVector length must be >= 1");
  }

  explicit TapVector(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw DimensionError("TapVector length must be >= 1");
    for (double c : coeffs_) require_finite(c, "tap coefficient");
  }

  std::size_t size() const noexcept { return coeffs_.size(); }

  double operator[](std::size_t k) const noexcept { return coeffs_[k]; }
  double& operator[](std::size_t k) noexcept { return coeffs_[k]; }

  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::span<double> coeffs() noexcept { return coeffs_; }

  double norm_sq() const noexcept {
    double acc = 0.0;
    for (double c : coeffs_) acc += c * c;
    return acc;
  }

  bool all_finite() const noexcept {
    for (double c : coeffs_) {
      if (!std::isfinite(c)) return false;
    }
    return true;
  }

  friend bool operator==(const TapVector&, const TapVector&) = default;

 private:
  std::vector<double> coeffs_;
};

// ---------------------------------------------------------------------------
// DelayLine

/// Last L input samples, newest first, i.e. [x(n), x(n-1), ..., x(n-L+1)].
///
/// Storage is a double-length buffer written backwards so that the window is
/// always one contiguous span; once the write head reaches the front, the
/// newest L-1 samples are copied to the back. The energy ||x||^2 is kept as a
/// sliding sum and recomputed exactly every L pushes, or sooner when a
/// subtraction cancels most of the running sum.
class DelayLine {
 public:
  explicit DelayLine(std::size_t length)
      : length_(length), buf_(2 * length, 0.0), head_(length) {
    if (length == 0) throw DimensionError("DelayLine length must be >= 1");
  }

  void push(double s) {
    require_finite(s, "input sample");
    const double dropped = buf_[head_ + length_ - 1];
    if (head_ == 0) {
      std::memmove(buf_.data() + length_ + 1, buf_.data(),
                   (length_ - 1) * sizeof(double));
      head_ = length_ + 1;
    }
    --head_;
    buf_[head_] = s;
    ++push_count_;

    const double before = energy_;
    energy_ += s * s - dropped * dropped;
    if (++since_recompute_ >= length_ || energy_ < 1e-3 * before) {
      recompute_energy();
    }
  }

  std::span<const double> window() const noexcept {
    return {buf_.data() + head_, length_};
  }

  double energy() const noexcept { return energy_; }
  std::size_t length() const noexcept { return length_; }
  std::uint64_t push_count() const noexcept { return push_count_; }

 private:
  void recompute_energy() noexcept {
    double acc = 0.0;
    for (double v : window()) acc += v * v;
    energy_ = acc;
    since_recompute_ = 0;
  }

  std::size_t length_;
  std::vector<double> buf_;
  std::size_t head_;
  double energy_ = 0.0;
  std::uint64_t push_count_ = 0;
  std::size_t since_recompute_ = 0;
};

// ---------------------------------------------------------------------------
// Kernels

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

/// taps^T x(n)
inline double inner_product(const TapVector& taps, const DelayLine& line) {
  if (taps.size() != line.length()) {
    throw DimensionError("inner_product: taps length " +
                         std::to_string(taps.size()) + " != window length " +
                         std::to_string(line.length()));
  }
  return dot(taps.coeffs(), line.window());
}

/// y += a * x
inline void add_scaled(std::span<double> y, double a, std::span<const double> x) {
  if (x.size() != y.size()) throw DimensionError("add_scaled: length mismatch");
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

}  // namespace inlms
