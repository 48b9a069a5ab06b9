#pragma once

// Per-sample adaptive FIR algorithms sharing one stepping contract: the caller
// pushes x(n) into a DelayLine, then calls step(line, d(n)). The filter
// computes e(n) = d(n) - taps^T x(n), updates its taps and control state, and
// returns the diagnostics for that sample.
//
//   NlmsFilter    fixed learning rate
//   DirectFilter  learning rate adapted directly (exponential update)
//   GngdFilter    GNGD regularizer eps adapted (exponential update)
//   InlmsFilter   interference-normalised rate, misalignment proxy eta adapted

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "inlms/dsp_core.hpp"
#include "inlms/estimators.hpp"

namespace inlms {

struct StepDiagnostics {
  double error = 0.0;          // e(n)
  double echo_estimate = 0.0;  // yhat(n)
  double mu_effective = 0.0;   // rate actually applied to the taps
  double control = 0.0;        // eta, mu or eps after this step's update
  double sigma_yhat_sq = 0.0;
  double sigma_e_sq = 0.0;
};

template <class F>
concept AdaptiveFilter = requires(F f, const F cf, const DelayLine& line, double d) {
  { f.step(line, d) } -> std::same_as<StepDiagnostics>;
  { cf.taps() } -> std::convertible_to<const TapVector&>;
};

namespace detail {

inline void check_length(const TapVector& taps, const DelayLine& line) {
  if (taps.size() != line.length()) {
    throw DimensionError("filter length " + std::to_string(taps.size()) +
                         " != window length " + std::to_string(line.length()));
  }
}

inline void check_numeric(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericFault(std::string(what) + " became non-finite");
}

inline void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InputError(std::string(what) + " must be finite and > 0");
  }
}

}  // namespace detail

/// Exponential updates multiply the control parameter by exp(g); g is clamped
/// to +-limit per sample.
inline double clamp_exponent(double g, double limit) {
  return std::clamp(g, -limit, limit);
}

// ---------------------------------------------------------------------------
// NLMS

struct NlmsParams {
  double mu = 0.25;
  double regularizer = kDefaultRegularizer;
};

class NlmsFilter {
 public:
  explicit NlmsFilter(std::size_t length, NlmsParams params = {})
      : NlmsFilter(TapVector(length), params) {}

  explicit NlmsFilter(TapVector initial, NlmsParams params = {})
      : params_(params), taps_(std::move(initial)) {
    if (!(params_.mu >= 0.0 && params_.mu <= 1.0)) {
      throw InputError("NLMS mu must lie in [0, 1]");
    }
    detail::check_positive(params_.regularizer, "regularizer");
  }

  StepDiagnostics step(const DelayLine& line, double d) {
    require_finite(d, "observed sample");
    detail::check_length(taps_, line);

    const auto x = line.window();
    const double yhat = dot(taps_.coeffs(), x);
    const double e = d - yhat;
    detail::check_numeric(e, "NLMS error");
    error_power_.update(e * e);

    add_scaled(taps_.coeffs(), params_.mu * e / (line.energy() + params_.regularizer), x);

    return {e, yhat, params_.mu, params_.mu, 0.0,
            std::max(error_power_.value(), params_.regularizer)};
  }

  const TapVector& taps() const noexcept { return taps_; }
  const NlmsParams& params() const noexcept { return params_; }

 private:
  NlmsParams params_;
  TapVector taps_;
  RecursiveVariance error_power_{3};  // diagnostics only
};

// ---------------------------------------------------------------------------
// Building blocks of the INLMS recursion

/// mu = min(eta * sigma_yhat^2 / sigma_e^2, 1)
inline double inlms_learning_rate(double eta, double sigma_yhat_sq, double sigma_e_sq) {
  if (!(eta >= 0.0) || !(sigma_yhat_sq >= 0.0)) {
    throw InputError("learning rate inputs must be >= 0");
  }
  if (!(sigma_e_sq > 0.0)) throw InputError("sigma_e^2 must be > 0");
  return std::min(eta * sigma_yhat_sq / sigma_e_sq, 1.0);
}

/// psi <- psi - mu/(||x||^2+delta) x (x^T psi) + e x
///
/// `x_dot_psi` is x^T psi computed on the incoming psi; callers that already
/// have it pass it in to avoid a second pass.
inline void psi_update(TapVector& psi, double mu, const DelayLine& line, double e,
                       double x_dot_psi, double regularizer = kDefaultRegularizer) {
  detail::check_length(psi, line);
  const double scale = e - mu / (line.energy() + regularizer) * x_dot_psi;
  add_scaled(psi.coeffs(), scale, line.window());
}

inline void psi_update(TapVector& psi, double mu, const DelayLine& line, double e,
                       double regularizer = kDefaultRegularizer) {
  detail::check_length(psi, line);
  psi_update(psi, mu, line, e, dot(line.window(), psi.coeffs()), regularizer);
}

struct EtaLimits {
  double min = 1e-6;
  double max = 10.0;
  double exponent = 0.5;
};

/// eta <- eta * exp(rho * s_y * (e x^T psi) / (s_e * (||x||^2+delta) * s_e)),
/// with the exponent and the result clamped by `limits`. `correlation` is
/// e(n) x^T(n) psi(n-1). eta grows while the error keeps correlating with the
/// smoothed gradient.
inline double eta_update(double eta, double rho, double correlation, double energy,
                         double sigma_yhat_sq, double sigma_e_sq,
                         const EtaLimits& limits = {},
                         double regularizer = kDefaultRegularizer) {
  if (!(sigma_e_sq > 0.0)) throw InputError("sigma_e^2 must be > 0");
  if (!(eta > 0.0)) throw InputError("eta must be > 0");
  const double g = rho * sigma_yhat_sq * correlation /
                   (sigma_e_sq * (energy + regularizer) * sigma_e_sq);
  return std::clamp(eta * std::exp(clamp_exponent(g, limits.exponent)), limits.min,
                    limits.max);
}

inline double eta_update(double eta, double rho, double e, const DelayLine& line,
                         const TapVector& psi, double sigma_yhat_sq, double sigma_e_sq,
                         const EtaLimits& limits = {},
                         double regularizer = kDefaultRegularizer) {
  detail::check_length(psi, line);
  return eta_update(eta, rho, e * dot(line.window(), psi.coeffs()), line.energy(),
                    sigma_yhat_sq, sigma_e_sq, limits, regularizer);
}

/// Fixed-rate startup. While active, returns `mu_boot` until the computed rate
/// first exceeds `exit_threshold`; from then on it passes rates through and
/// never re-arms.
class BootstrapGate {
 public:
  BootstrapGate(bool active = true, double mu_boot = 0.25, double exit_threshold = 0.1)
      : active_(active), mu_boot_(mu_boot), exit_threshold_(exit_threshold) {}

  double apply(double mu_computed) noexcept {
    if (!active_) return mu_computed;
    if (mu_computed > exit_threshold_) {
      active_ = false;
      return mu_computed;
    }
    return mu_boot_;
  }

  bool active() const noexcept { return active_; }
  double mu_boot() const noexcept { return mu_boot_; }
  double exit_threshold() const noexcept { return exit_threshold_; }

 private:
  bool active_;
  double mu_boot_;
  double exit_threshold_;
};

// ---------------------------------------------------------------------------
// INLMS

/// How eta reacts while the computed rate is clamped at 1. Raising eta there
/// has no effect on mu, so its derivative is zero from above.
///   follow        apply the unclamped gradient regardless
///   freeze        hold eta
///   descend_only  apply only updates that lower eta
enum class EtaSaturation { follow, freeze, descend_only };

struct InlmsParams {
  double rho = 0.005;
  double eta0 = 1.0;  // with zero taps the true normalised misalignment is 1
  EtaLimits eta_limits{};
  bool bootstrap = true;
  double mu_boot = 0.25;
  double mu_exit_threshold = 0.1;
  EtaSaturation eta_saturation = EtaSaturation::descend_only;
  double regularizer = kDefaultRegularizer;
};

class InlmsFilter {
 public:
  explicit InlmsFilter(std::size_t length, InlmsParams params = {})
      : InlmsFilter(TapVector(length), params) {}

  explicit InlmsFilter(TapVector initial, InlmsParams params = {})
      : params_(params),
        taps_(std::move(initial)),
        psi_(taps_.size()),
        eta_(params.eta0),
        gate_(params.bootstrap, params.mu_boot, params.mu_exit_threshold) {
    detail::check_positive(params_.rho, "rho");
    detail::check_positive(params_.regularizer, "regularizer");
    const auto& lim = params_.eta_limits;
    if (!(lim.min > 0.0 && lim.min <= lim.max && lim.exponent >= 0.0)) {
      throw InputError("invalid eta limits");
    }
    if (!(params_.eta0 >= lim.min && params_.eta0 <= lim.max)) {
      throw InputError("eta0 outside eta limits");
    }
    if (!(params_.mu_boot >= 0.0 && params_.mu_boot <= 1.0)) {
      throw InputError("bootstrap mu must lie in [0, 1]");
    }
  }

  StepDiagnostics step(const DelayLine& line, double d) {
    require_finite(d, "observed sample");
    detail::check_length(taps_, line);
    const auto x = line.window();

    const double yhat = dot(taps_.coeffs(), x);
    const double e = d - yhat;
    detail::check_numeric(e, "INLMS error");

    estimators_.update(yhat, e);
    const auto sigma = estimators_.bounds(params_.regularizer);

    const double mu_computed = inlms_learning_rate(eta_, sigma.echo, sigma.error);
    const double mu = gate_.apply(mu_computed);
    const double denom = line.energy() + params_.regularizer;
    const double x_dot_psi = dot(x, psi_.coeffs());  // uses psi(n-1)
    detail::check_numeric(x_dot_psi, "INLMS gradient state");

    add_scaled(taps_.coeffs(), mu * e / denom, x);
    const double eta_next = eta_update(eta_, params_.rho, e * x_dot_psi, line.energy(),
                                       sigma.echo, sigma.error, params_.eta_limits,
                                       params_.regularizer);
    if (mu_computed < 1.0 || params_.eta_saturation == EtaSaturation::follow ||
        (params_.eta_saturation == EtaSaturation::descend_only && eta_next < eta_)) {
      eta_ = eta_next;
    }
    psi_update(psi_, mu, line, e, x_dot_psi, params_.regularizer);

    return {e, yhat, mu, eta_, sigma.echo, sigma.error};
  }

  const TapVector& taps() const noexcept { return taps_; }
  const TapVector& psi() const noexcept { return psi_; }
  double eta() const noexcept { return eta_; }
  bool bootstrapping() const noexcept { return gate_.active(); }
  const InlmsParams& params() const noexcept { return params_; }
  const PowerEstimatorBank& estimators() const noexcept { return estimators_; }

 private:
  InlmsParams params_;
  TapVector taps_;
  TapVector psi_;
  double eta_;
  BootstrapGate gate_;
  PowerEstimatorBank estimators_;
};

// ---------------------------------------------------------------------------
// Direct: the learning rate itself is the control parameter.

struct DirectParams {
  double rho = 0.0005;
  double mu0 = 0.25;
  double mu_min = 1e-5;
  double mu_max = 1.0;
  double exponent_limit = 0.5;
  double regularizer = kDefaultRegularizer;
};

class DirectFilter {
 public:
  explicit DirectFilter(std::size_t length, DirectParams params = {})
      : DirectFilter(TapVector(length), params) {}

  explicit DirectFilter(TapVector initial, DirectParams params = {})
      : params_(params), taps_(std::move(initial)), psi_(taps_.size()), mu_(params.mu0) {
    detail::check_positive(params_.rho, "rho");
    detail::check_positive(params_.regularizer, "regularizer");
    if (!(params_.mu_min > 0.0 && params_.mu_min <= params_.mu_max &&
          params_.mu_max <= 1.0)) {
      throw InputError("invalid Direct mu limits");
    }
    if (!(mu_ >= params_.mu_min && mu_ <= params_.mu_max)) {
      throw InputError("Direct mu0 outside its limits");
    }
  }

  StepDiagnostics step(const DelayLine& line, double d) {
    require_finite(d, "observed sample");
    detail::check_length(taps_, line);
    const auto x = line.window();

    const double yhat = dot(taps_.coeffs(), x);
    const double e = d - yhat;
    detail::check_numeric(e, "Direct error");
    error_power_.update(e * e);
    const double sigma_e_sq = std::max(error_power_.value(), params_.regularizer);

    const double denom = line.energy() + params_.regularizer;
    const double x_dot_psi = dot(x, psi_.coeffs());
    detail::check_numeric(x_dot_psi, "Direct gradient state");

    const double mu = mu_;
    add_scaled(taps_.coeffs(), mu * e / denom, x);
    const double g = params_.rho * e * x_dot_psi / (denom * sigma_e_sq);
    mu_ = std::clamp(mu * std::exp(clamp_exponent(g, params_.exponent_limit)),
                     params_.mu_min, params_.mu_max);
    psi_update(psi_, mu, line, e, x_dot_psi, params_.regularizer);

    return {e, yhat, mu, mu_, 0.0, sigma_e_sq};
  }

  const TapVector& taps() const noexcept { return taps_; }
  const TapVector& psi() const noexcept { return psi_; }
  double mu() const noexcept { return mu_; }
  const DirectParams& params() const noexcept { return params_; }

 private:
  DirectParams params_;
  TapVector taps_;
  TapVector psi_;
  double mu_;
  RecursiveVariance error_power_{3};
};

// ---------------------------------------------------------------------------
// GNGD: regularized normalised step mu0 / (||x||^2 + eps), eps adapted.

struct GngdParams {
  double rho = 0.005;
  double mu0 = 1.0;
  double eps0 = 1.0;
  double eps_min = 1e-6;
  double eps_max = 1e6;
  double exponent_limit = 0.5;
  bool adapt = true;  // false freezes eps at eps0
  double regularizer = kDefaultRegularizer;
};

class GngdFilter {
 public:
  explicit GngdFilter(std::size_t length, GngdParams params = {})
      : GngdFilter(TapVector(length), params) {}

  explicit GngdFilter(TapVector initial, GngdParams params = {})
      : params_(params),
        taps_(std::move(initial)),
        eps_(params.eps0),
        prev_x_(taps_.size(), 0.0) {
    detail::check_positive(params_.rho, "rho");
    detail::check_positive(params_.regularizer, "regularizer");
    if (!(params_.mu0 > 0.0 && params_.mu0 <= 2.0)) {
      throw InputError("GNGD mu0 must lie in (0, 2]");
    }
    if (!(params_.eps_min > 0.0 && params_.eps_min <= params_.eps_max)) {
      throw InputError("invalid GNGD eps limits");
    }
    if (!(eps_ >= params_.eps_min && eps_ <= params_.eps_max)) {
      throw InputError("GNGD eps0 outside its limits");
    }
  }

  StepDiagnostics step(const DelayLine& line, double d) {
    require_finite(d, "observed sample");
    detail::check_length(taps_, line);
    const auto x = line.window();

    const double yhat = dot(taps_.coeffs(), x);
    const double e = d - yhat;
    detail::check_numeric(e, "GNGD error");
    error_power_.update(e * e);
    const double sigma_e_sq = std::max(error_power_.value(), params_.regularizer);

    const double energy = line.energy();
    const double denom = energy + eps_ + params_.regularizer;
    add_scaled(taps_.coeffs(), params_.mu0 * e / denom, x);
    const double mu_eff = params_.mu0 * energy / denom;

    if (params_.adapt && have_prev_) {
      // Prior-sample correlation e(n) e(n-1) x^T(n) x(n-1) over den(n-1)^2,
      // normalised by the error power; a positive value lowers eps.
      const double corr = e * prev_e_ * dot(x, prev_x_);
      const double g = -params_.rho * corr / (prev_denom_ * prev_denom_ * sigma_e_sq);
      detail::check_numeric(g, "GNGD gradient");
      eps_ = std::clamp(eps_ * std::exp(clamp_exponent(g, params_.exponent_limit)),
                        params_.eps_min, params_.eps_max);
    }
    std::copy(x.begin(), x.end(), prev_x_.begin());
    prev_e_ = e;
    prev_denom_ = denom;
    have_prev_ = true;

    return {e, yhat, mu_eff, eps_, 0.0, sigma_e_sq};
  }

  const TapVector& taps() const noexcept { return taps_; }
  double epsilon() const noexcept { return eps_; }
  const GngdParams& params() const noexcept { return params_; }

 private:
  GngdParams params_;
  TapVector taps_;
  double eps_;
  std::vector<double> prev_x_;
  double prev_e_ = 0.0;
  double prev_denom_ = 1.0;
  bool have_prev_ = false;
  RecursiveVariance error_power_{3};
};

static_assert(AdaptiveFilter<NlmsFilter>);
static_assert(AdaptiveFilter<InlmsFilter>);
static_assert(AdaptiveFilter<DirectFilter>);
static_assert(AdaptiveFilter<GngdFilter>);

}  // namespace inlms
