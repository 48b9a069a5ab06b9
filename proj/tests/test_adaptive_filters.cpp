#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "inlms/adaptive_filters.hpp"
#include "oracles.hpp"

using namespace inlms;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Signals {
  oracle::Vec x, d, h;
};

// White input through a random path, plus interference whose level jumps
// every 700 samples.
Signals make_signals(std::uint64_t seed, std::size_t L, std::size_t n, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  Signals s;
  s.h = oracle::random_vec(rng, L, 0.5);
  s.x = oracle::random_vec(rng, n);
  auto v = oracle::random_vec(rng, n, noise);
  for (std::size_t i = 0; i < n; ++i) {
    if ((i / 700) % 3 == 2) v[i] *= 20.0;
  }
  s.d = oracle::convolve(s.h, s.x, v);
  return s;
}

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

// ---------------------------------------------------------------------------
// NLMS

TEST_CASE("NLMS identifies a single tap in one step", "[nlms]") {
  NlmsFilter f(1, {.mu = 1.0});
  DelayLine line(1);
  line.push(2.0);
  const auto diag = f.step(line, 3.0 * 2.0);
  CHECK(diag.error == 6.0);
  CHECK_THAT(f.taps()[0], WithinAbs(3.0, 1e-12));
}

TEST_CASE("NLMS leaves taps alone on an all-zero window", "[nlms]") {
  NlmsFilter f(TapVector(std::vector<double>{0.5, -0.5, 1.0}), {.mu = 1.0});
  DelayLine line(3);
  const auto diag = f.step(line, 4.0);
  CHECK(diag.error == 4.0);
  CHECK(f.taps()[0] == 0.5);
  CHECK(f.taps()[1] == -0.5);
  CHECK(f.taps()[2] == 1.0);
}

TEST_CASE("NLMS matches the reference over 1000 steps", "[nlms]") {
  const std::size_t L = 12;
  const auto s = make_signals(5, L, 1000);
  for (double mu : {0.25, 1.0}) {
    NlmsFilter f(L, {.mu = mu});
    oracle::Nlms ref{oracle::Vec(L, 0.0), mu};
    DelayLine line(L);
    for (std::size_t n = 0; n < s.x.size(); ++n) {
      line.push(s.x[n]);
      const auto diag = f.step(line, s.d[n]);
      const double e = ref.step(oracle::window(s.x, n, L), s.d[n]);
      REQUIRE_THAT(diag.error, WithinAbs(e, 1e-10 * std::max(1.0, std::abs(e))));
      REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-10);
    }
  }
}

TEST_CASE("NLMS parameter validation", "[nlms]") {
  CHECK_THROWS_AS(NlmsFilter(4, {.mu = 1.5}), InputError);
  CHECK_THROWS_AS(NlmsFilter(4, {.mu = -0.1}), InputError);
  CHECK_THROWS_AS(NlmsFilter(4, {.mu = 0.5, .regularizer = 0.0}), InputError);
  NlmsFilter f(4);
  DelayLine shorter(3);
  CHECK_THROWS_AS(f.step(shorter, 0.0), DimensionError);
  DelayLine ok(4);
  CHECK_THROWS_AS(f.step(ok, std::nan("")), InputError);
}

// ---------------------------------------------------------------------------
// INLMS building blocks

TEST_CASE("Learning rate examples", "[inlms]") {
  CHECK_THAT(inlms_learning_rate(0.1, 1.0, 2.0), WithinRel(0.05, 1e-15));
  CHECK(inlms_learning_rate(2.0, 3.0, 1.0) == 1.0);
  CHECK(inlms_learning_rate(5.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(inlms_learning_rate(1.0, 1.0, 0.0), InputError);
  CHECK_THROWS_AS(inlms_learning_rate(-1.0, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(inlms_learning_rate(1.0, -1.0, 1.0), InputError);
}

TEST_CASE("psi update examples", "[inlms]") {
  SECTION("zero psi picks up e x") {
    DelayLine line(3);
    for (double v : {1.0, -2.0, 0.5}) line.push(v);
    TapVector psi(3);
    psi_update(psi, 0.7, line, 2.0);
    const auto w = line.window();
    for (std::size_t k = 0; k < 3; ++k) CHECK(psi[k] == 2.0 * w[k]);
  }
  SECTION("L=1 with mu=1 annihilates the old state") {
    DelayLine line(1);
    line.push(3.0);
    TapVector psi(std::vector<double>{5.0});
    psi_update(psi, 1.0, line, 0.0);
    CHECK_THAT(psi[0], WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("psi recursion matches the explicit matrix form", "[inlms]") {
  const std::size_t L = 8;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mu_dist(0.0, 1.0);
  const auto x = oracle::random_vec(rng, 10000);
  DelayLine line(L);
  TapVector psi(L);
  oracle::Vec ref(L, 0.0);
  std::normal_distribution<double> e_dist(0.0, 1.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    line.push(x[n]);
    const double mu = mu_dist(rng), e = e_dist(rng);
    psi_update(psi, mu, line, e);
    ref = oracle::psi_matrix_form(ref, mu, oracle::window(x, n, L), e, kDefaultRegularizer);
    REQUIRE(rel_diff(psi.coeffs(), ref) <= 1e-12);
  }
}

TEST_CASE("eta update examples", "[inlms]") {
  CHECK(eta_update(0.3, 0.005, 0.0, 4.0, 1.0, 1.0) == 0.3);
  CHECK(eta_update(1.0, 0.005, 1.0, 1.0, 1.0, 1.0) > 1.0);
  CHECK(eta_update(1.0, 0.005, -1.0, 1.0, 1.0, 1.0) < 1.0);

  // rho=0.5, s_y=1, corr=0.01, s_e=2, energy=0.5: g = 0.005 / (2 * 0.5 * 2) = 0.0025
  const double expected = 0.01 * std::exp(0.0025);
  CHECK_THAT(eta_update(0.01, 0.5, 0.01, 0.5, 1.0, 2.0, {}, 1e-300),
             WithinRel(expected, 1e-14));
}

TEST_CASE("eta update clamps exponent and range", "[inlms]") {
  const EtaLimits lim{1e-6, 10.0, 0.5};
  CHECK_THAT(eta_update(1.0, 1.0, 1e9, 1.0, 1.0, 1.0, lim), WithinRel(std::exp(0.5), 1e-15));
  CHECK_THAT(eta_update(1.0, 1.0, -1e9, 1.0, 1.0, 1.0, lim), WithinRel(std::exp(-0.5), 1e-15));
  CHECK(eta_update(9.9, 1.0, 1e9, 1.0, 1.0, 1.0, lim) == 10.0);
  CHECK(eta_update(1.1e-6, 1.0, -1e9, 1.0, 1.0, 1.0, lim) == 1e-6);
  CHECK_THROWS_AS(eta_update(1.0, 1.0, 1.0, 1.0, 1.0, 0.0), InputError);
}

TEST_CASE("Bootstrap gate", "[inlms]") {
  BootstrapGate gate;
  CHECK(gate.apply(0.0) == 0.25);
  CHECK(gate.apply(0.1) == 0.25);
  CHECK(gate.active());
  CHECK(gate.apply(0.11) == 0.11);
  CHECK_FALSE(gate.active());
  CHECK(gate.apply(0.01) == 0.01);
  CHECK_FALSE(gate.active());

  BootstrapGate off(false);
  CHECK(off.apply(0.0) == 0.0);
}

// ---------------------------------------------------------------------------
// INLMS

TEST_CASE("INLMS starts on the bootstrap rate", "[inlms]") {
  InlmsFilter f(4);
  DelayLine line(4);
  line.push(1.0);
  const auto diag = f.step(line, 0.5);
  CHECK(diag.mu_effective == 0.25);
  CHECK(diag.sigma_yhat_sq == 0.0);
  CHECK(f.bootstrapping());
}

TEST_CASE("INLMS matches the line-by-line reference", "[inlms]") {
  // Once converged, eta amplifies last-bit differences, so whole trajectories
  // are compared only over the early steps.
  const std::size_t L = 16;
  const auto s = make_signals(23, L, 400);
  for (auto policy : {EtaSaturation::follow, EtaSaturation::descend_only}) {
    InlmsFilter f(L, {.eta_saturation = policy});
    oracle::Inlms ref(L);
    ref.descend_only = policy == EtaSaturation::descend_only;
    DelayLine line(L);
    for (std::size_t n = 0; n < s.x.size(); ++n) {
      line.push(s.x[n]);
      const auto diag = f.step(line, s.d[n]);
      const double e = ref.step(oracle::window(s.x, n, L), s.d[n]);
      REQUIRE_THAT(diag.error, WithinAbs(e, 1e-10 * std::max(1.0, std::abs(e))));
      REQUIRE_THAT(diag.mu_effective, WithinAbs(ref.last_mu, 1e-10));
      REQUIRE_THAT(f.eta(), WithinRel(ref.eta, 1e-10));
      REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-10);
      REQUIRE(rel_diff(f.psi().coeffs(), ref.psi) <= 1e-10);
    }
  }
}

TEST_CASE("INLMS steps match the reference from a shared state", "[inlms]") {
  const std::size_t L = 16;
  const auto s = make_signals(29, L, 10000);
  for (auto policy : {EtaSaturation::follow, EtaSaturation::descend_only}) {
    InlmsFilter f(L, {.eta_saturation = policy});
    DelayLine line(L);
    for (std::size_t n = 0; n < s.x.size(); ++n) {
      line.push(s.x[n]);
      oracle::Inlms ref(L);
      ref.descend_only = policy == EtaSaturation::descend_only;
      ref.h.assign(f.taps().coeffs().begin(), f.taps().coeffs().end());
      ref.psi.assign(f.psi().coeffs().begin(), f.psi().coeffs().end());
      ref.eta = f.eta();
      ref.bootstrapping = f.bootstrapping();
      const auto& est = f.estimators();
      ref.ey3 = est.echo()[0].value();
      ref.ey10 = est.echo()[1].value();
      ref.ee3 = est.error()[1].value();
      ref.ee10 = est.error()[2].value();

      const auto diag = f.step(line, s.d[n]);
      const double e = ref.step(oracle::window(s.x, n, L), s.d[n]);
      REQUIRE_THAT(diag.error, WithinAbs(e, 1e-10 * std::max(1.0, std::abs(e))));
      REQUIRE_THAT(diag.mu_effective, WithinAbs(ref.last_mu, 1e-10));
      REQUIRE_THAT(f.eta(), WithinRel(ref.eta, 1e-10));
      REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-10);
      REQUIRE(rel_diff(f.psi().coeffs(), ref.psi) <= 1e-10);
    }
  }
}

TEST_CASE("INLMS rate stays in [0,1] and the gate never re-arms", "[inlms]") {
  const std::size_t L = 16;
  const auto s = make_signals(31, L, 20000, 0.3);
  InlmsFilter f(L);
  DelayLine line(L);
  bool armed = true;
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const auto diag = f.step(line, s.d[n]);
    REQUIRE(diag.mu_effective >= 0.0);
    REQUIRE(diag.mu_effective <= 1.0);
    if (armed && f.bootstrapping()) {
      REQUIRE(diag.mu_effective == 0.25);
    } else if (armed) {
      REQUIRE(diag.mu_effective > 0.1);
      armed = false;
    } else {
      REQUIRE_FALSE(f.bootstrapping());
    }
  }
  CHECK_FALSE(armed);
}

TEST_CASE("INLMS with eta pinned high reduces to NLMS(mu=1)", "[inlms]") {
  const std::size_t L = 16;
  const auto s = make_signals(47, L, 10000);
  std::mt19937_64 rng(3);
  const TapVector start(oracle::random_vec(rng, L, 0.3));
  InlmsParams p;
  p.eta0 = 1e9;
  p.eta_limits = {1e9, 1e9, 0.5};
  p.bootstrap = false;
  InlmsFilter inlms(start, p);
  NlmsFilter nlms(start, {.mu = 1.0});
  DelayLine line(L);
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const auto a = inlms.step(line, s.d[n]);
    nlms.step(line, s.d[n]);
    REQUIRE(a.mu_effective == 1.0);
    REQUIRE(rel_diff(inlms.taps().coeffs(), nlms.taps().coeffs()) <= 1e-12);
  }
}

TEST_CASE("INLMS eta follows the sign of e x^T psi", "[inlms]") {
  const std::size_t L = 8;
  const auto s = make_signals(59, L, 10000, 0.2);
  InlmsParams p;
  p.eta_limits = {1e-300, 1e300, 1e300};
  p.eta_saturation = EtaSaturation::follow;
  InlmsFilter f(L, p);
  DelayLine line(L);
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const double corr_sign = [&] {
      const auto w = line.window();
      double xpsi = 0.0;
      for (std::size_t k = 0; k < L; ++k) xpsi += w[k] * f.psi()[k];
      double yhat = 0.0;
      for (std::size_t k = 0; k < L; ++k) yhat += w[k] * f.taps()[k];
      const double v = (s.d[n] - yhat) * xpsi;
      return static_cast<double>((v > 0) - (v < 0));
    }();
    const double before = f.eta();
    f.step(line, s.d[n]);
    const double delta = f.eta() - before;
    REQUIRE(static_cast<double>((delta > 0) - (delta < 0)) == corr_sign);
  }
}

TEST_CASE("INLMS parameter validation", "[inlms]") {
  CHECK_THROWS_AS(InlmsFilter(4, {.rho = 0.0}), InputError);
  CHECK_THROWS_AS(InlmsFilter(4, {.eta0 = 20.0}), InputError);
  InlmsParams bad;
  bad.eta_limits = {1.0, 0.5, 0.5};
  CHECK_THROWS_AS(InlmsFilter(4, bad), InputError);
  InlmsFilter f(4);
  DelayLine line(5);
  CHECK_THROWS_AS(f.step(line, 0.0), DimensionError);
}

// ---------------------------------------------------------------------------
// Direct and GNGD

TEST_CASE("Direct matches the reference", "[direct]") {
  const std::size_t L = 16;
  const auto s = make_signals(71, L, 1000);
  DirectFilter f(L);
  oracle::Direct ref(L);
  DelayLine line(L);
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const auto diag = f.step(line, s.d[n]);
    const double e = ref.step(oracle::window(s.x, n, L), s.d[n]);
    REQUIRE_THAT(diag.error, WithinAbs(e, 1e-10 * std::max(1.0, std::abs(e))));
    REQUIRE_THAT(f.mu(), WithinRel(ref.mu, 1e-10));
    REQUIRE(f.mu() >= 1e-5);
    REQUIRE(f.mu() <= 1.0);
    REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-10);
  }
}

TEST_CASE("GNGD matches the reference", "[gngd]") {
  const std::size_t L = 16;
  const auto s = make_signals(83, L, 1000);
  GngdFilter f(L);
  oracle::Gngd ref(L);
  DelayLine line(L);
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const auto diag = f.step(line, s.d[n]);
    const double e = ref.step(oracle::window(s.x, n, L), s.d[n]);
    REQUIRE_THAT(diag.error, WithinAbs(e, 1e-10 * std::max(1.0, std::abs(e))));
    REQUIRE_THAT(f.epsilon(), WithinRel(ref.eps, 1e-10));
    REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-10);
  }
}

TEST_CASE("GNGD with frozen eps is NLMS with a regularised step", "[gngd]") {
  const std::size_t L = 8;
  const auto s = make_signals(97, L, 1000);
  GngdParams p;
  p.adapt = false;
  p.eps0 = 2.5;
  GngdFilter f(L, p);
  oracle::Gngd ref(L);
  ref.adapt = false;
  ref.eps = 2.5;
  DelayLine line(L);
  for (std::size_t n = 0; n < s.x.size(); ++n) {
    line.push(s.x[n]);
    const auto diag = f.step(line, s.d[n]);
    ref.step(oracle::window(s.x, n, L), s.d[n]);
    const double energy = oracle::sum_sq(oracle::window(s.x, n, L));
    REQUIRE_THAT(diag.mu_effective,
                 WithinRel(energy / (energy + 2.5 + kDefaultRegularizer), 1e-12));
    REQUIRE(f.epsilon() == 2.5);
    REQUIRE(rel_diff(f.taps().coeffs(), ref.h) <= 1e-12);
  }
}

TEST_CASE("Direct and GNGD parameter validation", "[direct][gngd]") {
  CHECK_THROWS_AS(DirectFilter(4, {.mu0 = 2.0}), InputError);
  CHECK_THROWS_AS(DirectFilter(4, {.mu_min = 0.0}), InputError);
  CHECK_THROWS_AS(GngdFilter(4, {.mu0 = 0.0}), InputError);
  CHECK_THROWS_AS(GngdFilter(4, {.eps0 = 0.0}), InputError);
}

static_assert(AdaptiveFilter<NlmsFilter>);
static_assert(AdaptiveFilter<InlmsFilter>);
static_assert(AdaptiveFilter<DirectFilter>);
static_assert(AdaptiveFilter<GngdFilter>);
