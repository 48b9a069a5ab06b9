#pragma once

// Deterministic test-signal synthesis: white and speech-like generators,
// synthetic echo paths, impulse-response files and the observed-signal mixer
//   d(n) = sum_k h_n[k] x(n-k) + v(n)
// where h_n switches from one path to another at a configured sample.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "inlms/dsp_core.hpp"

namespace inlms {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Independent streams derived from one user seed.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generators

/// i.i.d. zero-mean Gaussian samples with standard deviation `sigma`.
inline std::vector<double> gen_white(std::uint64_t seed, std::size_t n_samples, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be >= 0");
  std::vector<double> out(n_samples, 0.0);
  if (sigma == 0.0) return out;
  auto rng = detail::make_rng(seed, 0x77686974);
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& s : out) s = dist(rng);
  return out;
}

/// Speech stand-in: AR(2) coloured noise gated by an alternating talk/silence
/// process. Dwell times are drawn uniformly in [0.5, 1.5] x the state's mean;
/// the silence mean follows from the talk mean and the target duty cycle.
/// Gate edges are raised-cosine ramps.
struct SpeechParams {
  double sample_rate = 8000.0;
  double peak_hz = 500.0;
  double pole_radius = 0.6;
  double mean_talk_s = 1.0;
  double duty = 0.5;
  double ramp_ms = 10.0;
  double floor_db = -60.0;  // level of the silence segments relative to talk
  bool start_active = true;  // first segment is talk
};

struct SpeechLike {
  std::vector<double> samples;  // unit power over active samples
  std::vector<double> gate;     // gate gain in [0, 1]; > 0.5 counts as active
};

inline SpeechLike gen_speechlike(std::uint64_t seed, std::size_t n_samples,
                                 const SpeechParams& p = {}) {
  if (!(p.sample_rate > 0.0) || !(p.mean_talk_s > 0.0) || !(p.duty > 0.0 && p.duty < 1.0) ||
      !(p.pole_radius >= 0.0 && p.pole_radius < 1.0) || !(p.ramp_ms >= 0.0) ||
      !(p.peak_hz >= 0.0 && p.peak_hz <= p.sample_rate / 2)) {
    throw InputError("invalid speech-like generator parameters");
  }
  auto rng = detail::make_rng(seed, 0x73706368);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.5, 1.5);
  std::bernoulli_distribution start_talking(p.duty);

  SpeechLike out;
  out.samples.resize(n_samples);
  out.gate.resize(n_samples);

  const double theta = 2.0 * std::numbers::pi * p.peak_hz / p.sample_rate;
  const double a1 = 2.0 * p.pole_radius * std::cos(theta);
  const double a2 = -p.pole_radius * p.pole_radius;
  double y1 = 0.0, y2 = 0.0;
  auto ar_next = [&] {
    const double y = normal(rng) + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  };
  for (int k = 0; k < 1000; ++k) ar_next();  // settle the recursion

  const double talk_mean = p.mean_talk_s * p.sample_rate;
  const double silence_mean = talk_mean * (1.0 - p.duty) / p.duty;
  bool talking = start_talking(rng) || p.start_active;
  auto dwell = [&](bool talk) {
    return static_cast<std::size_t>(
        std::max(1.0, std::round((talk ? talk_mean : silence_mean) * spread(rng))));
  };
  std::size_t remaining = dwell(talking);

  const double ramp_step =
      p.ramp_ms > 0.0 ? 1.0 / (p.ramp_ms * 1e-3 * p.sample_rate) : 1.0;
  const double floor_gain = std::pow(10.0, p.floor_db / 20.0);
  double phase = talking ? 1.0 : 0.0;

  for (std::size_t n = 0; n < n_samples; ++n) {
    if (remaining == 0) {
      talking = !talking;
      remaining = dwell(talking);
    }
    --remaining;
    phase = std::clamp(phase + (talking ? ramp_step : -ramp_step), 0.0, 1.0);
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * phase);
    out.gate[n] = g;
    out.samples[n] = (floor_gain + (1.0 - floor_gain) * g) * ar_next();
  }

  double power = 0.0;
  std::size_t active = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    if (out.gate[n] > 0.5) {
      power += out.samples[n] * out.samples[n];
      ++active;
    }
  }
  if (active > 0 && power > 0.0) {
    const double scale = 1.0 / std::sqrt(power / static_cast<double>(active));
    for (auto& s : out.samples) s *= scale;
  }
  return out;
}

/// Synthetic room-like echo path: a short run of leading zeros (bulk delay)
/// followed by Gaussian taps under exp(-k / tau), tau = decay_ms * fs / 1000,
/// normalised to unit energy.
inline TapVector gen_echo_path(std::uint64_t seed, std::size_t length, double decay_ms = 4.0,
                               double sample_rate = 8000.0) {
  if (length == 0) throw DimensionError("echo path length must be >= 1");
  if (!(decay_ms > 0.0) || !(sample_rate > 0.0)) {
    throw InputError("decay and sample rate must be > 0");
  }
  auto rng = detail::make_rng(seed, 0x70617468);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double tau = decay_ms * 1e-3 * sample_rate;
  const auto max_delay =
      static_cast<std::size_t>(std::min(static_cast<double>(length / 16), tau / 4.0));
  std::uniform_int_distribution<std::size_t> delay_dist(0, max_delay);
  const std::size_t delay = delay_dist(rng);

  std::vector<double> taps(length, 0.0);
  double energy = 0.0;
  for (std::size_t k = delay; k < length; ++k) {
    taps[k] = normal(rng) * std::exp(-static_cast<double>(k) / tau);
    energy += taps[k] * taps[k];
  }
  if (!(energy > 0.0)) {
    taps[delay] = 1.0;
    energy = 1.0;
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& t : taps) t *= scale;
  return TapVector(std::move(taps));
}

// ---------------------------------------------------------------------------
// Impulse-response text files: one coefficient per line, '#' starts a comment.

inline TapVector parse_impulse_response(std::istream& in, const std::string& name = "<stream>") {
  std::vector<double> coeffs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(view, v) || !std::isfinite(v)) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": not a number: '" +
                       std::string(view) + "'");
    }
    coeffs.push_back(v);
  }
  if (coeffs.empty()) throw ParseError(name + ": no coefficients found");
  return TapVector(std::move(coeffs));
}

inline TapVector load_impulse_response(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_impulse_response(in, path);
}

inline void write_impulse_response(const std::string& path, const TapVector& taps) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  for (double c : taps.coeffs()) out << detail::format_double(c) << '\n';
}

// ---------------------------------------------------------------------------
// Scenarios

struct EchoPath {
  TapVector initial;
  TapVector changed;
  std::size_t change_sample;

  const TapVector& at(std::size_t n) const noexcept {
    return n < change_sample ? initial : changed;
  }
};

enum class SignalKind { white, speech };

struct ScenarioConfig {
  int scenario = 1;  // 1: white/white, 2: speech/white, 3: speech/speech
  double sample_rate = 8000.0;
  double duration_s = 32.0;
  std::size_t filter_length = 128;
  std::uint64_t seed = 1;
  double eir_db = 10.0;  // echo-to-interference ratio over active segments
  double change_time_s = 16.0;
  double decay_ms = 4.0;
  double interference_gain = 1.0;  // extra factor on v after EIR scaling
  SpeechParams speech{};
  double interference_floor_db = -10.0;  // near-end silence level (room noise)
  std::vector<std::string> ir_files;  // replaces the synthetic paths

  std::size_t n_samples() const {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  }
  std::size_t change_sample() const {
    return static_cast<std::size_t>(std::llround(change_time_s * sample_rate));
  }
};

inline SignalKind input_kind(int scenario) {
  return scenario == 1 ? SignalKind::white : SignalKind::speech;
}
inline SignalKind interference_kind(int scenario) {
  return scenario == 3 ? SignalKind::speech : SignalKind::white;
}

inline void validate(const ScenarioConfig& c) {
  if (c.scenario < 1 || c.scenario > 3) {
    throw InputError("scenario must be 1, 2 or 3 (got " + std::to_string(c.scenario) + ")");
  }
  if (!(c.sample_rate > 0.0) || !std::isfinite(c.sample_rate)) {
    throw InputError("sample rate must be > 0");
  }
  if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s)) {
    throw InputError("duration must be > 0");
  }
  const double n = c.duration_s * c.sample_rate;
  if (std::abs(n - std::round(n)) > 1e-6) {
    throw InputError("duration * sample rate must be an integer");
  }
  if (c.filter_length == 0 && c.ir_files.empty()) throw InputError("filter length must be >= 1");
  if (!(c.change_time_s >= 0.0)) throw InputError("change time must be >= 0");
  if (!std::isfinite(c.eir_db)) throw InputError("EIR must be finite");
  if (!(c.interference_gain >= 0.0)) throw InputError("interference gain must be >= 0");
  if (c.ir_files.size() > 2) throw InputError("at most two impulse-response files");
}

struct SignalPair {
  std::vector<double> x;  // far-end input
  std::vector<double> v;  // interference
  std::vector<double> d;  // observed
  std::vector<bool> x_active;
  std::vector<bool> v_active;
  EchoPath path;

  std::size_t size() const noexcept { return x.size(); }
};

/// Echo paths for a config: either synthetic (seeded) or loaded from files.
/// One file is used on both sides of the change; two files give the initial
/// and changed responses.
inline EchoPath make_echo_path(const ScenarioConfig& c) {
  const std::size_t change = c.change_sample();
  if (c.ir_files.empty()) {
    return {gen_echo_path(c.seed * 2 + 11, c.filter_length, c.decay_ms, c.sample_rate),
            gen_echo_path(c.seed * 2 + 12, c.filter_length, c.decay_ms, c.sample_rate), change};
  }
  TapVector first = load_impulse_response(c.ir_files[0]);
  TapVector second = c.ir_files.size() > 1 ? load_impulse_response(c.ir_files[1]) : first;
  if (first.size() != second.size()) {
    throw DimensionError("impulse-response files have different lengths");
  }
  if (first.norm_sq() == 0.0 || second.norm_sq() == 0.0) {
    throw InputError("impulse response has zero energy");
  }
  return {std::move(first), std::move(second), change};
}

inline SignalPair synthesize(const ScenarioConfig& c) {
  validate(c);
  const std::size_t n = c.n_samples();
  SpeechParams speech = c.speech;
  speech.sample_rate = c.sample_rate;

  auto source = [&](SignalKind kind, std::uint64_t seed, double floor_db,
                    std::vector<double>& samples, std::vector<bool>& active) {
    if (kind == SignalKind::white) {
      samples = gen_white(seed, n, 1.0);
      active.assign(n, true);
    } else {
      SpeechParams sp = speech;
      sp.floor_db = floor_db;
      auto s = gen_speechlike(seed, n, sp);
      samples = std::move(s.samples);
      active.resize(n);
      for (std::size_t i = 0; i < n; ++i) active[i] = s.gate[i] > 0.5;
    }
  };

  SignalPair sig{{}, {}, {}, {}, {}, make_echo_path(c)};
  source(input_kind(c.scenario), c.seed * 4 + 1, speech.floor_db, sig.x, sig.x_active);
  source(interference_kind(c.scenario), c.seed * 4 + 2, c.interference_floor_db, sig.v,
         sig.v_active);

  const std::size_t L = sig.path.initial.size();
  sig.d.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = sig.path.at(i).coeffs();
    const std::size_t taps = std::min(L, i + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < taps; ++k) acc += h[k] * sig.x[i - k];
    sig.d[i] = acc;
  }

  double echo_power = 0.0, interference_power = 0.0;
  std::size_t echo_count = 0, interference_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sig.x_active[i]) {
      echo_power += sig.d[i] * sig.d[i];
      ++echo_count;
    }
    if (sig.v_active[i]) {
      interference_power += sig.v[i] * sig.v[i];
      ++interference_count;
    }
  }
  double gain = 0.0;
  if (echo_count > 0 && interference_count > 0 && interference_power > 0.0) {
    echo_power /= static_cast<double>(echo_count);
    interference_power /= static_cast<double>(interference_count);
    gain = std::sqrt(echo_power / interference_power * std::pow(10.0, -c.eir_db / 10.0));
  }
  gain *= c.interference_gain;
  for (std::size_t i = 0; i < n; ++i) {
    sig.v[i] *= gain;
    sig.d[i] += sig.v[i];
  }
  return sig;
}

}  // namespace inlms
