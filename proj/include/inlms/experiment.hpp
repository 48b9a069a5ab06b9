#pragma once

// Experiment driver: synthesize one scenario, run one or more adaptive
// filters over the identical signals, decimate misalignment traces, and
// persist them as CSV plus a key=value run manifest.

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "inlms/adaptive_filters.hpp"
#include "inlms/metrics.hpp"
#include "inlms/scenarios.hpp"

namespace inlms {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kCsvHeader =
    "sample,time_s,algorithm,misalignment_db,mu,control,sigma_e_sq";

enum class Algorithm { nlms, direct, gngd, inlms };

inline constexpr std::array<Algorithm, 4> kAllAlgorithms{Algorithm::nlms, Algorithm::direct,
                                                         Algorithm::gngd, Algorithm::inlms};

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::nlms: return "nlms";
    case Algorithm::direct: return "direct";
    case Algorithm::gngd: return "gngd";
    case Algorithm::inlms: return "inlms";
  }
  return "?";
}

inline const char* to_string(EtaSaturation s) {
  switch (s) {
    case EtaSaturation::follow: return "follow";
    case EtaSaturation::freeze: return "freeze";
    case EtaSaturation::descend_only: return "descend_only";
  }
  return "?";
}

inline EtaSaturation parse_eta_saturation(std::string_view name) {
  for (auto s : {EtaSaturation::follow, EtaSaturation::freeze, EtaSaturation::descend_only}) {
    if (name == to_string(s)) return s;
  }
  throw ParseError("unknown eta saturation policy '" + std::string(name) + "'");
}

inline Algorithm parse_algorithm(std::string_view name) {
  for (auto a : kAllAlgorithms) {
    if (name == to_string(a)) return a;
  }
  throw InputError("unknown algorithm '" + std::string(name) +
                   "' (expected nlms, direct, gngd or inlms)");
}

inline std::vector<Algorithm> parse_algorithm_list(std::string_view list) {
  std::vector<Algorithm> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    out.push_back(parse_algorithm(detail::trim(list.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (out.empty()) throw InputError("no algorithm given");
  return out;
}

struct AlgorithmParams {
  NlmsParams nlms{};
  DirectParams direct{};
  GngdParams gngd{};
  InlmsParams inlms{};
};

struct ExperimentConfig {
  ScenarioConfig scenario{};
  AlgorithmParams params{};
  std::size_t decimate = 80;  // 10 ms at 8 kHz
};

using AnyFilter = std::variant<NlmsFilter, DirectFilter, GngdFilter, InlmsFilter>;

inline AnyFilter make_filter(Algorithm a, std::size_t length, const AlgorithmParams& p) {
  switch (a) {
    case Algorithm::nlms: return NlmsFilter(length, p.nlms);
    case Algorithm::direct: return DirectFilter(length, p.direct);
    case Algorithm::gngd: return GngdFilter(length, p.gngd);
    case Algorithm::inlms: return InlmsFilter(length, p.inlms);
  }
  throw InputError("unknown algorithm");
}

struct RunResult {
  Algorithm algorithm = Algorithm::inlms;
  std::vector<TraceRecord> trace;
  std::optional<std::uint64_t> fault_sample;  // set when a NumericFault ended the run
  std::string fault_message;
};

/// Steps `filter` over all samples of `sig`. Every `decimate` samples a trace
/// record is appended. `on_step(n, diag, filter)` is called after every
/// sample when provided.
template <AdaptiveFilter F, class OnStep>
RunResult run_filter(const SignalPair& sig, F& filter, std::size_t decimate, OnStep&& on_step) {
  if (decimate == 0) throw InputError("decimation interval must be >= 1");
  RunResult result;
  DelayLine line(filter.taps().size());
  result.trace.reserve(sig.size() / decimate + 1);
  for (std::size_t n = 0; n < sig.size(); ++n) {
    StepDiagnostics diag;
    try {
      line.push(sig.x[n]);
      diag = filter.step(line, sig.d[n]);
    } catch (const NumericFault& f) {
      result.fault_sample = n;
      result.fault_message = f.what();
      return result;
    }
    on_step(n, diag, std::as_const(filter));
    if ((n + 1) % decimate == 0) {
      TraceRecord r;
      r.sample = n + 1;
      r.misalignment_db = misalignment_db(filter.taps(), sig.path.at(n));
      r.mu = diag.mu_effective;
      r.control = diag.control;
      r.sigma_e_sq = diag.sigma_e_sq;
      result.trace.push_back(r);
    }
  }
  return result;
}

template <AdaptiveFilter F>
RunResult run_filter(const SignalPair& sig, F& filter, std::size_t decimate) {
  return run_filter(sig, filter, decimate, [](std::size_t, const StepDiagnostics&, const F&) {});
}

inline RunResult run_algorithm(const SignalPair& sig, Algorithm a, const ExperimentConfig& cfg) {
  auto filter = make_filter(a, sig.path.initial.size(), cfg.params);
  RunResult r = std::visit([&](auto& f) { return run_filter(sig, f, cfg.decimate); }, filter);
  r.algorithm = a;
  for (auto& rec : r.trace) {
    rec.time_s = static_cast<double>(rec.sample) / cfg.scenario.sample_rate;
  }
  return r;
}

/// Synthesizes once and feeds the identical signals to every algorithm.
inline std::vector<RunResult> run_algorithms(const ExperimentConfig& cfg,
                                             std::span<const Algorithm> algorithms,
                                             const SignalPair& sig) {
  std::vector<RunResult> out;
  out.reserve(algorithms.size());
  for (auto a : algorithms) out.push_back(run_algorithm(sig, a, cfg));
  return out;
}

inline std::vector<RunResult> run_algorithms(const ExperimentConfig& cfg,
                                             std::span<const Algorithm> algorithms) {
  return run_algorithms(cfg, algorithms, synthesize(cfg.scenario));
}

// ---------------------------------------------------------------------------
// CSV

inline void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

inline void write_csv_rows(std::ostream& out, const RunResult& r) {
  using detail::format_double;
  for (const auto& rec : r.trace) {
    out << rec.sample << ',' << format_double(rec.time_s) << ',' << to_string(r.algorithm) << ','
        << format_double(rec.misalignment_db) << ',' << format_double(rec.mu) << ','
        << format_double(rec.control) << ',' << format_double(rec.sigma_e_sq) << '\n';
  }
}

inline void write_csv(std::ostream& out, std::span<const RunResult> results) {
  write_csv_header(out);
  for (const auto& r : results) write_csv_rows(out, r);
}

// ---------------------------------------------------------------------------
// Manifest: flat key=value lines; '#' lines are comments.

using KeyValues = std::map<std::string, std::string>;

inline KeyValues to_key_values(const ExperimentConfig& c) {
  using detail::format_double;
  const auto& s = c.scenario;
  const auto& p = c.params;
  KeyValues kv;
  kv["scenario"] = std::to_string(s.scenario);
  kv["sample_rate"] = format_double(s.sample_rate);
  kv["duration_s"] = format_double(s.duration_s);
  kv["filter_length"] = std::to_string(s.filter_length);
  kv["seed"] = std::to_string(s.seed);
  kv["eir_db"] = format_double(s.eir_db);
  kv["change_time_s"] = format_double(s.change_time_s);
  kv["decay_ms"] = format_double(s.decay_ms);
  kv["interference_gain"] = format_double(s.interference_gain);
  std::string files;
  for (std::size_t i = 0; i < s.ir_files.size(); ++i) files += (i ? "," : "") + s.ir_files[i];
  kv["ir_files"] = files;
  kv["speech.peak_hz"] = format_double(s.speech.peak_hz);
  kv["speech.pole_radius"] = format_double(s.speech.pole_radius);
  kv["speech.mean_talk_s"] = format_double(s.speech.mean_talk_s);
  kv["speech.duty"] = format_double(s.speech.duty);
  kv["speech.ramp_ms"] = format_double(s.speech.ramp_ms);
  kv["speech.floor_db"] = format_double(s.speech.floor_db);
  kv["interference_floor_db"] = format_double(s.interference_floor_db);
  kv["decimate"] = std::to_string(c.decimate);

  kv["nlms.mu"] = format_double(p.nlms.mu);
  kv["nlms.regularizer"] = format_double(p.nlms.regularizer);
  kv["direct.rho"] = format_double(p.direct.rho);
  kv["direct.mu0"] = format_double(p.direct.mu0);
  kv["direct.mu_min"] = format_double(p.direct.mu_min);
  kv["direct.mu_max"] = format_double(p.direct.mu_max);
  kv["direct.exponent_limit"] = format_double(p.direct.exponent_limit);
  kv["direct.regularizer"] = format_double(p.direct.regularizer);
  kv["gngd.rho"] = format_double(p.gngd.rho);
  kv["gngd.mu0"] = format_double(p.gngd.mu0);
  kv["gngd.eps0"] = format_double(p.gngd.eps0);
  kv["gngd.eps_min"] = format_double(p.gngd.eps_min);
  kv["gngd.eps_max"] = format_double(p.gngd.eps_max);
  kv["gngd.exponent_limit"] = format_double(p.gngd.exponent_limit);
  kv["gngd.adapt"] = p.gngd.adapt ? "1" : "0";
  kv["gngd.regularizer"] = format_double(p.gngd.regularizer);
  kv["inlms.rho"] = format_double(p.inlms.rho);
  kv["inlms.eta0"] = format_double(p.inlms.eta0);
  kv["inlms.eta_min"] = format_double(p.inlms.eta_limits.min);
  kv["inlms.eta_max"] = format_double(p.inlms.eta_limits.max);
  kv["inlms.exponent_limit"] = format_double(p.inlms.eta_limits.exponent);
  kv["inlms.bootstrap"] = p.inlms.bootstrap ? "1" : "0";
  kv["inlms.mu_boot"] = format_double(p.inlms.mu_boot);
  kv["inlms.mu_exit_threshold"] = format_double(p.inlms.mu_exit_threshold);
  kv["inlms.eta_saturation"] = to_string(p.inlms.eta_saturation);
  kv["inlms.regularizer"] = format_double(p.inlms.regularizer);
  return kv;
}

namespace detail {

class KeyReader {
 public:
  explicit KeyReader(const KeyValues& kv) : kv_(kv) {}

  void read(const std::string& key, double& out) const {
    if (auto s = find(key)) {
      if (!parse_double(*s, out)) throw ParseError("manifest: bad number for " + key);
    }
  }
  void read(const std::string& key, bool& out) const {
    if (auto s = find(key)) {
      if (*s != "0" && *s != "1") throw ParseError("manifest: bad flag for " + key);
      out = *s == "1";
    }
  }
  template <class T, class Parse>
  void read_with(const std::string& key, T& out, Parse parse) const {
    if (auto s = find(key)) out = parse(*s);
  }
  template <std::integral I>
  void read(const std::string& key, I& out) const {
    if (auto s = find(key)) {
      auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
      if (ec != std::errc{} || ptr != s->data() + s->size()) {
        throw ParseError("manifest: bad integer for " + key);
      }
    }
  }

 private:
  std::optional<std::string> find(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
  }
  const KeyValues& kv_;
};

}  // namespace detail

/// Missing keys keep their defaults.
inline ExperimentConfig from_key_values(const KeyValues& kv) {
  ExperimentConfig c;
  auto& s = c.scenario;
  auto& p = c.params;
  detail::KeyReader r(kv);
  r.read("scenario", s.scenario);
  r.read("sample_rate", s.sample_rate);
  r.read("duration_s", s.duration_s);
  r.read("filter_length", s.filter_length);
  r.read("seed", s.seed);
  r.read("eir_db", s.eir_db);
  r.read("change_time_s", s.change_time_s);
  r.read("decay_ms", s.decay_ms);
  r.read("interference_gain", s.interference_gain);
  if (auto it = kv.find("ir_files"); it != kv.end() && !it->second.empty()) {
    std::string_view rest = it->second;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      s.ir_files.emplace_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  r.read("speech.peak_hz", s.speech.peak_hz);
  r.read("speech.pole_radius", s.speech.pole_radius);
  r.read("speech.mean_talk_s", s.speech.mean_talk_s);
  r.read("speech.duty", s.speech.duty);
  r.read("speech.ramp_ms", s.speech.ramp_ms);
  r.read("speech.floor_db", s.speech.floor_db);
  r.read("interference_floor_db", s.interference_floor_db);
  r.read("decimate", c.decimate);

  r.read("nlms.mu", p.nlms.mu);
  r.read("nlms.regularizer", p.nlms.regularizer);
  r.read("direct.rho", p.direct.rho);
  r.read("direct.mu0", p.direct.mu0);
  r.read("direct.mu_min", p.direct.mu_min);
  r.read("direct.mu_max", p.direct.mu_max);
  r.read("direct.exponent_limit", p.direct.exponent_limit);
  r.read("direct.regularizer", p.direct.regularizer);
  r.read("gngd.rho", p.gngd.rho);
  r.read("gngd.mu0", p.gngd.mu0);
  r.read("gngd.eps0", p.gngd.eps0);
  r.read("gngd.eps_min", p.gngd.eps_min);
  r.read("gngd.eps_max", p.gngd.eps_max);
  r.read("gngd.exponent_limit", p.gngd.exponent_limit);
  r.read("gngd.adapt", p.gngd.adapt);
  r.read("gngd.regularizer", p.gngd.regularizer);
  r.read("inlms.rho", p.inlms.rho);
  r.read("inlms.eta0", p.inlms.eta0);
  r.read("inlms.eta_min", p.inlms.eta_limits.min);
  r.read("inlms.eta_max", p.inlms.eta_limits.max);
  r.read("inlms.exponent_limit", p.inlms.eta_limits.exponent);
  r.read("inlms.bootstrap", p.inlms.bootstrap);
  r.read("inlms.mu_boot", p.inlms.mu_boot);
  r.read("inlms.mu_exit_threshold", p.inlms.mu_exit_threshold);
  r.read_with("inlms.eta_saturation", p.inlms.eta_saturation, parse_eta_saturation);
  r.read("inlms.regularizer", p.inlms.regularizer);
  return c;
}

struct RunManifest {
  ExperimentConfig config;
  std::vector<Algorithm> algorithms;
  std::vector<std::string> outputs;  // file names relative to the manifest
  double runtime_s = 0.0;
  std::string version = kVersion;
};

inline void write_manifest(std::ostream& out, const RunManifest& m) {
  out << "# inlms run manifest\n";
  out << "version=" << m.version << '\n';
  std::string algs, outputs;
  for (std::size_t i = 0; i < m.algorithms.size(); ++i) {
    algs += (i ? "," : "") + std::string(to_string(m.algorithms[i]));
  }
  for (std::size_t i = 0; i < m.outputs.size(); ++i) outputs += (i ? "," : "") + m.outputs[i];
  out << "algorithms=" << algs << '\n';
  for (const auto& [k, v] : to_key_values(m.config)) out << k << '=' << v << '\n';
  out << "outputs=" << outputs << '\n';
  out << "runtime_s=" << detail::format_double(m.runtime_s) << '\n';
}

inline KeyValues parse_key_values(std::istream& in, const std::string& name = "<manifest>") {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv[std::string(detail::trim(view.substr(0, eq)))] =
        std::string(detail::trim(view.substr(eq + 1)));
  }
  return kv;
}

inline RunManifest read_manifest(std::istream& in, const std::string& name = "<manifest>") {
  const auto kv = parse_key_values(in, name);
  RunManifest m;
  m.config = from_key_values(kv);
  if (auto it = kv.find("algorithms"); it != kv.end()) {
    m.algorithms = parse_algorithm_list(it->second);
  }
  if (auto it = kv.find("version"); it != kv.end()) m.version = it->second;
  if (auto it = kv.find("runtime_s"); it != kv.end()) detail::parse_double(it->second, m.runtime_s);
  if (auto it = kv.find("outputs"); it != kv.end()) {
    std::string_view rest = it->second;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      m.outputs.emplace_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return m;
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open manifest");
  return read_manifest(in, path);
}

// ---------------------------------------------------------------------------
// File-producing entry points

struct ExperimentOutcome {
  std::vector<RunResult> results;
  RunManifest manifest;
  std::filesystem::path manifest_path;

  bool faulted() const {
    for (const auto& r : results) {
      if (r.fault_sample) return true;
    }
    return false;
  }
};

/// Runs `algorithms` on one synthesized scenario and writes into `out_dir`:
/// a single algorithm gives `<alg>.csv`, several give the long-format
/// `compare.csv`. `manifest.txt` is written alongside. Traces cut short by a
/// numeric fault are still written.
inline ExperimentOutcome run_to_directory(const ExperimentConfig& cfg,
                                          std::span<const Algorithm> algorithms,
                                          const std::filesystem::path& out_dir) {
  if (algorithms.empty()) throw InputError("no algorithm given");
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome outcome;
  outcome.results = run_algorithms(cfg, algorithms);
  const auto stop = std::chrono::steady_clock::now();

  std::filesystem::create_directories(out_dir);
  const std::string csv_name = algorithms.size() == 1
                                   ? std::string(to_string(algorithms.front())) + ".csv"
                                   : std::string("compare.csv");
  {
    std::ofstream csv(out_dir / csv_name, std::ios::binary);
    if (!csv) throw ParseError((out_dir / csv_name).string() + ": cannot open for writing");
    write_csv(csv, outcome.results);
  }

  auto& m = outcome.manifest;
  m.config = cfg;
  m.algorithms.assign(algorithms.begin(), algorithms.end());
  m.outputs = {csv_name};
  m.runtime_s = std::chrono::duration<double>(stop - start).count();
  outcome.manifest_path = out_dir / "manifest.txt";
  std::ofstream mf(outcome.manifest_path, std::ios::binary);
  if (!mf) throw ParseError(outcome.manifest_path.string() + ": cannot open for writing");
  write_manifest(mf, m);
  return outcome;
}

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, Algorithm algorithm,
                                        const std::filesystem::path& out_dir) {
  const std::array<Algorithm, 1> one{algorithm};
  return run_to_directory(cfg, one, out_dir);
}

inline ExperimentOutcome compare(const ExperimentConfig& cfg,
                                 std::span<const Algorithm> algorithms,
                                 const std::filesystem::path& out_dir) {
  return run_to_directory(cfg, algorithms, out_dir);
}

/// Per echo-path epoch summaries: records up to and including the change
/// sample, and records after it.
struct EpochSummaries {
  std::optional<TraceSummary> before;
  std::optional<TraceSummary> after;
};

inline EpochSummaries summarize_epochs(std::span<const TraceRecord> trace,
                                       std::uint64_t change_sample,
                                       double convergence_threshold_db = -10.0) {
  EpochSummaries s;
  auto first = trace_window(trace, 0, change_sample + 1);
  auto second = trace_window(trace, change_sample + 1, UINT64_MAX);
  if (!first.empty()) s.before = trace_summary(first, convergence_threshold_db);
  if (!second.empty()) s.after = trace_summary(second, convergence_threshold_db);
  return s;
}

}  // namespace inlms
