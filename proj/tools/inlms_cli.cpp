// inlms_cli: run one scenario with one or more adaptive filters, write CSV
// traces plus a manifest, and print per-epoch summaries.
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric fault.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "inlms/inlms.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFault = 2;

void print_summary(const inlms::ExperimentOutcome& outcome, const inlms::ExperimentConfig& cfg) {
  const auto change = cfg.scenario.change_sample();
  std::printf("%-7s %-7s %10s %10s %12s %12s\n", "alg", "epoch", "final_db", "min_db",
              "converge_s", "max_regr_db");
  for (const auto& r : outcome.results) {
    const auto epochs = inlms::summarize_epochs(r.trace, change);
    auto row = [&](const char* name, const std::optional<inlms::TraceSummary>& s) {
      if (!s) return;
      char conv[32] = "-";
      if (s->convergence_time_s) std::snprintf(conv, sizeof conv, "%.2f", *s->convergence_time_s);
      std::printf("%-7s %-7s %10.2f %10.2f %12s %12.2f%s\n", inlms::to_string(r.algorithm), name,
                  s->final_db, s->min_db, conv, s->max_regression_db,
                  s->diverged ? "  diverged" : "");
    };
    row("before", epochs.before);
    row("after", epochs.after);
    if (r.fault_sample) {
      std::fprintf(stderr, "%s: numeric fault at sample %llu: %s\n",
                   inlms::to_string(r.algorithm),
                   static_cast<unsigned long long>(*r.fault_sample), r.fault_message.c_str());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive echo-cancellation experiments (NLMS, Direct, GNGD, INLMS)"};
  app.set_version_flag("--version", inlms::kVersion);

  inlms::ExperimentConfig cfg;
  auto& sc = cfg.scenario;
  auto& p = cfg.params;
  std::string algorithms = "inlms";
  std::string out_dir = "out";
  std::string manifest;
  std::string eta_saturation = inlms::to_string(p.inlms.eta_saturation);

  std::vector<CLI::Option*> config_opts;
  auto cfg_opt = [&](CLI::Option* o) {
    config_opts.push_back(o);
    return o;
  };

  cfg_opt(app.add_option("--scenario", sc.scenario, "1 white/white, 2 speech/white, 3 speech/speech")
              ->check(CLI::Range(1, 3))
              ->capture_default_str());
  cfg_opt(app.add_option("--algorithm", algorithms, "Comma-separated: nlms,direct,gngd,inlms")
              ->capture_default_str());
  cfg_opt(app.add_option("--seed", sc.seed, "Signal and echo-path seed")->capture_default_str());
  cfg_opt(app.add_option("--duration-s", sc.duration_s, "Run length in seconds")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--sample-rate", sc.sample_rate, "Sample rate in Hz")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--filter-length", sc.filter_length, "Adaptive filter and echo path taps")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--change-time-s", sc.change_time_s, "Echo-path change time")
              ->check(CLI::NonNegativeNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--eir-db", sc.eir_db, "Echo-to-interference ratio over active segments")
              ->capture_default_str());
  cfg_opt(app.add_option("--ir-file", sc.ir_files,
                         "Impulse-response file; a second one is used after the change")
              ->expected(1, 2)
              ->check(CLI::ExistingFile));
  cfg_opt(app.add_option("--rho", p.inlms.rho, "INLMS step size on eta")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--gngd-rho", p.gngd.rho, "GNGD step size on eps")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--direct-rho", p.direct.rho, "Direct step size on mu")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  cfg_opt(app.add_option("--nlms-mu", p.nlms.mu, "Fixed NLMS learning rate")
              ->check(CLI::Range(0.0, 1.0))
              ->capture_default_str());
  cfg_opt(app.add_option("--eta-saturation", eta_saturation,
                         "INLMS eta while the rate is clamped at 1")
              ->check(CLI::IsMember({"follow", "freeze", "descend_only"}))
              ->capture_default_str());
  cfg_opt(app.add_option("--decimate", cfg.decimate, "Samples per trace record")
              ->check(CLI::PositiveNumber)
              ->capture_default_str());
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--manifest", manifest, "Re-run the experiment recorded in a manifest")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    std::vector<inlms::Algorithm> algs;
    if (!manifest.empty()) {
      for (auto* o : config_opts) {
        if (o->count() > 0) {
          std::fprintf(stderr, "error: %s cannot be combined with --manifest\n",
                       o->get_name().c_str());
          return kExitUsage;
        }
      }
      const auto m = inlms::read_manifest(manifest);
      cfg = m.config;
      algs = m.algorithms;
      if (algs.empty()) throw inlms::InputError("manifest lists no algorithms");
    } else {
      p.inlms.eta_saturation = inlms::parse_eta_saturation(eta_saturation);
      algs = inlms::parse_algorithm_list(algorithms);
    }

    const auto outcome = inlms::run_to_directory(cfg, algs, out_dir);
    print_summary(outcome, cfg);
    std::printf("wrote %s and %s (%.2f s)\n",
                (std::filesystem::path(out_dir) / outcome.manifest.outputs.front()).c_str(),
                outcome.manifest_path.c_str(), outcome.manifest.runtime_s);
    return outcome.faulted() ? kExitFault : kExitOk;
  } catch (const inlms::NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kExitFault;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
