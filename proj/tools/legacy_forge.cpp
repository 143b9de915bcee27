#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/orchestrator.hpp"

namespace {

void print_summary(const forge::AggregateReport& r, const std::filesystem::path& reports) {
  std::printf("targets %d, completed %d, executed %d, coverage measured %d, improved %d\n", r.n_targets, r.n_completed,
              r.n_executed, r.n_coverage_measured, r.n_improved);
  std::printf("compile errors %d, crash tests %d, verifier timeouts %d, generation errors %d\n",
              r.counters.compile_errors, r.counters.crashes, r.counters.verifier_timeouts, r.counters.generation_errors);
  if (r.improvement)
    std::printf("improvement rate %.1f%%, median gain %+d, max gain %+d\n", r.improvement->improvement_rate,
                r.improvement->median_gain, r.improvement->max_gain);
  if (r.pearson_r) std::printf("cycles vs gain: r = %.4f, p = %.6f\n", *r.pearson_r, *r.pearson_p);
  std::printf("reports in %s\n", reports.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate and refine unit tests for legacy C functions"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the pipeline over the configured sources");
  std::string config_path, targets, backend, out;
  int max_iter = 0, jobs = 0;
  bool quiet = false;
  run->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--targets", targets, "comma-separated names or globs (overrides config)");
  run->add_option("--max-iter", max_iter, "iteration budget per target")->check(CLI::PositiveNumber);
  run->add_option("--backend", backend, "scripted:<dir> or http");
  run->add_option("--out", out, "output directory");
  run->add_option("-j,--parallelism", jobs, "targets processed concurrently")->check(CLI::PositiveNumber);
  run->add_flag("-q,--quiet", quiet, "no per-target progress");

  auto* report = app.add_subcommand("report", "recompute the aggregate report from session records");
  std::string report_out;
  report->add_option("--out", report_out, "output directory of a previous run")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = forge::load_config(config_path);
      if (!targets.empty()) cfg.targets = forge::TargetSelector::parse(targets);
      if (max_iter > 0) cfg.max_iterations = max_iter;
      if (!backend.empty()) {
        auto http = cfg.backend.http;
        cfg.backend = forge::parse_backend(backend, std::filesystem::current_path());
        cfg.backend.http = http;
      }
      if (!out.empty()) cfg.output_dir = std::filesystem::absolute(out);
      if (jobs > 0) cfg.parallelism = jobs;
      auto result = forge::run_pipeline(cfg, nullptr, quiet ? nullptr : &std::cerr);
      print_summary(result.report, cfg.output_dir / "reports");
      return result.exit_code;
    }
    if (*report) {
      auto records = forge::load_records(report_out);
      auto agg = forge::aggregate(records);
      auto dir = std::filesystem::path(report_out) / "reports";
      forge::emit_reports(agg, dir);
      print_summary(agg, dir);
      return forge::exit_code_for(records);
    }
  } catch (const forge::FatalConfig& e) {
    std::cerr << "legacy-forge: configuration error: " << e.what() << "\n";
    return 1;
  } catch (const forge::Error& e) {
    std::cerr << "legacy-forge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
