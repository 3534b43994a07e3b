// moral-lens: run moral-conditioning PCT experiments from one config file.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "moral_lens/errors.hpp"
#include "moral_lens/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::string run_id;
  std::string out;
  bool replay = false;
  std::size_t max_concurrency = 0;
};

moral_lens::Experiment open(const Flags& f) {
  moral_lens::RunOptions opts;
  opts.replay = f.replay;
  if (!f.run_id.empty()) opts.run_id = f.run_id;
  if (!f.out.empty()) opts.out_dir = f.out;
  if (f.max_concurrency > 0) opts.max_concurrency = f.max_concurrency;
  return moral_lens::Experiment(moral_lens::ExperimentConfig::load(f.config), opts);
}

void print_summary(const moral_lens::RunSummary& s) {
  std::cout << "run dir:        " << s.run_dir.string() << "\n"
            << "cells:          " << s.complete_cells << " complete, " << s.partial_cells << " partial, "
            << s.failed_cells << " failed of " << s.planned_cells;
  if (s.skipped_cells > 0) std::cout << " (" << s.skipped_cells << " already complete)";
  std::cout << "\n"
            << "answers:        " << s.answered << " parsed, " << s.missing << " missing, " << s.refusals
            << " refusals\n"
            << "backend calls:  " << s.backend_calls << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moral-value conditioning and political compass experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  auto add_common = [&](CLI::App* sub, bool with_replay) {
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--run-id", flags.run_id, "Override the config's run_id");
    sub->add_option("--out", flags.out, "Override the output directory");
    sub->add_option("--max-concurrency", flags.max_concurrency, "Cells (or judge items) in flight")
        ->check(CLI::PositiveNumber);
    if (with_replay) sub->add_flag("--replay", flags.replay, "Serve completions from the cache only");
  };

  auto* validate = app.add_subcommand("validate", "Check the config and all referenced data");
  auto* run = app.add_subcommand("run", "Start a run: cells, metrics, judge, cohort, report");
  auto* resume = app.add_subcommand("resume", "Continue a run, skipping complete cells");
  auto* metrics = app.add_subcommand("metrics", "Recompute metric tables from stored cells");
  auto* judge = app.add_subcommand("judge", "Rate sampled brief reasons with the judge model");
  auto* cohort = app.add_subcommand("cohort", "Group, sample and score the human cohort");
  auto* report = app.add_subcommand("report", "Render plots and tables for a run");
  add_common(validate, false);
  add_common(run, true);
  add_common(resume, true);
  add_common(metrics, false);
  add_common(judge, true);
  add_common(cohort, false);
  add_common(report, false);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    auto exp = open(flags);
    if (*validate) {
      std::cout << exp.validate();
    } else if (*run) {
      print_summary(exp.run());
    } else if (*resume) {
      print_summary(exp.resume());
    } else if (*metrics) {
      const auto m = exp.metrics();
      std::cout << m.summaries.size() << " summary rows written to "
                << (exp.run_dir() / "metrics").string() << "\n";
      for (const auto& n : m.notes) std::cout << "note: " << n << "\n";
    } else if (*judge) {
      exp.judge();
      std::cout << "judge results in " << (exp.run_dir() / "judge").string() << "\n";
    } else if (*cohort) {
      exp.cohort();
      std::cout << "cohort results in " << (exp.run_dir() / "cohort").string() << "\n";
    } else if (*report) {
      exp.report();
      std::cout << "report in " << (exp.run_dir() / "report").string() << "\n";
    }
  } catch (const moral_lens::Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
