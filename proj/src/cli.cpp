#include <CLI11.hpp>

#include <iostream>

#include "vidpipe/pipeline.hpp"

namespace vidpipe {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnreachable = 2;
constexpr int kExitPartialFailures = 3;

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::TransportError ? kExitUnreachable : kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Long-video question answering pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Path to the run config JSON")
      ->required()
      ->envname("VIDPIPE_CONFIG");

  auto* cmd_validate = app.add_subcommand("validate-config", "Check the config and exit");
  auto* cmd_warm = app.add_subcommand("cache-warm", "Embed all questions and frames into the cache");
  auto* cmd_index = app.add_subcommand("build-index", "Build the exemplar index from the train set");
  auto* cmd_run = app.add_subcommand("run", "Execute the full pipeline");
  auto* cmd_eval = app.add_subcommand("evaluate", "Re-judge an existing results log");
  auto* cmd_report = app.add_subcommand("report", "Re-render reports from results logs");

  std::string run_id;
  std::size_t limit = 0;
  bool resume = false;
  cmd_run->add_option("--run-id", run_id, "Run identifier (overrides config)");
  cmd_run->add_option("--limit", limit, "Process at most N new items");
  cmd_run->add_flag("--resume", resume, "Skip items already in the results log");

  std::string eval_run_id;
  cmd_eval->add_option("--run-id", eval_run_id, "Run to re-judge (defaults to config run_id)");

  std::vector<std::string> report_run_ids;
  cmd_report->add_option("--run-id", report_run_ids,
                         "Run(s) to report; several ids produce the averaged report");

  // CLI11's vector overload consumes args back to front.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = load_run_config(config_path);

    if (cmd_validate->parsed()) {
      validate_run_config(config);
      std::cout << "config ok: " << config_path << "\n";
      return kExitOk;
    }
    if (cmd_warm->parsed()) {
      const CacheWarmStats stats = cache_warm(config);
      std::cout << "cache warmed: " << stats.texts << " texts, " << stats.images
                << " frames\n";
      return kExitOk;
    }
    if (cmd_index->parsed()) {
      const std::string digest = build_exemplar_index_file(config);
      std::cout << "index written: " << config.index_file.string() << " sha256 " << digest
                << "\n";
      return kExitOk;
    }
    if (cmd_run->parsed()) {
      RunOptions options;
      options.resume = resume;
      if (limit > 0) options.limit = limit;
      if (!run_id.empty()) options.run_id = run_id;
      const PipelineOutcome outcome = run_pipeline(config, options);
      std::cout << "run complete: " << outcome.processed << " processed, "
                << outcome.skipped << " skipped, " << outcome.item_errors
                << " item errors, " << outcome.judge_parse_errors
                << " judge parse errors\n"
                << "results: " << outcome.results_path.string() << "\n";
      if (!outcome.report_json_path.empty()) {
        std::cout << "report: " << outcome.report_json_path.string() << "\n";
      }
      return (outcome.item_errors > 0 || outcome.judge_parse_errors > 0)
                 ? kExitPartialFailures
                 : kExitOk;
    }
    if (cmd_eval->parsed()) {
      const std::string target = eval_run_id.empty() ? config.run_id : eval_run_id;
      const PipelineOutcome outcome = evaluate_log(config, target);
      std::cout << "evaluated " << outcome.processed << " results, "
                << outcome.judge_parse_errors << " judge parse errors\n";
      return (outcome.item_errors > 0 || outcome.judge_parse_errors > 0)
                 ? kExitPartialFailures
                 : kExitOk;
    }
    if (cmd_report->parsed()) {
      const ReportPaths paths = write_report_for_runs(config, report_run_ids);
      for (const auto& path : paths.json_paths) {
        std::cout << "report: " << path.string() << "\n";
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace vidpipe
