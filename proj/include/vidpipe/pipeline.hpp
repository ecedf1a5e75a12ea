#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidpipe/config.hpp"

namespace vidpipe {

struct RunOptions {
  bool resume = false;
  std::optional<std::size_t> limit;     // max items processed this invocation
  std::optional<std::string> run_id;    // overrides config.run_id
};

struct PipelineOutcome {
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t item_errors = 0;         // over the whole results log
  std::size_t judge_parse_errors = 0;  // idem
  std::filesystem::path results_path;
  std::filesystem::path report_json_path;
  std::filesystem::path report_markdown_path;
};

/// Full batch run: ingest, probe, sample, converse, arbitrate, judge,
/// aggregate, report. Per-item failures are logged and counted, never
/// fatal; config and probe failures abort before any work. Already-logged
/// items are skipped when resuming, and the log is written in dataset
/// order so reruns are byte-identical.
PipelineOutcome run_pipeline(const RunConfig& config, const RunOptions& options = {});

/// Re-judges every prediction in an existing results log (only the judge
/// backend is contacted) and refreshes the report.
PipelineOutcome evaluate_log(const RunConfig& config, const std::string& run_id);

struct ReportPaths {
  std::vector<std::filesystem::path> json_paths;
  std::vector<std::filesystem::path> markdown_paths;
};

/// Re-renders reports from existing logs without touching any backend.
/// Multiple run ids additionally produce the cross-run averaged report.
ReportPaths write_report_for_runs(const RunConfig& config,
                                  std::vector<std::string> run_ids);

struct CacheWarmStats {
  std::size_t texts = 0;
  std::size_t images = 0;
};

/// Embeds every question (test and train) and every manifest frame into the
/// cache.
CacheWarmStats cache_warm(const RunConfig& config);

/// Builds and saves the exemplar index; returns the file's content hash.
std::string build_exemplar_index_file(const RunConfig& config);

// CLI entry points (exit codes: 0 ok, 1 usage/config, 2 backend
// unreachable, 3 partial failures present).
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace vidpipe
