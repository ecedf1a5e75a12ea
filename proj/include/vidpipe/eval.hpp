#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vidpipe/backends.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

/// Judge prompt pair; the user template takes {question}, {gold} and
/// {prediction}, each exactly once.
struct JudgeTemplate {
  std::string system;
  std::string user;

  static JudgeTemplate defaults();
  static JudgeTemplate load(const std::filesystem::path& system_path,
                            const std::filesystem::path& user_path);
  void validate() const;
};

struct JudgeVerdict {
  std::string qa_id;
  bool correct = false;
  int score = 0;  // 0..5
  std::string raw_judge_output;
};

/// Grades a prediction against gold: sends the judge prompt, expects a
/// strict JSON object {"pred":"yes"|"no","score":0..5}, and retries once
/// with a repair instruction before raising JudgeParseError.
JudgeVerdict judge(const QAItem& qa, const std::string& predicted,
                   ChatClient& judge_backend, const JudgeTemplate& tmpl,
                   const ChatParams& params = {});

/// Parses a judge reply; throws JudgeParseError when it is not the strict
/// verdict object.
JudgeVerdict parse_judge_reply(const std::string& qa_id, const std::string& reply);

struct RunSummary {
  std::string run_id;
  QAMode mode = QAMode::Global;
  std::size_t n = 0;
  double accuracy = 0.0;    // in [0,1]
  double mean_score = 0.0;  // in [0,5]
};

RunSummary aggregate(const std::vector<JudgeVerdict>& verdicts, QAMode mode);

struct RunAverage {
  QAMode mode = QAMode::Global;
  std::size_t run_count = 0;
  double accuracy = 0.0;
  double mean_score = 0.0;
};

/// Unweighted arithmetic mean across runs of one mode.
RunAverage average_runs(const std::vector<RunSummary>& summaries);

// Display formatting. Full precision always lives in the machine report;
// these only shape human-facing strings. Percentages round half-up to one
// decimal, scores to two; the truncated rendering (toward zero) is emitted
// alongside because some published tables truncate instead.
std::string format_percent_display(double fraction);
std::string format_score_display(double score);
std::string format_score_truncated(double score);

struct AblationFlags {
  bool cot = true;
  bool cfs = true;
  bool icl = true;
  bool qffe_backend_flag = false;  // metadata only: backend fine-tuning label
  bool arbitration = true;
};

struct ArbitrationStats {
  std::size_t total = 0;
  std::size_t selected_image = 0;
  std::size_t selected_video = 0;
};

struct ReportInput {
  std::string run_id;
  AblationFlags flags;
  std::vector<RunSummary> summaries;  // at most one per mode for a single run
  ArbitrationStats arbitration;
  std::size_t judge_parse_errors = 0;
  std::size_t item_errors = 0;
  std::vector<std::string> notes;
};

struct ReportDocs {
  std::string machine_json;
  std::string human_markdown;
};

ReportDocs render_report(const ReportInput& input);

/// Cross-run report: per-run rows plus the per-mode averaged row, with both
/// display renderings next to the full-precision values.
ReportDocs render_multi_run_report(const std::vector<ReportInput>& runs);

/// Writes both documents; regeneration from identical inputs is
/// byte-identical.
void emit_report(const ReportDocs& docs, const std::filesystem::path& json_path,
                 const std::filesystem::path& markdown_path);

}  // namespace vidpipe
