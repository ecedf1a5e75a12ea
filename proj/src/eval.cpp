#include "vidpipe/eval.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

#include "vidpipe/util.hpp"

namespace vidpipe {

using nlohmann::json;

namespace {

constexpr const char* kRepairInstruction =
    "Your previous reply was not a valid verdict. Reply with exactly one JSON "
    "object of the form {\"pred\":\"yes\"|\"no\",\"score\":0-5} and nothing else.";

std::string replace_once(std::string text, const std::string& slot,
                         const std::string& value) {
  const std::size_t pos = text.find(slot);
  if (pos == std::string::npos) {
    throw Error(ErrorCode::TemplateError, "judge template missing slot " + slot);
  }
  text.replace(pos, slot.size(), value);
  if (text.find(slot) != std::string::npos) {
    throw Error(ErrorCode::TemplateError, "judge template repeats slot " + slot);
  }
  return text;
}

}  // namespace

JudgeTemplate JudgeTemplate::defaults() {
  JudgeTemplate tmpl;
  tmpl.system =
      "You grade answers to questions about videos. Compare the predicted answer "
      "with the correct answer for the question. Decide whether the prediction is "
      "correct (it must convey the same meaning; wording may differ) and assign an "
      "integer quality score from 0 (completely wrong) to 5 (perfect). Reply with "
      "exactly one JSON object of the form {\"pred\":\"yes\"|\"no\",\"score\":0-5} "
      "and nothing else.";
  tmpl.user =
      "Question: {question}\n"
      "Correct answer: {gold}\n"
      "Predicted answer: {prediction}\n"
      "Return the JSON verdict now.";
  tmpl.validate();
  return tmpl;
}

JudgeTemplate JudgeTemplate::load(const std::filesystem::path& system_path,
                                  const std::filesystem::path& user_path) {
  JudgeTemplate tmpl;
  tmpl.system = read_file(system_path);
  tmpl.user = read_file(user_path);
  tmpl.validate();
  return tmpl;
}

void JudgeTemplate::validate() const {
  if (trim(system).empty()) {
    throw Error(ErrorCode::TemplateError, "judge system prompt is empty");
  }
  for (const char* slot : {"{question}", "{gold}", "{prediction}"}) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = user.find(slot, pos)) != std::string::npos) {
      ++count;
      pos += std::string(slot).size();
    }
    if (count != 1) {
      throw Error(ErrorCode::TemplateError,
                  std::string("judge user template needs slot ") + slot + " exactly once");
    }
  }
}

JudgeVerdict parse_judge_reply(const std::string& qa_id, const std::string& reply) {
  json doc;
  try {
    doc = json::parse(trim(reply));
  } catch (const json::exception&) {
    throw Error(ErrorCode::JudgeParseError,
                "item '" + qa_id + "': judge reply is not JSON: " + reply.substr(0, 200));
  }
  if (!doc.is_object() || !doc.contains("pred") || !doc.contains("score")) {
    throw Error(ErrorCode::JudgeParseError,
                "item '" + qa_id + "': judge reply missing pred/score");
  }
  if (!doc.at("pred").is_string()) {
    throw Error(ErrorCode::JudgeParseError, "item '" + qa_id + "': pred is not a string");
  }
  const std::string pred = to_lower(doc.at("pred").get<std::string>());
  if (pred != "yes" && pred != "no") {
    throw Error(ErrorCode::JudgeParseError,
                "item '" + qa_id + "': pred must be yes or no, got '" + pred + "'");
  }
  const auto& score_field = doc.at("score");
  double score_value = 0.0;
  if (score_field.is_number()) {
    score_value = score_field.get<double>();
  } else {
    throw Error(ErrorCode::JudgeParseError, "item '" + qa_id + "': score is not a number");
  }
  if (score_value != std::floor(score_value) || score_value < 0 || score_value > 5) {
    throw Error(ErrorCode::JudgeParseError,
                "item '" + qa_id + "': score must be an integer in 0..5");
  }
  JudgeVerdict verdict;
  verdict.qa_id = qa_id;
  verdict.correct = pred == "yes";
  verdict.score = static_cast<int>(score_value);
  verdict.raw_judge_output = reply;
  return verdict;
}

JudgeVerdict judge(const QAItem& qa, const std::string& predicted,
                   ChatClient& judge_backend, const JudgeTemplate& tmpl,
                   const ChatParams& params) {
  if (judge_backend.endpoint().role != BackendRole::Judge) {
    throw Error(ErrorCode::Precondition, "judge requires a judge-role backend");
  }
  if (!qa.gold_answer) {
    throw Error(ErrorCode::MissingGoldAnswer, "item '" + qa.id + "' has no gold answer");
  }
  std::string user_text = replace_once(tmpl.user, "{question}", qa.question);
  user_text = replace_once(user_text, "{gold}", *qa.gold_answer);
  user_text = replace_once(user_text, "{prediction}", predicted);

  std::vector<ChatMessage> messages;
  messages.push_back(text_message(MessageRole::System, tmpl.system));
  messages.push_back(text_message(MessageRole::User, user_text));

  const std::string reply = judge_backend.chat(messages, params);
  try {
    return parse_judge_reply(qa.id, reply);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::JudgeParseError) throw;
  }
  // One repair round with the malformed reply in history.
  messages.push_back(text_message(MessageRole::Assistant, reply));
  messages.push_back(text_message(MessageRole::User, kRepairInstruction));
  return parse_judge_reply(qa.id, judge_backend.chat(messages, params));
}

RunSummary aggregate(const std::vector<JudgeVerdict>& verdicts, QAMode mode) {
  if (verdicts.empty()) {
    throw Error(ErrorCode::EmptyRun, "no verdicts to aggregate");
  }
  RunSummary summary;
  summary.mode = mode;
  summary.n = verdicts.size();
  std::size_t correct = 0;
  double score_sum = 0.0;
  for (const auto& verdict : verdicts) {
    correct += verdict.correct ? 1 : 0;
    score_sum += verdict.score;
  }
  summary.accuracy = static_cast<double>(correct) / static_cast<double>(verdicts.size());
  summary.mean_score = score_sum / static_cast<double>(verdicts.size());
  return summary;
}

RunAverage average_runs(const std::vector<RunSummary>& summaries) {
  if (summaries.empty()) {
    throw Error(ErrorCode::EmptyRun, "no run summaries to average");
  }
  RunAverage avg;
  avg.mode = summaries.front().mode;
  avg.run_count = summaries.size();
  double acc_sum = 0.0;
  double score_sum = 0.0;
  for (const auto& summary : summaries) {
    if (summary.mode != avg.mode) {
      throw Error(ErrorCode::MixedModes, "run summaries mix global and breakpoint modes");
    }
    acc_sum += summary.accuracy;
    score_sum += summary.mean_score;
  }
  avg.accuracy = acc_sum / static_cast<double>(summaries.size());
  avg.mean_score = score_sum / static_cast<double>(summaries.size());
  return avg;
}

namespace {

std::string fixed_decimal(long long scaled, int decimals) {
  long long ipart = scaled;
  long long fpart = 0;
  long long scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  ipart = scaled / scale;
  fpart = scaled % scale;
  char buf[64];
  if (decimals > 0) {
    std::snprintf(buf, sizeof(buf), "%lld.%0*lld", ipart, decimals, fpart);
  } else {
    std::snprintf(buf, sizeof(buf), "%lld", ipart);
  }
  return buf;
}

long long scale_round_half_up(double value, int decimals) {
  double scale = 1.0;
  for (int i = 0; i < decimals; ++i) scale *= 10.0;
  return static_cast<long long>(std::floor(value * scale + 0.5 + 1e-9));
}

long long scale_truncate(double value, int decimals) {
  double scale = 1.0;
  for (int i = 0; i < decimals; ++i) scale *= 10.0;
  return static_cast<long long>(std::floor(value * scale + 1e-9));
}

}  // namespace

std::string format_percent_display(double fraction) {
  return fixed_decimal(scale_round_half_up(fraction * 100.0, 1), 1) + "%";
}

std::string format_score_display(double score) {
  return fixed_decimal(scale_round_half_up(score, 2), 2);
}

std::string format_score_truncated(double score) {
  return fixed_decimal(scale_truncate(score, 2), 2);
}

namespace {

json flags_to_json(const AblationFlags& flags) {
  return json{{"cot", flags.cot},
              {"cfs", flags.cfs},
              {"icl", flags.icl},
              {"qffe_backend_flag", flags.qffe_backend_flag},
              {"arbitration", flags.arbitration}};
}

json summary_to_json(const RunSummary& summary) {
  return json{{"n", summary.n},
              {"accuracy", summary.accuracy},
              {"accuracy_display", format_percent_display(summary.accuracy)},
              {"mean_score", summary.mean_score},
              {"mean_score_display", format_score_display(summary.mean_score)},
              {"mean_score_display_truncated", format_score_truncated(summary.mean_score)}};
}

std::string flags_line(const AblationFlags& flags) {
  auto mark = [](bool b) { return b ? "on" : "off"; };
  std::string line;
  line += "CoT ";
  line += mark(flags.cot);
  line += ", CFS ";
  line += mark(flags.cfs);
  line += ", ICL ";
  line += mark(flags.icl);
  line += ", arbitration ";
  line += mark(flags.arbitration);
  line += ", QFFE-tuned backend ";
  line += mark(flags.qffe_backend_flag);
  return line;
}

}  // namespace

ReportDocs render_report(const ReportInput& input) {
  if (input.summaries.empty()) {
    throw Error(ErrorCode::EmptyRun, "report needs at least one run summary");
  }
  json machine;
  machine["run_id"] = input.run_id;
  machine["flags"] = flags_to_json(input.flags);
  json modes = json::object();
  for (const auto& summary : input.summaries) {
    modes[to_string(summary.mode)] = summary_to_json(summary);
  }
  machine["modes"] = std::move(modes);
  machine["arbitration"] = json{{"total", input.arbitration.total},
                                {"selected_image", input.arbitration.selected_image},
                                {"selected_video", input.arbitration.selected_video}};
  machine["judge_parse_errors"] = input.judge_parse_errors;
  machine["item_errors"] = input.item_errors;
  machine["notes"] = input.notes;

  std::string md;
  md += "# Run report: " + input.run_id + "\n\n";
  md += "Flags: " + flags_line(input.flags) + "\n\n";
  md += "| Mode | N | Accuracy | Score |\n";
  md += "|------|---|----------|-------|\n";
  for (const auto& summary : input.summaries) {
    md += "| " + std::string(to_string(summary.mode)) + " | " + std::to_string(summary.n) +
          " | " + format_percent_display(summary.accuracy) + " | " +
          format_score_display(summary.mean_score) + " |\n";
  }
  md += "\n";
  if (input.arbitration.total > 0) {
    md += "Arbitration: " + std::to_string(input.arbitration.total) + " items, image answer chosen " +
          std::to_string(input.arbitration.selected_image) + ", video answer chosen " +
          std::to_string(input.arbitration.selected_video) + ".\n\n";
  }
  if (input.judge_parse_errors > 0) {
    md += "Judge parse errors (excluded from aggregation): " +
          std::to_string(input.judge_parse_errors) + "\n\n";
  }
  if (input.item_errors > 0) {
    md += "Items failed with errors: " + std::to_string(input.item_errors) + "\n\n";
  }
  for (const auto& note : input.notes) {
    md += "Note: " + note + "\n";
  }

  ReportDocs docs;
  docs.machine_json = machine.dump(2) + "\n";
  docs.human_markdown = std::move(md);
  return docs;
}

ReportDocs render_multi_run_report(const std::vector<ReportInput>& runs) {
  if (runs.empty()) {
    throw Error(ErrorCode::EmptyRun, "multi-run report needs at least one run");
  }
  json machine;
  json run_ids = json::array();
  for (const auto& run : runs) run_ids.push_back(run.run_id);
  machine["runs"] = std::move(run_ids);

  std::string md;
  md += "# Multi-run report\n\n";

  json modes = json::object();
  for (QAMode mode : {QAMode::Global, QAMode::Breakpoint}) {
    std::vector<RunSummary> per_mode;
    for (const auto& run : runs) {
      for (const auto& summary : run.summaries) {
        if (summary.mode == mode) {
          RunSummary named = summary;
          named.run_id = run.run_id;
          per_mode.push_back(std::move(named));
        }
      }
    }
    if (per_mode.empty()) continue;
    const RunAverage avg = average_runs(per_mode);

    json rows = json::array();
    for (const auto& summary : per_mode) {
      json row = summary_to_json(summary);
      row["run_id"] = summary.run_id;
      rows.push_back(std::move(row));
    }
    json mode_doc;
    mode_doc["per_run"] = std::move(rows);
    mode_doc["average"] = json{
        {"runs", avg.run_count},
        {"accuracy", avg.accuracy},
        {"accuracy_display", format_percent_display(avg.accuracy)},
        {"mean_score", avg.mean_score},
        {"mean_score_display", format_score_display(avg.mean_score)},
        {"mean_score_display_truncated", format_score_truncated(avg.mean_score)}};
    modes[to_string(mode)] = std::move(mode_doc);

    md += "## ";
    md += to_string(mode);
    md += "\n\n| Run | N | Accuracy | Score |\n|-----|---|----------|-------|\n";
    for (const auto& summary : per_mode) {
      md += "| " + summary.run_id + " | " + std::to_string(summary.n) + " | " +
            format_percent_display(summary.accuracy) + " | " +
            format_score_display(summary.mean_score) + " |\n";
    }
    md += "| Avg | - | " + format_percent_display(avg.accuracy) + " | " +
          format_score_display(avg.mean_score) + " |\n\n";
  }
  machine["modes"] = std::move(modes);

  ReportDocs docs;
  docs.machine_json = machine.dump(2) + "\n";
  docs.human_markdown = std::move(md);
  return docs;
}

void emit_report(const ReportDocs& docs, const std::filesystem::path& json_path,
                 const std::filesystem::path& markdown_path) {
  write_file_atomic(json_path, docs.machine_json);
  write_file_atomic(markdown_path, docs.human_markdown);
}

}  // namespace vidpipe
