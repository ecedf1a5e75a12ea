#include "vidpipe/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "vidpipe/arbiter.hpp"
#include "vidpipe/cache.hpp"
#include "vidpipe/dataset.hpp"
#include "vidpipe/dialogue.hpp"
#include "vidpipe/eval.hpp"
#include "vidpipe/json_io.hpp"
#include "vidpipe/retrieval.hpp"
#include "vidpipe/sampler.hpp"
#include "vidpipe/util.hpp"

namespace vidpipe {

using nlohmann::json;

namespace {

struct Clients {
  std::unique_ptr<EmbedClient> text_embed;
  std::unique_ptr<EmbedClient> image_embed;
  std::unique_ptr<ChatClient> chat_video;
  std::unique_ptr<ChatClient> chat_image;
  std::unique_ptr<ChatClient> judge;
};

Clients build_clients(const RunConfig& config, bool with_chat, bool with_judge) {
  Clients clients;
  clients.text_embed =
      make_embed_client(config.endpoint(BackendRole::TextEmbed), config.base_dir);
  clients.image_embed =
      make_embed_client(config.endpoint(BackendRole::ImageEmbed), config.base_dir);
  if (with_chat) {
    clients.chat_video =
        make_chat_client(config.endpoint(BackendRole::ChatVideo), config.base_dir);
    if (config.has_endpoint(BackendRole::ChatImage)) {
      clients.chat_image =
          make_chat_client(config.endpoint(BackendRole::ChatImage), config.base_dir);
    }
  }
  if (with_judge) {
    clients.judge = make_chat_client(config.endpoint(BackendRole::Judge), config.base_dir);
  }
  return clients;
}

void probe_clients(const Clients& clients) {
  if (clients.text_embed) clients.text_embed->probe();
  if (clients.image_embed) clients.image_embed->probe();
  if (clients.chat_video) clients.chat_video->probe();
  if (clients.chat_image) clients.chat_image->probe();
  if (clients.judge) clients.judge->probe();
}

json flags_json(const AblationFlags& flags) {
  return json{{"cot", flags.cot},
              {"cfs", flags.cfs},
              {"icl", flags.icl},
              {"qffe_backend_flag", flags.qffe_backend_flag},
              {"arbitration", flags.arbitration}};
}

json header_json(const RunConfig& config, const std::string& run_id) {
  json models = json::object();
  for (const auto& [role, endpoint] : config.backends) {
    models[to_string(role)] = endpoint.model_id;
  }
  return json{{"type", "header"},
              {"run_id", run_id},
              {"flags", flags_json(config.flags)},
              {"models", std::move(models)},
              {"sampler",
               {{"target_frames", config.sampler.target_frames},
                {"breakpoint_window", config.sampler.breakpoint_window}}},
              {"retrieval",
               {{"k", config.retrieval.k},
                {"exclude_same_video", config.retrieval.exclude_same_video}}},
              {"pooling", to_string(config.pooling)}};
}

json arbitration_to_json(const ArbitrationRecord& record) {
  return json{{"a1", candidate_answer_to_json(record.a1)},
              {"a2", candidate_answer_to_json(record.a2)},
              {"selected", record.selected == SelectedAnswer::A1 ? "a1" : "a2"},
              {"clip_indices", record.clip_indices}};
}

/// Keeps the results log in dataset order regardless of worker completion
/// order, so identical runs produce identical bytes.
class OrderedLogWriter {
 public:
  explicit OrderedLogWriter(std::ofstream out) : out_(std::move(out)) {}

  void deposit(std::size_t seq, std::string line) {
    std::lock_guard<std::mutex> lock(mutex_);
    pending_.emplace(seq, std::move(line));
    while (!pending_.empty() && pending_.begin()->first == next_) {
      out_ << pending_.begin()->second;
      out_.flush();
      pending_.erase(pending_.begin());
      ++next_;
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, std::string> pending_;
  std::size_t next_ = 0;
  std::ofstream out_;
};

json process_item(const RunConfig& config, const Dataset& dataset,
                  const ExemplarIndex* index, const Clients& clients,
                  EmbeddingCache& cache, const std::filesystem::path& transcripts_dir,
                  const QAItem& qa) {
  json line;
  line["type"] = "result";
  line["qa_id"] = qa.id;
  line["mode"] = to_string(qa.mode);
  try {
    const VideoManifest& manifest = dataset.manifests.at(qa.video_id);

    std::vector<QAItem> exemplars;
    if (config.flags.icl && index != nullptr) {
      std::optional<std::string> exclude;
      if (config.retrieval.exclude_same_video) exclude = qa.video_id;
      try {
        exemplars = retrieve(*index, qa.question, config.retrieval.k, exclude,
                             *clients.text_embed, cache);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyPool) throw;
      }
    }
    json exemplar_ids = json::array();
    for (const auto& exemplar : exemplars) exemplar_ids.push_back(exemplar.id);
    line["exemplar_ids"] = std::move(exemplar_ids);

    DialogueOptions dialogue_options;
    dialogue_options.chain_of_thought = config.flags.cot;
    dialogue_options.params = config.chat_params;

    DialogueResult video_result;
    std::optional<DialogueResult> image_result;
    std::optional<ArbitrationRecord> arbitration;
    std::string prediction;

    if (qa.mode == QAMode::Global) {
      const std::vector<FrameRef> frames =
          config.flags.cfs
              ? sample_frames(manifest, qa.question, config.sampler,
                              *clients.text_embed, *clients.image_embed, cache)
              : uniform_frames(manifest.frames, config.sampler.target_frames);
      video_result = run_cot(qa, frames, exemplars, *clients.chat_video,
                             config.prompt_template, dialogue_options);
      prediction = video_result.answer;
    } else {
      const std::vector<FrameRef> window =
          clip_window(manifest, *qa.breakpoint_index, config.sampler.breakpoint_window);
      const std::vector<FrameRef> frames =
          config.flags.cfs
              ? sample_breakpoint_frames(manifest, *qa.breakpoint_index, qa.question,
                                         config.sampler, *clients.text_embed,
                                         *clients.image_embed, cache)
              : uniform_frames(window, config.sampler.target_frames);
      video_result = run_cot(qa, frames, exemplars, *clients.chat_video,
                             config.prompt_template, dialogue_options);
      prediction = video_result.answer;

      if (config.flags.arbitration) {
        // The image model sees only the breakpoint frame.
        const std::vector<FrameRef> breakpoint_frame = {
            manifest.frames[*qa.breakpoint_index]};
        image_result = run_cot(qa, breakpoint_frame, exemplars, *clients.chat_image,
                               config.prompt_template, dialogue_options);
        ArbiterConfig arbiter_config;
        arbiter_config.pooling = config.pooling;
        arbiter_config.breakpoint_window = config.sampler.breakpoint_window;
        arbitration = arbitrate(qa, *image_result, video_result, manifest,
                                arbiter_config, *clients.text_embed,
                                *clients.image_embed, cache);
        prediction = arbitration->chosen().text;
        line["image_frame_index"] = *qa.breakpoint_index;
      }
    }

    line["frame_indices"] = video_result.frame_indices;
    line["prediction"] = prediction;
    if (arbitration) line["arbitration"] = arbitration_to_json(*arbitration);

    json transcript_doc;
    transcript_doc["video"] = messages_to_json(video_result.transcript);
    if (image_result) transcript_doc["image"] = messages_to_json(image_result->transcript);
    const std::string transcript_dump = transcript_doc.dump(2) + "\n";
    line["transcript_digest"] = sha256_hex(transcript_dump);
    write_file_atomic(transcripts_dir / (qa.id + ".json"), transcript_dump);

    if (qa.gold_answer) {
      try {
        const JudgeVerdict verdict = judge(qa, prediction, *clients.judge,
                                           config.judge_template, config.chat_params);
        line["verdict"] = json{{"correct", verdict.correct},
                               {"score", verdict.score},
                               {"raw", verdict.raw_judge_output}};
      } catch (const Error& e) {
        if (e.code() != ErrorCode::JudgeParseError) throw;
        line["judge_error"] = e.what();
      }
    }
  } catch (const Error& e) {
    line["error"] = json{{"code", to_string(e.code())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    line["error"] = json{{"code", "Unknown"}, {"message", e.what()}};
  }
  return line;
}

struct LogContents {
  json header;
  std::vector<json> results;
};

LogContents read_results_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open results log '" + path.string() + "'");
  }
  LogContents contents;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, "results log line " + std::to_string(line_no) +
                                          " is not JSON: " + e.what());
    }
    const std::string type = doc.value("type", "");
    if (type == "header") {
      contents.header = std::move(doc);
    } else if (type == "result") {
      contents.results.push_back(std::move(doc));
    }
  }
  return contents;
}

struct LogStats {
  std::vector<JudgeVerdict> global_verdicts;
  std::vector<JudgeVerdict> breakpoint_verdicts;
  ArbitrationStats arbitration;
  std::size_t judge_parse_errors = 0;
  std::size_t item_errors = 0;
};

LogStats collect_stats(const LogContents& contents) {
  LogStats stats;
  for (const auto& line : contents.results) {
    if (line.contains("error")) {
      ++stats.item_errors;
      continue;
    }
    if (line.contains("judge_error")) ++stats.judge_parse_errors;
    if (line.contains("arbitration")) {
      ++stats.arbitration.total;
      if (line.at("arbitration").at("selected").get<std::string>() == "a1") {
        ++stats.arbitration.selected_image;
      } else {
        ++stats.arbitration.selected_video;
      }
    }
    if (line.contains("verdict")) {
      JudgeVerdict verdict;
      verdict.qa_id = line.at("qa_id").get<std::string>();
      verdict.correct = line.at("verdict").at("correct").get<bool>();
      verdict.score = line.at("verdict").at("score").get<int>();
      if (line.at("mode").get<std::string>() == "global") {
        stats.global_verdicts.push_back(std::move(verdict));
      } else {
        stats.breakpoint_verdicts.push_back(std::move(verdict));
      }
    }
  }
  return stats;
}

ReportInput report_input_from_log(const std::string& run_id, const AblationFlags& flags,
                                  const LogStats& stats) {
  ReportInput input;
  input.run_id = run_id;
  input.flags = flags;
  if (!stats.global_verdicts.empty()) {
    RunSummary summary = aggregate(stats.global_verdicts, QAMode::Global);
    summary.run_id = run_id;
    input.summaries.push_back(std::move(summary));
  }
  if (!stats.breakpoint_verdicts.empty()) {
    RunSummary summary = aggregate(stats.breakpoint_verdicts, QAMode::Breakpoint);
    summary.run_id = run_id;
    input.summaries.push_back(std::move(summary));
  }
  input.arbitration = stats.arbitration;
  input.judge_parse_errors = stats.judge_parse_errors;
  input.item_errors = stats.item_errors;
  if (stats.judge_parse_errors > 0) {
    input.notes.push_back(std::to_string(stats.judge_parse_errors) +
                          " item(s) excluded from aggregation due to judge parse errors");
  }
  return input;
}

AblationFlags flags_from_header(const json& header) {
  AblationFlags flags;
  if (!header.is_object() || !header.contains("flags")) return flags;
  const json& doc = header.at("flags");
  flags.cot = doc.value("cot", true);
  flags.cfs = doc.value("cfs", true);
  flags.icl = doc.value("icl", true);
  flags.qffe_backend_flag = doc.value("qffe_backend_flag", false);
  flags.arbitration = doc.value("arbitration", true);
  return flags;
}

ExemplarIndex load_or_build_index(const RunConfig& config, Clients& clients,
                                  EmbeddingCache& cache) {
  if (std::filesystem::is_regular_file(config.index_file)) {
    ExemplarIndex index = load_index(config.index_file);
    const std::string& expected = config.endpoint(BackendRole::TextEmbed).model_id;
    if (index.embed_model_id != expected) {
      throw Error(ErrorCode::ConfigError,
                  "index_file: exemplar index was built with model '" +
                      index.embed_model_id + "', config uses '" + expected + "'");
    }
    return index;
  }
  const std::vector<QAItem> train_items = load_qa_file(config.train_qa_file);
  ExemplarIndex index = build_index(train_items, *clients.text_embed, cache);
  save_index(index, config.index_file);
  return index;
}

}  // namespace

PipelineOutcome run_pipeline(const RunConfig& config, const RunOptions& options) {
  validate_run_config(config);
  const std::string run_id = options.run_id.value_or(config.run_id);

  const Dataset dataset = ingest_dataset(config.qa_file, config.manifest_dir);
  Clients clients = build_clients(config, /*with_chat=*/true, /*with_judge=*/true);
  probe_clients(clients);

  EmbeddingCache cache(config.cache_dir);
  ExemplarIndex index;
  if (config.flags.icl) {
    index = load_or_build_index(config, clients, cache);
  }

  const std::filesystem::path run_dir = config.output_dir / run_id;
  const std::filesystem::path transcripts_dir = run_dir / "transcripts";
  std::filesystem::create_directories(transcripts_dir);
  const std::filesystem::path results_path = run_dir / "results.jsonl";

  const json header = header_json(config, run_id);
  std::set<std::string> done_ids;
  if (options.resume && std::filesystem::exists(results_path)) {
    const LogContents existing = read_results_log(results_path);
    if (!existing.header.is_object() || existing.header != header) {
      throw Error(ErrorCode::ConfigError,
                  "results log at '" + results_path.string() +
                      "' was produced with a different configuration; refusing to resume");
    }
    for (const auto& line : existing.results) {
      done_ids.insert(line.at("qa_id").get<std::string>());
    }
  }

  std::vector<const QAItem*> worklist;
  for (const auto& item : dataset.items) {
    if (done_ids.count(item.id) == 0) worklist.push_back(&item);
  }
  const std::size_t skipped = dataset.items.size() - worklist.size();
  if (options.limit && worklist.size() > *options.limit) {
    worklist.resize(*options.limit);
  }

  std::ofstream out;
  if (options.resume && std::filesystem::exists(results_path) && !done_ids.empty()) {
    out.open(results_path, std::ios::app);
  } else {
    out.open(results_path, std::ios::trunc);
    out << header.dump() << "\n";
    out.flush();
  }
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot open '" + results_path.string() + "' for write");
  }
  OrderedLogWriter writer(std::move(out));

  const ExemplarIndex* index_ptr = config.flags.icl ? &index : nullptr;
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= worklist.size()) break;
      json line = process_item(config, dataset, index_ptr, clients, cache,
                               transcripts_dir, *worklist[i]);
      writer.deposit(i, line.dump() + "\n");
    }
  };
  const std::size_t worker_count =
      std::max<std::size_t>(1, std::min(config.concurrency, worklist.size()));
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (std::size_t i = 0; i < worker_count; ++i) workers.emplace_back(worker);
  for (auto& thread : workers) thread.join();

  PipelineOutcome outcome;
  outcome.processed = worklist.size();
  outcome.skipped = skipped;
  outcome.results_path = results_path;

  const LogContents final_log = read_results_log(results_path);
  const LogStats stats = collect_stats(final_log);
  outcome.item_errors = stats.item_errors;
  outcome.judge_parse_errors = stats.judge_parse_errors;

  if (!stats.global_verdicts.empty() || !stats.breakpoint_verdicts.empty()) {
    const ReportInput input = report_input_from_log(run_id, config.flags, stats);
    const ReportDocs docs = render_report(input);
    outcome.report_json_path = run_dir / "report.json";
    outcome.report_markdown_path = run_dir / "report.md";
    emit_report(docs, outcome.report_json_path, outcome.report_markdown_path);
  }
  return outcome;
}

PipelineOutcome evaluate_log(const RunConfig& config, const std::string& run_id) {
  validate_run_config(config);
  const std::filesystem::path run_dir = config.output_dir / run_id;
  const std::filesystem::path results_path = run_dir / "results.jsonl";
  LogContents contents = read_results_log(results_path);

  const Dataset dataset = ingest_dataset(config.qa_file, config.manifest_dir);
  std::map<std::string, const QAItem*> items_by_id;
  for (const auto& item : dataset.items) items_by_id[item.id] = &item;

  Clients clients = build_clients(config, /*with_chat=*/false, /*with_judge=*/true);
  clients.judge->probe();

  for (auto& line : contents.results) {
    if (line.contains("error") || !line.contains("prediction")) continue;
    auto it = items_by_id.find(line.at("qa_id").get<std::string>());
    if (it == items_by_id.end() || !it->second->gold_answer) continue;
    line.erase("verdict");
    line.erase("judge_error");
    try {
      const JudgeVerdict verdict =
          judge(*it->second, line.at("prediction").get<std::string>(), *clients.judge,
                config.judge_template, config.chat_params);
      line["verdict"] = json{{"correct", verdict.correct},
                             {"score", verdict.score},
                             {"raw", verdict.raw_judge_output}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::JudgeParseError) throw;
      line["judge_error"] = e.what();
    }
  }

  std::string blob = contents.header.dump() + "\n";
  for (const auto& line : contents.results) blob += line.dump() + "\n";
  write_file_atomic(results_path, blob);

  const LogStats stats = collect_stats(contents);
  PipelineOutcome outcome;
  outcome.processed = contents.results.size();
  outcome.results_path = results_path;
  outcome.item_errors = stats.item_errors;
  outcome.judge_parse_errors = stats.judge_parse_errors;
  if (!stats.global_verdicts.empty() || !stats.breakpoint_verdicts.empty()) {
    const ReportInput input =
        report_input_from_log(run_id, flags_from_header(contents.header), stats);
    const ReportDocs docs = render_report(input);
    outcome.report_json_path = run_dir / "report.json";
    outcome.report_markdown_path = run_dir / "report.md";
    emit_report(docs, outcome.report_json_path, outcome.report_markdown_path);
  }
  return outcome;
}

ReportPaths write_report_for_runs(const RunConfig& config,
                                  std::vector<std::string> run_ids) {
  if (run_ids.empty()) run_ids.push_back(config.run_id);

  ReportPaths paths;
  std::vector<ReportInput> inputs;
  for (const auto& run_id : run_ids) {
    const std::filesystem::path run_dir = config.output_dir / run_id;
    const LogContents contents = read_results_log(run_dir / "results.jsonl");
    if (contents.results.empty()) {
      throw Error(ErrorCode::EmptyRun, "results log for run '" + run_id + "' has no results");
    }
    const LogStats stats = collect_stats(contents);
    const ReportInput input =
        report_input_from_log(run_id, flags_from_header(contents.header), stats);
    const ReportDocs docs = render_report(input);
    const auto json_path = run_dir / "report.json";
    const auto md_path = run_dir / "report.md";
    emit_report(docs, json_path, md_path);
    paths.json_paths.push_back(json_path);
    paths.markdown_paths.push_back(md_path);
    inputs.push_back(input);
  }

  if (inputs.size() > 1) {
    const ReportDocs docs = render_multi_run_report(inputs);
    const auto json_path = config.output_dir / "report-multi.json";
    const auto md_path = config.output_dir / "report-multi.md";
    emit_report(docs, json_path, md_path);
    paths.json_paths.push_back(json_path);
    paths.markdown_paths.push_back(md_path);
  }
  return paths;
}

CacheWarmStats cache_warm(const RunConfig& config) {
  validate_run_config(config);
  const Dataset dataset = ingest_dataset(config.qa_file, config.manifest_dir);
  Clients clients = build_clients(config, /*with_chat=*/false, /*with_judge=*/false);
  clients.text_embed->probe();
  clients.image_embed->probe();
  EmbeddingCache cache(config.cache_dir);

  CacheWarmStats stats;
  std::vector<std::string> questions;
  for (const auto& item : dataset.items) questions.push_back(item.question);
  if (config.flags.icl && std::filesystem::is_regular_file(config.train_qa_file)) {
    for (const auto& item : load_qa_file(config.train_qa_file)) {
      questions.push_back(item.question);
    }
  }
  if (!questions.empty()) {
    get_or_embed_texts(cache, *clients.text_embed, questions);
    stats.texts = questions.size();
  }
  for (const auto& [video_id, manifest] : dataset.manifests) {
    get_or_embed_images(cache, *clients.image_embed, manifest.frames);
    stats.images += manifest.frame_count();
  }
  return stats;
}

std::string build_exemplar_index_file(const RunConfig& config) {
  if (config.train_qa_file.empty() || config.index_file.empty()) {
    throw Error(ErrorCode::ConfigError,
                "dataset.train_qa_file and index_file are required to build an index");
  }
  const std::vector<QAItem> train_items = load_qa_file(config.train_qa_file);
  Clients clients = build_clients(config, /*with_chat=*/false, /*with_judge=*/false);
  clients.text_embed->probe();
  EmbeddingCache cache(config.cache_dir);
  const ExemplarIndex index = build_index(train_items, *clients.text_embed, cache);
  save_index(index, config.index_file);
  return sha256_hex(read_file(config.index_file));
}

}  // namespace vidpipe
