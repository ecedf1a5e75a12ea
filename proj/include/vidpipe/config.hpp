#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "vidpipe/arbiter.hpp"
#include "vidpipe/backends.hpp"
#include "vidpipe/dialogue.hpp"
#include "vidpipe/eval.hpp"
#include "vidpipe/sampler.hpp"

namespace vidpipe {

struct RetrievalConfig {
  std::size_t k = 1;
  bool exclude_same_video = true;
};

/// Everything one run needs. Loaded from a JSON config file; relative paths
/// resolve against the config file's directory. Validation reports precise
/// field paths (e.g. "backends.judge.base_url: missing").
struct RunConfig {
  std::filesystem::path base_dir;  // config file directory

  std::filesystem::path qa_file;
  std::filesystem::path train_qa_file;  // required when icl is on
  std::filesystem::path manifest_dir;

  SamplerConfig sampler;
  RetrievalConfig retrieval;
  ClipPooling pooling = ClipPooling::Mean;

  PromptTemplate prompt_template;
  JudgeTemplate judge_template;

  std::map<BackendRole, BackendEndpoint> backends;

  AblationFlags flags;
  std::size_t concurrency = 4;
  std::string run_id = "run";
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  std::filesystem::path index_file;  // exemplar index location

  ChatParams chat_params;

  std::filesystem::path run_dir() const { return output_dir / run_id; }

  const BackendEndpoint& endpoint(BackendRole role) const;
  bool has_endpoint(BackendRole role) const { return backends.count(role) > 0; }
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Structural and path-existence checks beyond parsing; ConfigError with
/// the offending field path.
void validate_run_config(const RunConfig& config);

}  // namespace vidpipe
