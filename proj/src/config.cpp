#include "vidpipe/config.hpp"

#include <nlohmann/json.hpp>

#include "vidpipe/util.hpp"

namespace vidpipe {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::ConfigError, path + ": " + why);
}

const json* maybe(const json& doc, const std::string& key) {
  auto it = doc.find(key);
  return it == doc.end() || it->is_null() ? nullptr : &*it;
}

std::string require_string(const json& doc, const std::string& key,
                           const std::string& where) {
  const json* field = maybe(doc, key);
  if (field == nullptr) fail(where + "." + key, "missing");
  if (!field->is_string()) fail(where + "." + key, "must be a string");
  const std::string value = field->get<std::string>();
  if (trim(value).empty()) fail(where + "." + key, "must be non-empty");
  return value;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& raw) {
  std::filesystem::path path(raw);
  return path.is_relative() ? base / path : path;
}

BackendEndpoint parse_endpoint(const json& doc, BackendRole role, const std::string& where) {
  BackendEndpoint endpoint;
  endpoint.role = role;
  endpoint.base_url = require_string(doc, "base_url", where);
  endpoint.model_id = require_string(doc, "model_id", where);
  endpoint.timeout_s = doc.value("timeout_s", 30.0);
  endpoint.max_retries = doc.value("max_retries", 2);
  endpoint.max_batch = doc.value("max_batch", 16);
  endpoint.max_input_chars = doc.value("max_input_chars", 0);
  if (endpoint.timeout_s <= 0) fail(where + ".timeout_s", "must be positive");
  if (endpoint.max_retries < 0) fail(where + ".max_retries", "must be >= 0");
  if (endpoint.max_batch < 1) fail(where + ".max_batch", "must be >= 1");
  try {
    (void)parse_url(endpoint.base_url);
  } catch (const Error& e) {
    fail(where + ".base_url", e.what());
  }
  return endpoint;
}

}  // namespace

const BackendEndpoint& RunConfig::endpoint(BackendRole role) const {
  auto it = backends.find(role);
  if (it == backends.end()) {
    throw Error(ErrorCode::ConfigError,
                std::string("backends.") + to_string(role) + ": missing");
  }
  return it->second;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::ConfigError, path.string() + ": config must be a JSON object");
  }

  RunConfig config;
  config.base_dir = std::filesystem::absolute(path).parent_path();

  const json* dataset = maybe(doc, "dataset");
  if (dataset == nullptr) fail("dataset", "missing");
  config.qa_file = resolve(config.base_dir, require_string(*dataset, "qa_file", "dataset"));
  config.manifest_dir =
      resolve(config.base_dir, require_string(*dataset, "manifest_dir", "dataset"));
  if (const json* train = maybe(*dataset, "train_qa_file")) {
    config.train_qa_file = resolve(config.base_dir, train->get<std::string>());
  }

  if (const json* sampler = maybe(doc, "sampler")) {
    config.sampler.target_frames = sampler->value("target_frames", std::size_t{96});
    config.sampler.breakpoint_window =
        sampler->value("breakpoint_window", std::size_t{16});
  }
  if (config.sampler.target_frames < 2) fail("sampler.target_frames", "must be >= 2");
  if (config.sampler.breakpoint_window < 1) fail("sampler.breakpoint_window", "must be >= 1");

  if (const json* retrieval = maybe(doc, "retrieval")) {
    config.retrieval.k = retrieval->value("k", std::size_t{1});
    config.retrieval.exclude_same_video = retrieval->value("exclude_same_video", true);
    if (config.retrieval.k < 1) fail("retrieval.k", "must be >= 1");
  }

  if (const json* arbiter = maybe(doc, "arbiter")) {
    try {
      config.pooling = clip_pooling_from_string(arbiter->value("pooling", "mean"));
    } catch (const Error& e) {
      fail("arbiter.pooling", e.what());
    }
  }

  if (const json* templates = maybe(doc, "templates")) {
    const auto describe = resolve(config.base_dir, require_string(*templates, "describe", "templates"));
    const auto answer = resolve(config.base_dir, require_string(*templates, "answer", "templates"));
    const auto exemplar = resolve(config.base_dir, require_string(*templates, "exemplar", "templates"));
    try {
      config.prompt_template = PromptTemplate::load(describe, answer, exemplar);
    } catch (const Error& e) {
      fail("templates", e.what());
    }
    if (maybe(*templates, "judge_system") != nullptr || maybe(*templates, "judge_user") != nullptr) {
      const auto judge_system =
          resolve(config.base_dir, require_string(*templates, "judge_system", "templates"));
      const auto judge_user =
          resolve(config.base_dir, require_string(*templates, "judge_user", "templates"));
      try {
        config.judge_template = JudgeTemplate::load(judge_system, judge_user);
      } catch (const Error& e) {
        fail("templates", e.what());
      }
    } else {
      config.judge_template = JudgeTemplate::defaults();
    }
  } else {
    config.prompt_template = PromptTemplate::defaults();
    config.judge_template = JudgeTemplate::defaults();
  }

  const json* backends = maybe(doc, "backends");
  if (backends == nullptr) fail("backends", "missing");
  for (const auto& [key, value] : backends->items()) {
    BackendRole role;
    try {
      role = backend_role_from_string(key);
    } catch (const Error&) {
      fail("backends." + key, "unknown role");
    }
    config.backends[role] = parse_endpoint(value, role, "backends." + key);
  }

  if (const json* ablation = maybe(doc, "ablation")) {
    config.flags.cot = ablation->value("cot", true);
    config.flags.cfs = ablation->value("cfs", true);
    config.flags.icl = ablation->value("icl", true);
    config.flags.qffe_backend_flag = ablation->value("qffe_backend_flag", false);
    config.flags.arbitration = ablation->value("arbitration", true);
  }

  config.concurrency = doc.value("concurrency", std::size_t{4});
  if (config.concurrency < 1) fail("concurrency", "must be >= 1");
  config.run_id = doc.value("run_id", std::string("run"));
  if (trim(config.run_id).empty()) fail("run_id", "must be non-empty");

  config.output_dir = resolve(config.base_dir, require_string(doc, "output_dir", "(root)"));
  config.cache_dir = resolve(config.base_dir, require_string(doc, "cache_dir", "(root)"));
  if (const json* index_file = maybe(doc, "index_file")) {
    config.index_file = resolve(config.base_dir, index_file->get<std::string>());
  }

  if (const json* chat = maybe(doc, "chat")) {
    config.chat_params.temperature = chat->value("temperature", 0.0);
    config.chat_params.max_tokens = chat->value("max_tokens", 512);
    if (chat->contains("seed") && !chat->at("seed").is_null()) {
      config.chat_params.seed = chat->at("seed").get<std::int64_t>();
    }
  }

  return config;
}

void validate_run_config(const RunConfig& config) {
  if (!std::filesystem::is_regular_file(config.qa_file)) {
    fail("dataset.qa_file", "'" + config.qa_file.string() + "' does not exist");
  }
  if (!std::filesystem::is_directory(config.manifest_dir)) {
    fail("dataset.manifest_dir", "'" + config.manifest_dir.string() + "' does not exist");
  }
  for (BackendRole role : {BackendRole::TextEmbed, BackendRole::ImageEmbed,
                           BackendRole::ChatVideo, BackendRole::Judge}) {
    if (!config.has_endpoint(role)) {
      fail(std::string("backends.") + to_string(role), "missing");
    }
  }
  if (config.flags.arbitration && !config.has_endpoint(BackendRole::ChatImage)) {
    fail("backends.chat_image", "required when ablation.arbitration is on");
  }
  if (config.flags.icl) {
    if (config.train_qa_file.empty()) {
      fail("dataset.train_qa_file", "required when ablation.icl is on");
    }
    if (!std::filesystem::is_regular_file(config.train_qa_file)) {
      fail("dataset.train_qa_file",
           "'" + config.train_qa_file.string() + "' does not exist");
    }
    if (config.index_file.empty()) {
      fail("index_file", "required when ablation.icl is on");
    }
  }
}

}  // namespace vidpipe
