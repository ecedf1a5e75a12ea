// OpenAI-compatible wire clients. Embeddings go to {base}/embeddings as
// {"model","input":[...]} (images as base64 data URLs); chat goes to
// {base}/chat/completions with the full message history.

// Eigen must precede httplib: resolv.h (pulled in by httplib) defines a
// _res macro that collides with Eigen internals.
#include "vidpipe/backends.hpp"
#include "vidpipe/util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

namespace vidpipe {

using nlohmann::json;

namespace {

struct HttpTarget {
  std::string origin;      // scheme://host[:port]
  std::string path_prefix; // leading path of base_url, no trailing slash
};

HttpTarget http_target(const std::string& base_url) {
  const ParsedUrl url = parse_url(base_url);
  if (url.scheme != "http" && url.scheme != "https") {
    throw Error(ErrorCode::ConfigError, "expected http(s) URL, got '" + base_url + "'");
  }
  HttpTarget target;
  target.origin = url.scheme + "://" + url.host;
  if (url.port != 0) target.origin += ":" + std::to_string(url.port);
  target.path_prefix = url.path;
  return target;
}

std::string bearer_token(BackendRole role) {
  const char* token = std::getenv(token_env_var(role).c_str());
  return token == nullptr ? std::string() : std::string(token);
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

double jittered_delay(const RetryPolicy& policy, int attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double base = policy.initial_delay_s * std::pow(policy.factor, attempt);
  return base * (1.0 + policy.jitter * unit(rng));
}

std::string mime_for(const std::string& source) {
  const std::size_t dot = source.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : to_lower(source.substr(dot + 1));
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  if (ext == "bmp") return "image/bmp";
  return "application/octet-stream";
}

std::string data_url(const FrameRef& frame) {
  const std::string bytes = read_frame_bytes(frame);
  return "data:" + mime_for(frame.source) + ";base64," + base64_encode(bytes);
}

/// POST with the spec retry schedule. Retries transport errors and
/// 429/5xx; other non-2xx statuses raise BackendError immediately.
json post_json(const BackendEndpoint& endpoint, const RetryPolicy& policy,
               const std::string& api_path, const json& body) {
  const HttpTarget target = http_target(endpoint.base_url);
  const std::string path = target.path_prefix + api_path;
  const std::string payload = body.dump();
  const std::string token = bearer_token(endpoint.role);

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::duration<double>(jittered_delay(policy, attempt - 1)));
    }
    httplib::Client client(target.origin);
    client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_write_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    auto result = client.Post(path, headers, payload, "application/json");
    if (!result) {
      last_error = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 200 && result->status < 300) {
      try {
        return json::parse(result->body);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ProtocolError,
                    std::string("malformed JSON response: ") + e.what());
      }
    }
    if (retryable_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status) + " from " + path;
      continue;
    }
    throw Error(ErrorCode::BackendError,
                "HTTP " + std::to_string(result->status) + " from " + path + ": " +
                    result->body.substr(0, 512));
  }
  if (last_error.rfind("HTTP ", 0) == 0) {
    throw Error(ErrorCode::BackendError, last_error + " (retries exhausted)");
  }
  throw Error(ErrorCode::TransportError, last_error + " (retries exhausted)");
}

void probe_http(const BackendEndpoint& endpoint) {
  const HttpTarget target = http_target(endpoint.base_url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
  client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));
  auto result = client.Get(target.path_prefix + "/models");
  if (!result) {
    throw Error(ErrorCode::TransportError,
                "backend '" + endpoint.base_url + "' unreachable: " +
                    httplib::to_string(result.error()));
  }
}

class HttpEmbedClient final : public EmbedClient {
 public:
  HttpEmbedClient(BackendEndpoint endpoint, RetryPolicy retry)
      : EmbedClient(std::move(endpoint)), retry_(retry) {}

  void probe() override { probe_http(endpoint_); }

 protected:
  std::vector<Embedding> embed_wire(const std::vector<WireItem>& batch) override {
    json input = json::array();
    for (const auto& item : batch) {
      input.push_back(item.is_image ? data_url(item.frame) : normalize_text(item.text));
    }
    json body;
    body["model"] = endpoint_.model_id;
    body["input"] = std::move(input);

    const json reply = post_json(endpoint_, retry_, "/embeddings", body);
    if (!reply.is_object() || !reply.contains("data") || !reply.at("data").is_array()) {
      throw Error(ErrorCode::ProtocolError, "embeddings response missing data array");
    }
    std::vector<Embedding> out(batch.size());
    std::vector<bool> seen(batch.size(), false);
    for (const auto& row : reply.at("data")) {
      if (!row.contains("index") || !row.contains("embedding")) {
        throw Error(ErrorCode::ProtocolError, "embeddings row missing index/embedding");
      }
      const std::size_t index = row.at("index").get<std::size_t>();
      if (index >= batch.size() || seen[index]) {
        throw Error(ErrorCode::ProtocolError, "embeddings row has bad index");
      }
      const auto& vec = row.at("embedding");
      if (!vec.is_array() || vec.empty()) {
        throw Error(ErrorCode::ProtocolError, "embedding is not a non-empty array");
      }
      Eigen::VectorXf values(static_cast<Eigen::Index>(vec.size()));
      for (std::size_t i = 0; i < vec.size(); ++i) {
        values[static_cast<Eigen::Index>(i)] = vec.at(i).get<float>();
      }
      out[index] = Embedding{std::move(values), endpoint_.model_id};
      seen[index] = true;
    }
    for (bool s : seen) {
      if (!s) throw Error(ErrorCode::ProtocolError, "embeddings response is incomplete");
    }
    return out;
  }

 private:
  RetryPolicy retry_;
};

class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(BackendEndpoint endpoint, RetryPolicy retry)
      : ChatClient(std::move(endpoint)), retry_(retry) {}

  void probe() override { probe_http(endpoint_); }

 protected:
  std::string chat_wire(const std::vector<ChatMessage>& messages,
                        const ChatParams& params) override {
    json body;
    body["model"] = endpoint_.model_id;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (params.seed) body["seed"] = *params.seed;
    json wire_messages = json::array();
    for (const auto& message : messages) {
      json content = json::array();
      for (const auto& part : message.parts) {
        if (part.kind == MessagePart::Kind::Text) {
          content.push_back({{"type", "text"}, {"text", part.text}});
        } else {
          content.push_back(
              {{"type", "image_url"}, {"image_url", {{"url", data_url(part.frame)}}}});
        }
      }
      wire_messages.push_back({{"role", to_string(message.role)}, {"content", std::move(content)}});
    }
    body["messages"] = std::move(wire_messages);

    const json reply = post_json(endpoint_, retry_, "/chat/completions", body);
    try {
      const auto& message = reply.at("choices").at(0).at("message");
      const auto& content = message.at("content");
      if (content.is_string()) return content.get<std::string>();
      if (content.is_array()) {
        std::string text;
        for (const auto& part : content) {
          if (part.value("type", "") == "text") text += part.value("text", "");
        }
        return text;
      }
      throw Error(ErrorCode::ProtocolError, "chat response content has unexpected type");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolError,
                  std::string("chat response missing choices[0].message.content: ") + e.what());
    }
  }

 private:
  RetryPolicy retry_;
};

std::filesystem::path resolve_script_path(const std::string& raw,
                                          const std::filesystem::path& base_dir) {
  std::filesystem::path path(raw);
  if (path.is_relative() && !base_dir.empty()) return base_dir / path;
  return path;
}

}  // namespace

std::unique_ptr<EmbedClient> make_embed_client(const BackendEndpoint& endpoint,
                                               const std::filesystem::path& base_dir,
                                               const RetryPolicy& retry) {
  const ParsedUrl url = parse_url(endpoint.base_url);
  if (url.scheme == "mock") {
    int dim = 32;
    const std::string dim_str = url.query_value("dim", "32");
    try {
      dim = std::stoi(dim_str);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad dim in mock URL '" + endpoint.base_url + "'");
    }
    (void)base_dir;
    return std::make_unique<MockEmbedClient>(endpoint, dim);
  }
  if (url.scheme == "http" || url.scheme == "https") {
    return std::make_unique<HttpEmbedClient>(endpoint, retry);
  }
  throw Error(ErrorCode::ConfigError,
              "unsupported URL scheme '" + url.scheme + "' for embed backend");
}

std::unique_ptr<ChatClient> make_chat_client(const BackendEndpoint& endpoint,
                                             const std::filesystem::path& base_dir,
                                             const RetryPolicy& retry) {
  const ParsedUrl url = parse_url(endpoint.base_url);
  if (url.scheme == "mock") {
    ChatScript script;
    const std::string script_path = url.query_value("script");
    if (!script_path.empty()) {
      script = ChatScript::from_file(resolve_script_path(script_path, base_dir));
    }
    const std::string delay = url.query_value("delay_ms");
    if (!delay.empty()) script.delay_ms = std::stoi(delay);
    return std::make_unique<ScriptedChatClient>(endpoint, std::move(script));
  }
  if (url.scheme == "http" || url.scheme == "https") {
    return std::make_unique<HttpChatClient>(endpoint, retry);
  }
  throw Error(ErrorCode::ConfigError,
              "unsupported URL scheme '" + url.scheme + "' for chat backend");
}

}  // namespace vidpipe
