#include "vidpipe/backends.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <thread>

#include "vidpipe/util.hpp"

namespace vidpipe {

using nlohmann::json;

const char* to_string(BackendRole role) {
  switch (role) {
    case BackendRole::TextEmbed: return "text_embed";
    case BackendRole::ImageEmbed: return "image_embed";
    case BackendRole::ChatVideo: return "chat_video";
    case BackendRole::ChatImage: return "chat_image";
    case BackendRole::Judge: return "judge";
  }
  return "unknown";
}

BackendRole backend_role_from_string(const std::string& s) {
  if (s == "text_embed") return BackendRole::TextEmbed;
  if (s == "image_embed") return BackendRole::ImageEmbed;
  if (s == "chat_video") return BackendRole::ChatVideo;
  if (s == "chat_image") return BackendRole::ChatImage;
  if (s == "judge") return BackendRole::Judge;
  throw Error(ErrorCode::ConfigError, "unknown backend role '" + s + "'");
}

std::string token_env_var(BackendRole role) {
  std::string suffix = to_lower(to_string(role));
  for (char& c : suffix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return "VIDPIPE_TOKEN_" + suffix;
}

const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "unknown";
}

MessagePart text_part(std::string text) {
  MessagePart part;
  part.kind = MessagePart::Kind::Text;
  part.text = std::move(text);
  return part;
}

MessagePart image_part(FrameRef frame) {
  MessagePart part;
  part.kind = MessagePart::Kind::Image;
  part.frame = std::move(frame);
  return part;
}

ChatMessage text_message(MessageRole role, std::string text) {
  ChatMessage message;
  message.role = role;
  message.parts.push_back(text_part(std::move(text)));
  return message;
}

void validate_message(const ChatMessage& message) {
  if (message.parts.empty()) {
    throw Error(ErrorCode::Precondition, "chat message has no parts");
  }
  if (message.role == MessageRole::Assistant) {
    for (const auto& part : message.parts) {
      if (part.kind != MessagePart::Kind::Text) {
        throw Error(ErrorCode::Precondition, "assistant messages are text-only");
      }
    }
  }
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    out.push_back(text[i] == '\r' ? '\n' : text[i]);
  }
  return trim(out);
}

CacheKey cache_key_for_text(const std::string& model_id, std::string_view text) {
  std::string material = model_id;
  material.push_back('\0');
  material.push_back('T');
  material += normalize_text(text);
  return CacheKey{sha256_hex(material)};
}

CacheKey cache_key_for_image(const std::string& model_id, std::string_view content_bytes) {
  std::string material = model_id;
  material.push_back('\0');
  material.push_back('I');
  material.append(content_bytes.data(), content_bytes.size());
  return CacheKey{sha256_hex(material)};
}

std::string read_frame_bytes(const FrameRef& frame) {
  try {
    return read_file(frame.source);
  } catch (const Error&) {
    throw Error(ErrorCode::BackendError,
                "unreadable frame source '" + frame.source + "' (video " +
                    frame.video_id + ", frame " + std::to_string(frame.index) + ")");
  }
}

// ---------------------------------------------------------------------------
// EmbedClient / ChatClient shared behavior
// ---------------------------------------------------------------------------

std::vector<Embedding> EmbedClient::embed_texts(const std::vector<std::string>& texts) {
  if (endpoint_.role != BackendRole::TextEmbed) {
    throw Error(ErrorCode::Precondition,
                "embed_texts requires a text_embed endpoint, got " +
                    std::string(to_string(endpoint_.role)));
  }
  if (texts.empty()) {
    throw Error(ErrorCode::Precondition, "embed_texts: empty input");
  }
  std::vector<WireItem> items;
  items.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (normalize_text(texts[i]).empty()) {
      throw Error(ErrorCode::Precondition,
                  "embed_texts: input " + std::to_string(i) + " is empty");
    }
    WireItem item;
    item.is_image = false;
    item.text = texts[i];
    items.push_back(std::move(item));
  }

  std::vector<Embedding> out;
  out.reserve(items.size());
  const std::size_t batch = static_cast<std::size_t>(endpoint_.max_batch);
  for (std::size_t begin = 0; begin < items.size(); begin += batch) {
    const std::size_t end = std::min(items.size(), begin + batch);
    std::vector<WireItem> chunk(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                items.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<Embedding> part = embed_wire(chunk);
    if (part.size() != chunk.size()) {
      throw Error(ErrorCode::ProtocolError,
                  "embedding count mismatch: sent " + std::to_string(chunk.size()) +
                      ", got " + std::to_string(part.size()));
    }
    for (auto& emb : part) out.push_back(std::move(emb));
  }
  for (const auto& emb : out) {
    if (emb.dim() <= 0 || emb.dim() != out.front().dim()) {
      throw Error(ErrorCode::ProtocolError, "inconsistent embedding dimensions in response");
    }
    if (!emb.values.allFinite()) {
      throw Error(ErrorCode::ProtocolError, "non-finite embedding values in response");
    }
  }
  return out;
}

std::vector<Embedding> EmbedClient::embed_images(const std::vector<FrameRef>& frames) {
  if (endpoint_.role != BackendRole::ImageEmbed) {
    throw Error(ErrorCode::Precondition,
                "embed_images requires an image_embed endpoint, got " +
                    std::string(to_string(endpoint_.role)));
  }
  if (frames.empty()) {
    throw Error(ErrorCode::Precondition, "embed_images: empty input");
  }
  std::vector<Embedding> out;
  out.reserve(frames.size());
  const std::size_t batch = static_cast<std::size_t>(endpoint_.max_batch);
  for (std::size_t begin = 0; begin < frames.size(); begin += batch) {
    const std::size_t end = std::min(frames.size(), begin + batch);
    std::vector<WireItem> chunk;
    chunk.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      WireItem item;
      item.is_image = true;
      item.frame = frames[i];
      chunk.push_back(std::move(item));
    }
    std::vector<Embedding> part = embed_wire(chunk);
    if (part.size() != chunk.size()) {
      throw Error(ErrorCode::ProtocolError,
                  "embedding count mismatch: sent " + std::to_string(chunk.size()) +
                      ", got " + std::to_string(part.size()));
    }
    for (auto& emb : part) out.push_back(std::move(emb));
  }
  for (const auto& emb : out) {
    if (emb.dim() <= 0 || emb.dim() != out.front().dim()) {
      throw Error(ErrorCode::ProtocolError, "inconsistent embedding dimensions in response");
    }
    if (!emb.values.allFinite()) {
      throw Error(ErrorCode::ProtocolError, "non-finite embedding values in response");
    }
  }
  return out;
}

std::string ChatClient::chat(const std::vector<ChatMessage>& messages,
                             const ChatParams& params) {
  if (endpoint_.role != BackendRole::ChatVideo && endpoint_.role != BackendRole::ChatImage &&
      endpoint_.role != BackendRole::Judge) {
    throw Error(ErrorCode::Precondition,
                "chat requires a chat or judge endpoint, got " +
                    std::string(to_string(endpoint_.role)));
  }
  if (messages.empty()) {
    throw Error(ErrorCode::Precondition, "chat: empty message list");
  }
  for (const auto& message : messages) validate_message(message);
  return chat_wire(messages, params);
}

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

Eigen::VectorXf mock_unit_vector(const std::string& digest_hex, int dim) {
  std::uint64_t seed = 0;
  for (std::size_t i = 0; i < 16 && i < digest_hex.size(); ++i) {
    const char c = digest_hex[i];
    const std::uint64_t nibble =
        c >= 'a' ? static_cast<std::uint64_t>(c - 'a' + 10)
                 : (c >= 'A' ? static_cast<std::uint64_t>(c - 'A' + 10)
                             : static_cast<std::uint64_t>(c - '0'));
    seed = (seed << 4) | (nibble & 0xF);
  }
  Eigen::VectorXd values(dim);
  std::uint64_t state = seed;
  for (int i = 0; i < dim; ++i) values[i] = splitmix64_unit_interval(state);
  const double norm = values.norm();
  if (norm < kZeroNormThreshold) values[0] = 1.0;  // astronomically unlikely
  return (values / values.norm()).cast<float>();
}

MockEmbedClient::MockEmbedClient(BackendEndpoint endpoint, int dim)
    : EmbedClient(std::move(endpoint)), dim_(dim) {
  if (dim_ <= 0) throw Error(ErrorCode::ConfigError, "mock embedder dim must be positive");
}

std::vector<Embedding> MockEmbedClient::embed_wire(const std::vector<WireItem>& batch) {
  wire_calls_.fetch_add(1);
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (const auto& item : batch) {
    CacheKey key = item.is_image
                       ? cache_key_for_image(endpoint_.model_id, read_frame_bytes(item.frame))
                       : cache_key_for_text(endpoint_.model_id, item.text);
    out.push_back(Embedding{mock_unit_vector(key.digest, dim_), endpoint_.model_id});
  }
  return out;
}

ChatScript ChatScript::from_file(const std::filesystem::path& path) {
  ChatScript script;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError,
                "bad chat script '" + path.string() + "': " + e.what());
  }
  if (doc.contains("exact")) {
    for (const auto& [k, v] : doc.at("exact").items()) script.exact[k] = v.get<std::string>();
  }
  if (doc.contains("exact_digest")) {
    for (const auto& [k, v] : doc.at("exact_digest").items()) {
      script.exact_digest[k] = v.get<std::string>();
    }
  }
  if (doc.contains("rules")) {
    for (const auto& rule : doc.at("rules")) {
      script.contains_rules.emplace_back(rule.at("contains").get<std::string>(),
                                         rule.at("reply").get<std::string>());
    }
  }
  script.default_reply = doc.value("default", "");
  script.judge_compare = doc.value("judge_compare", false);
  script.delay_ms = doc.value("delay_ms", 0);
  return script;
}

std::string render_messages(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& message : messages) {
    out += to_string(message.role);
    out += ": ";
    for (const auto& part : message.parts) {
      if (part.kind == MessagePart::Kind::Text) {
        out += part.text;
      } else {
        out += "[image " + sha256_hex(read_frame_bytes(part.frame)).substr(0, 8) + "]";
      }
      out.push_back('\n');
    }
  }
  return out;
}

std::string last_user_text(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role != MessageRole::User) continue;
    std::string text;
    for (const auto& part : it->parts) {
      if (part.kind != MessagePart::Kind::Text) continue;
      if (!text.empty()) text.push_back('\n');
      text += part.text;
    }
    return text;
  }
  return {};
}

namespace {

std::string normalize_answer(std::string_view s) {
  std::string out = to_lower(trim(s));
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) {
    out.pop_back();
    out = trim(out);
  }
  return out;
}

std::optional<std::string> extract_marked_line(const std::string& text,
                                               const std::string& marker) {
  const std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return std::nullopt;
  const std::size_t begin = pos + marker.size();
  std::size_t end = text.find('\n', begin);
  if (end == std::string::npos) end = text.size();
  return trim(text.substr(begin, end - begin));
}

}  // namespace

std::string mock_judge_reply(const std::string& prompt_text) {
  const auto gold = extract_marked_line(prompt_text, "Correct answer:");
  const auto predicted = extract_marked_line(prompt_text, "Predicted answer:");
  json verdict;
  if (!gold || !predicted) {
    verdict["pred"] = "no";
    verdict["score"] = 0;
    return verdict.dump();
  }
  const std::string gold_norm = normalize_answer(*gold);
  const std::string pred_norm = normalize_answer(*predicted);
  const auto gold_tokens = tokenize_words(gold_norm);
  const auto pred_tokens = tokenize_words(pred_norm);
  auto contains_token = [&pred_tokens](const std::string& token) {
    return std::find(pred_tokens.begin(), pred_tokens.end(), token) != pred_tokens.end();
  };
  if (!gold_norm.empty() && gold_norm == pred_norm) {
    verdict["pred"] = "yes";
    verdict["score"] = 5;
  } else if (!gold_tokens.empty() &&
             std::all_of(gold_tokens.begin(), gold_tokens.end(), contains_token)) {
    verdict["pred"] = "yes";
    verdict["score"] = 4;
  } else if (std::any_of(gold_tokens.begin(), gold_tokens.end(), contains_token)) {
    verdict["pred"] = "no";
    verdict["score"] = 1;
  } else {
    verdict["pred"] = "no";
    verdict["score"] = 0;
  }
  return verdict.dump();
}

namespace {

std::atomic<int> g_chat_in_flight{0};
std::atomic<int> g_chat_max_in_flight{0};

void bump_global_in_flight() {
  const int now = g_chat_in_flight.fetch_add(1) + 1;
  int seen = g_chat_max_in_flight.load();
  while (now > seen && !g_chat_max_in_flight.compare_exchange_weak(seen, now)) {
  }
}

}  // namespace

int ScriptedChatClient::global_max_in_flight() { return g_chat_max_in_flight.load(); }

void ScriptedChatClient::reset_global_max_in_flight() {
  g_chat_max_in_flight.store(0);
}

ScriptedChatClient::ScriptedChatClient(BackendEndpoint endpoint, ChatScript script)
    : ChatClient(std::move(endpoint)), script_(std::move(script)) {}

std::vector<std::vector<ChatMessage>> ScriptedChatClient::calls() const {
  std::lock_guard<std::mutex> lock(calls_mutex_);
  return calls_;
}

std::string ScriptedChatClient::resolve_reply(const std::vector<ChatMessage>& messages) const {
  const std::string user_text = last_user_text(messages);
  if (auto it = script_.exact.find(user_text); it != script_.exact.end()) {
    return it->second;
  }
  if (!script_.exact_digest.empty()) {
    if (auto it = script_.exact_digest.find(sha256_hex(user_text));
        it != script_.exact_digest.end()) {
      return it->second;
    }
  }
  for (const auto& [needle, reply] : script_.contains_rules) {
    if (user_text.find(needle) != std::string::npos) return reply;
  }
  if (script_.judge_compare || endpoint_.role == BackendRole::Judge) {
    return mock_judge_reply(user_text);
  }
  if (!script_.default_reply.empty()) return script_.default_reply;
  return "reply-" + sha256_hex(render_messages(messages)).substr(0, 12);
}

std::string ScriptedChatClient::chat_wire(const std::vector<ChatMessage>& messages,
                                          const ChatParams& /*params*/) {
  call_count_.fetch_add(1);
  const int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  bump_global_in_flight();
  {
    std::lock_guard<std::mutex> lock(calls_mutex_);
    calls_.push_back(messages);
  }
  if (script_.delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(script_.delay_ms));
  }
  std::string reply = resolve_reply(messages);
  in_flight_.fetch_sub(1);
  g_chat_in_flight.fetch_sub(1);
  return reply;
}

}  // namespace vidpipe
