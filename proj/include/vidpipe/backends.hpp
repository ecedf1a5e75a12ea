#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vidpipe/core.hpp"
#include "vidpipe/error.hpp"

namespace vidpipe {

enum class BackendRole { TextEmbed, ImageEmbed, ChatVideo, ChatImage, Judge };

const char* to_string(BackendRole role);
BackendRole backend_role_from_string(const std::string& s);

/// Name of the environment variable holding this role's bearer token
/// (e.g. VIDPIPE_TOKEN_JUDGE).
std::string token_env_var(BackendRole role);

struct BackendEndpoint {
  BackendRole role = BackendRole::TextEmbed;
  std::string base_url;
  std::string model_id;
  double timeout_s = 30.0;
  int max_retries = 2;
  int max_batch = 16;
  // Advertised input limit of the backend's text encoder, in characters.
  // 0 means unlimited. Used by the arbiter to pre-truncate long answers.
  int max_input_chars = 0;
};

enum class MessageRole { System, User, Assistant };

const char* to_string(MessageRole role);

struct MessagePart {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string text;   // Kind::Text
  FrameRef frame;     // Kind::Image
};

MessagePart text_part(std::string text);
MessagePart image_part(FrameRef frame);

struct ChatMessage {
  MessageRole role = MessageRole::User;
  std::vector<MessagePart> parts;
};

ChatMessage text_message(MessageRole role, std::string text);

/// Parts non-empty; assistant messages are text-only.
void validate_message(const ChatMessage& message);

struct ChatParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed = 0;  // fixed seed by default, for replay
};

/// Content address of one embedding: hash over model id plus the exact
/// content bytes (images) or normalized text.
struct CacheKey {
  std::string digest;  // hex SHA-256, fixed length
};

/// Text normalization applied before hashing: CRLF -> LF, outer whitespace
/// trimmed. Embedding requests send the same normalized form.
std::string normalize_text(std::string_view text);

CacheKey cache_key_for_text(const std::string& model_id, std::string_view text);
CacheKey cache_key_for_image(const std::string& model_id, std::string_view content_bytes);

/// Reads FrameRef.source; throws BackendError naming the frame on failure.
std::string read_frame_bytes(const FrameRef& frame);

// ---------------------------------------------------------------------------
// Clients. Stateless from the caller's view and safe to share across workers.
// ---------------------------------------------------------------------------

class EmbedClient {
 public:
  virtual ~EmbedClient() = default;

  const BackendEndpoint& endpoint() const { return endpoint_; }

  /// One embedding per input, order preserved, chunked into wire batches of
  /// at most endpoint.max_batch.
  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts);
  std::vector<Embedding> embed_images(const std::vector<FrameRef>& frames);

  /// Health check; throws TransportError when the backend is unreachable.
  virtual void probe() {}

 protected:
  explicit EmbedClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  struct WireItem {
    bool is_image = false;
    std::string text;
    FrameRef frame;
  };

  // One wire call; batch size is already <= max_batch.
  virtual std::vector<Embedding> embed_wire(const std::vector<WireItem>& batch) = 0;

  BackendEndpoint endpoint_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;

  const BackendEndpoint& endpoint() const { return endpoint_; }

  /// Sends the full message history verbatim and returns the assistant text.
  std::string chat(const std::vector<ChatMessage>& messages, const ChatParams& params);

  virtual void probe() {}

 protected:
  explicit ChatClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  virtual std::string chat_wire(const std::vector<ChatMessage>& messages,
                                const ChatParams& params) = 0;

  BackendEndpoint endpoint_;
};

/// Retry schedule for transient HTTP failures (transport errors, 429, 5xx).
struct RetryPolicy {
  double initial_delay_s = 0.5;
  double factor = 2.0;
  double jitter = 0.2;  // +-20%
};

/// Builds a client from endpoint.base_url. http(s):// URLs get the
/// OpenAI-compatible wire client; mock:// URLs get the deterministic
/// in-process mock. base_dir anchors relative paths in mock URLs.
std::unique_ptr<EmbedClient> make_embed_client(
    const BackendEndpoint& endpoint,
    const std::filesystem::path& base_dir = {},
    const RetryPolicy& retry = {});

std::unique_ptr<ChatClient> make_chat_client(
    const BackendEndpoint& endpoint,
    const std::filesystem::path& base_dir = {},
    const RetryPolicy& retry = {});

// ---------------------------------------------------------------------------
// Deterministic mocks. Embeddings are pseudo-random unit vectors seeded by
// the content digest, so any process reproduces the same vector for the
// same (model_id, content). Chat replies come from a script table with a
// deterministic synthesized fallback.
// ---------------------------------------------------------------------------

Eigen::VectorXf mock_unit_vector(const std::string& digest_hex, int dim);

class MockEmbedClient final : public EmbedClient {
 public:
  MockEmbedClient(BackendEndpoint endpoint, int dim);

  int dim() const { return dim_; }
  std::int64_t wire_calls() const { return wire_calls_.load(); }

 protected:
  std::vector<Embedding> embed_wire(const std::vector<WireItem>& batch) override;

 private:
  int dim_;
  std::atomic<std::int64_t> wire_calls_{0};
};

struct ChatScript {
  // Lookup order: exact text of the last user message, then its digest,
  // then the first matching contains-rule, then judge comparison (when
  // enabled), then default_reply, then a synthesized digest reply.
  std::map<std::string, std::string> exact;
  std::map<std::string, std::string> exact_digest;
  std::vector<std::pair<std::string, std::string>> contains_rules;
  std::string default_reply;
  bool judge_compare = false;
  int delay_ms = 0;

  static ChatScript from_file(const std::filesystem::path& path);
};

/// Canonical text rendering of a message list (image parts appear as
/// content-digest placeholders); the prompt-hash domain of the mocks.
std::string render_messages(const std::vector<ChatMessage>& messages);
std::string last_user_text(const std::vector<ChatMessage>& messages);

class ScriptedChatClient final : public ChatClient {
 public:
  ScriptedChatClient(BackendEndpoint endpoint, ChatScript script);

  std::int64_t call_count() const { return call_count_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<std::vector<ChatMessage>> calls() const;

  /// Process-wide high-water mark of concurrent chat calls across every
  /// scripted client; lets tests observe the pipeline's in-flight bound.
  static int global_max_in_flight();
  static void reset_global_max_in_flight();

 protected:
  std::string chat_wire(const std::vector<ChatMessage>& messages,
                        const ChatParams& params) override;

 private:
  std::string resolve_reply(const std::vector<ChatMessage>& messages) const;

  ChatScript script_;
  std::atomic<std::int64_t> call_count_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex calls_mutex_;
  std::vector<std::vector<ChatMessage>> calls_;
};

/// Deterministic judge verdict used by the judge mock: extracts the
/// "Correct answer:" / "Predicted answer:" lines and grades by normalized
/// match, returning the strict JSON object the eval module expects.
std::string mock_judge_reply(const std::string& prompt_text);

}  // namespace vidpipe
