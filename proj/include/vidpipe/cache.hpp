#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "vidpipe/backends.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

/// Content-addressed embedding store: an append-only record log plus a side
/// index for fast open. Each record is (digest, dim, model_id, little-endian
/// float32 values, checksum); a torn tail from a crash is detected and
/// ignored, and the side index is rebuilt from the log when missing or
/// stale. Concurrent readers are safe; writes are serialized internally.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);
  ~EmbeddingCache();

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  /// Stored vector, bit-exact, or nullopt on miss. A record that fails its
  /// checksum (or does not match the requested digest) is evicted from the
  /// index and CacheCorrupt is thrown; the next lookup misses cleanly.
  std::optional<Embedding> get(const CacheKey& key);

  /// Appends the record. A digest already present is left untouched.
  void put(const CacheKey& key, const Embedding& value);

  bool contains(const CacheKey& key) const;
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void open_files();
  void load_index();
  std::uint64_t append_record(const CacheKey& key, const Embedding& value);

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  std::filesystem::path idx_path_;
  int fd_ = -1;

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::uint64_t> index_;  // digest hex -> log offset
};

// Cache-through embedding lookups. On a miss the backend is called, the
// result stored, and returned; hits perform zero wire requests. CacheCorrupt
// propagates after evicting the bad entry, so an immediate retry re-fetches.
Embedding get_or_embed_text(EmbeddingCache& cache, EmbedClient& client,
                            const std::string& text);
Embedding get_or_embed_image(EmbeddingCache& cache, EmbedClient& client,
                             const FrameRef& frame);
std::vector<Embedding> get_or_embed_texts(EmbeddingCache& cache, EmbedClient& client,
                                          const std::vector<std::string>& texts);
std::vector<Embedding> get_or_embed_images(EmbeddingCache& cache, EmbedClient& client,
                                           const std::vector<FrameRef>& frames);

}  // namespace vidpipe
