#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidpipe/cache.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

/// Exemplar store for in-context prompting: every training question paired
/// with its gold answer and question embedding. Immutable after build;
/// lookups are exact linear scans (pools are small).
struct ExemplarIndex {
  struct Entry {
    QAItem item;          // gold_answer always present
    Embedding embedding;  // of item.question
  };

  std::vector<Entry> entries;
  std::string embed_model_id;
  Eigen::Index dim = 0;
};

/// Embeds every training question through the cache. Items must carry gold
/// answers (MissingGoldAnswer names the offender).
ExemplarIndex build_index(const std::vector<QAItem>& train_items,
                          EmbedClient& text_backend, EmbeddingCache& cache);

/// Top-k entries by question cosine similarity, ties by ascending entry
/// position. Entries from exclude_video are dropped before ranking;
/// EmptyPool when nothing remains.
std::vector<QAItem> retrieve(const ExemplarIndex& index, const std::string& question,
                             std::size_t k, const std::optional<std::string>& exclude_video,
                             EmbedClient& text_backend, EmbeddingCache& cache);

// Single-file persistence: versioned magic, a JSON header line
// (embed_model_id, dim, count), then per entry a QAItem JSON line followed
// by the raw little-endian float32 vector. Round-trips bit-exactly.
void save_index(const ExemplarIndex& index, const std::filesystem::path& path);
ExemplarIndex load_index(const std::filesystem::path& path);

}  // namespace vidpipe
