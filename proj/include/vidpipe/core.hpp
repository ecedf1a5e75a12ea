#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vidpipe/error.hpp"

namespace vidpipe {

// Norms below this are treated as degenerate backend output, not signal.
inline constexpr double kZeroNormThreshold = 1e-12;

/// Fixed-dimension vector produced by one embedding model. Values are kept
/// at the precision the backend returned (float32); no renormalization.
struct Embedding {
  Eigen::VectorXf values;
  std::string model_id;

  Eigen::Index dim() const { return values.size(); }
};

struct FrameRef {
  std::string video_id;
  std::size_t index = 0;       // 0-based frame position
  double timestamp_s = 0.0;
  std::string source;          // path or URL of the extracted frame image
};

struct VideoManifest {
  std::string video_id;
  double fps = 0.0;
  std::vector<FrameRef> frames;  // indices exactly 0..frame_count-1, in order

  std::size_t frame_count() const { return frames.size(); }
};

enum class QAMode { Global, Breakpoint };

const char* to_string(QAMode mode);
QAMode qa_mode_from_string(const std::string& s);

struct QAItem {
  std::string id;
  std::string video_id;
  std::string question;
  QAMode mode = QAMode::Global;
  std::optional<std::size_t> breakpoint_index;  // Breakpoint mode only
  std::optional<std::string> gold_answer;
};

enum class AnswerSource { VideoModel, ImageModel };

const char* to_string(AnswerSource source);

struct CandidateAnswer {
  std::string text;
  AnswerSource source = AnswerSource::VideoModel;
  std::optional<double> clip_similarity;  // in [-1, 1] when present
};

/// Cosine similarity of two embeddings, accumulated in double precision.
/// Throws DimensionMismatch when dims differ, ZeroVector when either norm
/// is below kZeroNormThreshold.
double cosine_similarity(const Embedding& a, const Embedding& b);

inline std::string key_to_string(const std::string& key) { return key; }
inline std::string key_to_string(std::size_t key) { return std::to_string(key); }
inline std::string key_to_string(int key) { return std::to_string(key); }

/// Scores every pool entry against the query and returns (key, score) pairs
/// sorted by descending score, ties broken by ascending key. ZeroVector
/// errors name the offending pool key.
template <typename Key>
std::vector<std::pair<Key, double>> rank_by_similarity(
    const Embedding& query, const std::vector<std::pair<Key, Embedding>>& pool) {
  std::vector<std::pair<Key, double>> ranked;
  ranked.reserve(pool.size());
  for (const auto& [key, emb] : pool) {
    double score;
    try {
      score = cosine_similarity(query, emb);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroVector) {
        throw Error(ErrorCode::ZeroVector,
                    "degenerate embedding for pool key '" + key_to_string(key) + "'");
      }
      throw;
    }
    ranked.emplace_back(key, score);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& lhs, const auto& rhs) {
                     if (lhs.second != rhs.second) return lhs.second > rhs.second;
                     return lhs.first < rhs.first;
                   });
  return ranked;
}

}  // namespace vidpipe
