#include "vidpipe/sampler.hpp"

#include <algorithm>

namespace vidpipe {

namespace {

// Shared core of the plain and windowed paths: question-guided selection of
// `target` frames from `pool`, returned in ascending pool order.
std::vector<FrameRef> select_from_pool(const std::vector<FrameRef>& pool,
                                       const std::string& video_id,
                                       const std::string& question, std::size_t target,
                                       EmbedClient& text_backend,
                                       EmbedClient& image_backend, EmbeddingCache& cache) {
  const std::size_t pool_size = pool.size();
  if (target > pool_size) {
    throw Error(ErrorCode::InsufficientFrames,
                "need " + std::to_string(target) + " frames, pool has " +
                    std::to_string(pool_size));
  }
  if (target == pool_size) return pool;  // selection is forced, no scoring

  const std::size_t n_uniform = (target + 1) / 2;
  const std::vector<std::size_t> uniform = uniform_sample(pool_size, n_uniform);
  const std::set<std::size_t> uniform_set(uniform.begin(), uniform.end());

  std::vector<FrameRef> rest;
  std::vector<std::size_t> rest_positions;
  rest.reserve(pool_size - uniform_set.size());
  for (std::size_t i = 0; i < pool_size; ++i) {
    if (uniform_set.count(i) == 0) {
      rest.push_back(pool[i]);
      rest_positions.push_back(i);
    }
  }

  const Embedding question_emb = get_or_embed_text(cache, text_backend, question);
  const std::vector<Embedding> frame_embs = get_or_embed_images(cache, image_backend, rest);

  ScoreTable table;
  table.video_id = video_id;
  table.scores.assign(pool_size, 0.0);
  for (std::size_t j = 0; j < rest.size(); ++j) {
    table.scores[rest_positions[j]] = cosine_similarity(question_emb, frame_embs[j]);
  }

  const std::vector<std::size_t> relevant =
      relevance_sample(table, target - uniform.size(), uniform_set);

  std::vector<std::size_t> merged = uniform;
  merged.insert(merged.end(), relevant.begin(), relevant.end());
  std::sort(merged.begin(), merged.end());

  std::vector<FrameRef> selected;
  selected.reserve(merged.size());
  for (std::size_t i : merged) selected.push_back(pool[i]);
  return selected;
}

}  // namespace

std::vector<std::size_t> uniform_sample(std::size_t frame_count, std::size_t n) {
  if (n == 0) {
    throw Error(ErrorCode::Precondition, "uniform_sample: n must be positive");
  }
  if (n > frame_count) {
    throw Error(ErrorCode::InsufficientFrames,
                "uniform_sample: n=" + std::to_string(n) + " exceeds frame count " +
                    std::to_string(frame_count));
  }
  std::vector<std::size_t> indices;
  indices.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    indices.push_back(j * frame_count / n);  // floor; stride >= 1 so no dupes
  }
  return indices;
}

std::vector<std::size_t> relevance_sample(const ScoreTable& scores, std::size_t n,
                                          const std::set<std::size_t>& excluded) {
  if (n == 0) {
    throw Error(ErrorCode::Precondition, "relevance_sample: n must be positive");
  }
  std::vector<std::size_t> allowed;
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    if (excluded.count(i) == 0) allowed.push_back(i);
  }
  if (n > allowed.size()) {
    throw Error(ErrorCode::InsufficientFrames,
                "relevance_sample: n=" + std::to_string(n) + " exceeds " +
                    std::to_string(allowed.size()) + " allowed frames");
  }
  std::sort(allowed.begin(), allowed.end(), [&scores](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return a < b;
  });
  allowed.resize(n);
  std::sort(allowed.begin(), allowed.end());
  return allowed;
}

std::vector<FrameRef> sample_frames(const VideoManifest& manifest,
                                    const std::string& question,
                                    const SamplerConfig& config, EmbedClient& text_backend,
                                    EmbedClient& image_backend, EmbeddingCache& cache) {
  return select_from_pool(manifest.frames, manifest.video_id, question,
                          config.target_frames, text_backend, image_backend, cache);
}

std::vector<FrameRef> clip_window(const VideoManifest& manifest,
                                  std::size_t breakpoint_index, std::size_t window) {
  const std::size_t frame_count = manifest.frame_count();
  if (breakpoint_index >= frame_count) {
    throw Error(ErrorCode::IndexOutOfRange,
                "breakpoint " + std::to_string(breakpoint_index) + " >= frame count " +
                    std::to_string(frame_count));
  }
  if (window == 0) {
    throw Error(ErrorCode::Precondition, "clip_window: window must be positive");
  }
  if (window >= frame_count) return manifest.frames;

  const std::size_t half = window / 2;
  const std::size_t lo = breakpoint_index > half ? breakpoint_index - half : 0;
  const std::size_t hi =
      std::min(frame_count - 1, breakpoint_index + (window + 1) / 2 - 1);
  return {manifest.frames.begin() + static_cast<std::ptrdiff_t>(lo),
          manifest.frames.begin() + static_cast<std::ptrdiff_t>(hi + 1)};
}

std::vector<FrameRef> sample_breakpoint_frames(const VideoManifest& manifest,
                                               std::size_t breakpoint_index,
                                               const std::string& question,
                                               const SamplerConfig& config,
                                               EmbedClient& text_backend,
                                               EmbedClient& image_backend,
                                               EmbeddingCache& cache) {
  std::vector<FrameRef> window =
      clip_window(manifest, breakpoint_index, config.breakpoint_window);
  if (window.size() <= config.target_frames) return window;
  return select_from_pool(window, manifest.video_id, question, config.target_frames,
                          text_backend, image_backend, cache);
}

std::vector<FrameRef> uniform_frames(const std::vector<FrameRef>& pool, std::size_t n) {
  if (pool.empty()) {
    throw Error(ErrorCode::InsufficientFrames, "uniform_frames: empty pool");
  }
  if (n >= pool.size()) return pool;
  std::vector<FrameRef> out;
  out.reserve(n);
  for (std::size_t i : uniform_sample(pool.size(), n)) out.push_back(pool[i]);
  return out;
}

}  // namespace vidpipe
