#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "vidpipe/cache.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

struct SamplerConfig {
  std::size_t target_frames = 96;   // frames handed to the video model
  std::size_t breakpoint_window = 16;
};

/// Per-frame relevance of one question to one frame pool. Scores are
/// pool-relative: entry i scores the i-th frame of the pool the table was
/// built from (the whole video in the plain path, the breakpoint window in
/// the windowed path).
struct ScoreTable {
  std::string video_id;
  std::vector<double> scores;
};

/// Evenly strided indices floor(j*frame_count/n) for j in 0..n-1; strictly
/// increasing. Throws InsufficientFrames when n exceeds frame_count.
std::vector<std::size_t> uniform_sample(std::size_t frame_count, std::size_t n);

/// The n highest-scoring indices outside `excluded`, ties broken by
/// ascending index, returned in ascending order.
std::vector<std::size_t> relevance_sample(const ScoreTable& scores, std::size_t n,
                                          const std::set<std::size_t>& excluded);

/// Question-guided half-uniform half-relevance selection: ceil(T/2) frames
/// on a uniform stride, the rest by descending question-frame cosine over
/// the frames not already chosen, merged in ascending index order. When the
/// budget equals the pool the whole pool is returned without any backend
/// traffic.
std::vector<FrameRef> sample_frames(const VideoManifest& manifest,
                                    const std::string& question,
                                    const SamplerConfig& config,
                                    EmbedClient& text_backend,
                                    EmbedClient& image_backend,
                                    EmbeddingCache& cache);

/// Frames around a breakpoint: indices [bp - floor(w/2), bp + ceil(w/2) - 1]
/// clamped to the video; a window at least as large as the video is the
/// whole video.
std::vector<FrameRef> clip_window(const VideoManifest& manifest,
                                  std::size_t breakpoint_index, std::size_t window);

/// Breakpoint-mode selection: the clip window as-is when it fits the frame
/// budget, otherwise question-guided selection inside the window.
std::vector<FrameRef> sample_breakpoint_frames(const VideoManifest& manifest,
                                               std::size_t breakpoint_index,
                                               const std::string& question,
                                               const SamplerConfig& config,
                                               EmbedClient& text_backend,
                                               EmbedClient& image_backend,
                                               EmbeddingCache& cache);

/// Uniform-only selection over an arbitrary frame pool (the sampling
/// ablation path). Takes everything when the pool fits the budget.
std::vector<FrameRef> uniform_frames(const std::vector<FrameRef>& pool, std::size_t n);

}  // namespace vidpipe
