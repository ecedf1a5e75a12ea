#pragma once

#include <string>
#include <vector>

#include "vidpipe/cache.hpp"
#include "vidpipe/core.hpp"
#include "vidpipe/dialogue.hpp"
#include "vidpipe/sampler.hpp"

namespace vidpipe {

enum class ClipPooling { Mean, Max };

const char* to_string(ClipPooling pooling);
ClipPooling clip_pooling_from_string(const std::string& s);

struct ArbiterConfig {
  ClipPooling pooling = ClipPooling::Mean;
  std::size_t breakpoint_window = 16;  // the V of the selection rule
};

enum class SelectedAnswer { A1, A2 };

struct ArbitrationRecord {
  std::string qa_id;
  CandidateAnswer a1;  // image model
  CandidateAnswer a2;  // video model
  SelectedAnswer selected = SelectedAnswer::A2;
  std::vector<std::size_t> clip_indices;

  const CandidateAnswer& chosen() const {
    return selected == SelectedAnswer::A1 ? a1 : a2;
  }
};

/// Pooled cosine between the answer text embedding and each clip frame
/// embedding (mean by default, max as the ablation alternative). Answers
/// longer than the text backend's advertised input limit are truncated
/// with a warning before embedding.
double answer_clip_similarity(const std::string& answer_text,
                              const std::vector<FrameRef>& clip_frames,
                              EmbedClient& text_backend, EmbedClient& image_backend,
                              EmbeddingCache& cache,
                              ClipPooling pooling = ClipPooling::Mean);

/// The selection rule: a1 wins only on strictly greater similarity; ties go
/// to the video model.
const CandidateAnswer& select_answer(const CandidateAnswer& a1, const CandidateAnswer& a2);

/// Breakpoint-mode arbitration: scores both candidate answers against the
/// breakpoint clip window and records the choice.
ArbitrationRecord arbitrate(const QAItem& qa, const DialogueResult& image_result,
                            const DialogueResult& video_result,
                            const VideoManifest& manifest, const ArbiterConfig& config,
                            EmbedClient& text_backend, EmbedClient& image_backend,
                            EmbeddingCache& cache);

}  // namespace vidpipe
