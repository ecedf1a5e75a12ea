#include "vidpipe/arbiter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "vidpipe/util.hpp"

namespace vidpipe {

const char* to_string(ClipPooling pooling) {
  return pooling == ClipPooling::Mean ? "mean" : "max";
}

ClipPooling clip_pooling_from_string(const std::string& s) {
  if (s == "mean") return ClipPooling::Mean;
  if (s == "max") return ClipPooling::Max;
  throw Error(ErrorCode::ConfigError, "unknown pooling '" + s + "'");
}

namespace {

// Cut to the backend's advertised input budget without splitting a UTF-8
// sequence.
std::string truncate_for_backend(const std::string& text, int max_chars) {
  if (max_chars <= 0 || text.size() <= static_cast<std::size_t>(max_chars)) return text;
  std::size_t end = static_cast<std::size_t>(max_chars);
  while (end > 0 && (static_cast<unsigned char>(text[end]) & 0xC0) == 0x80) --end;
  std::cerr << "[vidpipe] warning: truncating arbitration text from " << text.size()
            << " to " << end << " bytes for the text encoder\n";
  return text.substr(0, end);
}

}  // namespace

double answer_clip_similarity(const std::string& answer_text,
                              const std::vector<FrameRef>& clip_frames,
                              EmbedClient& text_backend, EmbedClient& image_backend,
                              EmbeddingCache& cache, ClipPooling pooling) {
  if (clip_frames.empty()) {
    throw Error(ErrorCode::Precondition, "answer_clip_similarity: empty clip");
  }
  if (trim(answer_text).empty()) {
    throw Error(ErrorCode::Precondition, "answer_clip_similarity: empty answer text");
  }
  const std::string text =
      truncate_for_backend(answer_text, text_backend.endpoint().max_input_chars);
  const Embedding text_emb = get_or_embed_text(cache, text_backend, text);
  const std::vector<Embedding> frame_embs =
      get_or_embed_images(cache, image_backend, clip_frames);

  double pooled = pooling == ClipPooling::Max ? -2.0 : 0.0;
  for (const auto& frame_emb : frame_embs) {
    const double sim = cosine_similarity(text_emb, frame_emb);
    if (pooling == ClipPooling::Max) {
      pooled = std::max(pooled, sim);
    } else {
      pooled += sim;
    }
  }
  if (pooling == ClipPooling::Mean) pooled /= static_cast<double>(frame_embs.size());
  return pooled;
}

const CandidateAnswer& select_answer(const CandidateAnswer& a1, const CandidateAnswer& a2) {
  if (!a1.clip_similarity || !a2.clip_similarity ||
      !std::isfinite(*a1.clip_similarity) || !std::isfinite(*a2.clip_similarity)) {
    throw Error(ErrorCode::MissingSimilarity,
                "both candidates need a finite clip similarity");
  }
  return *a1.clip_similarity > *a2.clip_similarity ? a1 : a2;
}

ArbitrationRecord arbitrate(const QAItem& qa, const DialogueResult& image_result,
                            const DialogueResult& video_result,
                            const VideoManifest& manifest, const ArbiterConfig& config,
                            EmbedClient& text_backend, EmbedClient& image_backend,
                            EmbeddingCache& cache) {
  if (qa.mode != QAMode::Breakpoint || !qa.breakpoint_index) {
    throw Error(ErrorCode::Precondition,
                "arbitrate requires a breakpoint-mode item, got '" + qa.id + "'");
  }
  const std::vector<FrameRef> clip =
      clip_window(manifest, *qa.breakpoint_index, config.breakpoint_window);

  ArbitrationRecord record;
  record.qa_id = qa.id;
  record.clip_indices.reserve(clip.size());
  for (const auto& frame : clip) record.clip_indices.push_back(frame.index);

  record.a1.text = image_result.answer;
  record.a1.source = AnswerSource::ImageModel;
  record.a1.clip_similarity = answer_clip_similarity(
      image_result.answer, clip, text_backend, image_backend, cache, config.pooling);

  record.a2.text = video_result.answer;
  record.a2.source = AnswerSource::VideoModel;
  record.a2.clip_similarity = answer_clip_similarity(
      video_result.answer, clip, text_backend, image_backend, cache, config.pooling);

  record.selected = &select_answer(record.a1, record.a2) == &record.a1
                        ? SelectedAnswer::A1
                        : SelectedAnswer::A2;
  return record;
}

}  // namespace vidpipe
