#include "vidpipe/core.hpp"

#include <cmath>

namespace vidpipe {

const char* to_string(QAMode mode) {
  return mode == QAMode::Global ? "global" : "breakpoint";
}

QAMode qa_mode_from_string(const std::string& s) {
  if (s == "global") return QAMode::Global;
  if (s == "breakpoint") return QAMode::Breakpoint;
  throw Error(ErrorCode::SchemaError, "unknown mode '" + s + "'");
}

const char* to_string(AnswerSource source) {
  return source == AnswerSource::VideoModel ? "video_model" : "image_model";
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "embedding dims differ: " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  }
  const Eigen::VectorXd av = a.values.cast<double>();
  const Eigen::VectorXd bv = b.values.cast<double>();
  const double norm_a = av.norm();
  const double norm_b = bv.norm();
  if (norm_a < kZeroNormThreshold || norm_b < kZeroNormThreshold) {
    throw Error(ErrorCode::ZeroVector, "embedding norm below threshold");
  }
  return av.dot(bv) / (norm_a * norm_b);
}

}  // namespace vidpipe
