#include <doctest.h>

#include <algorithm>
#include <random>

#include "support/test_util.hpp"
#include "vidpipe/arbiter.hpp"

using namespace vidpipe;
using vidpipe::testing::FakeEmbedClient;
using vidpipe::testing::make_endpoint;
using vidpipe::testing::make_frame;
using vidpipe::testing::TempDir;

namespace {

CandidateAnswer candidate(AnswerSource source, double sim) {
  CandidateAnswer answer;
  answer.text = source == AnswerSource::ImageModel ? "image answer" : "video answer";
  answer.source = source;
  answer.clip_similarity = sim;
  return answer;
}

struct Rig {
  TempDir dir;
  FakeEmbedClient text{make_endpoint(BackendRole::TextEmbed, "mock://embed", "ft")};
  FakeEmbedClient image{make_endpoint(BackendRole::ImageEmbed, "mock://embed", "fi")};
  std::unique_ptr<EmbeddingCache> cache;
  std::vector<FrameRef> frames;

  Rig() { cache = std::make_unique<EmbeddingCache>(dir.path / "cache"); }

  FrameRef add_frame(std::size_t index, std::vector<float> vec) {
    const auto path = vidpipe::testing::write_frame_file(
        dir.path, "frame" + std::to_string(index) + ".bin",
        "frame bytes " + std::to_string(index));
    auto frame = make_frame("v", index, path);
    image.set_image(frame.source, std::move(vec));
    frames.push_back(frame);
    return frame;
  }
};

}  // namespace

TEST_CASE("single aligned frame scores 1.0") {
  Rig rig;
  rig.text.set_text("the answer", {1.0F, 0.0F});
  rig.add_frame(0, {1.0F, 0.0F});
  const double sim = answer_clip_similarity("the answer", rig.frames, rig.text, rig.image,
                                            *rig.cache);
  CHECK(sim == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mean pooling averages the per-frame cosines") {
  Rig rig;
  rig.text.set_text("answer text", {1.0F, 0.0F});
  // cos = 0.2 and 0.6 against the text vector.
  rig.add_frame(0, {0.2F, static_cast<float>(std::sqrt(1.0 - 0.04))});
  rig.add_frame(1, {0.6F, static_cast<float>(std::sqrt(1.0 - 0.36))});
  const double sim =
      answer_clip_similarity("answer text", rig.frames, rig.text, rig.image, *rig.cache);
  CHECK(sim == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("max pooling takes the best frame") {
  Rig rig;
  rig.text.set_text("answer text", {1.0F, 0.0F});
  rig.add_frame(0, {0.2F, static_cast<float>(std::sqrt(1.0 - 0.04))});
  rig.add_frame(1, {0.6F, static_cast<float>(std::sqrt(1.0 - 0.36))});
  const double sim = answer_clip_similarity("answer text", rig.frames, rig.text, rig.image,
                                            *rig.cache, ClipPooling::Max);
  CHECK(sim == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("frame order never changes the pooled similarity") {
  Rig rig;
  rig.text.set_text("t", {0.3F, 0.7F, 0.2F});
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> dist(-1.0F, 1.0F);
  for (std::size_t i = 0; i < 6; ++i) {
    rig.add_frame(i, {dist(rng), dist(rng), dist(rng)});
  }
  const double base =
      answer_clip_similarity("t", rig.frames, rig.text, rig.image, *rig.cache);
  auto shuffled = rig.frames;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const double permuted =
      answer_clip_similarity("t", shuffled, rig.text, rig.image, *rig.cache);
  CHECK(std::abs(base - permuted) < 1e-12);
}

TEST_CASE("select_answer follows the strict-greater rule with ties to video") {
  const auto a1 = candidate(AnswerSource::ImageModel, 0.31);
  const auto a2 = candidate(AnswerSource::VideoModel, 0.24);
  CHECK(&select_answer(a1, a2) == &a1);

  const auto tie1 = candidate(AnswerSource::ImageModel, 0.24);
  const auto tie2 = candidate(AnswerSource::VideoModel, 0.24);
  CHECK(&select_answer(tie1, tie2) == &tie2);

  const auto low1 = candidate(AnswerSource::ImageModel, 0.10);
  const auto high2 = candidate(AnswerSource::VideoModel, 0.30);
  CHECK(&select_answer(low1, high2) == &high2);
}

TEST_CASE("select_answer requires both similarities") {
  auto a1 = candidate(AnswerSource::ImageModel, 0.5);
  auto a2 = candidate(AnswerSource::VideoModel, 0.5);
  a1.clip_similarity.reset();
  try {
    select_answer(a1, a2);
    FAIL("expected MissingSimilarity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSimilarity);
  }
}

namespace {

QAItem breakpoint_item(std::size_t bp) {
  QAItem qa;
  qa.id = "bk1";
  qa.video_id = "v";
  qa.question = "What is here?";
  qa.mode = QAMode::Breakpoint;
  qa.breakpoint_index = bp;
  qa.gold_answer = "gold";
  return qa;
}

DialogueResult result_with_answer(const std::string& answer) {
  DialogueResult result;
  result.answer = answer;
  result.description = "desc";
  result.backend_model_id = "m";
  return result;
}

}  // namespace

TEST_CASE("arbitrate picks the image answer when it aligns with the clip") {
  Rig rig;
  // Clip frames all point along x; image answer aligned, video answer orthogonal.
  for (std::size_t i = 0; i < 5; ++i) rig.add_frame(i, {1.0F, 0.0F});
  rig.text.set_text("image answer", {1.0F, 0.0F});   // mean cos 1.0
  rig.text.set_text("video answer", {0.0F, 1.0F});   // mean cos 0.0

  VideoManifest manifest;
  manifest.video_id = "v";
  manifest.fps = 1.0;
  manifest.frames = rig.frames;

  ArbiterConfig config;
  config.breakpoint_window = 4;
  const auto record =
      arbitrate(breakpoint_item(2), result_with_answer("image answer"),
                result_with_answer("video answer"), manifest, config, rig.text, rig.image,
                *rig.cache);
  CHECK(record.selected == SelectedAnswer::A1);
  CHECK(record.chosen().source == AnswerSource::ImageModel);
  CHECK(*record.a1.clip_similarity == doctest::Approx(1.0));
  CHECK(*record.a2.clip_similarity == doctest::Approx(0.0));
  CHECK(record.clip_indices == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(record.qa_id == "bk1");
}

TEST_CASE("identical answers tie and the video model wins") {
  Rig rig;
  for (std::size_t i = 0; i < 3; ++i) rig.add_frame(i, {0.5F, 0.5F});
  rig.text.set_text("same answer", {1.0F, 0.0F});

  VideoManifest manifest;
  manifest.video_id = "v";
  manifest.fps = 1.0;
  manifest.frames = rig.frames;

  ArbiterConfig config;
  config.breakpoint_window = 3;
  const auto record =
      arbitrate(breakpoint_item(1), result_with_answer("same answer"),
                result_with_answer("same answer"), manifest, config, rig.text, rig.image,
                *rig.cache);
  CHECK(record.selected == SelectedAnswer::A2);
  CHECK(record.chosen().source == AnswerSource::VideoModel);
}

TEST_CASE("arbitrate rejects global-mode items") {
  Rig rig;
  rig.add_frame(0, {1.0F, 0.0F});
  VideoManifest manifest;
  manifest.video_id = "v";
  manifest.fps = 1.0;
  manifest.frames = rig.frames;

  QAItem global;
  global.id = "g";
  global.video_id = "v";
  global.question = "?";
  global.mode = QAMode::Global;
  try {
    arbitrate(global, result_with_answer("a"), result_with_answer("b"), manifest, {},
              rig.text, rig.image, *rig.cache);
    FAIL("expected Precondition");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Precondition);
  }
}

TEST_CASE("long answers are truncated to the backend's advertised limit") {
  Rig rig;
  rig.add_frame(0, {1.0F, 0.0F});
  auto limited = make_endpoint(BackendRole::TextEmbed, "mock://embed", "ft");
  limited.max_input_chars = 10;
  FakeEmbedClient text(limited);
  text.set_text("0123456789", {1.0F, 0.0F});  // only the truncated form is known

  const double sim = answer_clip_similarity("0123456789 and much more beyond the limit",
                                            rig.frames, text, rig.image, *rig.cache);
  CHECK(sim == doctest::Approx(1.0));
}

TEST_CASE("empty inputs are rejected") {
  Rig rig;
  rig.text.set_text("a", {1.0F});
  CHECK_THROWS_AS(
      answer_clip_similarity("a", {}, rig.text, rig.image, *rig.cache), Error);
  rig.add_frame(0, {1.0F});
  CHECK_THROWS_AS(
      answer_clip_similarity("  ", rig.frames, rig.text, rig.image, *rig.cache), Error);
}
