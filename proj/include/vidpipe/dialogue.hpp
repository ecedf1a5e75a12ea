#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vidpipe/backends.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

/// The two-round prompt set. answer_instruction must use {question} exactly
/// once and may use {exemplars} and {description_history}; exemplar_format
/// must use {ex_question} and {ex_answer} exactly once each. Validation
/// rejects duplicated or missing required slots, and rendering rejects any
/// slot left unresolved.
struct PromptTemplate {
  std::string describe_instruction;
  std::string answer_instruction;
  std::string exemplar_format;

  static PromptTemplate defaults();
  static PromptTemplate load(const std::filesystem::path& describe_path,
                             const std::filesystem::path& answer_path,
                             const std::filesystem::path& exemplar_path);

  void validate() const;
};

struct DialogueResult {
  std::string description;  // round-1 output; empty in single-round mode
  std::string answer;       // round-2 output, whitespace-trimmed
  std::vector<ChatMessage> transcript;
  std::string backend_model_id;
  std::vector<std::size_t> frame_indices;
};

/// Round 1: one user message holding every frame followed by the describe
/// instruction.
std::vector<ChatMessage> build_round1(const std::vector<FrameRef>& frames,
                                      const PromptTemplate& tmpl);

/// Round 2: round-1 messages, the description as an assistant turn, then
/// the rendered answer instruction (exemplars in retrieval order, then the
/// question).
std::vector<ChatMessage> build_round2(const std::vector<ChatMessage>& round1,
                                      const std::string& description,
                                      const std::string& question,
                                      const std::vector<QAItem>& exemplars,
                                      const PromptTemplate& tmpl);

/// Single-round ablation prompt: frames plus the answer instruction with an
/// empty description slot.
std::vector<ChatMessage> build_single_round(const std::vector<FrameRef>& frames,
                                            const std::string& question,
                                            const std::vector<QAItem>& exemplars,
                                            const PromptTemplate& tmpl);

std::string render_exemplars(const std::vector<QAItem>& exemplars,
                             const PromptTemplate& tmpl);

struct DialogueOptions {
  bool chain_of_thought = true;
  ChatParams params;
};

/// Runs the conversation for one question: describe round, then answer
/// round with the description as history (or a single round when CoT is
/// off). A blank description is retried once, then EmptyDescription.
DialogueResult run_cot(const QAItem& qa, const std::vector<FrameRef>& frames,
                       const std::vector<QAItem>& exemplars, ChatClient& backend,
                       const PromptTemplate& tmpl, const DialogueOptions& options = {});

}  // namespace vidpipe
