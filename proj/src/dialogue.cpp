#include "vidpipe/dialogue.hpp"

#include <algorithm>

#include "vidpipe/util.hpp"

namespace vidpipe {

namespace {

std::size_t count_slot(const std::string& text, const std::string& slot) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    ++count;
    pos += slot.size();
  }
  return count;
}

void require_slot_count(const std::string& text, const std::string& slot,
                        std::size_t min_count, std::size_t max_count,
                        const std::string& where) {
  const std::size_t count = count_slot(text, slot);
  if (count < min_count || count > max_count) {
    throw Error(ErrorCode::TemplateError,
                where + ": slot " + slot + " appears " + std::to_string(count) +
                    " times (expected " +
                    (min_count == max_count
                         ? std::to_string(min_count)
                         : std::to_string(min_count) + ".." + std::to_string(max_count)) +
                    ")");
  }
}

std::string replace_slot(std::string text, const std::string& slot,
                         const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

void require_resolved(const std::string& text, std::initializer_list<const char*> slots,
                      const std::string& where) {
  for (const char* slot : slots) {
    if (text.find(slot) != std::string::npos) {
      throw Error(ErrorCode::TemplateError,
                  where + ": unresolved slot " + slot + " after rendering");
    }
  }
}

}  // namespace

PromptTemplate PromptTemplate::defaults() {
  PromptTemplate tmpl;
  tmpl.describe_instruction = "Describe this video in detail.";
  tmpl.answer_instruction =
      "{exemplars}Based on the video and your description, answer concisely.\n"
      "Question: {question}";
  tmpl.exemplar_format = "Here is an example. Question: {ex_question} Answer: {ex_answer}\n";
  tmpl.validate();
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& describe_path,
                                    const std::filesystem::path& answer_path,
                                    const std::filesystem::path& exemplar_path) {
  PromptTemplate tmpl;
  tmpl.describe_instruction = read_file(describe_path);
  tmpl.answer_instruction = read_file(answer_path);
  tmpl.exemplar_format = read_file(exemplar_path);
  tmpl.validate();
  return tmpl;
}

void PromptTemplate::validate() const {
  if (trim(describe_instruction).empty()) {
    throw Error(ErrorCode::TemplateError, "describe_instruction is empty");
  }
  require_slot_count(answer_instruction, "{question}", 1, 1, "answer_instruction");
  require_slot_count(answer_instruction, "{exemplars}", 0, 1, "answer_instruction");
  require_slot_count(answer_instruction, "{description_history}", 0, 1,
                     "answer_instruction");
  require_slot_count(exemplar_format, "{ex_question}", 1, 1, "exemplar_format");
  require_slot_count(exemplar_format, "{ex_answer}", 1, 1, "exemplar_format");
}

std::vector<ChatMessage> build_round1(const std::vector<FrameRef>& frames,
                                      const PromptTemplate& tmpl) {
  if (frames.empty()) {
    throw Error(ErrorCode::EmptyFrames, "round 1 needs at least one frame");
  }
  ChatMessage message;
  message.role = MessageRole::User;
  message.parts.reserve(frames.size() + 1);
  for (const auto& frame : frames) message.parts.push_back(image_part(frame));
  message.parts.push_back(text_part(tmpl.describe_instruction));
  return {std::move(message)};
}

std::string render_exemplars(const std::vector<QAItem>& exemplars,
                             const PromptTemplate& tmpl) {
  std::string out;
  for (const auto& exemplar : exemplars) {
    std::string block = replace_slot(tmpl.exemplar_format, "{ex_question}", exemplar.question);
    block = replace_slot(block, "{ex_answer}",
                         exemplar.gold_answer ? *exemplar.gold_answer : "");
    require_resolved(block, {"{ex_question}", "{ex_answer}"}, "exemplar_format");
    out += block;
  }
  return out;
}

namespace {

std::string render_answer_instruction(const std::string& description,
                                      const std::string& question,
                                      const std::vector<QAItem>& exemplars,
                                      const PromptTemplate& tmpl) {
  std::string text = replace_slot(tmpl.answer_instruction, "{description_history}",
                                  description);
  text = replace_slot(text, "{exemplars}", render_exemplars(exemplars, tmpl));
  text = replace_slot(text, "{question}", question);
  require_resolved(text, {"{description_history}", "{exemplars}", "{question}"},
                   "answer_instruction");
  return text;
}

}  // namespace

std::vector<ChatMessage> build_round2(const std::vector<ChatMessage>& round1,
                                      const std::string& description,
                                      const std::string& question,
                                      const std::vector<QAItem>& exemplars,
                                      const PromptTemplate& tmpl) {
  if (trim(description).empty()) {
    throw Error(ErrorCode::Precondition, "round 2 requires a non-empty description");
  }
  std::vector<ChatMessage> messages = round1;
  messages.push_back(text_message(MessageRole::Assistant, description));
  messages.push_back(text_message(
      MessageRole::User,
      render_answer_instruction(description, question, exemplars, tmpl)));
  return messages;
}

std::vector<ChatMessage> build_single_round(const std::vector<FrameRef>& frames,
                                            const std::string& question,
                                            const std::vector<QAItem>& exemplars,
                                            const PromptTemplate& tmpl) {
  if (frames.empty()) {
    throw Error(ErrorCode::EmptyFrames, "answer round needs at least one frame");
  }
  ChatMessage message;
  message.role = MessageRole::User;
  message.parts.reserve(frames.size() + 1);
  for (const auto& frame : frames) message.parts.push_back(image_part(frame));
  message.parts.push_back(
      text_part(render_answer_instruction("", question, exemplars, tmpl)));
  return {std::move(message)};
}

DialogueResult run_cot(const QAItem& qa, const std::vector<FrameRef>& frames,
                       const std::vector<QAItem>& exemplars, ChatClient& backend,
                       const PromptTemplate& tmpl, const DialogueOptions& options) {
  if (backend.endpoint().role != BackendRole::ChatVideo &&
      backend.endpoint().role != BackendRole::ChatImage) {
    throw Error(ErrorCode::Precondition, "run_cot requires a chat_video or chat_image backend");
  }

  DialogueResult result;
  result.backend_model_id = backend.endpoint().model_id;
  result.frame_indices.reserve(frames.size());
  for (const auto& frame : frames) result.frame_indices.push_back(frame.index);

  if (!options.chain_of_thought) {
    std::vector<ChatMessage> messages =
        build_single_round(frames, qa.question, exemplars, tmpl);
    result.answer = trim(backend.chat(messages, options.params));
    if (result.answer.empty()) {
      throw Error(ErrorCode::EmptyAnswer, "blank answer for item '" + qa.id + "'");
    }
    result.transcript = std::move(messages);
    result.transcript.push_back(text_message(MessageRole::Assistant, result.answer));
    return result;
  }

  const std::vector<ChatMessage> round1 = build_round1(frames, tmpl);
  std::string description = trim(backend.chat(round1, options.params));
  if (description.empty()) {
    description = trim(backend.chat(round1, options.params));  // one retry
    if (description.empty()) {
      throw Error(ErrorCode::EmptyDescription,
                  "blank description for item '" + qa.id + "' after retry");
    }
  }
  result.description = description;

  std::vector<ChatMessage> round2 =
      build_round2(round1, description, qa.question, exemplars, tmpl);
  result.answer = trim(backend.chat(round2, options.params));
  if (result.answer.empty()) {
    throw Error(ErrorCode::EmptyAnswer, "blank answer for item '" + qa.id + "'");
  }
  result.transcript = std::move(round2);
  result.transcript.push_back(text_message(MessageRole::Assistant, result.answer));
  return result;
}

}  // namespace vidpipe
