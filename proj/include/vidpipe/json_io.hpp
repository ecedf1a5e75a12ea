#pragma once

#include <nlohmann/json.hpp>

#include "vidpipe/backends.hpp"
#include "vidpipe/core.hpp"

namespace vidpipe {

// JSON shapes shared by the dataset files, the exemplar index, and the
// results log. Keys serialize in sorted order, so dumps are deterministic.

nlohmann::json qa_item_to_json(const QAItem& item);
QAItem qa_item_from_json(const nlohmann::json& doc);

nlohmann::json frame_ref_to_json(const FrameRef& frame);
nlohmann::json message_to_json(const ChatMessage& message);
nlohmann::json messages_to_json(const std::vector<ChatMessage>& messages);

nlohmann::json candidate_answer_to_json(const CandidateAnswer& answer);

}  // namespace vidpipe
