#include "vidpipe/json_io.hpp"

namespace vidpipe {

using nlohmann::json;

json qa_item_to_json(const QAItem& item) {
  json doc;
  doc["id"] = item.id;
  doc["video_id"] = item.video_id;
  doc["mode"] = to_string(item.mode);
  doc["question"] = item.question;
  if (item.gold_answer) doc["answer"] = *item.gold_answer;
  if (item.breakpoint_index) doc["breakpoint_index"] = *item.breakpoint_index;
  return doc;
}

QAItem qa_item_from_json(const json& doc) {
  QAItem item;
  item.id = doc.at("id").get<std::string>();
  item.video_id = doc.at("video_id").get<std::string>();
  item.mode = qa_mode_from_string(doc.at("mode").get<std::string>());
  item.question = doc.at("question").get<std::string>();
  if (doc.contains("answer") && !doc.at("answer").is_null()) {
    item.gold_answer = doc.at("answer").get<std::string>();
  }
  if (doc.contains("breakpoint_index") && !doc.at("breakpoint_index").is_null()) {
    item.breakpoint_index = doc.at("breakpoint_index").get<std::size_t>();
  }
  return item;
}

json frame_ref_to_json(const FrameRef& frame) {
  return json{{"video_id", frame.video_id},
              {"index", frame.index},
              {"timestamp_s", frame.timestamp_s},
              {"source", frame.source}};
}

json message_to_json(const ChatMessage& message) {
  json parts = json::array();
  for (const auto& part : message.parts) {
    if (part.kind == MessagePart::Kind::Text) {
      parts.push_back({{"type", "text"}, {"text", part.text}});
    } else {
      parts.push_back({{"type", "image"}, {"frame", frame_ref_to_json(part.frame)}});
    }
  }
  return json{{"role", to_string(message.role)}, {"parts", std::move(parts)}};
}

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& message : messages) out.push_back(message_to_json(message));
  return out;
}

json candidate_answer_to_json(const CandidateAnswer& answer) {
  json doc;
  doc["text"] = answer.text;
  doc["source"] = to_string(answer.source);
  if (answer.clip_similarity) doc["clip_similarity"] = *answer.clip_similarity;
  return doc;
}

}  // namespace vidpipe
