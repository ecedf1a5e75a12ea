#include "vidpipe/retrieval.hpp"

#include <cstring>
#include <sstream>

#include "vidpipe/json_io.hpp"
#include "vidpipe/util.hpp"

namespace vidpipe {

namespace {

constexpr char kIndexMagic[] = "VPEXIDX1";  // 8 bytes incl. version

}  // namespace

ExemplarIndex build_index(const std::vector<QAItem>& train_items,
                          EmbedClient& text_backend, EmbeddingCache& cache) {
  std::vector<std::string> questions;
  questions.reserve(train_items.size());
  for (const auto& item : train_items) {
    if (!item.gold_answer || trim(*item.gold_answer).empty()) {
      throw Error(ErrorCode::MissingGoldAnswer,
                  "training item '" + item.id + "' has no gold answer");
    }
    questions.push_back(item.question);
  }

  ExemplarIndex index;
  index.embed_model_id = text_backend.endpoint().model_id;
  if (train_items.empty()) return index;

  std::vector<Embedding> embeddings = get_or_embed_texts(cache, text_backend, questions);
  index.dim = embeddings.front().dim();
  index.entries.reserve(train_items.size());
  for (std::size_t i = 0; i < train_items.size(); ++i) {
    index.entries.push_back(ExemplarIndex::Entry{train_items[i], std::move(embeddings[i])});
  }
  return index;
}

std::vector<QAItem> retrieve(const ExemplarIndex& index, const std::string& question,
                             std::size_t k,
                             const std::optional<std::string>& exclude_video,
                             EmbedClient& text_backend, EmbeddingCache& cache) {
  if (index.entries.empty()) {
    throw Error(ErrorCode::EmptyPool, "exemplar index is empty");
  }
  if (k == 0) {
    throw Error(ErrorCode::Precondition, "retrieve: k must be positive");
  }
  std::vector<std::pair<std::size_t, Embedding>> pool;
  pool.reserve(index.entries.size());
  for (std::size_t pos = 0; pos < index.entries.size(); ++pos) {
    const auto& entry = index.entries[pos];
    if (exclude_video && entry.item.video_id == *exclude_video) continue;
    pool.emplace_back(pos, entry.embedding);
  }
  if (pool.empty()) {
    throw Error(ErrorCode::EmptyPool, "all exemplars excluded for video '" +
                                          (exclude_video ? *exclude_video : "") + "'");
  }

  const Embedding query = get_or_embed_text(cache, text_backend, question);
  const auto ranked = rank_by_similarity(query, pool);

  std::vector<QAItem> out;
  out.reserve(std::min(k, ranked.size()));
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    out.push_back(index.entries[ranked[i].first].item);
  }
  return out;
}

void save_index(const ExemplarIndex& index, const std::filesystem::path& path) {
  std::string blob(kIndexMagic, 8);
  nlohmann::json header;
  header["count"] = index.entries.size();
  header["dim"] = index.dim;
  header["embed_model_id"] = index.embed_model_id;
  blob += header.dump();
  blob.push_back('\n');
  for (const auto& entry : index.entries) {
    blob += qa_item_to_json(entry.item).dump();
    blob.push_back('\n');
    const std::size_t float_bytes =
        static_cast<std::size_t>(entry.embedding.dim()) * sizeof(float);
    const std::size_t base = blob.size();
    blob.resize(base + float_bytes);
    std::memcpy(blob.data() + base, entry.embedding.values.data(), float_bytes);
  }
  write_file_atomic(path, blob);
}

ExemplarIndex load_index(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 8 || std::memcmp(blob.data(), kIndexMagic, 8) != 0) {
    throw Error(ErrorCode::IoError, "'" + path.string() + "' is not an exemplar index");
  }
  std::size_t pos = 8;
  auto read_line = [&blob, &pos, &path]() {
    const std::size_t nl = blob.find('\n', pos);
    if (nl == std::string::npos) {
      throw Error(ErrorCode::IoError, "truncated exemplar index '" + path.string() + "'");
    }
    std::string line = blob.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  ExemplarIndex index;
  try {
    const nlohmann::json header = nlohmann::json::parse(read_line());
    index.embed_model_id = header.at("embed_model_id").get<std::string>();
    index.dim = header.at("dim").get<Eigen::Index>();
    const std::size_t count = header.at("count").get<std::size_t>();
    const std::size_t float_bytes = static_cast<std::size_t>(index.dim) * sizeof(float);
    index.entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      ExemplarIndex::Entry entry;
      entry.item = qa_item_from_json(nlohmann::json::parse(read_line()));
      if (pos + float_bytes > blob.size()) {
        throw Error(ErrorCode::IoError, "truncated exemplar index '" + path.string() + "'");
      }
      entry.embedding.model_id = index.embed_model_id;
      entry.embedding.values.resize(index.dim);
      std::memcpy(entry.embedding.values.data(), blob.data() + pos, float_bytes);
      pos += float_bytes;
      index.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError,
                "bad exemplar index '" + path.string() + "': " + e.what());
  }
  return index;
}

}  // namespace vidpipe
