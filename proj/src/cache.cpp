#include "vidpipe/cache.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cstring>
#include <fstream>

#include "vidpipe/util.hpp"

namespace vidpipe {

namespace {

constexpr std::uint32_t kRecordMagic = 0x56504552;  // "VPER"
constexpr std::size_t kDigestBytes = 32;
constexpr std::size_t kHeaderBytes = 8;  // magic + payload_len

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string hex_to_bytes(const std::string& hex) {
  std::string out;
  out.reserve(hex.size() / 2);
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::Precondition, "bad digest hex");
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

std::string bytes_to_hex(const unsigned char* data, std::size_t len) {
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(hex[data[i] >> 4]);
    out.push_back(hex[data[i] & 0xF]);
  }
  return out;
}

std::uint32_t crc32_of(const std::string& payload) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));
}

std::string build_payload(const CacheKey& key, const Embedding& value) {
  std::string payload = hex_to_bytes(key.digest);
  if (payload.size() != kDigestBytes) {
    throw Error(ErrorCode::Precondition, "cache key digest must be 32 bytes of hex");
  }
  put_u32(payload, static_cast<std::uint32_t>(value.dim()));
  put_u32(payload, static_cast<std::uint32_t>(value.model_id.size()));
  payload += value.model_id;
  const std::size_t float_bytes = static_cast<std::size_t>(value.dim()) * sizeof(float);
  const std::size_t base = payload.size();
  payload.resize(base + float_bytes);
  std::memcpy(payload.data() + base, value.values.data(), float_bytes);
  return payload;
}

struct ParsedRecord {
  std::string digest_hex;
  Embedding embedding;
};

// Payload layout: [digest 32B][dim u32][model_len u32][model][floats].
std::optional<ParsedRecord> parse_payload(const std::string& payload) {
  if (payload.size() < kDigestBytes + 8) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  ParsedRecord record;
  record.digest_hex = bytes_to_hex(p, kDigestBytes);
  const std::uint32_t dim = get_u32(p + kDigestBytes);
  const std::uint32_t model_len = get_u32(p + kDigestBytes + 4);
  const std::size_t float_off = kDigestBytes + 8 + model_len;
  const std::size_t float_bytes = static_cast<std::size_t>(dim) * sizeof(float);
  if (dim == 0 || payload.size() != float_off + float_bytes) return std::nullopt;
  record.embedding.model_id = payload.substr(kDigestBytes + 8, model_len);
  record.embedding.values.resize(static_cast<Eigen::Index>(dim));
  std::memcpy(record.embedding.values.data(), payload.data() + float_off, float_bytes);
  return record;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  log_path_ = dir_ / "embeddings.log";
  idx_path_ = dir_ / "embeddings.idx";
  open_files();
  load_index();
}

EmbeddingCache::~EmbeddingCache() {
  if (fd_ >= 0) ::close(fd_);
}

void EmbeddingCache::open_files() {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create cache dir '" + dir_.string() + "'");
  }
  fd_ = ::open(log_path_.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::IoError, "cannot open cache log '" + log_path_.string() + "'");
  }
}

void EmbeddingCache::load_index() {
  index_.clear();
  std::uint64_t scan_from = 0;

  // The side index accelerates open; any records past its coverage (a crash
  // between log append and index append) are recovered by scanning.
  if (std::filesystem::exists(idx_path_)) {
    const std::string idx = read_file(idx_path_);
    const std::size_t entry_size = kDigestBytes + 8;
    const std::size_t usable = (idx.size() / entry_size) * entry_size;
    for (std::size_t pos = 0; pos + entry_size <= usable; pos += entry_size) {
      const auto* p = reinterpret_cast<const unsigned char*>(idx.data() + pos);
      index_[bytes_to_hex(p, kDigestBytes)] = get_u64(p + kDigestBytes);
    }
    if (usable >= entry_size) {
      const auto* last = reinterpret_cast<const unsigned char*>(idx.data() + usable - 8);
      scan_from = get_u64(last);
    }
  }

  const std::uint64_t log_size = std::filesystem::exists(log_path_)
                                     ? std::filesystem::file_size(log_path_)
                                     : 0;
  std::uint64_t pos = scan_from;
  bool repaired = false;
  while (pos + kHeaderBytes <= log_size) {
    unsigned char header[kHeaderBytes];
    if (::pread(fd_, header, kHeaderBytes, static_cast<off_t>(pos)) !=
        static_cast<ssize_t>(kHeaderBytes)) {
      break;
    }
    if (get_u32(header) != kRecordMagic) break;  // torn or foreign tail
    const std::uint32_t payload_len = get_u32(header + 4);
    const std::uint64_t total = kHeaderBytes + payload_len + 4;
    if (pos + total > log_size) break;  // truncated tail
    std::string payload(payload_len, '\0');
    unsigned char crc_buf[4];
    if (::pread(fd_, payload.data(), payload_len, static_cast<off_t>(pos + kHeaderBytes)) !=
            static_cast<ssize_t>(payload_len) ||
        ::pread(fd_, crc_buf, 4, static_cast<off_t>(pos + kHeaderBytes + payload_len)) != 4) {
      break;
    }
    if (get_u32(crc_buf) == crc32_of(payload)) {
      if (auto record = parse_payload(payload)) {
        if (pos >= scan_from && index_.find(record->digest_hex) == index_.end()) {
          repaired = true;
        }
        index_[record->digest_hex] = pos;
      }
    }
    pos += total;
  }

  if (repaired || (!index_.empty() && !std::filesystem::exists(idx_path_))) {
    // Rewrite the side index to cover everything we trust.
    std::string fresh;
    for (const auto& [digest, offset] : index_) {
      fresh += hex_to_bytes(digest);
      put_u64(fresh, offset);
    }
    write_file_atomic(idx_path_, fresh);
  }
}

std::uint64_t EmbeddingCache::append_record(const CacheKey& key, const Embedding& value) {
  const std::string payload = build_payload(key, value);
  std::string record;
  record.reserve(kHeaderBytes + payload.size() + 4);
  put_u32(record, kRecordMagic);
  put_u32(record, static_cast<std::uint32_t>(payload.size()));
  record += payload;
  put_u32(record, crc32_of(payload));

  const off_t offset = ::lseek(fd_, 0, SEEK_END);
  if (offset < 0 ||
      ::write(fd_, record.data(), record.size()) != static_cast<ssize_t>(record.size())) {
    throw Error(ErrorCode::IoError, "cache log append failed");
  }

  std::ofstream idx(idx_path_, std::ios::binary | std::ios::app);
  std::string entry = hex_to_bytes(key.digest);
  put_u64(entry, static_cast<std::uint64_t>(offset));
  idx.write(entry.data(), static_cast<std::streamsize>(entry.size()));
  return static_cast<std::uint64_t>(offset);
}

std::optional<Embedding> EmbeddingCache::get(const CacheKey& key) {
  std::uint64_t offset = 0;
  {
    std::shared_lock lock(mutex_);
    auto it = index_.find(key.digest);
    if (it == index_.end()) return std::nullopt;
    offset = it->second;
  }

  auto corrupt = [&](const std::string& why) -> Error {
    std::unique_lock lock(mutex_);
    index_.erase(key.digest);
    return Error(ErrorCode::CacheCorrupt,
                 "record for " + key.digest.substr(0, 12) + "... " + why + "; entry evicted");
  };

  unsigned char header[kHeaderBytes];
  if (::pread(fd_, header, kHeaderBytes, static_cast<off_t>(offset)) !=
          static_cast<ssize_t>(kHeaderBytes) ||
      get_u32(header) != kRecordMagic) {
    throw corrupt("has a bad header");
  }
  const std::uint32_t payload_len = get_u32(header + 4);
  std::string payload(payload_len, '\0');
  unsigned char crc_buf[4];
  if (::pread(fd_, payload.data(), payload_len, static_cast<off_t>(offset + kHeaderBytes)) !=
          static_cast<ssize_t>(payload_len) ||
      ::pread(fd_, crc_buf, 4, static_cast<off_t>(offset + kHeaderBytes + payload_len)) != 4) {
    throw corrupt("is truncated");
  }
  if (get_u32(crc_buf) != crc32_of(payload)) {
    throw corrupt("fails its checksum");
  }
  auto record = parse_payload(payload);
  if (!record || record->digest_hex != key.digest) {
    throw corrupt("does not match its digest");
  }
  return std::move(record->embedding);
}

void EmbeddingCache::put(const CacheKey& key, const Embedding& value) {
  std::unique_lock lock(mutex_);
  if (index_.find(key.digest) != index_.end()) return;
  index_[key.digest] = append_record(key, value);
}

bool EmbeddingCache::contains(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  return index_.find(key.digest) != index_.end();
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

Embedding get_or_embed_text(EmbeddingCache& cache, EmbedClient& client,
                            const std::string& text) {
  const CacheKey key = cache_key_for_text(client.endpoint().model_id, text);
  if (auto hit = cache.get(key)) return *std::move(hit);
  Embedding fresh = client.embed_texts({text}).front();
  cache.put(key, fresh);
  return fresh;
}

Embedding get_or_embed_image(EmbeddingCache& cache, EmbedClient& client,
                             const FrameRef& frame) {
  const CacheKey key =
      cache_key_for_image(client.endpoint().model_id, read_frame_bytes(frame));
  if (auto hit = cache.get(key)) return *std::move(hit);
  Embedding fresh = client.embed_images({frame}).front();
  cache.put(key, fresh);
  return fresh;
}

std::vector<Embedding> get_or_embed_texts(EmbeddingCache& cache, EmbedClient& client,
                                          const std::vector<std::string>& texts) {
  std::vector<Embedding> out(texts.size());
  std::vector<CacheKey> keys(texts.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = cache_key_for_text(client.endpoint().model_id, texts[i]);
    if (auto hit = cache.get(keys[i])) {
      out[i] = *std::move(hit);
    } else {
      misses.push_back(i);
    }
  }
  if (!misses.empty()) {
    std::vector<std::string> pending;
    pending.reserve(misses.size());
    for (std::size_t i : misses) pending.push_back(texts[i]);
    std::vector<Embedding> fresh = client.embed_texts(pending);
    for (std::size_t j = 0; j < misses.size(); ++j) {
      cache.put(keys[misses[j]], fresh[j]);
      out[misses[j]] = std::move(fresh[j]);
    }
  }
  return out;
}

std::vector<Embedding> get_or_embed_images(EmbeddingCache& cache, EmbedClient& client,
                                           const std::vector<FrameRef>& frames) {
  std::vector<Embedding> out(frames.size());
  std::vector<CacheKey> keys(frames.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    keys[i] = cache_key_for_image(client.endpoint().model_id, read_frame_bytes(frames[i]));
    if (auto hit = cache.get(keys[i])) {
      out[i] = *std::move(hit);
    } else {
      misses.push_back(i);
    }
  }
  if (!misses.empty()) {
    std::vector<FrameRef> pending;
    pending.reserve(misses.size());
    for (std::size_t i : misses) pending.push_back(frames[i]);
    std::vector<Embedding> fresh = client.embed_images(pending);
    for (std::size_t j = 0; j < misses.size(); ++j) {
      cache.put(keys[misses[j]], fresh[j]);
      out[misses[j]] = std::move(fresh[j]);
    }
  }
  return out;
}

}  // namespace vidpipe
