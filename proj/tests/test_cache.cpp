#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "support/test_util.hpp"
#include "vidpipe/cache.hpp"

using namespace vidpipe;
using vidpipe::testing::make_endpoint;
using vidpipe::testing::TempDir;

namespace {

Embedding random_embedding(std::mt19937& rng, int dim, const std::string& model_id) {
  std::uniform_real_distribution<float> dist(-10.0F, 10.0F);
  Embedding emb;
  emb.model_id = model_id;
  emb.values.resize(dim);
  for (int i = 0; i < dim; ++i) emb.values[i] = dist(rng);
  return emb;
}

CacheKey key_for(int i) { return cache_key_for_text("m", "item " + std::to_string(i)); }

}  // namespace

TEST_CASE("cache round-trips 1000 random vectors bit-exactly") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  std::mt19937 rng(5);
  const int dims[] = {32, 512, 768};
  std::vector<Embedding> stored;
  for (int i = 0; i < 1000; ++i) {
    auto emb = random_embedding(rng, dims[i % 3], "model-" + std::to_string(i % 3));
    cache.put(key_for(i), emb);
    stored.push_back(std::move(emb));
  }
  CHECK(cache.size() == 1000);
  for (int i = 0; i < 1000; ++i) {
    const auto got = cache.get(key_for(i));
    REQUIRE(got.has_value());
    CHECK(got->model_id == stored[static_cast<std::size_t>(i)].model_id);
    REQUIRE(got->dim() == stored[static_cast<std::size_t>(i)].dim());
    CHECK(std::memcmp(got->values.data(), stored[static_cast<std::size_t>(i)].values.data(),
                      sizeof(float) * static_cast<std::size_t>(got->dim())) == 0);
  }
}

TEST_CASE("cache persists across reopen, with and without the side index") {
  TempDir dir;
  std::mt19937 rng(9);
  const auto emb = random_embedding(rng, 32, "m");
  const auto key = key_for(1);
  {
    EmbeddingCache cache(dir.path / "cache");
    cache.put(key, emb);
  }
  {
    EmbeddingCache cache(dir.path / "cache");
    const auto got = cache.get(key);
    REQUIRE(got.has_value());
    CHECK(got->values == emb.values);
  }
  // Drop the side index; the log alone must rebuild it.
  std::filesystem::remove(dir.path / "cache" / "embeddings.idx");
  {
    EmbeddingCache cache(dir.path / "cache");
    CHECK(cache.size() == 1);
    const auto got = cache.get(key);
    REQUIRE(got.has_value());
    CHECK(got->values == emb.values);
  }
}

TEST_CASE("a torn tail from a crash is ignored") {
  TempDir dir;
  std::mt19937 rng(13);
  const auto key = key_for(7);
  {
    EmbeddingCache cache(dir.path / "cache");
    cache.put(key, random_embedding(rng, 16, "m"));
  }
  {
    std::ofstream log(dir.path / "cache" / "embeddings.log",
                      std::ios::binary | std::ios::app);
    log << "\x52\x45\x50\x56garbage";  // half-written record
  }
  EmbeddingCache cache(dir.path / "cache");
  CHECK(cache.size() == 1);
  CHECK(cache.get(key).has_value());
}

TEST_CASE("get_or_embed hits skip the wire and misses populate the cache") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  MockEmbedClient client(make_endpoint(BackendRole::TextEmbed, "mock://embed", "m"), 16);

  const auto first = get_or_embed_text(cache, client, "a question");
  CHECK(client.wire_calls() == 1);
  const auto second = get_or_embed_text(cache, client, "a question");
  CHECK(client.wire_calls() == 1);  // zero additional wire requests
  CHECK(first.values == second.values);
}

TEST_CASE("distinct model ids produce distinct cache entries") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  MockEmbedClient a(make_endpoint(BackendRole::TextEmbed, "mock://embed", "model-a"), 16);
  MockEmbedClient b(make_endpoint(BackendRole::TextEmbed, "mock://embed", "model-b"), 16);
  get_or_embed_text(cache, a, "same text");
  get_or_embed_text(cache, b, "same text");
  CHECK(cache.size() == 2);
}

TEST_CASE("corrupted record raises CacheCorrupt, then recovers on retry") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  MockEmbedClient client(make_endpoint(BackendRole::TextEmbed, "mock://embed", "m"), 16);
  const auto original = get_or_embed_text(cache, client, "fragile");
  CHECK(client.wire_calls() == 1);

  {
    // Flip bytes inside the only record's float payload.
    std::fstream log(dir.path / "cache" / "embeddings.log",
                     std::ios::binary | std::ios::in | std::ios::out);
    log.seekp(60);
    const char junk[] = "\xDE\xAD\xBE\xEF";
    log.write(junk, 4);
  }

  try {
    get_or_embed_text(cache, client, "fragile");
    FAIL("expected CacheCorrupt");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CacheCorrupt);
  }
  // Entry was evicted: the retry re-fetches and succeeds.
  const auto recovered = get_or_embed_text(cache, client, "fragile");
  CHECK(client.wire_calls() == 2);
  CHECK(recovered.values == original.values);
  CHECK(cache.get(cache_key_for_text("m", "fragile")).has_value());
}

TEST_CASE("batched get_or_embed embeds only the misses") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  MockEmbedClient client(make_endpoint(BackendRole::TextEmbed, "mock://embed", "m"), 16);
  get_or_embed_text(cache, client, "t1");
  CHECK(client.wire_calls() == 1);

  const auto out = get_or_embed_texts(cache, client, {"t0", "t1", "t2"});
  REQUIRE(out.size() == 3);
  CHECK(client.wire_calls() == 2);  // one batch for the two misses
  CHECK(cache.size() == 3);
  const auto again = get_or_embed_texts(cache, client, {"t0", "t1", "t2"});
  CHECK(client.wire_calls() == 2);
  for (int i = 0; i < 3; ++i) CHECK(again[i].values == out[i].values);
}

TEST_CASE("image get_or_embed keys off frame bytes") {
  TempDir dir;
  EmbeddingCache cache(dir.path / "cache");
  MockEmbedClient client(make_endpoint(BackendRole::ImageEmbed, "mock://embed", "m"), 16);
  const auto path = vidpipe::testing::write_frame_file(dir.path, "f.bin", "pixels");
  const auto frame = vidpipe::testing::make_frame("v", 0, path);
  const auto first = get_or_embed_image(cache, client, frame);
  const auto second = get_or_embed_image(cache, client, frame);
  CHECK(client.wire_calls() == 1);
  CHECK(first.values == second.values);
}
