#include <doctest.h>

#include <cmath>

#include "crossicl/embedding.hpp"
#include "crossicl/errors.hpp"
#include "test_helpers.hpp"

using namespace crossicl;
using namespace crossicl::testing;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

// Straightforward reference cosine.
double cosine_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_SUITE_BEGIN("embedding");

TEST_CASE("cosine matches a reference implementation and handles errors") {
  CHECK(cosine(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine(vec({1, 0}), vec({-1, 0})) == doctest::Approx(-1.0));
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = rng.uniform() * 2 - 1;
    for (auto& x : b) x = rng.uniform() * 2 - 1;
    CHECK(cosine(vec(a), vec(b)) == doctest::Approx(cosine_oracle(a, b)).epsilon(1e-12));
  }
  try {
    cosine(vec({0, 0}), vec({1, 0}));
    FAIL("expected zero_norm");
  } catch (const MetricError& e) {
    CHECK(e.kind() == "zero_norm");
  }
  try {
    cosine(vec({1}), vec({1, 0}));
    FAIL("expected dim_mismatch");
  } catch (const MetricError& e) {
    CHECK(e.kind() == "dim_mismatch");
  }
}

TEST_CASE("hash provider is a pure function of the text") {
  HashEmbeddingProvider p(32);
  auto a = p.embed_batch({"hello", "world"});
  auto b = p.embed_batch({"world", "hello"});
  CHECK(a[0] == b[1]);
  CHECK(a[1] == b[0]);
  CHECK(a[0] != a[1]);
  CHECK(a[0].size() == 32);
  for (double x : a[0]) {
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("service memoizes, persists to disk, and detects stale manifests") {
  TmpDir tmp;
  auto provider = std::make_shared<HashEmbeddingProvider>(8);
  {
    EmbeddingService service(provider, tmp / "cache", 8);
    auto v1 = service.embed("text one", EmbeddingChannel::description);
    auto v2 = service.embed("text one", EmbeddingChannel::description);
    CHECK(v1 == v2);
    CHECK(service.provider_calls() == 1);
    // Same text under another channel is a distinct cache key.
    service.embed("text one", EmbeddingChannel::full_query);
    CHECK(service.provider_calls() == 2);
  }
  {
    // Fresh service over the same directory: disk hits, no provider calls.
    EmbeddingService service(provider, tmp / "cache", 8);
    service.embed("text one", EmbeddingChannel::description);
    CHECK(service.provider_calls() == 0);
    CHECK(service.cache_hits() == 1);
  }
  {
    // Dim change invalidates the cache directory.
    auto provider16 = std::make_shared<HashEmbeddingProvider>(16);
    CHECK_THROWS_AS(EmbeddingService(provider16, tmp / "cache", 16), IndexError);
  }
}

TEST_CASE("instance_channel_text renders each channel") {
  TaskRecord task = make_task("t", "describe", "c", {{"the input", "the output"}});
  const Instance& inst = task.instances[0];
  CHECK(instance_channel_text(task, inst, EmbeddingChannel::full_query) ==
        "Task Instruction:\ndescribe\n\nthe input");
  CHECK(instance_channel_text(task, inst, EmbeddingChannel::input_only) == "the input");
  CHECK(instance_channel_text(task, inst, EmbeddingChannel::output) == "the output");
}

TEST_CASE("build_index covers every source task and instance") {
  TmpDir tmp;
  write_micro_corpus(tmp / "source", tmp / "target", 3, 1, 4);
  Corpus corpus = build_corpus(tmp / "source", tmp / "target");
  auto provider = std::make_shared<HashEmbeddingProvider>(8);
  EmbeddingService service(provider, tmp / "cache", 8);
  auto index = build_index(corpus, {EmbeddingChannel::full_query}, service);

  CHECK(index.task_vectors.size() == 3);   // description channel per task
  CHECK(index.instance_vectors.size() == 3 * 4);
  for (const auto& [task_id, task] : corpus.source_tasks) {
    CHECK_NOTHROW(index.task_vector(task_id, EmbeddingChannel::description));
    for (const auto& inst : task.instances)
      CHECK_NOTHROW(
          index.instance_vector(task_id, inst.instance_id, EmbeddingChannel::full_query));
  }
  try {
    index.instance_vector("nope", "nope", EmbeddingChannel::full_query);
    FAIL("expected index_incomplete");
  } catch (const SelectionError& e) {
    CHECK(e.kind() == "index_incomplete");
  }
  // Index vectors agree with direct provider output (raw storage, no scaling).
  const auto& task = corpus.source_tasks.begin()->second;
  auto direct = provider->embed_batch({instance_channel_text(
      task, task.instances[0], EmbeddingChannel::full_query)})[0];
  CHECK(index
            .instance_vector(task.task_id, task.instances[0].instance_id,
                             EmbeddingChannel::full_query)
            .values == direct);
}

TEST_CASE("channel names round-trip") {
  for (auto c : {EmbeddingChannel::description, EmbeddingChannel::full_query,
                 EmbeddingChannel::input_only, EmbeddingChannel::output,
                 EmbeddingChannel::template_})
    CHECK(channel_from_name(channel_name(c)) == c);
}

TEST_SUITE_END();
