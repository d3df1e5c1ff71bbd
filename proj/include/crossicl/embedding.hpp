#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "crossicl/corpus.hpp"

namespace crossicl {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

enum class EmbeddingChannel { description, full_query, input_only, output, template_ };

std::string channel_name(EmbeddingChannel c);
EmbeddingChannel channel_from_name(const std::string& name);

// Raw vector supplier. Implementations: HTTP endpoint, deterministic hash mock.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) = 0;
  virtual const std::string& model_id() const = 0;
};

// Deterministic offline provider: the vector is a pure function of the text.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim,
                                 std::string model_id = "mock-embed");
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) override;
  const std::string& model_id() const override { return model_id_; }

 private:
  std::size_t dim_;
  std::string model_id_;
};

struct EmbeddingEndpoint {
  std::string url;            // e.g. http://host:port/v1/embeddings
  std::string auth_env;       // env var holding the bearer token
  std::string model_id = "BGE-EN-ICL";
  int batch_size = 16;
  int max_attempts = 3;
  int backoff_ms = 500;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(EmbeddingEndpoint endpoint);
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) override;
  const std::string& model_id() const override { return endpoint_.model_id; }

 private:
  EmbeddingEndpoint endpoint_;
};

// Memoizing embedding service with an on-disk, content-addressed cache.
// Vectors are keyed by (channel, fnv1a64(text)); a JSON sidecar manifest pins
// model_id and dim so stale caches are rejected.
class EmbeddingService {
 public:
  EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                   std::filesystem::path cache_dir, std::size_t expected_dim);

  EmbeddingVector embed(const std::string& text, EmbeddingChannel channel);

  std::size_t provider_calls() const { return provider_calls_; }
  std::size_t cache_hits() const { return cache_hits_; }
  std::size_t dim() const { return expected_dim_; }
  const std::string& model_id() const { return provider_->model_id(); }

 private:
  std::filesystem::path vector_path(EmbeddingChannel channel,
                                    const std::string& hash) const;
  void check_manifest();

  std::shared_ptr<EmbeddingProvider> provider_;
  std::filesystem::path cache_dir_;
  std::size_t expected_dim_;
  std::map<std::pair<EmbeddingChannel, std::string>, EmbeddingVector> memo_;
  std::size_t provider_calls_ = 0;
  std::size_t cache_hits_ = 0;
  std::mutex mutex_;
};

// Per-channel vector index over source tasks and their instances.
struct EmbeddingIndex {
  // (task_id, channel) -> vector; channels: description, template_
  std::map<std::pair<std::string, EmbeddingChannel>, EmbeddingVector> task_vectors;
  // (task_id, instance_id, channel) -> vector
  std::map<std::tuple<std::string, std::string, EmbeddingChannel>, EmbeddingVector>
      instance_vectors;
  std::string model_id;

  const EmbeddingVector& task_vector(const std::string& task_id,
                                     EmbeddingChannel channel) const;
  const EmbeddingVector& instance_vector(const std::string& task_id,
                                         const std::string& instance_id,
                                         EmbeddingChannel channel) const;
};

// Channel text for a source instance: full_query = d ⊕ x, input_only = x,
// output = first gold reference.
std::string instance_channel_text(const TaskRecord& task, const Instance& inst,
                                  EmbeddingChannel channel);

EmbeddingIndex build_index(const Corpus& corpus,
                           const std::set<EmbeddingChannel>& channels,
                           EmbeddingService& service);

}  // namespace crossicl
