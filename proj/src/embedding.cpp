#include "crossicl/embedding.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

#ifdef CROSSICL_WITH_HTTP
#ifdef CROSSICL_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#endif

namespace crossicl {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw MetricError("dim_mismatch", "cosine over vectors of unequal dim");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw MetricError("zero_norm", "cosine of an all-zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string channel_name(EmbeddingChannel c) {
  switch (c) {
    case EmbeddingChannel::description: return "description";
    case EmbeddingChannel::full_query: return "full_query";
    case EmbeddingChannel::input_only: return "input_only";
    case EmbeddingChannel::output: return "output";
    case EmbeddingChannel::template_: return "template";
  }
  return "unknown";
}

EmbeddingChannel channel_from_name(const std::string& name) {
  if (name == "description") return EmbeddingChannel::description;
  if (name == "full_query") return EmbeddingChannel::full_query;
  if (name == "input_only") return EmbeddingChannel::input_only;
  if (name == "output") return EmbeddingChannel::output;
  if (name == "template") return EmbeddingChannel::template_;
  throw ConfigError("bad_channel", name);
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::string model_id)
    : dim_(dim), model_id_(std::move(model_id)) {}

std::vector<std::vector<double>> HashEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Rng rng(fnv1a64(text));
    std::vector<double> v(dim_);
    for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
#ifndef CROSSICL_WITH_HTTP
  (void)texts;
  throw ProviderError("transport", "built without HTTP support");
#else
  auto slash = endpoint_.url.find('/', endpoint_.url.find("//") + 2);
  std::string host = endpoint_.url.substr(0, slash);
  std::string path = slash == std::string::npos ? "/v1/embeddings"
                                                : endpoint_.url.substr(slash);
  httplib::Client client(host);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!endpoint_.auth_env.empty()) {
    if (const char* key = std::getenv(endpoint_.auth_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body{{"model", endpoint_.model_id}, {"input", texts}};
  std::string payload = body.dump();
  for (int attempt = 1;; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (res && res->status == 200) {
      nlohmann::json doc = nlohmann::json::parse(res->body);
      std::vector<std::vector<double>> out;
      for (const auto& item : doc.at("data"))
        out.push_back(item.at("embedding").get<std::vector<double>>());
      if (out.size() != texts.size())
        throw ProviderError("transport", "embedding count mismatch");
      return out;
    }
    if (attempt >= endpoint_.max_attempts)
      throw ProviderError("transport",
                          "embeddings endpoint failed after " +
                              std::to_string(attempt) + " attempts");
    std::this_thread::sleep_for(
        std::chrono::milliseconds(endpoint_.backoff_ms * attempt));
  }
#endif
}

EmbeddingService::EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                                   std::filesystem::path cache_dir,
                                   std::size_t expected_dim)
    : provider_(std::move(provider)),
      cache_dir_(std::move(cache_dir)),
      expected_dim_(expected_dim) {
  if (!cache_dir_.empty()) {
    std::filesystem::create_directories(cache_dir_);
    check_manifest();
  }
}

void EmbeddingService::check_manifest() {
  auto manifest_path = cache_dir_ / "manifest.json";
  nlohmann::json manifest{{"model_id", provider_->model_id()},
                          {"dim", expected_dim_}};
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json existing = nlohmann::json::parse(read_file(manifest_path));
    if (existing != manifest)
      throw IndexError("dim_conflict",
                       "cache manifest does not match provider (model/dim)");
  } else {
    write_file(manifest_path, manifest.dump(2) + "\n");
  }
}

std::filesystem::path EmbeddingService::vector_path(EmbeddingChannel channel,
                                                    const std::string& hash) const {
  return cache_dir_ / "vectors" / channel_name(channel) / (hash + ".bin");
}

EmbeddingVector EmbeddingService::embed(const std::string& text,
                                        EmbeddingChannel channel) {
  if (text.empty()) throw IndexError("empty_text", "embed of empty text");
  std::string hash = content_hash(text);
  std::lock_guard<std::mutex> lock(mutex_);
  auto key = std::make_pair(channel, hash);
  if (auto it = memo_.find(key); it != memo_.end()) {
    ++cache_hits_;
    return it->second;
  }
  if (!cache_dir_.empty()) {
    auto path = vector_path(channel, hash);
    if (std::filesystem::exists(path)) {
      std::string blob = read_file(path);
      if (blob.size() == expected_dim_ * sizeof(double)) {
        EmbeddingVector v;
        v.values.resize(expected_dim_);
        std::memcpy(v.values.data(), blob.data(), blob.size());
        ++cache_hits_;
        memo_[key] = v;
        return v;
      }
    }
  }
  auto vectors = provider_->embed_batch({text});
  ++provider_calls_;
  if (vectors.size() != 1 || vectors[0].size() != expected_dim_)
    throw IndexError("dim_conflict",
                     "provider returned dim " +
                         std::to_string(vectors.empty() ? 0 : vectors[0].size()) +
                         ", expected " + std::to_string(expected_dim_));
  EmbeddingVector v{std::move(vectors[0])};
  for (double x : v.values)
    if (!std::isfinite(x)) throw IndexError("non_finite", "non-finite embedding entry");
  if (!cache_dir_.empty()) {
    write_file(vector_path(channel, hash),
               std::string_view(reinterpret_cast<const char*>(v.values.data()),
                                v.values.size() * sizeof(double)));
  }
  memo_[key] = v;
  return v;
}

const EmbeddingVector& EmbeddingIndex::task_vector(const std::string& task_id,
                                                   EmbeddingChannel channel) const {
  auto it = task_vectors.find({task_id, channel});
  if (it == task_vectors.end())
    throw SelectionError("index_incomplete",
                         "no " + channel_name(channel) + " vector for task " + task_id);
  return it->second;
}

const EmbeddingVector& EmbeddingIndex::instance_vector(
    const std::string& task_id, const std::string& instance_id,
    EmbeddingChannel channel) const {
  auto it = instance_vectors.find({task_id, instance_id, channel});
  if (it == instance_vectors.end())
    throw SelectionError("index_incomplete",
                         "no " + channel_name(channel) + " vector for " + task_id +
                             "/" + instance_id);
  return it->second;
}

std::string instance_channel_text(const TaskRecord& task, const Instance& inst,
                                  EmbeddingChannel channel) {
  switch (channel) {
    case EmbeddingChannel::full_query:
      return full_query_text(task.description, inst.input);
    case EmbeddingChannel::input_only:
      return inst.input;
    case EmbeddingChannel::output:
      // First gold reference is the canonical answer.
      return inst.references.front();
    default:
      throw IndexError("bad_channel",
                       channel_name(channel) + " is not an instance channel");
  }
}

EmbeddingIndex build_index(const Corpus& corpus,
                           const std::set<EmbeddingChannel>& channels,
                           EmbeddingService& service) {
  if (corpus.source_tasks.empty())
    throw IndexError("empty_corpus", "build_index over empty corpus");
  EmbeddingIndex index;
  index.model_id = service.model_id();
  for (const auto& [task_id, task] : corpus.source_tasks) {
    // Description vector computed once per task.
    index.task_vectors[{task_id, EmbeddingChannel::description}] =
        service.embed(task.description, EmbeddingChannel::description);
    if (channels.count(EmbeddingChannel::template_) && task.template_summary)
      index.task_vectors[{task_id, EmbeddingChannel::template_}] =
          service.embed(*task.template_summary, EmbeddingChannel::template_);
    for (const auto& inst : task.instances) {
      for (auto channel : channels) {
        if (channel == EmbeddingChannel::description ||
            channel == EmbeddingChannel::template_)
          continue;
        index.instance_vectors[{task_id, inst.instance_id, channel}] =
            service.embed(instance_channel_text(task, inst, channel), channel);
      }
    }
  }
  return index;
}

}  // namespace crossicl
