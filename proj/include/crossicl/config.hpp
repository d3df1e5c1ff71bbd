#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "crossicl/adaptation.hpp"
#include "crossicl/composer.hpp"
#include "crossicl/gateway.hpp"
#include "crossicl/selection.hpp"

namespace crossicl {

enum class Method { crossicl, zero_shot, zero_shot_cot, query_supervised };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class ErrorPolicy { skip, fail_fast };

struct MockConfig {
  bool enabled = true;            // offline by default
  std::string script_path;        // optional JSONL script
  std::string fallback = "synthetic";  // synthetic | strict
};

struct RunConfig {
  Method method = Method::crossicl;
  SelectionCriterion criterion;   // variant + seed
  AdaptationMode mode = AdaptationMode::full;
  std::size_t n_demos = 5;
  int n_guides = 1;
  std::size_t k_th_task = 1;
  std::size_t n_tasks = 1;
  std::size_t rounds = 3;
  std::size_t head_per_task = 100;
  std::size_t sample_per_category = 0;  // 0 = off
  std::uint64_t seed = 0;
  std::string metric = "rouge_l";
  std::string source_dir;
  std::string target_dir;
  std::string cache_dir = "cache";
  std::string runs_dir = "runs";
  DemoOrder demo_order = DemoOrder::reversed;
  ErrorPolicy error_policy = ErrorPolicy::skip;
  int workers = 1;
  std::size_t embedding_dim = 64;

  ProviderProfile chat_profile;
  EmbeddingEndpoint embeddings_profile;
  MockConfig mock;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Stable over key-order permutations of the serialized form.
  std::string fingerprint() const;

  void validate() const;  // throws ConfigError
};

RunConfig load_config(const std::filesystem::path& path);

}  // namespace crossicl
