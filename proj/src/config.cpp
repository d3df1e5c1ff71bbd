#include "crossicl/config.hpp"

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

std::string method_name(Method m) {
  switch (m) {
    case Method::crossicl: return "crossicl";
    case Method::zero_shot: return "zero_shot";
    case Method::zero_shot_cot: return "zero_shot_cot";
    case Method::query_supervised: return "query_supervised";
  }
  throw ConfigError("unknown_method", "invalid Method value");
}

Method method_from_name(const std::string& name) {
  if (name == "crossicl") return Method::crossicl;
  if (name == "zero_shot") return Method::zero_shot;
  if (name == "zero_shot_cot") return Method::zero_shot_cot;
  if (name == "query_supervised") return Method::query_supervised;
  throw ConfigError("unknown_method", "unknown method: " + name);
}

namespace {

nlohmann::json profile_to_json(const ProviderProfile& p) {
  return {{"endpoint", p.endpoint},
          {"auth_env", p.auth_env},
          {"model_id", p.model_id},
          {"temperature", p.temperature},
          {"max_output_tokens", p.max_output_tokens},
          {"max_attempts", p.retry.max_attempts},
          {"initial_backoff_ms", p.retry.initial_backoff_ms},
          {"backoff_factor", p.retry.backoff_factor},
          {"rate_limit_per_min", p.rate_limit_per_min}};
}

ProviderProfile profile_from_json(const nlohmann::json& j) {
  ProviderProfile p;
  p.endpoint = j.value("endpoint", p.endpoint);
  p.auth_env = j.value("auth_env", p.auth_env);
  p.model_id = j.value("model_id", p.model_id);
  p.temperature = j.value("temperature", p.temperature);
  p.max_output_tokens = j.value("max_output_tokens", p.max_output_tokens);
  p.retry.max_attempts = j.value("max_attempts", p.retry.max_attempts);
  p.retry.initial_backoff_ms = j.value("initial_backoff_ms", p.retry.initial_backoff_ms);
  p.retry.backoff_factor = j.value("backoff_factor", p.retry.backoff_factor);
  p.rate_limit_per_min = j.value("rate_limit_per_min", p.rate_limit_per_min);
  return p;
}

nlohmann::json endpoint_to_json(const EmbeddingEndpoint& e) {
  return {{"url", e.url},
          {"auth_env", e.auth_env},
          {"model_id", e.model_id},
          {"batch_size", e.batch_size},
          {"max_attempts", e.max_attempts},
          {"backoff_ms", e.backoff_ms}};
}

EmbeddingEndpoint endpoint_from_json(const nlohmann::json& j) {
  EmbeddingEndpoint e;
  e.url = j.value("url", e.url);
  e.auth_env = j.value("auth_env", e.auth_env);
  e.model_id = j.value("model_id", e.model_id);
  e.batch_size = j.value("batch_size", e.batch_size);
  e.max_attempts = j.value("max_attempts", e.max_attempts);
  e.backoff_ms = j.value("backoff_ms", e.backoff_ms);
  return e;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["method"] = method_name(method);
  j["criterion"] = criterion_name(criterion.variant);
  j["criterion_seed"] = criterion.seed;
  j["mode"] = mode_name(mode);
  j["n_demos"] = n_demos;
  j["n_guides"] = n_guides;
  j["k_th_task"] = k_th_task;
  j["n_tasks"] = n_tasks;
  j["rounds"] = rounds;
  j["head_per_task"] = head_per_task;
  j["sample_per_category"] = sample_per_category;
  j["seed"] = seed;
  j["metric"] = metric;
  j["source_dir"] = source_dir;
  j["target_dir"] = target_dir;
  j["cache_dir"] = cache_dir;
  j["runs_dir"] = runs_dir;
  j["demo_order"] = demo_order_name(demo_order);
  j["error_policy"] = error_policy == ErrorPolicy::skip ? "skip" : "fail_fast";
  j["workers"] = workers;
  j["embedding_dim"] = embedding_dim;
  j["chat_profile"] = profile_to_json(chat_profile);
  j["embeddings_profile"] = endpoint_to_json(embeddings_profile);
  j["mock"] = {{"enabled", mock.enabled},
               {"script_path", mock.script_path},
               {"fallback", mock.fallback}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("method")) c.method = method_from_name(j.at("method").get<std::string>());
    if (j.contains("criterion"))
      c.criterion.variant = criterion_from_name(j.at("criterion").get<std::string>());
    c.criterion.seed = j.value("criterion_seed", c.criterion.seed);
    if (j.contains("mode")) c.mode = mode_from_name(j.at("mode").get<std::string>());
    c.n_demos = j.value("n_demos", c.n_demos);
    c.n_guides = j.value("n_guides", c.n_guides);
    c.k_th_task = j.value("k_th_task", c.k_th_task);
    c.n_tasks = j.value("n_tasks", c.n_tasks);
    c.rounds = j.value("rounds", c.rounds);
    c.head_per_task = j.value("head_per_task", c.head_per_task);
    c.sample_per_category = j.value("sample_per_category", c.sample_per_category);
    c.seed = j.value("seed", c.seed);
    c.metric = j.value("metric", c.metric);
    c.source_dir = j.value("source_dir", c.source_dir);
    c.target_dir = j.value("target_dir", c.target_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.runs_dir = j.value("runs_dir", c.runs_dir);
    if (j.contains("demo_order"))
      c.demo_order = demo_order_from_name(j.at("demo_order").get<std::string>());
    if (j.contains("error_policy")) {
      std::string p = j.at("error_policy").get<std::string>();
      if (p == "skip") c.error_policy = ErrorPolicy::skip;
      else if (p == "fail_fast") c.error_policy = ErrorPolicy::fail_fast;
      else throw ConfigError("bad_value", "unknown error_policy: " + p);
    }
    c.workers = j.value("workers", c.workers);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    if (j.contains("chat_profile")) c.chat_profile = profile_from_json(j.at("chat_profile"));
    if (j.contains("embeddings_profile"))
      c.embeddings_profile = endpoint_from_json(j.at("embeddings_profile"));
    if (j.contains("mock")) {
      const auto& m = j.at("mock");
      c.mock.enabled = m.value("enabled", c.mock.enabled);
      c.mock.script_path = m.value("script_path", c.mock.script_path);
      c.mock.fallback = m.value("fallback", c.mock.fallback);
    }
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed", std::string("config parse: ") + e.what());
  }
  return c;
}

std::string RunConfig::fingerprint() const {
  // nlohmann::json objects are key-sorted, so dump() is canonical. Fields
  // that cannot change the results (parallelism, filesystem layout) are
  // excluded so equivalent experiments share a fingerprint.
  nlohmann::json j = to_json();
  j.erase("workers");
  j.erase("cache_dir");
  j.erase("runs_dir");
  return to_hex(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  bool few_shot = method == Method::crossicl || method == Method::query_supervised;
  if (few_shot && n_demos < 1)
    throw ConfigError("bad_value", "n_demos must be >= 1 for few-shot methods");
  if (n_guides < 0) throw ConfigError("bad_value", "n_guides must be >= 0");
  if (k_th_task < 1) throw ConfigError("bad_value", "k_th_task is 1-based");
  if (n_tasks < 1) throw ConfigError("bad_value", "n_tasks must be >= 1");
  if (rounds < 1) throw ConfigError("bad_value", "rounds must be >= 1");
  if (workers < 1) throw ConfigError("bad_value", "workers must be >= 1");
  if (embedding_dim < 1) throw ConfigError("bad_value", "embedding_dim must be >= 1");
  if (metric != "rouge_l" && metric != "exact_match")
    throw ConfigError("bad_value", "unknown metric: " + metric);
  if (mock.fallback != "synthetic" && mock.fallback != "strict")
    throw ConfigError("bad_value", "mock fallback must be synthetic or strict");
  if (source_dir.empty()) throw ConfigError("bad_value", "source_dir is required");
  if (target_dir.empty()) throw ConfigError("bad_value", "target_dir is required");
  if (n_tasks > 1 && k_th_task != 1)
    throw ConfigError("bad_value", "k_th_task applies only to single-task selection");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed", path.string() + ": " + e.what());
  }
  RunConfig c = RunConfig::from_json(j);
  c.validate();
  return c;
}

}  // namespace crossicl
