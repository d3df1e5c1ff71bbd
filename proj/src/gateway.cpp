#include "crossicl/gateway.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/prompts.hpp"
#include "crossicl/util.hpp"

#ifdef CROSSICL_WITH_HTTP
#ifdef CROSSICL_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#endif

namespace crossicl {

ChatRequest user_prompt(std::string prompt, const ProviderProfile& profile,
                        bool want_logprobs) {
  // Single user message, no system message.
  ChatRequest req;
  req.messages.push_back({"user", std::move(prompt)});
  req.temperature = profile.temperature;
  req.max_output_tokens = profile.max_output_tokens;
  req.model_id = profile.model_id;
  req.want_logprobs = want_logprobs;
  return req;
}

std::string prompt_hash(const std::string& prompt, double temperature) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", temperature);
  return content_hash(prompt + "\x1f" + buf);
}

void MockChatProvider::script(const std::string& prompt, double temperature,
                              const std::string& response, int fail_times) {
  script_hash(prompt_hash(prompt, temperature), response, fail_times);
}

void MockChatProvider::script_logprobs(const std::string& prompt, double temperature,
                                       const std::string& response,
                                       std::vector<TokenLogprob> logprobs) {
  std::lock_guard<std::mutex> lock(mutex_);
  script_[prompt_hash(prompt, temperature)] =
      Entry{response, 0, std::move(logprobs)};
}

void MockChatProvider::script_hash(const std::string& hash,
                                   const std::string& response, int fail_times) {
  std::lock_guard<std::mutex> lock(mutex_);
  script_[hash] = Entry{response, fail_times, std::nullopt};
}

void MockChatProvider::load_script(const std::filesystem::path& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw ProviderError("transport", "cannot open script " + jsonl_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json entry = nlohmann::json::parse(line);
    std::string hash;
    if (entry.contains("prompt_hash"))
      hash = entry["prompt_hash"].get<std::string>();
    else
      hash = prompt_hash(entry.at("prompt").get<std::string>(),
                         entry.value("temperature", 0.0));
    script_hash(hash, entry.at("response").get<std::string>(),
                entry.value("fail_times", 0));
  }
}

namespace {

// Deterministic logprobs for offline perplexity: one scored token per
// whitespace token of the prompt, value a pure function of (token, position).
std::vector<TokenLogprob> synthetic_logprobs(const std::string& text) {
  std::vector<TokenLogprob> out;
  auto tokens = split_whitespace(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    double frac = static_cast<double>(fnv1a64(tokens[i] + "#" + std::to_string(i)) % 1000) / 1000.0;
    out.push_back({tokens[i], -0.1 - 3.0 * frac});
  }
  return out;
}

}  // namespace

ChatResponse MockChatProvider::complete_once(const ChatRequest& req) {
  calls_.fetch_add(1);
  std::string prompt;
  for (const auto& m : req.messages)
    if (m.role == "user") prompt = m.content;
  std::string hash = prompt_hash(prompt, req.temperature);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = script_.find(hash);
    if (it != script_.end()) {
      if (it->second.fail_times > 0) {
        --it->second.fail_times;
        throw ProviderError("transport", "scripted transient failure for " + hash);
      }
      ChatResponse res;
      res.text = it->second.response;
      if (req.want_logprobs)
        res.token_logprobs =
            it->second.logprobs ? *it->second.logprobs : synthetic_logprobs(prompt);
      res.output_tokens = static_cast<int>(split_whitespace(res.text).size());
      res.prompt_tokens = static_cast<int>(split_whitespace(prompt).size());
      return res;
    }
  }
  if (fallback_ == Fallback::strict)
    throw ProviderError("unscripted", "no scripted response for prompt " + hash);
  // The synthetic fallback answers each pipeline stage in the shape it
  // expects, recognized by fixed phrases in the stage prompts, so full runs
  // work offline. Content is a pure function of the prompt.
  ChatResponse res;
  std::string h = std::to_string(fnv1a64(prompt) % 1000);
  if (prompt.find("Please rewrite the Source Task Query and Answer") !=
      std::string::npos) {
    res.text = "<Rewrote>\n<Target Task Query>\nInput:\nsynthesized query " + h +
               "\n\n" + kAnswerFormatLine +
               "\n</Target Task Query>\n<Target Task Answer>\nanswer " + h +
               "\n</Target Task Answer>\n</Rewrote>";
  } else if (prompt.find("Please rewrite the Source Task Query to synthesize") !=
             std::string::npos) {
    res.text = "<Rewrote>\n<Target Task Query>\nInput:\nsynthesized query " + h +
               "\n</Target Task Query>\n</Rewrote>";
  } else if (prompt.find("Could you help me refine the synthesized query?") !=
             std::string::npos) {
    res.text = "<Refined Query>\nInput:\nrefined query " + h + "\n\n" +
               kAnswerFormatLine + "\n</Refined Query>";
  } else if (prompt.find("please summarize the template of its inputs") !=
             std::string::npos) {
    res.text = "<Input Template> template " + h + " </Input Template>";
  } else {
    res.text = "The final answer is: " + std::to_string(fnv1a64(prompt) % 10);
  }
  if (req.want_logprobs) res.token_logprobs = synthetic_logprobs(prompt);
  res.output_tokens = 5;
  res.prompt_tokens = static_cast<int>(split_whitespace(prompt).size());
  return res;
}

HttpChatProvider::HttpChatProvider(std::string endpoint, std::string auth_env)
    : endpoint_(std::move(endpoint)), auth_env_(std::move(auth_env)) {}

ChatResponse HttpChatProvider::complete_once(const ChatRequest& req) {
#ifndef CROSSICL_WITH_HTTP
  (void)req;
  throw ProviderError("transport", "built without HTTP support");
#else
  auto slash = endpoint_.find('/', endpoint_.find("//") + 2);
  std::string host = endpoint_.substr(0, slash);
  std::string path = slash == std::string::npos ? "/v1/chat/completions"
                                                : endpoint_.substr(slash);
  httplib::Client client(host);
  client.set_read_timeout(300);
  httplib::Headers headers;
  if (!auth_env_.empty()) {
    if (const char* key = std::getenv(auth_env_.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : req.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body{{"model", req.model_id},
                      {"messages", messages},
                      {"temperature", req.temperature},
                      {"max_tokens", req.max_output_tokens}};
  if (req.want_logprobs) body["logprobs"] = true;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("transport", "no response from " + endpoint_);
  if (res->status == 400 && res->body.find("context") != std::string::npos)
    throw ProviderError("too_long", res->body);
  if (res->status != 200)
    throw ProviderError("transport",
                        "status " + std::to_string(res->status) + ": " + res->body);
  nlohmann::json doc = nlohmann::json::parse(res->body);
  const auto& choice = doc.at("choices").at(0);
  ChatResponse out;
  out.text = choice.at("message").at("content").is_null()
                 ? ""
                 : choice.at("message").at("content").get<std::string>();
  if (choice.contains("logprobs") && !choice["logprobs"].is_null() &&
      choice["logprobs"].contains("content")) {
    std::vector<TokenLogprob> lps;
    for (const auto& t : choice["logprobs"]["content"])
      lps.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    out.token_logprobs = std::move(lps);
  }
  if (doc.contains("usage")) {
    out.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
    out.output_tokens = doc["usage"].value("completion_tokens", 0);
  }
  return out;
#endif
}

void Gateway::rate_limit(const ProviderProfile& profile) {
  if (profile.rate_limit_per_min <= 0) return;
  std::unique_lock<std::mutex> lock(rate_mutex_);
  auto now = std::chrono::steady_clock::now();
  auto window = std::chrono::minutes(1);
  std::erase_if(recent_calls_, [&](auto t) { return now - t > window; });
  if (recent_calls_.size() >= static_cast<std::size_t>(profile.rate_limit_per_min)) {
    auto wait_until = recent_calls_.front() + window;
    lock.unlock();
    std::this_thread::sleep_until(wait_until);
    lock.lock();
    now = std::chrono::steady_clock::now();
    std::erase_if(recent_calls_, [&](auto t) { return now - t > window; });
  }
  recent_calls_.push_back(std::chrono::steady_clock::now());
}

ChatResponse Gateway::complete(const ChatRequest& req, const ProviderProfile& profile,
                               TranscriptBuffer* transcript, const std::string& purpose) {
  std::string prompt;
  for (const auto& m : req.messages)
    if (m.role == "user") prompt = m.content;
  if (prompt.empty())
    throw ProviderError("empty_completion", "request has no user message");

  std::size_t entry_index = 0;
  if (transcript) {
    // Persist the outbound prompt before sending.
    TranscriptEntry entry;
    entry.prompt_hash = prompt_hash(prompt, req.temperature);
    entry.prompt = prompt;
    entry.model_id = req.model_id;
    entry.temperature = req.temperature;
    entry.purpose = purpose;
    entry_index = transcript->entries.size();
    transcript->entries.push_back(std::move(entry));
  }

  int attempts = std::max(1, profile.retry.max_attempts);
  double backoff = profile.retry.initial_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      rate_limit(profile);
      calls_.fetch_add(1);
      ChatResponse res = provider_->complete_once(req);
      if (trim(res.text).empty())
        throw ProviderError("empty_completion", "provider returned empty text");
      if (transcript) {
        transcript->entries[entry_index].response = res.text;
        transcript->entries[entry_index].completed = true;
      }
      return res;
    } catch (const ProviderError& e) {
      if (e.kind() == "unscripted" || e.kind() == "too_long" || attempt >= attempts)
        throw;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(backoff)));
      backoff *= profile.retry.backoff_factor;
    }
  }
}

double Gateway::perplexity(const std::string& text, const ProviderProfile& profile,
                           TranscriptBuffer* transcript) {
  if (text.empty()) throw MetricError("empty_text", "perplexity of empty text");
  if (!provider_->supports_logprobs())
    throw CapabilityError("no_logprobs", "provider cannot score tokens");
  ChatRequest req = user_prompt(text, profile, /*want_logprobs=*/true);
  ChatResponse res = complete(req, profile, transcript, "perplexity");
  if (!res.token_logprobs || res.token_logprobs->empty())
    throw CapabilityError("no_logprobs", "provider returned no logprobs");
  double sum = 0.0;
  for (const auto& t : *res.token_logprobs) sum += t.logprob;
  double mean = sum / static_cast<double>(res.token_logprobs->size());
  return std::exp(-mean);
}

}  // namespace crossicl
