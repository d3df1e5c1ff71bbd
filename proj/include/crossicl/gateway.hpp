#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace crossicl {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  std::string model_id;
  bool want_logprobs = false;
};

ChatRequest user_prompt(std::string prompt, const struct ProviderProfile& profile,
                        bool want_logprobs = false);

struct TokenLogprob {
  std::string token;
  double logprob;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  int prompt_tokens = 0;
  int output_tokens = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 200;
  double backoff_factor = 2.0;
};

struct ProviderProfile {
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string auth_env;  // env var holding the bearer token
  std::string model_id = "mock-chat";
  double temperature = 0.7;
  int max_output_tokens = 1024;
  RetryPolicy retry;
  int rate_limit_per_min = 0;  // 0 = unlimited
};

// Stable key for scripting/replaying a call: prompt text + temperature.
std::string prompt_hash(const std::string& prompt, double temperature);

struct TranscriptEntry {
  std::string prompt_hash;
  std::string prompt;
  std::string response;
  std::string model_id;
  double temperature = 0.0;
  std::string purpose;  // e.g. adapt:transform, final_answer
  bool completed = false;
};

// Per-work-item transcript buffer. The prompt is recorded before dispatch;
// the response is filled in on completion. Buffers are flushed to the run's
// transcripts.jsonl in deterministic item order.
struct TranscriptBuffer {
  std::vector<TranscriptEntry> entries;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete_once(const ChatRequest& req) = 0;
  virtual bool supports_logprobs() const { return false; }
};

// Scripted offline provider. Responses are keyed by prompt_hash; unscripted
// prompts either fail (strict) or get a deterministic synthetic answer.
class MockChatProvider : public ChatProvider {
 public:
  enum class Fallback { strict, synthetic };

  explicit MockChatProvider(Fallback fallback = Fallback::strict)
      : fallback_(fallback) {}

  void script(const std::string& prompt, double temperature,
              const std::string& response, int fail_times = 0);
  void script_logprobs(const std::string& prompt, double temperature,
                       const std::string& response,
                       std::vector<TokenLogprob> logprobs);
  void script_hash(const std::string& hash, const std::string& response,
                   int fail_times = 0);
  void load_script(const std::filesystem::path& jsonl_path);

  ChatResponse complete_once(const ChatRequest& req) override;
  bool supports_logprobs() const override { return true; }

  std::size_t call_count() const { return calls_.load(); }

 private:
  struct Entry {
    std::string response;
    int fail_times = 0;  // transient failures before success
    std::optional<std::vector<TokenLogprob>> logprobs;
  };
  Fallback fallback_;
  std::map<std::string, Entry> script_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mutex_;
};

class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(std::string endpoint, std::string auth_env);
  ChatResponse complete_once(const ChatRequest& req) override;
  bool supports_logprobs() const override { return true; }

 private:
  std::string endpoint_;
  std::string auth_env_;
};

// Retry, rate limiting, transcript capture, call accounting.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ChatProvider> provider)
      : provider_(std::move(provider)) {}

  ChatResponse complete(const ChatRequest& req, const ProviderProfile& profile,
                        TranscriptBuffer* transcript = nullptr,
                        const std::string& purpose = {});

  // exp(-(1/T) * sum logprob_i) over the T scored tokens of `text`.
  double perplexity(const std::string& text, const ProviderProfile& profile,
                    TranscriptBuffer* transcript = nullptr);

  std::size_t call_count() const { return calls_.load(); }
  ChatProvider& provider() { return *provider_; }

 private:
  void rate_limit(const ProviderProfile& profile);

  std::shared_ptr<ChatProvider> provider_;
  std::atomic<std::size_t> calls_{0};
  std::mutex rate_mutex_;
  std::vector<std::chrono::steady_clock::time_point> recent_calls_;
};

}  // namespace crossicl
