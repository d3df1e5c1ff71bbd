#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/gateway.hpp"
#include "test_helpers.hpp"

using namespace crossicl;
using namespace crossicl::testing;

namespace {

ProviderProfile fast_profile() {
  ProviderProfile p;
  p.temperature = 0.7;
  p.retry.initial_backoff_ms = 1;  // keep retried tests fast
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("gateway");

TEST_CASE("prompt_hash is stable and sensitive to prompt and temperature") {
  CHECK(prompt_hash("p", 0.7) == prompt_hash("p", 0.7));
  CHECK(prompt_hash("p", 0.7) != prompt_hash("q", 0.7));
  CHECK(prompt_hash("p", 0.7) != prompt_hash("p", 0.6));
}

TEST_CASE("scripted mock replays responses; strict mode rejects the unknown") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile = fast_profile();
  mock->script("hello", profile.temperature, "The final answer is: 2");
  Gateway gateway(mock);
  auto res = gateway.complete(user_prompt("hello", profile), profile);
  CHECK(res.text == "The final answer is: 2");
  try {
    gateway.complete(user_prompt("unknown", profile), profile);
    FAIL("expected unscripted");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == "unscripted");
  }
}

TEST_CASE("synthetic fallback is deterministic") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::synthetic);
  ProviderProfile profile = fast_profile();
  Gateway gateway(mock);
  auto a = gateway.complete(user_prompt("anything", profile), profile);
  auto b = gateway.complete(user_prompt("anything", profile), profile);
  CHECK(a.text == b.text);
  CHECK(a.text.rfind("The final answer is: ", 0) == 0);
}

TEST_CASE("transient failures are retried up to the policy limit") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile = fast_profile();
  mock->script("flaky", profile.temperature, "ok", /*fail_times=*/2);
  Gateway gateway(mock);
  TranscriptBuffer transcript;
  auto res = gateway.complete(user_prompt("flaky", profile), profile, &transcript, "test");
  CHECK(res.text == "ok");
  CHECK(mock->call_count() == 3);  // two failures + success

  mock->script("dead", profile.temperature, "never", /*fail_times=*/5);
  CHECK_THROWS_AS(gateway.complete(user_prompt("dead", profile), profile),
                  ProviderError);
}

TEST_CASE("transcript records the prompt before completion and the outcome after") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile = fast_profile();
  mock->script("hello", profile.temperature, "world");
  Gateway gateway(mock);
  TranscriptBuffer transcript;
  gateway.complete(user_prompt("hello", profile), profile, &transcript, "purposeful");
  REQUIRE(transcript.entries.size() == 1);
  const auto& entry = transcript.entries[0];
  CHECK(entry.prompt == "hello");
  CHECK(entry.response == "world");
  CHECK(entry.purpose == "purposeful");
  CHECK(entry.completed);
  CHECK(entry.prompt_hash == prompt_hash("hello", profile.temperature));

  // A failed call still leaves the prompt in the transcript, uncompleted.
  try {
    gateway.complete(user_prompt("unknown", profile), profile, &transcript, "boom");
  } catch (const ProviderError&) {
  }
  REQUIRE(transcript.entries.size() == 2);
  CHECK(transcript.entries[1].prompt == "unknown");
  CHECK_FALSE(transcript.entries[1].completed);
}

TEST_CASE("empty completions are rejected") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile = fast_profile();
  mock->script("empty", profile.temperature, "");
  Gateway gateway(mock);
  try {
    gateway.complete(user_prompt("empty", profile), profile);
    FAIL("expected empty_completion");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == "empty_completion");
  }
}

TEST_CASE("perplexity is exp of the negative mean token logprob") {
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile = fast_profile();
  // Tokens scored at -ln2 and -ln8: mean -(ln2+ln8)/2 = -ln4, so ppl = 4.
  mock->script_logprobs("two words", profile.temperature, "two words",
                        {{"two", -std::log(2.0)}, {"words", -std::log(8.0)}});
  Gateway gateway(mock);
  CHECK(gateway.perplexity("two words", profile) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("perplexity requires logprob support") {
  // A provider that reports no logprob capability.
  struct NoLogprobs : ChatProvider {
    ChatResponse complete_once(const ChatRequest&) override {
      return ChatResponse{.text = "x"};
    }
  };
  ProviderProfile profile = fast_profile();
  Gateway gateway(std::make_shared<NoLogprobs>());
  CHECK_THROWS_AS(gateway.perplexity("text", profile), CapabilityError);
}

TEST_CASE("scripts load from JSONL by prompt or hash") {
  TmpDir tmp;
  ProviderProfile profile = fast_profile();
  std::string jsonl =
      nlohmann::json{{"prompt", "a"}, {"temperature", profile.temperature},
                     {"response", "ra"}}
          .dump() +
      "\n" +
      nlohmann::json{{"prompt_hash", prompt_hash("b", profile.temperature)},
                     {"response", "rb"}}
          .dump() +
      "\n";
  write_file(tmp / "script.jsonl", jsonl);
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  mock->load_script(tmp / "script.jsonl");
  Gateway gateway(mock);
  CHECK(gateway.complete(user_prompt("a", profile), profile).text == "ra");
  CHECK(gateway.complete(user_prompt("b", profile), profile).text == "rb");
}

TEST_SUITE_END();
