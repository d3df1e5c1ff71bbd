#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "crossicl/composer.hpp"
#include "crossicl/errors.hpp"
#include "crossicl/prompts.hpp"
#include "test_helpers.hpp"

using namespace crossicl;
using namespace crossicl::testing;

namespace {

AdaptedDemonstration make_demo(const std::string& query_input,
                               const std::string& label) {
  AdaptedDemonstration d;
  d.target_query_text = render_query_block(query_input);
  d.label = label;
  d.mode = AdaptationMode::full;
  return d;
}

struct ParsedPrompt {
  std::string description;
  std::vector<AdaptedDemonstration> demos;
  TargetQuery query;
};

// Splits a composed few-shot prompt back into demonstrations plus the final
// query section. Purely structural; used to turn the published example into a
// compose() fixture.
ParsedPrompt parse_composed(const std::string& text) {
  const std::string heading = "Task Instruction:\n";
  REQUIRE(text.rfind(heading, 0) == 0);
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (pos != std::string::npos) {
    std::size_t next = text.find("\n\n" + heading, pos);
    blocks.push_back(text.substr(pos, next == std::string::npos ? next
                                                                : next - pos));
    pos = next == std::string::npos ? next : next + 2;
  }
  REQUIRE(blocks.size() >= 2);

  ParsedPrompt out;
  const std::string answer_sep = "\n\nThe final answer is: ";
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    const std::string& block = blocks[i];
    std::size_t desc_end = block.find("\n\nInput:\n");
    REQUIRE(desc_end != std::string::npos);
    std::string desc = block.substr(heading.size(), desc_end - heading.size());
    if (i == 0)
      out.description = desc;
    else
      REQUIRE(desc == out.description);  // crossicl demos share the target's
    std::size_t label_at = block.rfind(answer_sep);
    REQUIRE(label_at != std::string::npos);
    AdaptedDemonstration d;
    d.target_query_text =
        block.substr(desc_end + 2, label_at - desc_end - 2);
    d.label = block.substr(label_at + answer_sep.size());
    d.mode = AdaptationMode::full;
    out.demos.push_back(std::move(d));
  }

  const std::string& tail = blocks.back();
  std::size_t desc_end = tail.find("\n\nInput:\n");
  REQUIRE(desc_end != std::string::npos);
  REQUIRE(tail.substr(heading.size(), desc_end - heading.size()) == out.description);
  const std::string suffix = "\n\n" + kAnswerFormatLine;
  REQUIRE(tail.compare(tail.size() - suffix.size(), suffix.size(), suffix) == 0);
  std::size_t input_at = desc_end + 2 + std::string("Input:\n").size();
  out.query.description = out.description;
  out.query.input = tail.substr(input_at, tail.size() - suffix.size() - input_at);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("composer");

TEST_CASE("style and order names round-trip") {
  for (auto s : {PromptStyle::crossicl_fewshot, PromptStyle::zero_shot,
                 PromptStyle::zero_shot_cot, PromptStyle::query_supervised})
    CHECK(style_from_name(style_name(s)) == s);
  CHECK(style_from_name("crossicl") == PromptStyle::crossicl_fewshot);
  CHECK_THROWS_AS(style_from_name("few_shot"), ComposeError);
  for (auto o : {DemoOrder::as_selected, DemoOrder::reversed, DemoOrder::shuffled})
    CHECK(demo_order_from_name(demo_order_name(o)) == o);
  CHECK_THROWS_AS(demo_order_from_name("sorted"), ComposeError);
}

TEST_CASE("compose reproduces the published five-shot prompt byte-for-byte") {
  std::string expected = golden("prompt4_user.txt");
  ParsedPrompt parsed = parse_composed(expected);
  REQUIRE(parsed.demos.size() == 5);

  ComposeOptions options;
  options.order = DemoOrder::as_selected;  // the fixture's order is the layout
  auto composed =
      compose(parsed.demos, parsed.query, PromptStyle::crossicl_fewshot, options);
  CHECK(composed.text == expected);
  CHECK(composed.demo_count == 5);
  CHECK(composed.style == PromptStyle::crossicl_fewshot);
}

TEST_CASE("render_demo_block layout, description choice and empty-label error") {
  AdaptedDemonstration d = make_demo("what is 1+1?", "2");
  CHECK(render_demo_block(d, "Add the numbers") ==
        "Task Instruction:\nAdd the numbers\n\nInput:\nwhat is 1+1?\n\n" +
            kAnswerFormatLine + "\n\nThe final answer is: 2");

  SUBCASE("mode none keeps the source description") {
    d.mode = AdaptationMode::none;
    d.source_description = "Original source task";
    CHECK(render_demo_block(d, "Add the numbers")
              .rfind("Task Instruction:\nOriginal source task\n\n", 0) == 0);
  }
  SUBCASE("answer_format_line=false strips the embedded format line") {
    std::string block = render_demo_block(d, "Add the numbers", false);
    CHECK(block == "Task Instruction:\nAdd the numbers\n\nInput:\nwhat is 1+1?\n\n"
                   "The final answer is: 2");
    CHECK(block.find(kAnswerFormatLine) == std::string::npos);
  }
  SUBCASE("empty label is rejected") {
    d.label.clear();
    CHECK_THROWS_AS(render_demo_block(d, "Add the numbers"), ComposeError);
  }
}

TEST_CASE("compose arity rules per style") {
  TargetQuery q{"Describe the task", "the input", {}};
  std::vector<AdaptedDemonstration> demos{make_demo("a", "1")};
  CHECK_THROWS_AS(compose({}, q, PromptStyle::crossicl_fewshot), ComposeError);
  CHECK_THROWS_AS(compose({}, q, PromptStyle::query_supervised), ComposeError);
  CHECK_THROWS_AS(compose(demos, q, PromptStyle::zero_shot), ComposeError);
  CHECK_THROWS_AS(compose(demos, q, PromptStyle::zero_shot_cot), ComposeError);
  CHECK_NOTHROW(compose(demos, q, PromptStyle::crossicl_fewshot));
  CHECK_NOTHROW(compose({}, q, PromptStyle::zero_shot));
}

TEST_CASE("zero-shot styles render only the query; CoT appends its suffix") {
  TargetQuery q{"Describe the task", "the input", {}};
  auto zs = compose({}, q, PromptStyle::zero_shot);
  CHECK(zs.text == "Task Instruction:\nDescribe the task\n\n" +
                       render_query_block("the input"));
  auto cot = compose({}, q, PromptStyle::zero_shot_cot);
  CHECK(cot.text == zs.text + "\n\nLet's think step by step");
  CHECK(zs.demo_count == 0);
}

TEST_CASE("demo orders: append-only prefix, reversal, seeded shuffle") {
  TargetQuery q{"Describe the task", "the input", {}};
  std::vector<AdaptedDemonstration> demos;
  for (int i = 0; i < 6; ++i)
    demos.push_back(make_demo("query " + std::to_string(i),
                              "label" + std::to_string(i)));

  auto positions = [&](const std::string& text) {
    std::vector<std::size_t> at;
    for (const auto& d : demos) at.push_back(text.find("The final answer is: " + d.label));
    return at;
  };

  ComposeOptions as_is;
  as_is.order = DemoOrder::as_selected;
  auto base = compose(demos, q, PromptStyle::crossicl_fewshot, as_is);
  auto at = positions(base.text);
  CHECK(std::is_sorted(at.begin(), at.end()));
  // The query block is appended after the demos, untouched.
  CHECK(base.text.find("Task Instruction:\nDescribe the task\n\nInput:\nthe input") >
        at.back());

  ComposeOptions rev;
  rev.order = DemoOrder::reversed;
  auto reversed = compose(demos, q, PromptStyle::crossicl_fewshot, rev);
  auto rat = positions(reversed.text);
  CHECK(std::is_sorted(rat.rbegin(), rat.rend()));

  ComposeOptions shuf;
  shuf.order = DemoOrder::shuffled;
  shuf.shuffle_seed = 7;
  auto shuffled_a = compose(demos, q, PromptStyle::crossicl_fewshot, shuf);
  auto shuffled_b = compose(demos, q, PromptStyle::crossicl_fewshot, shuf);
  CHECK(shuffled_a.text == shuffled_b.text);  // same seed, same layout
  shuf.shuffle_seed = 8;
  auto shuffled_c = compose(demos, q, PromptStyle::crossicl_fewshot, shuf);
  CHECK(shuffled_a.text != shuffled_c.text);
  // A shuffle is a permutation: every block still present exactly once.
  for (const auto& d : demos)
    CHECK(shuffled_a.text.find("The final answer is: " + d.label) !=
          std::string::npos);
}

TEST_CASE("extract_final_answer: 25-case table") {
  struct Case {
    const char* response;
    const char* expected;
  };
  const Case cases[] = {
      {"The final answer is: 42", "42"},
      {"The final answer is: 42.", "42"},
      {"the final answer is: yes", "yes"},
      {"THE FINAL ANSWER IS: Yes", "Yes"},
      {"The final answer is:\n  Paris  ", "Paris"},
      {"The final answer is: \"quoted\"", "quoted"},
      {"The final answer is: 'single'", "single"},
      {"The final answer is: [bracketed]", "bracketed"},
      {"The final answer is: \"[nested].\"", "nested"},
      {"The final answer is: \" padded \"", "padded"},
      {"Reasoning first.\nThe final answer is: 7", "7"},
      {"The final answer is: 1\nThe final answer is: 2", "2"},
      {"The final answer is: option1/2", "option1/2"},
      {"The final answer is: a.b.c..", "a.b.c"},
      {"The final answer is: ", ""},
      {"The final answer is:", ""},
      {"no marker at all", "no marker at all"},
      {"  whitespace only marker-free  ", "whitespace only marker-free"},
      {"", ""},
      {"The final answer is: multi word answer", "multi word answer"},
      {"The final answer is: \"it's fine\"", "it's fine"},
      {"... The Final Answer Is: MiXeD", "MiXeD"},
      {"The final answer is: [1, 2, 3]", "1, 2, 3"},
      {"The final answer is: answer with trailing spaces   ", "answer with trailing spaces"},
      {"Answer: 9", "Answer: 9"},
  };
  CHECK(std::size(cases) == 25);
  for (const auto& c : cases) {
    CAPTURE(c.response);
    std::string got = extract_final_answer(c.response);
    CHECK(got == c.expected);
    CHECK(extract_final_answer(got) == got);  // idempotent on its own output
  }
}

TEST_SUITE_END();
