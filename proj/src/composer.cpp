#include "crossicl/composer.hpp"

#include <algorithm>

#include "crossicl/errors.hpp"
#include "crossicl/prompts.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

std::string style_name(PromptStyle s) {
  switch (s) {
    case PromptStyle::crossicl_fewshot: return "crossicl_fewshot";
    case PromptStyle::zero_shot: return "zero_shot";
    case PromptStyle::zero_shot_cot: return "zero_shot_cot";
    case PromptStyle::query_supervised: return "query_supervised";
  }
  throw ComposeError("unknown_style", "invalid PromptStyle value");
}

PromptStyle style_from_name(const std::string& name) {
  if (name == "crossicl_fewshot" || name == "crossicl") return PromptStyle::crossicl_fewshot;
  if (name == "zero_shot") return PromptStyle::zero_shot;
  if (name == "zero_shot_cot") return PromptStyle::zero_shot_cot;
  if (name == "query_supervised") return PromptStyle::query_supervised;
  throw ComposeError("unknown_style", "unknown prompt style: " + name);
}

DemoOrder demo_order_from_name(const std::string& name) {
  if (name == "as_selected") return DemoOrder::as_selected;
  if (name == "reversed") return DemoOrder::reversed;
  if (name == "shuffled") return DemoOrder::shuffled;
  throw ComposeError("unknown_order", "unknown demo order: " + name);
}

std::string demo_order_name(DemoOrder o) {
  switch (o) {
    case DemoOrder::as_selected: return "as_selected";
    case DemoOrder::reversed: return "reversed";
    case DemoOrder::shuffled: return "shuffled";
  }
  throw ComposeError("unknown_order", "invalid DemoOrder value");
}

namespace {

// Query texts produced by the refinement stage usually carry the answer-format
// line already; drop it when the caller composes without one.
std::string strip_answer_format(std::string text) {
  const std::string with_gap = "\n\n" + std::string(kAnswerFormatLine);
  std::size_t pos;
  while ((pos = text.find(with_gap)) != std::string::npos)
    text.erase(pos, with_gap.size());
  while ((pos = text.find(kAnswerFormatLine)) != std::string::npos)
    text.erase(pos, std::string(kAnswerFormatLine).size());
  return trim(text);
}

}  // namespace

std::string render_demo_block(const AdaptedDemonstration& d,
                              const std::string& target_description,
                              bool answer_format_line) {
  if (d.label.empty())
    throw ComposeError("empty_label", "cannot render a demonstration without a label");
  const std::string& description =
      d.mode == AdaptationMode::none ? d.source_description : target_description;
  std::string query = d.target_query_text;
  if (!answer_format_line) query = strip_answer_format(query);
  return "Task Instruction:\n" + description + "\n\n" + query +
         "\n\nThe final answer is: " + d.label;
}

ComposedPrompt compose(const std::vector<AdaptedDemonstration>& demos,
                       const TargetQuery& q, PromptStyle style,
                       const ComposeOptions& options) {
  const bool few_shot =
      style == PromptStyle::crossicl_fewshot || style == PromptStyle::query_supervised;
  if (few_shot && demos.empty())
    throw ComposeError("arity", "few-shot style requires at least one demonstration");
  if (!few_shot && !demos.empty())
    throw ComposeError("arity", "zero-shot style requires an empty demonstration list");

  std::vector<const AdaptedDemonstration*> ordered;
  ordered.reserve(demos.size());
  for (const auto& d : demos) ordered.push_back(&d);
  switch (options.order) {
    case DemoOrder::as_selected:
      break;
    case DemoOrder::reversed:
      std::reverse(ordered.begin(), ordered.end());
      break;
    case DemoOrder::shuffled: {
      Rng rng(options.shuffle_seed);
      for (std::size_t i = ordered.size(); i > 1; --i)
        std::swap(ordered[i - 1], ordered[rng.bounded(i)]);
      break;
    }
  }

  std::string text;
  for (const auto* d : ordered)
    text += render_demo_block(*d, q.description, options.answer_format_line) + "\n\n";
  text += "Task Instruction:\n" + q.description + "\n\n" +
          render_query_block(q.input, options.answer_format_line);
  if (style == PromptStyle::zero_shot_cot) text += "\n\nLet's think step by step";

  ComposedPrompt out;
  out.text = std::move(text);
  out.demo_count = demos.size();
  out.style = style;
  return out;
}

std::string extract_final_answer(const std::string& response) {
  std::size_t pos = ifind_last(response, kFinalAnswerMarker);
  std::string answer = pos == std::string::npos
                           ? response
                           : response.substr(pos + std::string(kFinalAnswerMarker).size());
  answer = trim(answer);
  for (;;) {
    std::string before = answer;
    if (answer.size() >= 2 && ((answer.front() == '"' && answer.back() == '"') ||
                               (answer.front() == '\'' && answer.back() == '\'') ||
                               (answer.front() == '[' && answer.back() == ']')))
      answer = answer.substr(1, answer.size() - 2);
    while (!answer.empty() && answer.back() == '.') answer.pop_back();
    answer = trim(answer);
    if (answer == before) break;
  }
  return answer;
}

}  // namespace crossicl
