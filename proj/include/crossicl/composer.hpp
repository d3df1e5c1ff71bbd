#pragma once

#include <string>
#include <vector>

#include "crossicl/adaptation.hpp"
#include "crossicl/corpus.hpp"

namespace crossicl {

enum class PromptStyle { crossicl_fewshot, zero_shot, zero_shot_cot, query_supervised };

std::string style_name(PromptStyle s);
PromptStyle style_from_name(const std::string& name);

enum class DemoOrder { as_selected, reversed, shuffled };

DemoOrder demo_order_from_name(const std::string& name);
std::string demo_order_name(DemoOrder o);

struct ComposedPrompt {
  std::string text;
  std::size_t demo_count = 0;
  PromptStyle style = PromptStyle::zero_shot;
};

struct ComposeOptions {
  DemoOrder order = DemoOrder::reversed;  // most-similar demo adjacent to query
  std::uint64_t shuffle_seed = 0;
  bool answer_format_line = true;
};

std::string render_demo_block(const AdaptedDemonstration& d,
                              const std::string& target_description,
                              bool answer_format_line = true);

ComposedPrompt compose(const std::vector<AdaptedDemonstration>& demos,
                       const TargetQuery& q, PromptStyle style,
                       const ComposeOptions& options = {});

// Text after the last "The final answer is:" (case-insensitive), trimmed of
// whitespace, surrounding quotes/brackets, and trailing period; the whole
// trimmed response when the marker is absent. Total and idempotent.
std::string extract_final_answer(const std::string& response);

}  // namespace crossicl
