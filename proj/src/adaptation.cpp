#include "crossicl/adaptation.hpp"

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

namespace {

const std::vector<std::pair<AdaptationMode, const char*>> kModeNames = {
    {AdaptationMode::full, "full"},
    {AdaptationMode::no_src_in_lg, "no_src_in_lg"},
    {AdaptationMode::no_src_in_all, "no_src_in_all"},
    {AdaptationMode::no_refine, "no_refine"},
    {AdaptationMode::one_step, "one_step"},
    {AdaptationMode::none, "none"},
};

}  // namespace

std::string mode_name(AdaptationMode m) {
  for (const auto& [mode, name] : kModeNames)
    if (mode == m) return name;
  return "unknown";
}

AdaptationMode mode_from_name(const std::string& name) {
  for (const auto& [mode, n] : kModeNames)
    if (name == n) return mode;
  throw ConfigError("bad_mode", name);
}

const std::vector<AdaptationMode>& all_modes() {
  static const std::vector<AdaptationMode> all = [] {
    std::vector<AdaptationMode> v;
    for (const auto& [mode, _] : kModeNames) v.push_back(mode);
    return v;
  }();
  return all;
}

std::size_t mode_stage_count(AdaptationMode m) {
  switch (m) {
    case AdaptationMode::full:
    case AdaptationMode::no_src_in_lg:
    case AdaptationMode::no_src_in_all:
      return 3;
    case AdaptationMode::no_refine:
      return 2;
    case AdaptationMode::one_step:
      return 1;
    case AdaptationMode::none:
      return 0;
  }
  return 0;
}

namespace {

// One bounded retry with the identical prompt when tag extraction fails;
// nonzero temperature makes malformed outputs transient.
template <typename Fn>
auto with_tag_retry(const AdaptationSetup& setup, const std::string& prompt,
                    TranscriptBuffer* transcript, const std::string& purpose, Fn extract) {
  auto res = setup.gateway->complete(user_prompt(prompt, setup.profile),
                                     setup.profile, transcript, purpose);
  try {
    return extract(res.text);
  } catch (const AdaptError& e) {
    if (e.kind() != "tag_missing") throw;
  }
  auto retry = setup.gateway->complete(user_prompt(prompt, setup.profile),
                                       setup.profile, transcript, purpose + ":retry");
  return extract(retry.text);
}

std::string strip_label_prefix(const std::string& text) {
  std::string trimmed = trim(text);
  std::string marker = "the final answer is:";
  if (to_lower(trimmed.substr(0, marker.size())) == marker)
    return trim(trimmed.substr(marker.size()));
  return trimmed;
}

std::string render_source_demo(const TaskRecord& task, const Instance& inst) {
  return "Source Task Instruction:\n" + task.description + "\n\n" +
         render_query_block(inst.input) + "\n\n" +
         "The final answer is: " + inst.references.front();
}

}  // namespace

std::string transform_query(const TaskRecord& src_task, const Instance& src,
                            const TargetQuery& q, const AdaptationSetup& setup,
                            TranscriptBuffer* transcript) {
  std::string prompt = setup.prompts->render(
      "prompt1", {{"source_task_description", src_task.description},
                  {"source_task_query", render_query_block(src.input)},
                  {"target_task_description", q.description},
                  {"target_task_query", render_query_block(q.input)}});
  std::string out = with_tag_retry(setup, prompt, transcript, "adapt:transform",
                                   [](const std::string& text) {
                                     return extract_tag(text, "Target Task Query");
                                   });
  if (out.empty()) throw AdaptError("empty_stage", "transform produced empty query");
  return out;
}

std::string refine_query(const std::string& synthesized, const TargetQuery& q,
                         const AdaptationSetup& setup, TranscriptBuffer* transcript) {
  if (synthesized.empty())
    throw AdaptError("empty_stage", "refine of empty synthesized query");
  std::string prompt = setup.prompts->render(
      "prompt2", {{"synthesized_query", synthesized},
                  {"target_task_description", q.description},
                  {"target_task_query", render_query_block(q.input)}});
  std::string out = with_tag_retry(setup, prompt, transcript, "adapt:refine",
                                   [](const std::string& text) {
                                     return extract_tag(text, "Refined Query");
                                   });
  if (out.empty()) throw AdaptError("empty_stage", "refine produced empty query");
  return out;
}

std::string generate_label(const std::string& refined_query,
                           const std::vector<Candidate>& guides, const TargetQuery& q,
                           const AdaptationSetup& setup, TranscriptBuffer* transcript,
                           std::string* raw_response) {
  if (refined_query.empty())
    throw AdaptError("empty_stage", "label generation over empty query");
  std::string prompt;
  if (!guides.empty()) {
    std::string demos;
    for (std::size_t i = 0; i < guides.size(); ++i) {
      if (i > 0) demos += "\n\n";
      demos += render_source_demo(*guides[i].task, *guides[i].instance);
    }
    prompt = setup.prompts->render(
        "prompt3", {{"source_demonstrations", demos},
                    {"target_task_description", q.description},
                    {"target_task_query", refined_query}});
  } else {
    prompt = setup.prompts->render(
        "prompt3_unguided", {{"target_task_description", q.description},
                             {"target_task_query", refined_query}});
  }
  auto res = setup.gateway->complete(user_prompt(prompt, setup.profile),
                                     setup.profile, transcript, "adapt:label");
  if (raw_response) *raw_response = res.text;
  std::string label = strip_label_prefix(res.text);
  if (label.empty()) throw AdaptError("empty_stage", "empty label after stripping");
  return label;
}

AdaptedDemonstration one_step_adapt(const TaskRecord& src_task, const Instance& src,
                                    const TargetQuery& q, const AdaptationSetup& setup,
                                    TranscriptBuffer* transcript) {
  std::string prompt = setup.prompts->render(
      "prompt6", {{"source_task_description", src_task.description},
                  {"source_task_query", render_query_block(src.input)},
                  {"source_task_answer", src.references.front()},
                  {"target_task_description", q.description},
                  {"target_task_query", render_query_block(q.input)}});
  struct Pair {
    std::string query, answer, raw;
  };
  Pair pair = with_tag_retry(setup, prompt, transcript, "adapt:one_step",
                             [](const std::string& text) {
                               return Pair{extract_tag(text, "Target Task Query"),
                                           extract_tag(text, "Target Task Answer"), text};
                             });
  AdaptedDemonstration demo;
  demo.target_query_text = pair.query;
  demo.label = strip_label_prefix(pair.answer);
  demo.source_task_id = src_task.task_id;
  demo.source_instance_id = src.instance_id;
  demo.intermediates["raw_response"] = pair.raw;
  demo.mode = AdaptationMode::one_step;
  if (demo.label.empty()) throw AdaptError("empty_stage", "empty one-step answer");
  return demo;
}

namespace {

AdaptedDemonstration adapt_one(const Candidate& candidate,
                               const std::vector<Candidate>& selected,
                               std::size_t position, const TargetQuery& q,
                               const AdaptationSetup& setup,
                               TranscriptBuffer* transcript) {
  const TaskRecord& task = *candidate.task;
  const Instance& inst = *candidate.instance;
  AdaptedDemonstration demo;
  demo.source_task_id = task.task_id;
  demo.source_instance_id = inst.instance_id;
  demo.mode = setup.mode;
  demo.source_description = task.description;

  switch (setup.mode) {
    case AdaptationMode::none:
      demo.target_query_text = render_query_block(inst.input);
      demo.label = inst.references.front();
      return demo;

    case AdaptationMode::one_step:
      return one_step_adapt(task, inst, q, setup, transcript);

    case AdaptationMode::no_refine: {
      std::string synth = transform_query(task, inst, q, setup, transcript);
      demo.intermediates["transformed_query"] = synth;
      demo.target_query_text = synth;
      std::string raw;
      demo.label = generate_label(synth, {candidate}, q, setup, transcript, &raw);
      demo.intermediates["raw_label_response"] = raw;
      return demo;
    }

    case AdaptationMode::no_src_in_all: {
      // From-scratch query: Prompt 1 structure with the source block removed.
      std::string prompt = setup.prompts->render(
          "prompt1_no_source", {{"target_task_description", q.description},
                                {"target_task_query", render_query_block(q.input)}});
      std::string synth =
          with_tag_retry(setup, prompt, transcript, "adapt:transform",
                         [](const std::string& text) {
                           return extract_tag(text, "Target Task Query");
                         });
      if (synth.empty())
        throw AdaptError("empty_stage", "from-scratch query is empty");
      demo.intermediates["transformed_query"] = synth;
      std::string refined = refine_query(synth, q, setup, transcript);
      demo.intermediates["refined_query"] = refined;
      demo.target_query_text = refined;
      std::string raw;
      demo.label = generate_label(refined, {}, q, setup, transcript, &raw);
      demo.intermediates["raw_label_response"] = raw;
      return demo;
    }

    case AdaptationMode::full:
    case AdaptationMode::no_src_in_lg: {
      std::string synth = transform_query(task, inst, q, setup, transcript);
      demo.intermediates["transformed_query"] = synth;
      std::string refined = refine_query(synth, q, setup, transcript);
      demo.intermediates["refined_query"] = refined;
      demo.target_query_text = refined;
      if (setup.mode == AdaptationMode::full) {
        // Guides: the original instance plus, for n_guides > 1, the
        // next-ranked selections.
        std::vector<Candidate> guides{candidate};
        for (std::size_t i = position + 1;
             i < selected.size() && guides.size() < static_cast<std::size_t>(setup.n_guides);
             ++i)
          guides.push_back(selected[i]);
        std::string raw;
        demo.label = generate_label(refined, guides, q, setup, transcript, &raw);
        demo.intermediates["raw_label_response"] = raw;
      } else {
        std::string raw;
        demo.label = generate_label(refined, {}, q, setup, transcript, &raw);
        demo.intermediates["raw_label_response"] = raw;
      }
      return demo;
    }
  }
  throw AdaptError("bad_mode", "unhandled adaptation mode");
}

}  // namespace

std::vector<AdaptedDemonstration> adapt(const std::vector<Candidate>& selected,
                                        const TargetQuery& q,
                                        const AdaptationSetup& setup,
                                        TranscriptBuffer* transcript,
                                        std::vector<std::string>* errors) {
  if (selected.empty()) throw AdaptError("empty_stage", "no selected demonstrations");
  std::vector<AdaptedDemonstration> out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    try {
      out.push_back(adapt_one(selected[i], selected, i, q, setup, transcript));
    } catch (const Error& e) {
      if (setup.fail_fast || !errors) throw;
      errors->push_back(selected[i].task->task_id + "/" +
                        selected[i].instance->instance_id + ": " + e.what());
    }
  }
  return out;
}

}  // namespace crossicl
