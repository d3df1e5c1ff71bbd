#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossicl/corpus.hpp"
#include "crossicl/gateway.hpp"
#include "crossicl/prompts.hpp"
#include "crossicl/selection.hpp"

namespace crossicl {

enum class AdaptationMode {
  full,          // transform -> refine -> guided label
  no_src_in_lg,  // transform -> refine -> unguided label
  no_src_in_all, // from-scratch query -> refine -> unguided label
  no_refine,     // transform -> guided label
  one_step,      // single combined prompt
  none,          // pass source demonstrations through unchanged
};

std::string mode_name(AdaptationMode m);
AdaptationMode mode_from_name(const std::string& name);
const std::vector<AdaptationMode>& all_modes();

// Provider calls per demonstration for a mode.
std::size_t mode_stage_count(AdaptationMode m);

struct AdaptedDemonstration {
  std::string target_query_text;
  std::string label;
  std::string source_task_id;
  std::string source_instance_id;
  // Populated for the stages the mode ran; absent otherwise.
  std::map<std::string, std::string> intermediates;
  AdaptationMode mode = AdaptationMode::full;
  // For mode=none blocks the source task's own description is rendered.
  std::string source_description;
};

struct AdaptationSetup {
  const PromptLibrary* prompts = nullptr;
  Gateway* gateway = nullptr;
  ProviderProfile profile;
  AdaptationMode mode = AdaptationMode::full;
  int n_guides = 1;
  bool fail_fast = true;  // per-item error policy
};

std::string transform_query(const TaskRecord& src_task, const Instance& src,
                            const TargetQuery& q, const AdaptationSetup& setup,
                            TranscriptBuffer* transcript);

std::string refine_query(const std::string& synthesized, const TargetQuery& q,
                         const AdaptationSetup& setup,
                         TranscriptBuffer* transcript);

// `guides` lists the source demonstrations shown as reference (the selected
// instance first, then next-ranked ones for n_guides > 1). Empty = unguided.
std::string generate_label(const std::string& refined_query,
                           const std::vector<Candidate>& guides,
                           const TargetQuery& q, const AdaptationSetup& setup,
                           TranscriptBuffer* transcript,
                           std::string* raw_response = nullptr);

AdaptedDemonstration one_step_adapt(const TaskRecord& src_task,
                                    const Instance& src, const TargetQuery& q,
                                    const AdaptationSetup& setup,
                                    TranscriptBuffer* transcript);

// Runs the configured mode over every selected candidate; output order
// matches input order. Under skip policy a failed item is dropped and
// recorded in `errors` (when non-null).
std::vector<AdaptedDemonstration> adapt(const std::vector<Candidate>& selected,
                                        const TargetQuery& q,
                                        const AdaptationSetup& setup,
                                        TranscriptBuffer* transcript,
                                        std::vector<std::string>* errors = nullptr);

}  // namespace crossicl
