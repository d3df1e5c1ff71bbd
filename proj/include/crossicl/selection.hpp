#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossicl/corpus.hpp"
#include "crossicl/embedding.hpp"
#include "crossicl/gateway.hpp"
#include "crossicl/prompts.hpp"

namespace crossicl {

enum class CriterionVariant {
  random,
  taskdes,
  taskdes_taskinput,  // default
  taskdes_output,
  taskdes_diversity,
  taskdes_length,
  taskdes_complexity,
  template_,
  taskdes_taskinput_output,
  taskdes_taskinput_diversity,
  taskdes_taskinput_length,
  taskdes_taskinput_complexity,
  template_taskinput,
};

std::string criterion_name(CriterionVariant v);
CriterionVariant criterion_from_name(const std::string& name);
const std::vector<CriterionVariant>& all_criteria();

struct SelectionCriterion {
  CriterionVariant variant = CriterionVariant::taskdes_taskinput;
  std::uint64_t seed = 0;  // random choice / k-means init
};

// True for criteria that need the target's gold reference (evaluation only).
bool criterion_uses_output(CriterionVariant v);
// True for criteria whose task stage compares template summaries.
bool criterion_uses_template(CriterionVariant v);
// True for criteria whose instance stage needs perplexities.
bool criterion_uses_perplexity(CriterionVariant v);
// Embedding channels a criterion consumes at the instance level.
std::set<EmbeddingChannel> criterion_channels(CriterionVariant v);

struct SourceTaskChoice {
  std::string task_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1 = best
};

struct Candidate {
  const TaskRecord* task = nullptr;
  const Instance* instance = nullptr;
};

struct RankedCandidate {
  Candidate candidate;
  double primary_score = 0.0;
  std::optional<double> auxiliary_score;
  std::optional<double> merged_rank;
};

// 2ab/(a+b); candidates sort ascending by the merged value.
double harmonic_rank_merge(std::size_t rank_a, std::size_t rank_b);

std::size_t token_length(const std::string& text);

// Lloyd's iteration with k-means++ seeding; converges when the max centroid
// shift drops below 1e-6 or after 100 iterations. Every cluster non-empty
// (empty clusters are re-seeded from the farthest point). Returns clusters of
// point indices.
std::vector<std::vector<std::size_t>> kmeans(
    const std::vector<EmbeddingVector>& points, std::size_t k,
    std::uint64_t seed);

// Perplexity of a text, supplied by the engine (gateway + cache) or a test fn.
using PerplexityFn = std::function<double(const std::string&)>;

// Context the instance-level criteria need beyond the index.
struct SelectionContext {
  const EmbeddingIndex* index = nullptr;
  EmbeddingService* embeddings = nullptr;  // for target-side vectors
  PerplexityFn perplexity;                 // complexity criteria only
  std::string target_template_summary;     // template criteria only
};

SourceTaskChoice select_source_task(const TargetQuery& q, const Corpus& corpus,
                                    SelectionContext& ctx,
                                    const SelectionCriterion& criterion,
                                    std::size_t k_th = 1);

std::vector<SourceTaskChoice> select_multi_task_pool(
    const TargetQuery& q, const Corpus& corpus, SelectionContext& ctx,
    const SelectionCriterion& criterion, std::size_t n_tasks);

// Instance stage over an explicit candidate pool (one task, or the union of a
// multi-task pool). Returns exactly n candidates in descending selection
// preference; deterministic given the seed.
std::vector<Candidate> select_demonstrations(const TargetQuery& q,
                                             const std::vector<Candidate>& pool,
                                             std::size_t n,
                                             const SelectionCriterion& criterion,
                                             SelectionContext& ctx);

// Convenience overload scanning one task's instances.
std::vector<Candidate> select_demonstrations(const TargetQuery& q,
                                             const TaskRecord& task,
                                             std::size_t n,
                                             const SelectionCriterion& criterion,
                                             SelectionContext& ctx);

// Renders Prompt 5 with the task description and its first three instance
// inputs, extracts the <Input Template> block, stores it on the task.
std::string summarize_template(TaskRecord& task, const PromptLibrary& prompts,
                               Gateway& gateway, const ProviderProfile& profile,
                               TranscriptBuffer* transcript = nullptr);

}  // namespace crossicl
