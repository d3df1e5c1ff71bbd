#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crossicl/config.hpp"
#include "crossicl/corpus.hpp"
#include "crossicl/embedding.hpp"
#include "crossicl/evaluation.hpp"
#include "crossicl/gateway.hpp"
#include "crossicl/prompts.hpp"

namespace crossicl {

struct RunArtifacts {
  ExperimentReport report;
  std::vector<ScoredPrediction> scored;
  std::vector<SelectionTrace> traces;
  std::vector<TranscriptEntry> transcripts;  // deterministic item order
  std::vector<std::string> adapted_jsonl;
  std::map<std::string, std::string> task_categories;  // target task -> category
  std::filesystem::path run_dir;
};

// End-to-end pipeline orchestration: ingest -> index -> select -> adapt ->
// compose -> complete -> score -> aggregate. Owns providers and caches for
// one run configuration.
class Engine {
 public:
  explicit Engine(RunConfig config);

  // Injectable providers (tests, record mode). Must be called before run().
  void set_chat_provider(std::shared_ptr<ChatProvider> provider);
  void set_embedding_provider(std::shared_ptr<EmbeddingProvider> provider);
  void set_prompt_dir(const std::filesystem::path& dir);

  RunArtifacts run();

  // Planned provider-call budget for --dry-run.
  std::string dry_run_plan();

  // Renders the final composed prompt for one query id ("task_id/instance_id").
  std::string dump_final_prompt(const std::string& query_id);

  const RunConfig& config() const { return config_; }
  Gateway& gateway() { return *gateway_; }
  EmbeddingService& embeddings() { return *embedding_service_; }

 private:
  void prepare();
  std::vector<std::pair<const TaskRecord*, const Instance*>> evaluation_items();

  RunConfig config_;
  Corpus corpus_;
  std::shared_ptr<ChatProvider> chat_provider_;
  std::shared_ptr<EmbeddingProvider> embedding_provider_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<EmbeddingService> embedding_service_;
  std::unique_ptr<EmbeddingIndex> index_;
  std::unique_ptr<PromptLibrary> prompts_;
  std::filesystem::path prompt_dir_;
  bool prepared_ = false;
};

// Writes config.json, transcripts.jsonl, selections.jsonl, adapted.jsonl,
// report.json and report.csv under runs_dir/<fingerprint>/. Guarded by a
// lock file; one run per run directory.
std::filesystem::path write_run_artifacts(const RunConfig& config,
                                          const RunArtifacts& artifacts);

}  // namespace crossicl
