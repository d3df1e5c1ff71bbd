#include "crossicl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "crossicl/adaptation.hpp"
#include "crossicl/composer.hpp"
#include "crossicl/errors.hpp"
#include "crossicl/selection.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

namespace {

PromptStyle method_style(Method m) {
  switch (m) {
    case Method::crossicl: return PromptStyle::crossicl_fewshot;
    case Method::zero_shot: return PromptStyle::zero_shot;
    case Method::zero_shot_cot: return PromptStyle::zero_shot_cot;
    case Method::query_supervised: return PromptStyle::query_supervised;
  }
  throw ConfigError("unknown_method", "invalid Method value");
}

std::uint64_t round_seed(std::uint64_t base, std::size_t round) {
  return base * 1000003ull + round;
}

std::uint64_t item_seed(std::uint64_t round_seed_value, const std::string& task_id,
                        const std::string& instance_id) {
  return round_seed_value ^ fnv1a64(task_id + "/" + instance_id);
}

nlohmann::json demo_to_json(const AdaptedDemonstration& d, std::size_t round,
                            const std::string& target_task_id,
                            const std::string& target_instance_id) {
  nlohmann::json j;
  j["round"] = round;
  j["target_task_id"] = target_task_id;
  j["target_instance_id"] = target_instance_id;
  j["source_task_id"] = d.source_task_id;
  j["source_instance_id"] = d.source_instance_id;
  j["mode"] = mode_name(d.mode);
  j["target_query_text"] = d.target_query_text;
  j["label"] = d.label;
  j["intermediates"] = d.intermediates;
  return j;
}

nlohmann::json transcript_to_json(const TranscriptEntry& e) {
  return {{"prompt_hash", e.prompt_hash}, {"prompt", e.prompt},
          {"response", e.response},       {"model_id", e.model_id},
          {"temperature", e.temperature}, {"purpose", e.purpose},
          {"completed", e.completed}};
}

nlohmann::json trace_to_json(const SelectionTrace& t) {
  return {{"round", t.round_index},
          {"target_task_id", t.target_task_id},
          {"target_category", t.target_category},
          {"target_instance_id", t.target_instance_id},
          {"criterion", t.criterion},
          {"source_task_id", t.source_task_id},
          {"source_category", t.source_category},
          {"chosen", t.chosen},
          {"scores", t.scores}};
}

// Outcome of one (round, instance) work item.
struct ItemResult {
  ScoredPrediction scored;
  std::optional<SelectionTrace> trace;
  std::vector<std::string> adapted_jsonl;
  TranscriptBuffer transcript;
};

}  // namespace

Engine::Engine(RunConfig config) : config_(std::move(config)) {
  config_.validate();
}

void Engine::set_chat_provider(std::shared_ptr<ChatProvider> provider) {
  if (prepared_) throw ConfigError("late_injection", "providers must be set before run()");
  chat_provider_ = std::move(provider);
}

void Engine::set_embedding_provider(std::shared_ptr<EmbeddingProvider> provider) {
  if (prepared_) throw ConfigError("late_injection", "providers must be set before run()");
  embedding_provider_ = std::move(provider);
}

void Engine::set_prompt_dir(const std::filesystem::path& dir) {
  if (prepared_) throw ConfigError("late_injection", "prompt dir must be set before run()");
  prompt_dir_ = dir;
}

void Engine::prepare() {
  if (prepared_) return;
  corpus_ = build_corpus(config_.source_dir, config_.target_dir);

  if (!chat_provider_) {
    if (config_.mock.enabled) {
      auto fallback = config_.mock.fallback == "strict"
                          ? MockChatProvider::Fallback::strict
                          : MockChatProvider::Fallback::synthetic;
      auto mock = std::make_shared<MockChatProvider>(fallback);
      if (!config_.mock.script_path.empty()) mock->load_script(config_.mock.script_path);
      chat_provider_ = std::move(mock);
    } else {
      chat_provider_ = std::make_shared<HttpChatProvider>(config_.chat_profile.endpoint,
                                                          config_.chat_profile.auth_env);
    }
  }
  if (!embedding_provider_) {
    if (config_.mock.enabled) {
      embedding_provider_ = std::make_shared<HashEmbeddingProvider>(config_.embedding_dim);
    } else {
      embedding_provider_ =
          std::make_shared<HttpEmbeddingProvider>(config_.embeddings_profile);
    }
  }
  gateway_ = std::make_unique<Gateway>(chat_provider_);
  embedding_service_ = std::make_unique<EmbeddingService>(
      embedding_provider_, std::filesystem::path(config_.cache_dir) / "embeddings",
      config_.embedding_dim);
  prompts_ = std::make_unique<PromptLibrary>(prompt_dir_);
  prepared_ = true;
}

std::vector<std::pair<const TaskRecord*, const Instance*>> Engine::evaluation_items() {
  std::vector<std::pair<const TaskRecord*, const Instance*>> items;
  for (const auto& [task_id, task] : corpus_.target_tasks) {
    std::size_t head = std::min<std::size_t>(config_.head_per_task, task.instances.size());
    for (std::size_t i = 0; i < head; ++i) items.emplace_back(&task, &task.instances[i]);
  }
  if (config_.sample_per_category == 0) return items;

  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < items.size(); ++i)
    by_category[items[i].first->category].push_back(i);
  std::vector<bool> keep(items.size(), false);
  for (auto& [category, indices] : by_category) {
    Rng rng(config_.seed ^ fnv1a64(category));
    for (std::size_t i = indices.size(); i > 1; --i)
      std::swap(indices[i - 1], indices[rng.bounded(i)]);
    std::size_t take = std::min<std::size_t>(config_.sample_per_category, indices.size());
    for (std::size_t i = 0; i < take; ++i) keep[indices[i]] = true;
  }
  std::vector<std::pair<const TaskRecord*, const Instance*>> sampled;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (keep[i]) sampled.push_back(items[i]);
  return sampled;
}

namespace {

// Everything an item worker needs, shared read-only across threads except for
// the perplexity cache and gateway (internally synchronized).
struct RunShared {
  const RunConfig* config = nullptr;
  const Corpus* corpus = nullptr;
  const EmbeddingIndex* index = nullptr;
  EmbeddingService* embeddings = nullptr;
  const PromptLibrary* prompts = nullptr;
  Gateway* gateway = nullptr;
  std::map<std::string, std::string> target_template_summaries;  // task -> summary
  std::map<std::string, double> perplexity_cache;
  std::mutex perplexity_mutex;
};

double cached_perplexity(RunShared& shared, const std::string& text,
                         TranscriptBuffer* transcript) {
  {
    std::lock_guard<std::mutex> lock(shared.perplexity_mutex);
    auto it = shared.perplexity_cache.find(text);
    if (it != shared.perplexity_cache.end()) return it->second;
  }
  double value = shared.gateway->perplexity(text, shared.config->chat_profile, transcript);
  std::lock_guard<std::mutex> lock(shared.perplexity_mutex);
  shared.perplexity_cache.emplace(text, value);
  return value;
}

struct CrossiclOutcome {
  std::string response_text;
  std::vector<AdaptedDemonstration> demos;
  SelectionTrace trace;
};

// One full CrossICL pass for a single query: select -> adapt -> compose ->
// complete. Throws on pipeline failure; the caller applies the error policy.
CrossiclOutcome run_crossicl_item(RunShared& shared, const TaskRecord& task,
                                  const Instance& inst, std::size_t round,
                                  std::uint64_t seed, TranscriptBuffer* transcript) {
  const RunConfig& cfg = *shared.config;
  TargetQuery q{task.description, inst.input, inst.references};

  SelectionCriterion criterion = cfg.criterion;
  criterion.seed = seed;
  if (criterion_uses_output(criterion.variant) && inst.references.empty())
    throw SelectionError("no_reference",
                         "output criterion needs a gold reference for " + inst.instance_id);

  SelectionContext ctx;
  ctx.index = shared.index;
  ctx.embeddings = shared.embeddings;
  ctx.perplexity = [&shared, transcript](const std::string& text) {
    return cached_perplexity(shared, text, transcript);
  };
  auto summary_it = shared.target_template_summaries.find(task.task_id);
  if (summary_it != shared.target_template_summaries.end())
    ctx.target_template_summary = summary_it->second;

  CrossiclOutcome out;
  out.trace.round_index = round;
  out.trace.target_task_id = task.task_id;
  out.trace.target_category = task.category;
  out.trace.target_instance_id = inst.instance_id;
  out.trace.criterion = criterion_name(criterion.variant);

  std::vector<Candidate> selected;
  if (cfg.n_tasks <= 1) {
    SourceTaskChoice choice =
        select_source_task(q, *shared.corpus, ctx, criterion, cfg.k_th_task);
    const TaskRecord& source = shared.corpus->source_tasks.at(choice.task_id);
    out.trace.source_task_id = choice.task_id;
    out.trace.source_category = source.category;
    out.trace.scores.push_back(choice.score);
    selected = select_demonstrations(q, source, cfg.n_demos, criterion, ctx);
  } else {
    auto choices = select_multi_task_pool(q, *shared.corpus, ctx, criterion, cfg.n_tasks);
    std::vector<Candidate> pool;
    for (const auto& choice : choices) {
      const TaskRecord& source = shared.corpus->source_tasks.at(choice.task_id);
      out.trace.scores.push_back(choice.score);
      for (const auto& candidate : source.instances) pool.push_back({&source, &candidate});
    }
    out.trace.source_task_id = choices.front().task_id;
    out.trace.source_category =
        shared.corpus->source_tasks.at(choices.front().task_id).category;
    selected = select_demonstrations(q, pool, cfg.n_demos, criterion, ctx);
  }
  for (const auto& candidate : selected)
    out.trace.chosen.push_back(candidate.task->task_id + "/" +
                               candidate.instance->instance_id);

  AdaptationSetup setup;
  setup.prompts = shared.prompts;
  setup.gateway = shared.gateway;
  setup.profile = cfg.chat_profile;
  setup.mode = cfg.mode;
  setup.n_guides = cfg.n_guides;
  setup.fail_fast = cfg.error_policy == ErrorPolicy::fail_fast;
  std::vector<std::string> adapt_errors;
  out.demos = adapt(selected, q, setup, transcript, &adapt_errors);
  if (out.demos.empty())
    throw AdaptError("all_failed", "no demonstration survived adaptation: " +
                                       (adapt_errors.empty() ? std::string("empty pool")
                                                             : adapt_errors.front()));

  ComposeOptions options;
  options.order = cfg.demo_order;
  options.shuffle_seed = seed;
  ComposedPrompt prompt = compose(out.demos, q, PromptStyle::crossicl_fewshot, options);
  auto res = shared.gateway->complete(user_prompt(prompt.text, cfg.chat_profile),
                                      cfg.chat_profile, transcript, "final_answer");
  out.response_text = res.text;
  return out;
}

void score_prediction(ScoredPrediction& scored, const Instance& inst,
                      const std::string& response) {
  scored.prediction = response;
  scored.extracted_answer = extract_final_answer(response);
  if (inst.references.empty())
    throw MetricError("no_references", "instance " + inst.instance_id + " has no gold output");
  scored.per_metric["rouge_l"] = rouge_l(scored.extracted_answer, inst.references);
  scored.per_metric["exact_match"] =
      static_cast<double>(exact_match(scored.extracted_answer, inst.references));
}

ItemResult run_zero_shot_item(RunShared& shared, const TaskRecord& task,
                              const Instance& inst, std::size_t round,
                              PromptStyle style) {
  const RunConfig& cfg = *shared.config;
  ItemResult result;
  result.scored.task_id = task.task_id;
  result.scored.instance_id = inst.instance_id;
  result.scored.round_index = round;
  TargetQuery q{task.description, inst.input, inst.references};
  ComposedPrompt prompt = compose({}, q, style);
  auto res = shared.gateway->complete(user_prompt(prompt.text, cfg.chat_profile),
                                      cfg.chat_profile, &result.transcript, "final_answer");
  score_prediction(result.scored, inst, res.text);
  return result;
}

ItemResult run_one_item(RunShared& shared, const TaskRecord& task, const Instance& inst,
                        std::size_t round, std::uint64_t seed) {
  const RunConfig& cfg = *shared.config;
  switch (cfg.method) {
    case Method::zero_shot:
      return run_zero_shot_item(shared, task, inst, round, PromptStyle::zero_shot);
    case Method::zero_shot_cot:
      return run_zero_shot_item(shared, task, inst, round, PromptStyle::zero_shot_cot);
    case Method::crossicl:
    case Method::query_supervised: {  // query_supervised adds its pool pass on top
      ItemResult result;
      result.scored.task_id = task.task_id;
      result.scored.instance_id = inst.instance_id;
      result.scored.round_index = round;
      CrossiclOutcome out =
          run_crossicl_item(shared, task, inst, round, seed, &result.transcript);
      result.trace = out.trace;
      for (const auto& demo : out.demos)
        result.adapted_jsonl.push_back(
            demo_to_json(demo, round, task.task_id, inst.instance_id).dump());
      score_prediction(result.scored, inst, out.response_text);
      return result;
    }
  }
  throw ConfigError("unknown_method", "invalid Method value");
}

ItemResult failed_item(const TaskRecord& task, const Instance& inst, std::size_t round,
                       const std::string& what) {
  ItemResult result;
  result.scored.task_id = task.task_id;
  result.scored.instance_id = inst.instance_id;
  result.scored.round_index = round;
  result.scored.errored = true;
  result.scored.prediction = "";
  result.scored.extracted_answer = "";
  result.scored.per_metric["rouge_l"] = 0.0;
  result.scored.per_metric["exact_match"] = 0.0;
  TranscriptEntry note;
  note.purpose = "error";
  note.response = what;
  result.transcript.entries.push_back(std::move(note));
  return result;
}

}  // namespace

RunArtifacts Engine::run() {
  prepare();

  RunShared shared;
  shared.config = &config_;
  shared.corpus = &corpus_;
  shared.embeddings = embedding_service_.get();
  shared.prompts = prompts_.get();
  shared.gateway = gateway_.get();

  RunArtifacts artifacts;
  TranscriptBuffer prep_transcript;

  const bool selects = config_.method == Method::crossicl ||
                       config_.method == Method::query_supervised;
  if (selects) {
    if (corpus_.source_tasks.empty())
      throw SelectionError("empty_pool", "no source tasks ingested");
    if (criterion_uses_template(config_.criterion.variant)) {
      for (auto& [task_id, task] : corpus_.source_tasks)
        summarize_template(task, *prompts_, *gateway_, config_.chat_profile,
                           &prep_transcript);
      for (auto& [task_id, task] : corpus_.target_tasks) {
        TaskRecord copy = task;
        shared.target_template_summaries[task_id] = summarize_template(
            copy, *prompts_, *gateway_, config_.chat_profile, &prep_transcript);
      }
    }
    auto channels = criterion_channels(config_.criterion.variant);
    if (criterion_uses_template(config_.criterion.variant))
      channels.insert(EmbeddingChannel::template_);
    index_ = std::make_unique<EmbeddingIndex>(
        build_index(corpus_, channels, *embedding_service_));
    shared.index = index_.get();
  }

  for (const auto& [task_id, task] : corpus_.target_tasks)
    artifacts.task_categories[task_id] = task.category;

  auto items = evaluation_items();
  if (items.empty()) throw ConfigError("empty_run", "no evaluation items after sampling");

  struct Job {
    const TaskRecord* task;
    const Instance* inst;
    std::size_t round;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 1; r <= config_.rounds; ++r) {
    std::uint64_t rs = round_seed(config_.seed, r);
    for (const auto& [task, inst] : items)
      jobs.push_back({task, inst, r, item_seed(rs, task->task_id, inst->instance_id)});
  }

  std::vector<ItemResult> results(jobs.size());
  auto work = [&](std::size_t idx) {
    const Job& job = jobs[idx];
    try {
      results[idx] = run_one_item(shared, *job.task, *job.inst, job.round, job.seed);
    } catch (const Error& e) {
      if (config_.error_policy == ErrorPolicy::fail_fast) throw;
      results[idx] = failed_item(*job.task, *job.inst, job.round, e.what());
    }
  };

  // query_supervised threads answers from earlier queries of the same task
  // through later ones, so its items run sequentially in item order.
  if (config_.method == Method::query_supervised) {
    // Per (round, task): CrossICL labels from prior queries become the demo
    // pool; the first query of a task falls back to its plain CrossICL answer.
    std::map<std::pair<std::size_t, std::string>, std::vector<AdaptedDemonstration>> pools;
    for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
      const Job& job = jobs[idx];
      auto key = std::make_pair(job.round, job.task->task_id);
      auto& pool = pools[key];
      try {
        ItemResult result;
        result.scored.task_id = job.task->task_id;
        result.scored.instance_id = job.inst->instance_id;
        result.scored.round_index = job.round;
        CrossiclOutcome out = run_crossicl_item(shared, *job.task, *job.inst, job.round,
                                                job.seed, &result.transcript);
        result.trace = out.trace;
        for (const auto& demo : out.demos)
          result.adapted_jsonl.push_back(
              demo_to_json(demo, job.round, job.task->task_id, job.inst->instance_id)
                  .dump());
        std::string crossicl_answer = extract_final_answer(out.response_text);

        std::string response = out.response_text;
        if (!pool.empty()) {
          TargetQuery q{job.task->description, job.inst->input, job.inst->references};
          std::size_t take = std::min<std::size_t>(config_.n_demos, pool.size());
          std::vector<AdaptedDemonstration> demos(pool.end() - take, pool.end());
          ComposeOptions options;
          options.order = config_.demo_order;
          options.shuffle_seed = job.seed;
          ComposedPrompt prompt = compose(demos, q, PromptStyle::query_supervised, options);
          auto res =
              gateway_->complete(user_prompt(prompt.text, config_.chat_profile),
                                 config_.chat_profile, &result.transcript, "final_answer");
          response = res.text;
        }
        score_prediction(result.scored, *job.inst, response);
        results[idx] = std::move(result);

        AdaptedDemonstration pooled;
        pooled.target_query_text = render_query_block(job.inst->input);
        pooled.label = crossicl_answer;
        pooled.source_task_id = job.task->task_id;
        pooled.source_instance_id = job.inst->instance_id;
        pooled.mode = config_.mode;
        if (!pooled.label.empty()) pool.push_back(std::move(pooled));
      } catch (const Error& e) {
        if (config_.error_policy == ErrorPolicy::fail_fast) throw;
        results[idx] = failed_item(*job.task, *job.inst, job.round, e.what());
      }
    }
  } else if (config_.workers <= 1 || jobs.size() <= 1) {
    for (std::size_t idx = 0; idx < jobs.size(); ++idx) work(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::size_t worker_count =
        std::min<std::size_t>(static_cast<std::size_t>(config_.workers), jobs.size());
    for (std::size_t w = 0; w < worker_count; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          std::size_t idx = next.fetch_add(1);
          if (idx >= jobs.size()) return;
          try {
            work(idx);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next.store(jobs.size());
            return;
          }
        }
      });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Deterministic reduce: results land in job order regardless of worker count.
  for (auto& entry : prep_transcript.entries)
    artifacts.transcripts.push_back(std::move(entry));
  for (auto& result : results) {
    artifacts.scored.push_back(std::move(result.scored));
    if (result.trace) artifacts.traces.push_back(std::move(*result.trace));
    for (auto& line : result.adapted_jsonl)
      artifacts.adapted_jsonl.push_back(std::move(line));
    for (auto& entry : result.transcript.entries)
      artifacts.transcripts.push_back(std::move(entry));
  }

  artifacts.report = aggregate(artifacts.scored, artifacts.task_categories,
                               config_.rounds, config_.metric);
  artifacts.report.config_fingerprint = config_.fingerprint();
  return artifacts;
}

std::string Engine::dry_run_plan() {
  prepare();
  auto items = evaluation_items();
  std::size_t per_item = 1;  // the final-answer completion
  std::size_t adaptation_per_item = 0;
  const bool selects = config_.method == Method::crossicl ||
                       config_.method == Method::query_supervised;
  if (selects) adaptation_per_item = config_.n_demos * mode_stage_count(config_.mode);
  std::size_t template_calls = 0;
  if (selects && criterion_uses_template(config_.criterion.variant))
    template_calls = corpus_.source_tasks.size() + corpus_.target_tasks.size();

  std::size_t final_calls = items.size() * config_.rounds;
  std::size_t adapt_calls = final_calls * adaptation_per_item;
  std::size_t supervised_extra = 0;
  if (config_.method == Method::query_supervised) {
    // One extra completion for every non-first query of a task, per round.
    std::map<std::string, std::size_t> per_task;
    for (const auto& [task, inst] : items) ++per_task[task->task_id];
    for (const auto& [task_id, count] : per_task)
      supervised_extra += (count - 1) * config_.rounds;
  }

  std::ostringstream out;
  out << "method: " << method_name(config_.method) << "\n";
  out << "items: " << items.size() << "\n";
  out << "rounds: " << config_.rounds << "\n";
  out << "final_answer_calls: " << final_calls + supervised_extra << "\n";
  out << "adaptation_calls: " << adapt_calls << "\n";
  out << "template_summary_calls: " << template_calls << "\n";
  out << "total_chat_calls: "
      << final_calls + supervised_extra + adapt_calls + template_calls << "\n";
  out << "calls_per_item: " << per_item + adaptation_per_item << "\n";
  return out.str();
}

std::string Engine::dump_final_prompt(const std::string& query_id) {
  prepare();
  auto slash = query_id.find('/');
  if (slash == std::string::npos)
    throw ConfigError("bad_value", "query id must be task_id/instance_id");
  std::string task_id = query_id.substr(0, slash);
  std::string instance_id = query_id.substr(slash + 1);
  auto task_it = corpus_.target_tasks.find(task_id);
  if (task_it == corpus_.target_tasks.end())
    throw ConfigError("bad_value", "unknown target task: " + task_id);
  const TaskRecord& task = task_it->second;
  const Instance* inst = nullptr;
  for (const auto& candidate : task.instances)
    if (candidate.instance_id == instance_id) inst = &candidate;
  if (!inst) throw ConfigError("bad_value", "unknown instance: " + query_id);

  TargetQuery q{task.description, inst->input, inst->references};
  PromptStyle style = method_style(config_.method);
  if (style == PromptStyle::zero_shot || style == PromptStyle::zero_shot_cot)
    return compose({}, q, style).text;

  RunShared shared;
  shared.config = &config_;
  shared.corpus = &corpus_;
  shared.embeddings = embedding_service_.get();
  shared.prompts = prompts_.get();
  shared.gateway = gateway_.get();
  TranscriptBuffer transcript;
  if (criterion_uses_template(config_.criterion.variant)) {
    for (auto& [id, source] : corpus_.source_tasks)
      summarize_template(source, *prompts_, *gateway_, config_.chat_profile, &transcript);
    TaskRecord copy = task;
    shared.target_template_summaries[task_id] = summarize_template(
        copy, *prompts_, *gateway_, config_.chat_profile, &transcript);
  }
  auto channels = criterion_channels(config_.criterion.variant);
  if (criterion_uses_template(config_.criterion.variant))
    channels.insert(EmbeddingChannel::template_);
  index_ = std::make_unique<EmbeddingIndex>(
      build_index(corpus_, channels, *embedding_service_));
  shared.index = index_.get();

  std::uint64_t seed = item_seed(round_seed(config_.seed, 1), task_id, instance_id);
  CrossiclOutcome out = run_crossicl_item(shared, task, *inst, 1, seed, &transcript);
  ComposeOptions options;
  options.order = config_.demo_order;
  options.shuffle_seed = seed;
  return compose(out.demos, q, PromptStyle::crossicl_fewshot, options).text;
}

std::filesystem::path write_run_artifacts(const RunConfig& config,
                                          const RunArtifacts& artifacts) {
  namespace fs = std::filesystem;
  fs::path run_dir = fs::path(config.runs_dir) / config.fingerprint();
  fs::create_directories(run_dir);
  fs::path lock = run_dir / "lock";
  if (fs::exists(lock))
    throw ConfigError("run_locked", "run directory is locked: " + run_dir.string());
  write_file(lock, "running\n");

  try {
    write_file(run_dir / "config.json", config.to_json().dump(2) + "\n");

    std::string transcripts;
    for (const auto& entry : artifacts.transcripts)
      transcripts += transcript_to_json(entry).dump() + "\n";
    write_file(run_dir / "transcripts.jsonl", transcripts);

    std::string selections;
    for (const auto& trace : artifacts.traces)
      selections += trace_to_json(trace).dump() + "\n";
    write_file(run_dir / "selections.jsonl", selections);

    std::string adapted;
    for (const auto& line : artifacts.adapted_jsonl) adapted += line + "\n";
    write_file(run_dir / "adapted.jsonl", adapted);

    write_file(run_dir / "report.json", artifacts.report.to_json().dump(2) + "\n");

    std::ostringstream csv;
    csv << "task_id,category,method,round,score\n";
    for (const auto& [round, tasks] : artifacts.report.per_round) {
      for (const auto& [task_id, score] : tasks) {
        auto it = artifacts.task_categories.find(task_id);
        std::string category = it == artifacts.task_categories.end() ? "" : it->second;
        csv << task_id << "," << category << "," << method_name(config.method) << ","
            << round << "," << score << "\n";
      }
    }
    write_file(run_dir / "report.csv", csv.str());
  } catch (...) {
    fs::remove(lock);
    throw;
  }
  fs::remove(lock);
  return run_dir;
}

}  // namespace crossicl
