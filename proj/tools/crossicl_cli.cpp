#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crossicl/composer.hpp"
#include "crossicl/corpus.hpp"
#include "crossicl/errors.hpp"
#include "crossicl/evaluation.hpp"
#include "crossicl/runner.hpp"
#include "crossicl/util.hpp"

namespace fs = std::filesystem;
using namespace crossicl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitRuntimeError = 2;

struct Overrides {
  std::string config_path;
  std::string method, criterion, mode, metric, source, target, cache_dir, runs_dir;
  std::string demo_order, error_policy, mock_script, mock_fallback;
  long n_demos = -1, n_guides = -1, kth = -1, n_tasks = -1, rounds = -1;
  long head = -1, sample_per_category = -1, workers = -1, embedding_dim = -1;
  long seed = -1;
  bool live = false;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--method", o.method, "crossicl|zero_shot|zero_shot_cot|query_supervised");
  cmd->add_option("--criterion", o.criterion, "selection criterion name");
  cmd->add_option("--mode", o.mode, "adaptation mode");
  cmd->add_option("--n", o.n_demos, "demonstrations per prompt");
  cmd->add_option("--n-guides", o.n_guides, "source demos shown in label generation");
  cmd->add_option("--kth", o.kth, "1-based source-task rank to use");
  cmd->add_option("--n-tasks", o.n_tasks, "source tasks pooled for instance selection");
  cmd->add_option("--rounds", o.rounds, "evaluation rounds");
  cmd->add_option("--head", o.head, "instances evaluated per target task");
  cmd->add_option("--sample-per-category", o.sample_per_category,
                  "random per-category sample cap (0 = off)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--metric", o.metric, "rouge_l|exact_match");
  cmd->add_option("--source", o.source, "source task directory");
  cmd->add_option("--target", o.target, "target task directory");
  cmd->add_option("--cache-dir", o.cache_dir, "embedding/perplexity cache directory");
  cmd->add_option("--runs-dir", o.runs_dir, "run artifact directory");
  cmd->add_option("--demo-order", o.demo_order, "as_selected|reversed|shuffled");
  cmd->add_option("--error-policy", o.error_policy, "skip|fail_fast");
  cmd->add_option("--workers", o.workers, "parallel evaluation workers");
  cmd->add_option("--embedding-dim", o.embedding_dim, "mock embedding dimension");
  cmd->add_option("--mock-script", o.mock_script, "JSONL script for the mock provider");
  cmd->add_option("--mock-fallback", o.mock_fallback, "synthetic|strict");
  cmd->add_flag("--live", o.live, "use the HTTP providers instead of the mock");
}

RunConfig build_config(const Overrides& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::string text = read_file(o.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed", o.config_path + ": " + e.what());
    }
    c = RunConfig::from_json(j);
  }
  if (!o.method.empty()) c.method = method_from_name(o.method);
  if (!o.criterion.empty()) c.criterion.variant = criterion_from_name(o.criterion);
  if (!o.mode.empty()) c.mode = mode_from_name(o.mode);
  if (o.n_demos >= 0) c.n_demos = static_cast<std::size_t>(o.n_demos);
  if (o.n_guides >= 0) c.n_guides = static_cast<int>(o.n_guides);
  if (o.kth >= 0) c.k_th_task = static_cast<std::size_t>(o.kth);
  if (o.n_tasks >= 0) c.n_tasks = static_cast<std::size_t>(o.n_tasks);
  if (o.rounds >= 0) c.rounds = static_cast<std::size_t>(o.rounds);
  if (o.head >= 0) c.head_per_task = static_cast<std::size_t>(o.head);
  if (o.sample_per_category >= 0)
    c.sample_per_category = static_cast<std::size_t>(o.sample_per_category);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.metric.empty()) c.metric = o.metric;
  if (!o.source.empty()) c.source_dir = o.source;
  if (!o.target.empty()) c.target_dir = o.target;
  if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
  if (!o.runs_dir.empty()) c.runs_dir = o.runs_dir;
  if (!o.demo_order.empty()) c.demo_order = demo_order_from_name(o.demo_order);
  if (!o.error_policy.empty()) {
    if (o.error_policy == "skip") c.error_policy = ErrorPolicy::skip;
    else if (o.error_policy == "fail_fast") c.error_policy = ErrorPolicy::fail_fast;
    else throw ConfigError("bad_value", "unknown error policy: " + o.error_policy);
  }
  if (o.workers >= 0) c.workers = static_cast<int>(o.workers);
  if (o.embedding_dim >= 0) c.embedding_dim = static_cast<std::size_t>(o.embedding_dim);
  if (!o.mock_script.empty()) c.mock.script_path = o.mock_script;
  if (!o.mock_fallback.empty()) c.mock.fallback = o.mock_fallback;
  if (o.live) c.mock.enabled = false;
  c.validate();
  return c;
}

void print_report(const ExperimentReport& report, std::ostream& out) {
  out << std::fixed << std::setprecision(3);
  for (const auto& [category, score] : report.per_category)
    out << std::setw(18) << category;
  out << std::setw(18) << "Avg." << "\n";
  for (const auto& [category, score] : report.per_category)
    out << std::setw(18) << score;
  out << std::setw(18) << report.avg << "\n";
  out << "metric: " << report.metric << "  rounds: " << report.rounds
      << "  errors: " << report.error_count << "\n";
}

int cmd_ingest(const Overrides& o) {
  RunConfig c = build_config(o);
  Corpus corpus = build_corpus(c.source_dir, c.target_dir);

  std::map<std::string, std::size_t> per_category;
  nlohmann::json manifest;
  manifest["source"] = nlohmann::json::object();
  manifest["target"] = nlohmann::json::object();
  std::string digest_input;
  for (const auto& [split, tasks] :
       {std::pair{"source", &corpus.source_tasks}, {"target", &corpus.target_tasks}}) {
    for (const auto& [task_id, task] : *tasks) {
      manifest[split][task_id] = {{"category", task.category},
                                  {"instances", task.instances.size()}};
      per_category[task.category] += 1;
      digest_input += split;
      digest_input += task_id;
      digest_input += task.description;
      for (const auto& inst : task.instances) {
        digest_input += inst.input;
        for (const auto& r : inst.references) digest_input += r;
      }
    }
  }
  manifest["digest"] = to_hex(fnv1a64(digest_input));

  fs::path manifest_path = fs::path(c.cache_dir) / "corpus_manifest.json";
  if (fs::exists(manifest_path)) {
    auto previous = nlohmann::json::parse(read_file(manifest_path));
    if (previous.value("digest", "") == manifest["digest"].get<std::string>()) {
      std::cout << "up to date (" << manifest_path.string() << ")\n";
      return kExitOk;
    }
  }
  fs::create_directories(manifest_path.parent_path());
  write_file(manifest_path, manifest.dump(2) + "\n");
  std::cout << "ingested " << corpus.source_tasks.size() << " source task(s), "
            << corpus.target_tasks.size() << " target task(s)\n";
  for (const auto& [category, count] : per_category)
    std::cout << "  " << category << ": " << count << " task(s)\n";
  std::cout << "manifest: " << manifest_path.string() << "\n";
  return kExitOk;
}

int cmd_index(const Overrides& o, const std::vector<std::string>& channel_names) {
  RunConfig c = build_config(o);
  Engine engine(c);
  std::set<EmbeddingChannel> channels;
  if (channel_names.empty()) {
    channels = criterion_channels(c.criterion.variant);
  } else {
    for (const auto& name : channel_names) channels.insert(channel_from_name(name));
  }
  Corpus corpus = build_corpus(c.source_dir, c.target_dir);
  std::shared_ptr<EmbeddingProvider> provider;
  if (c.mock.enabled) provider = std::make_shared<HashEmbeddingProvider>(c.embedding_dim);
  else provider = std::make_shared<HttpEmbeddingProvider>(c.embeddings_profile);
  EmbeddingService service(provider, fs::path(c.cache_dir) / "embeddings", c.embedding_dim);
  EmbeddingIndex index = build_index(corpus, channels, service);
  std::cout << "indexed " << index.task_vectors.size() << " task vector(s), "
            << index.instance_vectors.size() << " instance vector(s)\n";
  std::cout << "provider calls: " << service.provider_calls()
            << "  cache hits: " << service.cache_hits() << "\n";
  return kExitOk;
}

int cmd_run(const Overrides& o, bool dry_run, const std::string& dump_final,
            bool dump_prompts) {
  RunConfig c = build_config(o);
  Engine engine(c);
  if (dump_prompts) {
    PromptLibrary prompts;
    for (const auto& name : prompts.names())
      std::cout << "=== " << name << " ===\n" << prompts.raw(name) << "\n";
    return kExitOk;
  }
  if (dry_run) {
    std::cout << engine.dry_run_plan();
    return kExitOk;
  }
  if (!dump_final.empty()) {
    std::cout << engine.dump_final_prompt(dump_final) << "\n";
    return kExitOk;
  }
  RunArtifacts artifacts = engine.run();
  fs::path run_dir = write_run_artifacts(c, artifacts);
  std::cout << "run dir: " << run_dir.string() << "\n";
  print_report(artifacts.report, std::cout);
  return kExitOk;
}

int cmd_ablate(const Overrides& o, const std::string& sweep) {
  if (sweep.empty()) throw ConfigError("bad_value", "--sweep is required");
  RunConfig base = build_config(o);

  std::vector<RunConfig> points;
  std::vector<std::string> labels;
  if (sweep == "mode") {
    for (AdaptationMode m : all_modes()) {
      RunConfig c = base;
      c.mode = m;
      points.push_back(c);
      labels.push_back("mode=" + mode_name(m));
    }
  } else if (sweep == "criterion") {
    for (CriterionVariant v : all_criteria()) {
      RunConfig c = base;
      c.criterion.variant = v;
      points.push_back(c);
      labels.push_back("criterion=" + criterion_name(v));
    }
  } else if (sweep.rfind("n=", 0) == 0 || sweep.rfind("kth=", 0) == 0) {
    bool is_n = sweep.rfind("n=", 0) == 0;
    std::string spec = sweep.substr(sweep.find('=') + 1);
    std::vector<std::size_t> values;
    auto dots = spec.find("..");
    if (dots != std::string::npos) {
      std::size_t lo = std::stoull(spec.substr(0, dots));
      std::size_t hi = std::stoull(spec.substr(dots + 2));
      for (std::size_t v = lo; v <= hi; ++v) values.push_back(v);
    } else {
      std::stringstream ss(spec);
      std::string piece;
      while (std::getline(ss, piece, ',')) values.push_back(std::stoull(piece));
    }
    if (values.empty()) throw ConfigError("bad_value", "empty sweep range: " + sweep);
    for (std::size_t v : values) {
      RunConfig c = base;
      if (is_n) c.n_demos = v;
      else c.k_th_task = v;
      points.push_back(c);
      labels.push_back((is_n ? "n=" : "kth=") + std::to_string(v));
    }
  } else {
    throw ConfigError("bad_value", "unknown sweep: " + sweep +
                                       " (expected mode, criterion, n=..., kth=...)");
  }

  std::ostringstream csv;
  csv << "point,fingerprint,avg,error_count\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].validate();
    Engine engine(points[i]);
    RunArtifacts artifacts = engine.run();
    fs::path run_dir = write_run_artifacts(points[i], artifacts);
    csv << labels[i] << "," << points[i].fingerprint() << "," << artifacts.report.avg
        << "," << artifacts.report.error_count << "\n";
    std::cout << labels[i] << "  avg=" << artifacts.report.avg << "  ("
              << run_dir.string() << ")\n";
  }
  fs::path csv_path =
      fs::path(base.runs_dir) / ("ablation_" + sweep.substr(0, sweep.find('=')) + ".csv");
  fs::create_directories(csv_path.parent_path());
  write_file(csv_path, csv.str());
  std::cout << "comparison: " << csv_path.string() << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, bool pairs) {
  if (run_dirs.empty()) throw ConfigError("bad_value", "at least one run dir is required");
  std::vector<ExperimentReport> reports;
  for (const auto& dir : run_dirs) {
    fs::path report_path = fs::path(dir) / "report.json";
    if (!fs::exists(report_path))
      throw ConfigError("bad_value", "missing report: " + report_path.string());
    reports.push_back(
        ExperimentReport::from_json(nlohmann::json::parse(read_file(report_path))));
  }
  print_report(reports.front(), std::cout);
  if (reports.size() == 2) {
    std::cout << "delta avg: " << std::fixed << std::setprecision(3)
              << reports[0].avg - reports[1].avg << "\n";
  }
  if (pairs) {
    fs::path selections = fs::path(run_dirs.front()) / "selections.jsonl";
    std::vector<SelectionTrace> traces;
    std::stringstream ss(fs::exists(selections) ? read_file(selections) : std::string{});
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      SelectionTrace t;
      t.target_category = j.value("target_category", "");
      t.source_category = j.value("source_category", "");
      traces.push_back(std::move(t));
    }
    if (traces.empty()) {
      std::cout << "no selection traces recorded\n";
    } else {
      auto matrix = pair_distribution_report(traces);
      std::cout << "P(source category | target category):\n";
      for (const auto& [target, row] : matrix) {
        std::cout << "  " << target << ":";
        for (const auto& [source, p] : row)
          std::cout << "  " << source << "=" << std::setprecision(3) << p;
        std::cout << "\n";
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CrossICL: cross-task in-context learning engine"};
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::string> channel_names;
  std::vector<std::string> run_dirs;
  std::string sweep, dump_final;
  bool dry_run = false, pairs = false, dump_prompts = false;

  auto* ingest = app.add_subcommand("ingest", "Validate and summarize the task corpus");
  add_config_flags(ingest, o);

  auto* index = app.add_subcommand("index", "Build the embedding index");
  add_config_flags(index, o);
  index->add_option("--channels", channel_names, "channels to embed")->delimiter(',');

  auto* run = app.add_subcommand("run", "Execute one experiment configuration");
  add_config_flags(run, o);
  run->add_flag("--dry-run", dry_run, "validate config and print the call budget");
  run->add_option("--dump-final-prompt", dump_final,
                  "print the composed prompt for task_id/instance_id and exit");
  run->add_flag("--dump-prompts", dump_prompts, "print the prompt templates and exit");

  auto* ablate = app.add_subcommand("ablate", "Run a sweep of configurations");
  add_config_flags(ablate, o);
  ablate->add_option("--sweep", sweep, "mode | criterion | n=1,3,5 | n=1..10 | kth=1..5");

  auto* report = app.add_subcommand("report", "Summarize existing run directories");
  report->add_option("--run", run_dirs, "run directory (repeatable; two = delta)");
  report->add_flag("--pairs", pairs, "print the pair-distribution matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUserError;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o);
    if (index->parsed()) return cmd_index(o, channel_names);
    if (run->parsed()) return cmd_run(o, dry_run, dump_final, dump_prompts);
    if (ablate->parsed()) return cmd_ablate(o, sweep);
    if (report->parsed()) return cmd_report(run_dirs, pairs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitUserError;
}
