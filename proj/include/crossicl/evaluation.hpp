#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace crossicl {

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b);

// Lowercase, split on non-alphanumeric runs. Whitespace-only mode is the
// config alternative.
std::vector<std::string> metric_tokenize(const std::string& text,
                                         bool whitespace_only = false);

// LCS F-measure, max over references. Empty prediction scores 0.
double rouge_l(const std::string& prediction,
               const std::vector<std::string>& references,
               bool whitespace_only = false);

// 1 iff the normalized prediction equals any normalized reference.
int exact_match(const std::string& prediction,
                const std::vector<std::string>& references);
std::string normalize_for_match(const std::string& text);

struct ScoredPrediction {
  std::string task_id;
  std::string instance_id;
  std::string prediction;
  std::string extracted_answer;
  std::map<std::string, double> per_metric;
  std::size_t round_index = 1;  // 1..R
  bool errored = false;
};

struct ExperimentReport {
  // round -> task -> mean score (primary metric)
  std::map<std::size_t, std::map<std::string, double>> per_round;
  std::map<std::string, double> per_task;      // mean over rounds
  std::map<std::string, double> per_category;  // mean of member-task means
  double avg = 0.0;                            // mean over category means
  std::string config_fingerprint;
  std::string metric = "rouge_l";
  std::size_t error_count = 0;
  std::size_t rounds = 0;

  nlohmann::json to_json() const;
  static ExperimentReport from_json(const nlohmann::json& j);
};

// Deterministic aggregation (compensated summation, order-independent) from
// raw per-prediction scores. `task_category` maps task_id -> category.
ExperimentReport aggregate(const std::vector<ScoredPrediction>& scored,
                           const std::map<std::string, std::string>& task_category,
                           std::size_t rounds, const std::string& metric);

struct SelectionTrace {
  std::size_t round_index = 1;
  std::string target_task_id;
  std::string target_category;
  std::string target_instance_id;
  std::string criterion;
  std::string source_task_id;  // first chosen task
  std::string source_category;
  std::vector<std::string> chosen;  // "task_id/instance_id"
  std::vector<double> scores;
};

// Row-normalized P(source category | target category).
std::map<std::string, std::map<std::string, double>> pair_distribution_report(
    const std::vector<SelectionTrace>& traces);

double kahan_mean(const std::vector<double>& values);

}  // namespace crossicl
