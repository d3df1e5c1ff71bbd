#include "crossicl/evaluation.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  // Row-rolled DP keeps memory at O(min side).
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  std::vector<std::size_t> row(shorter.size() + 1, 0);
  for (std::size_t i = 1; i <= longer.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= shorter.size(); ++j) {
      std::size_t up = row[j];
      row[j] = longer[i - 1] == shorter[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[shorter.size()];
}

std::vector<std::string> metric_tokenize(const std::string& text,
                                         bool whitespace_only) {
  std::string lowered = to_lower(text);
  if (whitespace_only) return split_whitespace(lowered);
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : lowered) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double rouge_l(const std::string& prediction,
               const std::vector<std::string>& references,
               bool whitespace_only) {
  if (references.empty())
    throw MetricError("no_references", "rouge_l requires at least one reference");
  auto pred = metric_tokenize(prediction, whitespace_only);
  if (pred.empty()) return 0.0;
  double best = 0.0;
  for (const auto& reference : references) {
    auto ref = metric_tokenize(reference, whitespace_only);
    if (ref.empty()) continue;
    auto lcs = static_cast<double>(lcs_length(pred, ref));
    if (lcs == 0.0) continue;
    double p = lcs / static_cast<double>(pred.size());
    double r = lcs / static_cast<double>(ref.size());
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

std::string normalize_for_match(const std::string& text) {
  std::string collapsed;
  bool in_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !collapsed.empty()) collapsed.push_back(' ');
    in_space = false;
    collapsed.push_back(static_cast<char>(std::tolower(c)));
  }
  std::size_t begin = 0, end = collapsed.size();
  while (begin < end && std::ispunct(static_cast<unsigned char>(collapsed[begin]))) ++begin;
  while (end > begin && std::ispunct(static_cast<unsigned char>(collapsed[end - 1]))) --end;
  return trim(collapsed.substr(begin, end - begin));
}

int exact_match(const std::string& prediction,
                const std::vector<std::string>& references) {
  if (references.empty())
    throw MetricError("no_references", "exact_match requires at least one reference");
  std::string p = normalize_for_match(prediction);
  for (const auto& reference : references)
    if (p == normalize_for_match(reference)) return 1;
  return 0;
}

double kahan_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    double y = v - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(values.size());
}

ExperimentReport aggregate(const std::vector<ScoredPrediction>& scored,
                           const std::map<std::string, std::string>& task_category,
                           std::size_t rounds, const std::string& metric) {
  ExperimentReport report;
  report.metric = metric;
  report.rounds = rounds;

  // round -> task -> scores, ordered maps so the reduce is order-independent.
  std::map<std::size_t, std::map<std::string, std::vector<double>>> buckets;
  for (const auto& s : scored) {
    if (s.errored) ++report.error_count;
    auto it = s.per_metric.find(metric);
    double value = it == s.per_metric.end() ? 0.0 : it->second;
    buckets[s.round_index][s.task_id].push_back(value);
  }
  for (auto& [round, tasks] : buckets) {
    for (auto& [task, values] : tasks) {
      std::sort(values.begin(), values.end());
      report.per_round[round][task] = kahan_mean(values);
    }
  }

  std::map<std::string, std::vector<double>> task_rounds;
  for (const auto& [round, tasks] : report.per_round)
    for (const auto& [task, mean] : tasks) task_rounds[task].push_back(mean);
  for (const auto& [task, means] : task_rounds)
    report.per_task[task] = kahan_mean(means);

  std::map<std::string, std::vector<double>> category_tasks;
  for (const auto& [task, mean] : report.per_task) {
    auto it = task_category.find(task);
    if (it == task_category.end())
      throw MetricError("unknown_task", "no category recorded for task " + task);
    category_tasks[it->second].push_back(mean);
  }
  std::vector<double> category_means;
  for (const auto& [category, means] : category_tasks) {
    report.per_category[category] = kahan_mean(means);
    category_means.push_back(report.per_category[category]);
  }
  report.avg = kahan_mean(category_means);
  return report;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  nlohmann::json rounds_json = nlohmann::json::object();
  for (const auto& [round, tasks] : per_round)
    rounds_json[std::to_string(round)] = tasks;
  j["per_round"] = std::move(rounds_json);
  j["per_task"] = per_task;
  j["per_category"] = per_category;
  j["avg"] = avg;
  j["config_fingerprint"] = config_fingerprint;
  j["metric"] = metric;
  j["error_count"] = error_count;
  j["rounds"] = rounds;
  return j;
}

ExperimentReport ExperimentReport::from_json(const nlohmann::json& j) {
  ExperimentReport r;
  for (const auto& [round, tasks] : j.at("per_round").items())
    r.per_round[std::stoull(round)] = tasks.get<std::map<std::string, double>>();
  r.per_task = j.at("per_task").get<std::map<std::string, double>>();
  r.per_category = j.at("per_category").get<std::map<std::string, double>>();
  r.avg = j.at("avg").get<double>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  r.metric = j.at("metric").get<std::string>();
  r.error_count = j.at("error_count").get<std::size_t>();
  r.rounds = j.at("rounds").get<std::size_t>();
  return r;
}

std::map<std::string, std::map<std::string, double>> pair_distribution_report(
    const std::vector<SelectionTrace>& traces) {
  std::map<std::string, std::map<std::string, double>> counts;
  std::map<std::string, double> totals;
  for (const auto& t : traces) {
    counts[t.target_category][t.source_category] += 1.0;
    totals[t.target_category] += 1.0;
  }
  for (auto& [target, row] : counts)
    for (auto& [source, count] : row) count /= totals[target];
  return counts;
}

}  // namespace crossicl
