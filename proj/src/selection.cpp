#include "crossicl/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

namespace {

const std::vector<std::pair<CriterionVariant, const char*>> kCriterionNames = {
    {CriterionVariant::random, "random"},
    {CriterionVariant::taskdes, "taskdes"},
    {CriterionVariant::taskdes_taskinput, "taskdes_taskinput"},
    {CriterionVariant::taskdes_output, "taskdes_output"},
    {CriterionVariant::taskdes_diversity, "taskdes_diversity"},
    {CriterionVariant::taskdes_length, "taskdes_length"},
    {CriterionVariant::taskdes_complexity, "taskdes_complexity"},
    {CriterionVariant::template_, "template"},
    {CriterionVariant::taskdes_taskinput_output, "taskdes_taskinput_output"},
    {CriterionVariant::taskdes_taskinput_diversity, "taskdes_taskinput_diversity"},
    {CriterionVariant::taskdes_taskinput_length, "taskdes_taskinput_length"},
    {CriterionVariant::taskdes_taskinput_complexity, "taskdes_taskinput_complexity"},
    {CriterionVariant::template_taskinput, "template_taskinput"},
};

}  // namespace

std::string criterion_name(CriterionVariant v) {
  for (const auto& [variant, name] : kCriterionNames)
    if (variant == v) return name;
  return "unknown";
}

CriterionVariant criterion_from_name(const std::string& name) {
  for (const auto& [variant, n] : kCriterionNames)
    if (name == n) return variant;
  throw ConfigError("bad_criterion", name);
}

const std::vector<CriterionVariant>& all_criteria() {
  static const std::vector<CriterionVariant> all = [] {
    std::vector<CriterionVariant> v;
    for (const auto& [variant, _] : kCriterionNames) v.push_back(variant);
    return v;
  }();
  return all;
}

bool criterion_uses_output(CriterionVariant v) {
  return v == CriterionVariant::taskdes_output ||
         v == CriterionVariant::taskdes_taskinput_output;
}

bool criterion_uses_template(CriterionVariant v) {
  return v == CriterionVariant::template_ ||
         v == CriterionVariant::template_taskinput;
}

bool criterion_uses_perplexity(CriterionVariant v) {
  return v == CriterionVariant::taskdes_complexity ||
         v == CriterionVariant::taskdes_taskinput_complexity;
}

std::set<EmbeddingChannel> criterion_channels(CriterionVariant v) {
  switch (v) {
    case CriterionVariant::taskdes_taskinput:
    case CriterionVariant::taskdes_diversity:
      return {EmbeddingChannel::full_query};
    case CriterionVariant::taskdes_output:
      return {EmbeddingChannel::output};
    case CriterionVariant::taskdes_taskinput_output:
      return {EmbeddingChannel::input_only, EmbeddingChannel::output};
    case CriterionVariant::taskdes_taskinput_diversity:
    case CriterionVariant::taskdes_taskinput_length:
    case CriterionVariant::taskdes_taskinput_complexity:
    case CriterionVariant::template_taskinput:
      return {EmbeddingChannel::input_only};
    default:
      return {};
  }
}

double harmonic_rank_merge(std::size_t rank_a, std::size_t rank_b) {
  double a = static_cast<double>(rank_a);
  double b = static_cast<double>(rank_b);
  return 2.0 * a * b / (a + b);
}

std::size_t token_length(const std::string& text) {
  return split_whitespace(text).size();
}

namespace {

double sq_distance(const EmbeddingVector& a, const std::vector<double>& centroid) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double diff = a.values[i] - centroid[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

std::vector<std::vector<std::size_t>> kmeans(const std::vector<EmbeddingVector>& points,
                                             std::size_t k, std::uint64_t seed) {
  if (k == 0 || points.size() < k)
    throw SelectionError("insufficient",
                         "kmeans needs at least k points (" + std::to_string(k) + ")");
  {
    auto sorted = points;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.values < b.values; });
    auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
    if (static_cast<std::size_t>(distinct) < k)
      throw SelectionError("degenerate_clustering",
                           "fewer distinct points than clusters");
  }
  const std::size_t n = points.size();
  const std::size_t dim = points[0].dim();
  Rng rng(seed);

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[rng.bounded(n)].values);
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, sq_distance(points[i], centroids[c]));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2[pick] == 0.0)
        for (std::size_t i = 0; i < n; ++i)
          if (d2[i] > 0.0) { pick = i; break; }
    }
    centroids.push_back(points[pick].values);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best_c = 0;
      double best_d = sq_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = sq_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      assignment[i] = best_c;
    }
    // Re-seed empty clusters from the farthest point.
    std::vector<std::size_t> counts(k, 0);
    for (auto a : assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assignment[i]] <= 1) continue;
        double d = sq_distance(points[i], centroids[assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[assignment[far]];
      assignment[far] = c;
      counts[c] = 1;
      centroids[c] = points[far].values;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> mean(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != c) continue;
        for (std::size_t j = 0; j < dim; ++j) mean[j] += points[i].values[j];
        ++count;
      }
      for (std::size_t j = 0; j < dim; ++j) mean[j] /= static_cast<double>(count);
      double move = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        double diff = mean[j] - centroids[c][j];
        move += diff * diff;
      }
      shift = std::max(shift, std::sqrt(move));
      centroids[c] = std::move(mean);
    }
    if (shift < 1e-6) break;
  }

  std::vector<std::vector<std::size_t>> clusters(k);
  for (std::size_t i = 0; i < n; ++i) clusters[assignment[i]].push_back(i);
  return clusters;
}

namespace {

struct TaskScore {
  const std::string* task_id;
  double score;
};

std::vector<TaskScore> rank_source_tasks(const TargetQuery& q, const Corpus& corpus,
                                         SelectionContext& ctx,
                                         const SelectionCriterion& criterion) {
  if (corpus.source_tasks.empty())
    throw SelectionError("no_tasks", "empty source task set");
  bool by_template = criterion_uses_template(criterion.variant);
  EmbeddingVector target_vec;
  if (by_template) {
    // The engine summarizes the target task's template ahead of selection.
    if (ctx.target_template_summary.empty())
      throw SelectionError("index_incomplete", "target template summary missing");
    target_vec = ctx.embeddings->embed(ctx.target_template_summary,
                                       EmbeddingChannel::template_);
  } else {
    target_vec = ctx.embeddings->embed(q.description, EmbeddingChannel::description);
  }
  auto channel = by_template ? EmbeddingChannel::template_
                             : EmbeddingChannel::description;
  std::vector<TaskScore> scores;
  for (const auto& [task_id, task] : corpus.source_tasks) {
    (void)task;
    scores.push_back({&task_id, cosine(ctx.index->task_vector(task_id, channel),
                                       target_vec)});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.task_id < *b.task_id;
  });
  return scores;
}

}  // namespace

SourceTaskChoice select_source_task(const TargetQuery& q, const Corpus& corpus,
                                    SelectionContext& ctx,
                                    const SelectionCriterion& criterion,
                                    std::size_t k_th) {
  auto scores = rank_source_tasks(q, corpus, ctx, criterion);
  if (k_th < 1 || k_th > scores.size())
    throw SelectionError("no_tasks", "k_th=" + std::to_string(k_th) + " of " +
                                         std::to_string(scores.size()) + " tasks");
  return {*scores[k_th - 1].task_id, scores[k_th - 1].score, k_th};
}

std::vector<SourceTaskChoice> select_multi_task_pool(
    const TargetQuery& q, const Corpus& corpus, SelectionContext& ctx,
    const SelectionCriterion& criterion, std::size_t n_tasks) {
  auto scores = rank_source_tasks(q, corpus, ctx, criterion);
  if (n_tasks < 1 || n_tasks > scores.size())
    throw SelectionError("no_tasks", "n_tasks=" + std::to_string(n_tasks) + " of " +
                                         std::to_string(scores.size()) + " tasks");
  std::vector<SourceTaskChoice> out;
  for (std::size_t i = 0; i < n_tasks; ++i)
    out.push_back({*scores[i].task_id, scores[i].score, i + 1});
  return out;
}

namespace {

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.task->task_id != b.task->task_id) return a.task->task_id < b.task->task_id;
  return a.instance->instance_id < b.instance->instance_id;
}

// Stable preference order: score desc, then ids.
std::vector<std::size_t> order_desc(const std::vector<Candidate>& pool,
                                    const std::vector<double>& score) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return candidate_less(pool[a], pool[b]);
  });
  return idx;
}

// Ascending distance order (length / complexity / merged ranks).
std::vector<std::size_t> order_asc(const std::vector<Candidate>& pool,
                                   const std::vector<double>& value) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (value[a] != value[b]) return value[a] < value[b];
    return candidate_less(pool[a], pool[b]);
  });
  return idx;
}

std::vector<double> channel_scores(const std::vector<Candidate>& pool,
                                   EmbeddingChannel channel,
                                   const EmbeddingVector& target,
                                   SelectionContext& ctx) {
  std::vector<double> out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    out[i] = cosine(ctx.index->instance_vector(pool[i].task->task_id,
                                               pool[i].instance->instance_id, channel),
                    target);
  return out;
}

std::vector<std::size_t> ranks_from_order(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> rank(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
  return rank;
}

std::vector<Candidate> take(const std::vector<Candidate>& pool,
                            const std::vector<std::size_t>& order, std::size_t n) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[order[i]]);
  return out;
}

std::vector<Candidate> random_pick(const std::vector<Candidate>& pool, std::size_t n,
                                   std::uint64_t seed) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.bounded(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

// One representative per cluster (nearest its centroid), ordered by the
// candidates' similarity to the target, descending.
std::vector<Candidate> diversity_pick(const std::vector<Candidate>& pool,
                                      const std::vector<EmbeddingVector>& vectors,
                                      const std::vector<double>& similarity,
                                      std::size_t n, std::uint64_t seed) {
  auto clusters = kmeans(vectors, n, seed);
  std::vector<std::size_t> reps;
  for (const auto& cluster : clusters) {
    std::vector<double> centroid(vectors[0].dim(), 0.0);
    for (auto i : cluster)
      for (std::size_t j = 0; j < centroid.size(); ++j)
        centroid[j] += vectors[i].values[j];
    for (auto& x : centroid) x /= static_cast<double>(cluster.size());
    std::size_t best = cluster.front();
    double best_d = sq_distance(vectors[best], centroid);
    for (auto i : cluster) {
      double d = sq_distance(vectors[i], centroid);
      if (d < best_d || (d == best_d && candidate_less(pool[i], pool[best]))) {
        best_d = d;
        best = i;
      }
    }
    reps.push_back(best);
  }
  std::stable_sort(reps.begin(), reps.end(), [&](std::size_t a, std::size_t b) {
    if (similarity[a] != similarity[b]) return similarity[a] > similarity[b];
    return candidate_less(pool[a], pool[b]);
  });
  std::vector<Candidate> out;
  for (auto i : reps) out.push_back(pool[i]);
  return out;
}

}  // namespace

std::vector<Candidate> select_demonstrations(const TargetQuery& q,
                                             const std::vector<Candidate>& pool,
                                             std::size_t n,
                                             const SelectionCriterion& criterion,
                                             SelectionContext& ctx) {
  if (n == 0) throw SelectionError("insufficient", "n must be positive");
  if (pool.size() < n)
    throw SelectionError("insufficient", "pool of " + std::to_string(pool.size()) +
                                             " for n=" + std::to_string(n));
  auto target_full = [&] {
    return ctx.embeddings->embed(full_query_text(q), EmbeddingChannel::full_query);
  };
  auto target_input = [&] {
    return ctx.embeddings->embed(q.input, EmbeddingChannel::input_only);
  };
  auto target_output = [&] {
    if (q.references.empty())
      throw SelectionError("no_references",
                           "output criterion requires gold references");
    return ctx.embeddings->embed(q.references.front(), EmbeddingChannel::output);
  };
  auto query_len = [&](const Candidate& c) {
    return static_cast<double>(std::llabs(
        static_cast<long long>(token_length(
            full_query_text(c.task->description, c.instance->input))) -
        static_cast<long long>(token_length(full_query_text(q)))));
  };
  auto query_ppl_gap = [&](const Candidate& c) {
    if (!ctx.perplexity)
      throw SelectionError("index_incomplete", "no perplexity source configured");
    return std::abs(
        ctx.perplexity(full_query_text(c.task->description, c.instance->input)) -
        ctx.perplexity(full_query_text(q)));
  };

  switch (criterion.variant) {
    case CriterionVariant::random:
    case CriterionVariant::taskdes:
    case CriterionVariant::template_:
      return random_pick(pool, n, criterion.seed);

    case CriterionVariant::taskdes_taskinput: {
      auto scores = channel_scores(pool, EmbeddingChannel::full_query, target_full(), ctx);
      return take(pool, order_desc(pool, scores), n);
    }
    case CriterionVariant::taskdes_output: {
      auto scores = channel_scores(pool, EmbeddingChannel::output, target_output(), ctx);
      return take(pool, order_desc(pool, scores), n);
    }
    case CriterionVariant::template_taskinput: {
      auto scores = channel_scores(pool, EmbeddingChannel::input_only, target_input(), ctx);
      return take(pool, order_desc(pool, scores), n);
    }
    case CriterionVariant::taskdes_length: {
      std::vector<double> gap(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) gap[i] = query_len(pool[i]);
      return take(pool, order_asc(pool, gap), n);
    }
    case CriterionVariant::taskdes_complexity: {
      std::vector<double> gap(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) gap[i] = query_ppl_gap(pool[i]);
      return take(pool, order_asc(pool, gap), n);
    }
    case CriterionVariant::taskdes_diversity: {
      std::vector<EmbeddingVector> vectors;
      for (const auto& c : pool)
        vectors.push_back(ctx.index->instance_vector(
            c.task->task_id, c.instance->instance_id, EmbeddingChannel::full_query));
      auto sims = channel_scores(pool, EmbeddingChannel::full_query, target_full(), ctx);
      return diversity_pick(pool, vectors, sims, n, criterion.seed);
    }
    case CriterionVariant::taskdes_taskinput_diversity: {
      auto sims = channel_scores(pool, EmbeddingChannel::input_only, target_input(), ctx);
      auto order = order_desc(pool, sims);
      std::size_t keep = std::min<std::size_t>(100, order.size());
      if (keep < n)
        throw SelectionError("insufficient", "prefilter smaller than n");
      std::vector<Candidate> filtered;
      std::vector<EmbeddingVector> vectors;
      std::vector<double> fsims;
      for (std::size_t i = 0; i < keep; ++i) {
        filtered.push_back(pool[order[i]]);
        vectors.push_back(ctx.index->instance_vector(filtered.back().task->task_id,
                                                     filtered.back().instance->instance_id,
                                                     EmbeddingChannel::input_only));
        fsims.push_back(sims[order[i]]);
      }
      return diversity_pick(filtered, vectors, fsims, n, criterion.seed);
    }
    case CriterionVariant::taskdes_taskinput_output: {
      auto input_scores =
          channel_scores(pool, EmbeddingChannel::input_only, target_input(), ctx);
      auto output_scores =
          channel_scores(pool, EmbeddingChannel::output, target_output(), ctx);
      auto rank_a = ranks_from_order(order_desc(pool, input_scores));
      auto rank_b = ranks_from_order(order_desc(pool, output_scores));
      std::vector<double> merged(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i)
        merged[i] = harmonic_rank_merge(rank_a[i], rank_b[i]);
      return take(pool, order_asc(pool, merged), n);
    }
    case CriterionVariant::taskdes_taskinput_length: {
      auto input_scores =
          channel_scores(pool, EmbeddingChannel::input_only, target_input(), ctx);
      std::vector<double> gap(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) gap[i] = query_len(pool[i]);
      auto rank_a = ranks_from_order(order_desc(pool, input_scores));
      auto rank_b = ranks_from_order(order_asc(pool, gap));
      std::vector<double> merged(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i)
        merged[i] = harmonic_rank_merge(rank_a[i], rank_b[i]);
      return take(pool, order_asc(pool, merged), n);
    }
    case CriterionVariant::taskdes_taskinput_complexity: {
      auto input_scores =
          channel_scores(pool, EmbeddingChannel::input_only, target_input(), ctx);
      std::vector<double> gap(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) gap[i] = query_ppl_gap(pool[i]);
      auto rank_a = ranks_from_order(order_desc(pool, input_scores));
      auto rank_b = ranks_from_order(order_asc(pool, gap));
      std::vector<double> merged(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i)
        merged[i] = harmonic_rank_merge(rank_a[i], rank_b[i]);
      return take(pool, order_asc(pool, merged), n);
    }
  }
  throw SelectionError("bad_criterion", "unhandled criterion");
}

std::vector<Candidate> select_demonstrations(const TargetQuery& q,
                                             const TaskRecord& task, std::size_t n,
                                             const SelectionCriterion& criterion,
                                             SelectionContext& ctx) {
  std::vector<Candidate> pool;
  for (const auto& inst : task.instances) pool.push_back({&task, &inst});
  return select_demonstrations(q, pool, n, criterion, ctx);
}

std::string summarize_template(TaskRecord& task, const PromptLibrary& prompts,
                               Gateway& gateway, const ProviderProfile& profile,
                               TranscriptBuffer* transcript) {
  if (task.instances.size() < 3)
    throw SelectionError("insufficient",
                         task.task_id + ": template summary needs 3 example inputs");
  std::string prompt = prompts.render(
      "prompt5", {{"task_description", task.description},
                  {"input_example_1", task.instances[0].input},
                  {"input_example_2", task.instances[1].input},
                  {"input_example_3", task.instances[2].input}});
  auto res = gateway.complete(user_prompt(prompt, profile), profile, transcript,
                              "template_summary");
  std::string summary = extract_tag(res.text, "Input Template");
  task.template_summary = summary;
  return summary;
}

}  // namespace crossicl
