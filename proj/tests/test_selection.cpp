#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "crossicl/errors.hpp"
#include "crossicl/selection.hpp"
#include "selection_oracle.hpp"
#include "test_helpers.hpp"

using namespace crossicl;
using namespace crossicl::testing;

TEST_SUITE_BEGIN("selection");

TEST_CASE("criterion names round-trip and mark their capabilities") {
  CHECK(all_criteria().size() == 13);
  for (auto v : all_criteria()) CHECK(criterion_from_name(criterion_name(v)) == v);
  CHECK(criterion_uses_output(CriterionVariant::taskdes_output));
  CHECK(criterion_uses_output(CriterionVariant::taskdes_taskinput_output));
  CHECK(criterion_uses_template(CriterionVariant::template_));
  CHECK(criterion_uses_template(CriterionVariant::template_taskinput));
  CHECK(criterion_uses_perplexity(CriterionVariant::taskdes_complexity));
  CHECK(criterion_name(CriterionVariant::template_) == "template");
}

TEST_CASE("harmonic_rank_merge formula") {
  CHECK(harmonic_rank_merge(1, 1) == doctest::Approx(1.0));
  CHECK(harmonic_rank_merge(1, 3) == doctest::Approx(1.5));
  CHECK(harmonic_rank_merge(2, 4) == doctest::Approx(8.0 / 3.0));
  CHECK(harmonic_rank_merge(3, 1) == harmonic_rank_merge(1, 3));
}

TEST_CASE("token_length counts whitespace-separated tokens") {
  CHECK(token_length("a b c") == 3);
  CHECK(token_length("") == 0);
  CHECK(token_length("  a   b ") == 2);
}

TEST_CASE("kmeans basics: singletons, k=1, degeneracy, blob purity") {
  auto pt = [](double x, double y) { return EmbeddingVector{{x, y}}; };
  std::vector<EmbeddingVector> points{pt(0, 0), pt(1, 0), pt(0, 1), pt(5, 5)};

  SUBCASE("k equal to point count gives singletons") {
    auto clusters = kmeans(points, 4, 1);
    for (const auto& c : clusters) CHECK(c.size() == 1);
  }
  SUBCASE("k=1 collects everything") {
    auto clusters = kmeans(points, 1, 1);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].size() == 4);
  }
  SUBCASE("duplicate points below k are degenerate") {
    std::vector<EmbeddingVector> dup{pt(0, 0), pt(0, 0), pt(0, 0)};
    try {
      kmeans(dup, 2, 1);
      FAIL("expected degenerate_clustering");
    } catch (const SelectionError& e) {
      CHECK(e.kind() == "degenerate_clustering");
    }
  }
  SUBCASE("well-separated blobs split cleanly for any seed") {
    std::vector<EmbeddingVector> blobs;
    for (int i = 0; i < 5; ++i) blobs.push_back(pt(0 + 0.01 * i, 0));
    for (int i = 0; i < 5; ++i) blobs.push_back(pt(100 + 0.01 * i, 100));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto clusters = kmeans(blobs, 2, seed);
      REQUIRE(clusters.size() == 2);
      for (const auto& cluster : clusters) {
        REQUIRE(cluster.size() == 5);
        bool low = cluster.front() < 5;
        for (auto i : cluster) CHECK((i < 5) == low);
      }
    }
  }
}

TEST_CASE("select_source_task matches the oracle and honors k_th") {
  TmpDir tmp;
  Rng rng(2024);
  for (std::size_t c = 0; c < 20; ++c) {
    OracleFixture fx(rng, c, tmp / ("cache_task_" + std::to_string(c)));
    for (auto variant : {CriterionVariant::taskdes_taskinput,
                         CriterionVariant::template_, CriterionVariant::random}) {
      SelectionCriterion crit{variant, 7};
      std::size_t n_tasks = fx.oc.corpus.source_tasks.size();
      for (std::size_t k = 1; k <= n_tasks; ++k) {
        auto choice = select_source_task(fx.oc.query, fx.oc.corpus, fx.ctx, crit, k);
        CHECK(choice.task_id == oracle_task(fx.oc, crit, k));
        CHECK(choice.rank == k);
      }
      CHECK_THROWS_AS(
          select_source_task(fx.oc.query, fx.oc.corpus, fx.ctx, crit, n_tasks + 1),
          SelectionError);
    }
  }
}

TEST_CASE("multi-task pool is the top-n prefix of the task ranking") {
  TmpDir tmp;
  Rng rng(5);
  OracleFixture fx(rng, 999, tmp / "cache_pool");
  SelectionCriterion crit{CriterionVariant::taskdes_taskinput, 0};
  std::size_t n_tasks = fx.oc.corpus.source_tasks.size();
  auto pool = select_multi_task_pool(fx.oc.query, fx.oc.corpus, fx.ctx, crit, n_tasks);
  REQUIRE(pool.size() == n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    CHECK(pool[i].task_id == oracle_task(fx.oc, crit, i + 1));
    CHECK(pool[i].rank == i + 1);
  }
  CHECK(select_multi_task_pool(fx.oc.query, fx.oc.corpus, fx.ctx, crit, 1)[0].task_id ==
        select_source_task(fx.oc.query, fx.oc.corpus, fx.ctx, crit, 1).task_id);
}

TEST_CASE("select_demonstrations equals the brute-force oracle on all 13 criteria") {
  TmpDir tmp;
  Rng rng(4242);
  // 30 randomized corpora here; the acceptance suite sweeps the full 100.
  // Each criterion is checked on a single-task pool and on the union pool.
  for (std::size_t c = 0; c < 30; ++c) {
    OracleFixture fx(rng, c, tmp / ("cache_" + std::to_string(c % 4)));
    std::vector<Candidate> union_pool;
    for (const auto& [tid, task] : fx.oc.corpus.source_tasks)
      for (const auto& inst : task.instances) union_pool.push_back({&task, &inst});
    std::size_t n = 1 + rng.bounded(3);
    for (auto variant : all_criteria()) {
      CAPTURE(criterion_name(variant));
      SelectionCriterion crit{variant, rng.next()};
      auto got = select_demonstrations(fx.oc.query, union_pool, n, crit, fx.ctx);
      auto want = oracle_demos(fx.oc, union_pool, n, crit);
      REQUIRE(got.size() == n);
      CHECK(ids_of(got) == want);

      const TaskRecord& one_task = fx.oc.corpus.source_tasks.begin()->second;
      std::vector<Candidate> task_pool;
      for (const auto& inst : one_task.instances)
        task_pool.push_back({&one_task, &inst});
      auto got_task = select_demonstrations(fx.oc.query, one_task, n, crit, fx.ctx);
      auto want_task = oracle_demos(fx.oc, task_pool, n, crit);
      CHECK(ids_of(got_task) == want_task);
    }
  }
}

TEST_CASE("default criterion: monotone truncation") {
  TmpDir tmp;
  Rng rng(77);
  OracleFixture fx(rng, 2222, tmp / "cache_mono");
  const TaskRecord& task = fx.oc.corpus.source_tasks.begin()->second;
  SelectionCriterion crit{CriterionVariant::taskdes_taskinput, 0};
  auto top3 = select_demonstrations(fx.oc.query, task, 3, crit, fx.ctx);
  auto top4 = select_demonstrations(fx.oc.query, task, 4, crit, fx.ctx);
  for (std::size_t i = 0; i < 3; ++i) CHECK(id_of(top3[i]) == id_of(top4[i]));
}

TEST_CASE("error cases: oversize n, missing references") {
  TmpDir tmp;
  Rng rng(9);
  OracleFixture fx(rng, 3333, tmp / "cache_err");
  const TaskRecord& task = fx.oc.corpus.source_tasks.begin()->second;
  SelectionCriterion crit{CriterionVariant::taskdes_taskinput, 0};
  CHECK_THROWS_AS(
      select_demonstrations(fx.oc.query, task, task.instances.size() + 1, crit, fx.ctx),
      SelectionError);
  TargetQuery no_refs = fx.oc.query;
  no_refs.references.clear();
  SelectionCriterion out_crit{CriterionVariant::taskdes_output, 0};
  CHECK_THROWS_AS(select_demonstrations(no_refs, task, 1, out_crit, fx.ctx),
                  SelectionError);
}

TEST_CASE("summarize_template renders Prompt 5 and extracts the template") {
  TaskRecord task = make_task("t", "solve it", "c",
                              {{"in one", "o"}, {"in two", "o"}, {"in three", "o"}});
  auto mock = std::make_shared<MockChatProvider>(MockChatProvider::Fallback::strict);
  ProviderProfile profile;
  profile.retry.initial_backoff_ms = 1;
  PromptLibrary prompts;
  std::string expected_prompt = prompts.render(
      "prompt5", {{"task_description", "solve it"},
                  {"input_example_1", "in one"},
                  {"input_example_2", "in two"},
                  {"input_example_3", "in three"}});
  CHECK(expected_prompt.find("please summarize the template of its inputs") !=
        std::string::npos);
  mock->script(expected_prompt, profile.temperature,
               "<Input Template> Q: ... Options: ... </Input Template>");
  Gateway gateway(mock);
  CHECK(summarize_template(task, prompts, gateway, profile) == "Q: ... Options: ...");
  CHECK(task.template_summary == "Q: ... Options: ...");

  SUBCASE("missing closing tag is tag_missing") {
    mock->script(expected_prompt, profile.temperature, "<Input Template> oops");
    task.template_summary.reset();
    CHECK_THROWS_AS(summarize_template(task, prompts, gateway, profile), AdaptError);
  }
  SUBCASE("needs three instances") {
    TaskRecord tiny = make_task("t2", "d", "c", {{"a", "b"}});
    CHECK_THROWS_AS(summarize_template(tiny, prompts, gateway, profile), SelectionError);
  }
}

TEST_SUITE_END();
