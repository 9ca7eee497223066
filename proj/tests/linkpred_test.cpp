#include <gtest/gtest.h>

#include "test_support.hpp"

namespace kgad {
namespace {

const RelationId kAt = 0, kNear = 1;

// Sort-based rank: position of the truth in the descending score list of
// every schema-valid candidate, ties placed before it.
std::size_t oracle_rank(const EmbeddingModel& m, const KnowledgeGraph& g, const TripleSet& known, const Triple& t,
                        bool head_side, bool filtered) {
  const auto& rel = g.relation(t.relation);
  std::vector<double> scores;
  for (EntityId e : g.entities_of_type(head_side ? rel.head_type : rel.tail_type)) {
    Triple c = head_side ? Triple{e, t.relation, t.tail} : Triple{t.head, t.relation, e};
    if (c == t || !g.is_schema_valid(c) || (filtered && known.count(c))) continue;
    scores.push_back(score_triple(m, c));
  }
  std::sort(scores.begin(), scores.end(), std::greater<>());
  const double s = score_triple(m, t);
  return 1 + static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [&](double x) { return x >= s; }));
}

TEST(Rank, StrictlyBestTripleRanksFirst) {
  // o1 sits exactly at o0 + r; every other entity is far away
  KnowledgeGraph g;
  for (int i = 0; i < 4; ++i) g.add_entity("o" + std::to_string(i), EntityType::Object);
  g.add_triple({0, kNear, 1});
  Rng rng(0);
  auto m = init_model(ModelKind::TransE, 4, 2, 2, 2, rng);
  m.entity = {0, 0, 1, 0, -3, 2, 4, -4};
  m.relation = {0, 0, 1, 0};
  auto r = rank_triple(m, g, triple_set(g), {0, kNear, 1}, false);
  EXPECT_EQ(r.head_rank, 1u);
  EXPECT_EQ(r.tail_rank, 1u);
}

TEST(Rank, AllEqualScoresRankLast) {
  auto g = testing::complete_graph(5, 3);
  Rng rng(0);
  auto m = init_model(ModelKind::TransE, g.num_entities(), 2, 4, 4, rng);
  std::fill(m.entity.begin(), m.entity.end(), 0.0);
  std::fill(m.relation.begin(), m.relation.end(), 0.0);
  // AtLocation: 5 object heads, 3 scene tails; LocatedNear: 5 objects, self excluded
  auto at = rank_triple(m, g, triple_set(g), {0, kAt, 5}, false);
  EXPECT_EQ(at.head_rank, 5u);
  EXPECT_EQ(at.tail_rank, 3u);
  auto near = rank_triple(m, g, triple_set(g), {0, kNear, 1}, false);
  EXPECT_EQ(near.head_rank, 4u);  // o2, o3, o4 compete; o1 would be a self-link
  EXPECT_EQ(near.tail_rank, 4u);
}

TEST(Rank, MatchesExhaustiveSortOracle) {
  auto as = testing::random_annotations(12, 3, 7, 21, 4);
  auto g = ingest_annotations(as).graph;
  ASSERT_GE(g.num_entities(), 8u);
  auto known = triple_set(g);
  for (auto kind : {ModelKind::TransE, ModelKind::TransR, ModelKind::TransD}) {
    auto m = testing::random_model(kind, g.num_entities(), 2, 5, kind == ModelKind::TransE ? 5 : 3, 4, 1.0);
    for (const auto& t : g.triples())
      for (bool filtered : {false, true}) {
        auto r = rank_triple(m, g, known, t, filtered);
        EXPECT_EQ(r.head_rank, oracle_rank(m, g, known, t, true, filtered));
        EXPECT_EQ(r.tail_rank, oracle_rank(m, g, known, t, false, filtered));
      }
  }
}

TEST(Metrics, AllFirstRanks) {
  std::vector<RankResult> ranks(7, RankResult{{}, 1, 1, false});
  auto lm = metrics_from_ranks(ranks, {1, 3, 10});
  EXPECT_EQ(lm.hits.at(1), 1.0);
  EXPECT_EQ(lm.hits.at(10), 1.0);
  EXPECT_EQ(lm.mean_rank, 1.0);
  EXPECT_EQ(lm.mrr, 1.0);
  EXPECT_EQ(lm.n_test, 7u);
}

TEST(Metrics, HandComputedRanks) {
  auto lm = metrics_from_ranks({RankResult{{}, 1, 9, true}}, {1, 3, 10});
  EXPECT_DOUBLE_EQ(lm.mean_rank, 5.0);
  EXPECT_DOUBLE_EQ(lm.mrr, 0.5 * (1.0 + 1.0 / 9.0));
  EXPECT_DOUBLE_EQ(lm.hits.at(1), 0.5);
  EXPECT_DOUBLE_EQ(lm.hits.at(3), 0.5);
  EXPECT_DOUBLE_EQ(lm.hits.at(10), 1.0);
  EXPECT_TRUE(lm.filtered);
  auto j = to_json(lm);
  EXPECT_EQ(j["hits"]["10"], 1.0);
  EXPECT_EQ(j["mean_rank"], 5.0);
  EXPECT_EQ(j["n_test"], 1);
}

TEST(Metrics, EmptyTestSetIsAnError) {
  auto g = testing::complete_graph(3, 2);
  auto m = testing::random_model(ModelKind::TransE, g.num_entities(), 2, 3, 3, 1);
  EXPECT_THROW(evaluate_links(m, g, triple_set(g), {}, {10}, true), DataError);
  EXPECT_THROW(metrics_from_ranks({}, {10}), DataError);
}

class MetricProperties : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(MetricProperties, FilteredNeverWorseMonotoneHitsBoundedMrr) {
  const auto seed = GetParam();
  auto as = testing::random_annotations(30, 4, 15, seed, 5);
  auto g = ingest_annotations(as).graph;
  auto kind = std::array{ModelKind::TransE, ModelKind::TransR, ModelKind::TransD}[seed % 3];
  auto m = testing::random_model(kind, g.num_entities(), 2, 6, kind == ModelKind::TransE ? 6 : 4, seed + 100, 0.5);
  auto known = triple_set(g);
  std::vector<Triple> test(g.triples().begin(), g.triples().end());
  for (const auto& t : test) {
    auto raw = rank_triple(m, g, known, t, false), filt = rank_triple(m, g, known, t, true);
    EXPECT_LE(filt.head_rank, raw.head_rank);
    EXPECT_LE(filt.tail_rank, raw.tail_rank);
    EXPECT_GE(filt.head_rank, 1u);
  }
  std::vector<std::size_t> ks{1, 2, 3, 5, 10, 20, 50};
  auto lm = evaluate_links(m, g, known, test, ks, true);
  for (std::size_t i = 1; i < ks.size(); ++i) EXPECT_LE(lm.hits.at(ks[i - 1]), lm.hits.at(ks[i]));
  EXPECT_GT(lm.mrr, 0.0);
  EXPECT_LE(lm.mrr, 1.0);
  EXPECT_GE(lm.mean_rank, 1.0);
  EXPECT_LE(lm.mrr, lm.hits.at(1) + (1.0 - lm.hits.at(1)) / 2.0 + 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Seeds, MetricProperties, ::testing::Values(1, 2, 3, 4, 5, 6));

}  // namespace
}  // namespace kgad
