#pragma once

#include <map>
#include <unordered_set>
#include <vector>

#include "kgad/graph.hpp"
#include "kgad/ingest.hpp"
#include "kgad/io.hpp"
#include "kgad/model.hpp"

namespace kgad {

using TripleSet = std::unordered_set<Triple, TripleHash>;

inline TripleSet triple_set(const KnowledgeGraph& g) { return {g.triples().begin(), g.triples().end()}; }

// Links implied by held-out annotations, expressed in g's ids. Links with an
// entity g does not know, or already present in g, are left out.
inline std::vector<Triple> heldout_triples(const KnowledgeGraph& g, const std::vector<SceneAnnotation>& annotations) {
  std::vector<Triple> out;
  if (annotations.empty()) return out;
  const auto held = ingest_annotations(annotations).graph;
  for (const auto& t : held.triples()) {
    const auto& rel = g.relation(t.relation);
    auto h = g.find_entity(held.entity(t.head).label, rel.head_type);
    auto tl = g.find_entity(held.entity(t.tail).label, rel.tail_type);
    if (h && tl && !g.contains({*h, t.relation, *tl})) out.push_back({*h, t.relation, *tl});
  }
  return out;
}

struct RankResult {
  Triple triple;
  std::size_t head_rank = 1;
  std::size_t tail_rank = 1;
  bool filtered = false;
};

namespace detail {

// 1 + number of competing candidates scoring >= the true triple (ties count
// against the true entity). Candidates in `known` are skipped when filtering.
template <typename MakeCandidate>
std::size_t rank_slot(const EmbeddingModel& m, const KnowledgeGraph& g, const TripleSet& known,
                      const Triple& truth, const std::vector<EntityId>& pool, bool filtered,
                      MakeCandidate make) {
  const double s_true = score_triple(m, truth);
  std::size_t rank = 1;
  for (EntityId e : pool) {
    Triple c = make(e);
    if (c == truth || !g.is_schema_valid(c)) continue;
    if (filtered && known.count(c)) continue;
    if (score_triple(m, c) >= s_true) ++rank;
  }
  return rank;
}

}  // namespace detail

inline RankResult rank_triple(const EmbeddingModel& m, const KnowledgeGraph& g, const TripleSet& known,
                              const Triple& t, bool filtered) {
  if (!g.is_schema_valid(t)) throw ContractViolation("rank_triple: schema-invalid triple");
  const auto& rel = g.relation(t.relation);
  RankResult r{t, 1, 1, filtered};
  r.head_rank = detail::rank_slot(m, g, known, t, g.entities_of_type(rel.head_type), filtered,
                                  [&](EntityId e) { return Triple{e, t.relation, t.tail}; });
  r.tail_rank = detail::rank_slot(m, g, known, t, g.entities_of_type(rel.tail_type), filtered,
                                  [&](EntityId e) { return Triple{t.head, t.relation, e}; });
  return r;
}

struct LinkMetrics {
  std::map<std::size_t, double> hits;  // k -> fraction of ranks <= k
  double mean_rank = 0;
  double mrr = 0;
  bool filtered = false;
  std::size_t n_test = 0;
};

// Aggregates head and tail ranks of every test triple.
inline LinkMetrics metrics_from_ranks(const std::vector<RankResult>& ranks, const std::vector<std::size_t>& k_values) {
  if (ranks.empty()) throw DataError("empty test set");
  LinkMetrics out;
  out.filtered = ranks.front().filtered;
  out.n_test = ranks.size();
  std::vector<std::size_t> all;
  all.reserve(ranks.size() * 2);
  for (const auto& r : ranks) {
    all.push_back(r.head_rank);
    all.push_back(r.tail_rank);
  }
  double sum = 0, rec = 0;
  for (auto x : all) {
    sum += static_cast<double>(x);
    rec += 1.0 / static_cast<double>(x);
  }
  const double n = static_cast<double>(all.size());
  out.mean_rank = sum / n;
  out.mrr = rec / n;
  for (auto k : k_values) {
    std::size_t hit = 0;
    for (auto x : all) hit += x <= k;
    out.hits[k] = static_cast<double>(hit) / n;
  }
  return out;
}

inline LinkMetrics evaluate_links(const EmbeddingModel& m, const KnowledgeGraph& g, const TripleSet& known,
                                  const std::vector<Triple>& test, const std::vector<std::size_t>& k_values,
                                  bool filtered) {
  if (test.empty()) throw DataError("empty test set");
  std::vector<RankResult> ranks;
  ranks.reserve(test.size());
  for (const auto& t : test) ranks.push_back(rank_triple(m, g, known, t, filtered));
  return metrics_from_ranks(ranks, k_values);
}

inline io::json to_json(const LinkMetrics& lm) {
  io::json hits = io::json::object();
  for (const auto& [k, v] : lm.hits) hits[std::to_string(k)] = v;
  return {{"hits", hits}, {"mean_rank", lm.mean_rank}, {"mrr", lm.mrr}, {"filtered", lm.filtered}, {"n_test", lm.n_test}};
}

}  // namespace kgad
