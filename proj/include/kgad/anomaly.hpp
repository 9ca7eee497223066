#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgad/common.hpp"
#include "kgad/io.hpp"
#include "kgad/score_table.hpp"

namespace kgad {

// One scene's objects with a single injected anomaly. scene_type is ground
// truth and only feeds the scene-accuracy report.
struct AnomalyDatapoint {
  std::string scene_type;
  std::vector<std::string> objects;
  std::string anomaly;

  bool operator==(const AnomalyDatapoint&) const = default;
};

inline io::json to_json(const AnomalyDatapoint& d) {
  return {{"scene_type", d.scene_type}, {"objects", d.objects}, {"anomaly", d.anomaly}};
}

inline AnomalyDatapoint datapoint_from_json(const io::json& j) {
  AnomalyDatapoint d;
  d.scene_type = normalize_label(j.at("scene_type").get<std::string>());
  for (const auto& o : j.at("objects").get<std::vector<std::string>>()) {
    auto n = normalize_label(o);
    if (!n.empty() && std::find(d.objects.begin(), d.objects.end(), n) == d.objects.end()) d.objects.push_back(n);
  }
  d.anomaly = normalize_label(j.at("anomaly").get<std::string>());
  if (std::find(d.objects.begin(), d.objects.end(), d.anomaly) == d.objects.end())
    throw DataError("anomaly '" + d.anomaly + "' is not among the objects");
  if (d.objects.size() < 2) throw DataError("datapoint needs at least 2 objects");
  return d;
}

inline std::vector<AnomalyDatapoint> parse_datapoints(std::string_view jsonl, std::vector<io::LineError>* rejects) {
  return io::parse_jsonl<AnomalyDatapoint>(jsonl, datapoint_from_json, rejects);
}

inline std::string datapoints_to_jsonl(const std::vector<AnomalyDatapoint>& ds) {
  return io::to_jsonl(ds, [](const AnomalyDatapoint& d) { return to_json(d); });
}

struct InferenceConfig {
  double alpha = 1.0;  // weight of object context
  std::size_t m = 3;   // number of predicted scenes used as scene context

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (m == 0) throw ConfigError("m must be positive");
  }
};

struct ScoredScene {
  EntityId id = 0;
  std::string label;
  double compatibility = 0;
};

struct CandidateScore {
  EntityId id = 0;
  std::string label;
  double z_o = 0;
  double z_s = 0;
  double z = 0;
};

// Candidates sorted by z descending, ties by label ascending. The front entry
// is the predicted anomaly. predicted_scenes is shared by every candidate.
struct AnomalyRanking {
  std::vector<CandidateScore> candidates;
  std::vector<ScoredScene> predicted_scenes;
  std::vector<std::string> skipped_objects;  // labels missing from the table

  const std::string& prediction() const { return candidates.front().label; }

  // 0-based position of `label`, or nullopt.
  std::optional<std::size_t> position(std::string_view label) const {
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i].label == label) return i;
    return std::nullopt;
  }
};

// Object labels resolved against a table: normalized, deduplicated, input order.
struct ResolvedObjects {
  std::vector<EntityId> ids;
  std::vector<std::string> skipped;
};

inline ResolvedObjects resolve_objects(const ScoreTable& table, const std::vector<std::string>& labels) {
  ResolvedObjects out;
  std::unordered_set<EntityId> seen;
  for (const auto& raw : labels) {
    auto label = normalize_label(raw);
    if (auto id = table.find(label, EntityType::Object)) {
      if (seen.insert(*id).second) out.ids.push_back(*id);
    } else if (std::find(out.skipped.begin(), out.skipped.end(), label) == out.skipped.end()) {
      out.skipped.push_back(std::move(label));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Context scores
// ---------------------------------------------------------------------------

// Mean symmetrized LocatedNear score between the candidate and every other
// object. Divides by the number of summands, |objects| - 1.
inline double object_score(const ScoreTable& table, EntityId candidate, std::span<const EntityId> objects) {
  const RelationId near = table.relation_id(schema::kLocatedNear);
  double sum = 0;
  std::size_t n = 0;
  for (EntityId o : objects) {
    if (o == candidate) continue;
    sum += table.lookup(near, candidate, o);
    ++n;
  }
  if (n == 0) throw DataError("object score needs at least one other object");
  return sum / static_cast<double>(n);
}

// Label-level form; labels missing from the table are skipped with a warning.
inline double object_score(const ScoreTable& table, std::string_view candidate, const std::vector<std::string>& objects) {
  auto c = table.find(normalize_label(candidate), EntityType::Object);
  if (!c) throw DataError("candidate '" + std::string(candidate) + "' is not in the score table");
  auto resolved = resolve_objects(table, objects);
  for (const auto& s : resolved.skipped) log::warn("object '" + s + "' not in score table; ignored");
  return object_score(table, *c, resolved.ids);
}

// Compatibility of each scene with the whole object set (anomaly candidates
// included): mean AtLocation score. Returns the top m, ties by label.
inline std::vector<ScoredScene> predict_scenes(const ScoreTable& table, std::span<const EntityId> objects, std::size_t m) {
  if (m == 0) throw ConfigError("m must be positive");
  if (objects.empty()) throw DataError("scene prediction needs at least one object");
  const RelationId at = table.relation_id(schema::kAtLocation);
  const auto& scenes = table.entities_of_type(EntityType::Scene);
  if (scenes.empty()) throw DataError("score table has no scene entities");
  if (m > scenes.size()) {
    log::warn("m = " + std::to_string(m) + " exceeds the " + std::to_string(scenes.size()) + " scene types; clamped");
    m = scenes.size();
  }
  std::vector<ScoredScene> all;
  all.reserve(scenes.size());
  for (EntityId s : scenes) {
    double sum = 0;
    for (EntityId o : objects) sum += table.lookup(at, o, s);
    all.push_back({s, table.label(s), sum / static_cast<double>(objects.size())});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(),
                    [](const ScoredScene& a, const ScoredScene& b) {
                      if (a.compatibility != b.compatibility) return a.compatibility > b.compatibility;
                      return a.label < b.label;
                    });
  all.resize(m);
  return all;
}

// Mean AtLocation score of the candidate over the predicted scenes.
inline double scene_score(const ScoreTable& table, EntityId candidate, const std::vector<ScoredScene>& scenes) {
  if (scenes.empty()) throw ContractViolation("scene_score needs at least one predicted scene");
  const RelationId at = table.relation_id(schema::kAtLocation);
  double sum = 0;
  for (const auto& s : scenes) sum += table.lookup(at, candidate, s.id);
  return sum / static_cast<double>(scenes.size());
}

// z = -alpha * z_o - (1 - alpha) * z_s; weak links mean anomalous.
inline double anomaly_score(double z_o, double z_s, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return -alpha * z_o - (1.0 - alpha) * z_s;
}

inline void sort_ranking(std::vector<CandidateScore>& c) {
  std::sort(c.begin(), c.end(), [](const CandidateScore& a, const CandidateScore& b) {
    if (a.z != b.z) return a.z > b.z;
    return a.label < b.label;
  });
}

// Scores every object as the anomaly candidate. Scene context is predicted
// once from the full object set and shared by all candidates.
inline AnomalyRanking detect(const ScoreTable& table, const std::vector<std::string>& objects,
                             const InferenceConfig& config) {
  config.validate();
  auto resolved = resolve_objects(table, objects);
  if (resolved.ids.size() < 2)
    throw DataError("fewer than 2 objects resolvable in the score table");
  // fixed summation order keeps the result bitwise independent of input order
  std::sort(resolved.ids.begin(), resolved.ids.end());
  AnomalyRanking out;
  out.skipped_objects = std::move(resolved.skipped);
  out.predicted_scenes = predict_scenes(table, resolved.ids, config.m);
  out.candidates.reserve(resolved.ids.size());
  for (EntityId c : resolved.ids) {
    CandidateScore s{c, table.label(c), object_score(table, c, resolved.ids), scene_score(table, c, out.predicted_scenes), 0};
    s.z = anomaly_score(s.z_o, s.z_s, config.alpha);
    out.candidates.push_back(std::move(s));
  }
  sort_ranking(out.candidates);
  return out;
}

inline AnomalyRanking detect(const ScoreTable& table, const AnomalyDatapoint& d, const InferenceConfig& config) {
  try {
    return detect(table, d.objects, config);
  } catch (const DataError& e) {
    throw DataError("datapoint (scene " + d.scene_type + ", anomaly " + d.anomaly + "): " + e.what());
  }
}

inline io::json to_json(const AnomalyRanking& r) {
  io::json scenes = io::json::array(), cands = io::json::array();
  for (const auto& s : r.predicted_scenes) scenes.push_back({{"label", s.label}, {"score", s.compatibility}});
  for (const auto& c : r.candidates)
    cands.push_back({{"label", c.label}, {"z_o", c.z_o}, {"z_s", c.z_s}, {"z", c.z}});
  return {{"prediction", r.prediction()}, {"predicted_scenes", scenes}, {"candidates", cands}, {"skipped", r.skipped_objects}};
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct TopKReport {
  std::map<std::size_t, double> accuracy;        // anomaly in first k candidates
  std::map<std::size_t, double> scene_accuracy;  // true scene in top-k predicted scenes
  std::map<std::size_t, std::map<std::string, std::size_t>> misses;  // k -> anomaly label -> count
  std::size_t evaluated = 0;
  std::size_t skipped_unresolved_anomaly = 0;
  std::size_t skipped_too_few_objects = 0;
};

inline io::json to_json(const TopKReport& r) {
  io::json acc = io::json::object(), sacc = io::json::object(), miss = io::json::object();
  for (const auto& [k, v] : r.accuracy) acc[std::to_string(k)] = v;
  for (const auto& [k, v] : r.scene_accuracy) sacc[std::to_string(k)] = v;
  for (const auto& [k, m] : r.misses) {
    // most frequent first
    std::vector<std::pair<std::string, std::size_t>> rows(m.begin(), m.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    io::json arr = io::json::array();
    for (const auto& [label, n] : rows) arr.push_back({{"label", label}, {"count", n}});
    miss[std::to_string(k)] = arr;
  }
  return {{"top_k_accuracy", acc},
          {"scene_top_k_accuracy", sacc},
          {"misses", miss},
          {"evaluated", r.evaluated},
          {"skipped", {{"unresolved_anomaly", r.skipped_unresolved_anomaly}, {"too_few_objects", r.skipped_too_few_objects}}}};
}

// Rankings for a dataset; nullopt where the datapoint had to be skipped.
inline std::vector<std::optional<AnomalyRanking>> detect_all(const ScoreTable& table,
                                                             const std::vector<AnomalyDatapoint>& dataset,
                                                             const InferenceConfig& config) {
  std::vector<std::optional<AnomalyRanking>> out;
  out.reserve(dataset.size());
  for (const auto& d : dataset) {
    if (!table.find(normalize_label(d.anomaly), EntityType::Object)) {
      out.emplace_back();
      continue;
    }
    auto resolved = resolve_objects(table, d.objects);
    if (resolved.ids.size() < 2) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(detect(table, d, config));
  }
  return out;
}

inline TopKReport evaluate_topk(const ScoreTable& table, const std::vector<AnomalyDatapoint>& dataset,
                                const InferenceConfig& config, const std::vector<std::size_t>& k_values) {
  if (dataset.empty()) throw DataError("anomaly dataset is empty");
  config.validate();
  TopKReport rep;
  std::map<std::size_t, std::size_t> hit, scene_hit;
  const std::size_t max_k = k_values.empty() ? 1 : *std::max_element(k_values.begin(), k_values.end());
  const std::size_t n_scenes = table.entities_of_type(EntityType::Scene).size();
  for (const auto& d : dataset) {
    if (!table.find(normalize_label(d.anomaly), EntityType::Object)) {
      ++rep.skipped_unresolved_anomaly;
      continue;
    }
    auto resolved = resolve_objects(table, d.objects);
    if (resolved.ids.size() < 2) {
      ++rep.skipped_too_few_objects;
      continue;
    }
    ++rep.evaluated;
    auto ranking = detect(table, d, config);
    auto pos = ranking.position(normalize_label(d.anomaly));
    auto scenes = predict_scenes(table, resolved.ids, std::min(max_k, n_scenes));
    auto scene_pos = std::find_if(scenes.begin(), scenes.end(), [&](const ScoredScene& s) { return s.label == d.scene_type; });
    for (auto k : k_values) {
      if (pos && *pos < k)
        ++hit[k];
      else
        ++rep.misses[k][normalize_label(d.anomaly)];
      if (scene_pos != scenes.end() && static_cast<std::size_t>(scene_pos - scenes.begin()) < k) ++scene_hit[k];
    }
  }
  if (rep.evaluated == 0) log::warn("no datapoint could be evaluated");
  if (rep.skipped_unresolved_anomaly + rep.skipped_too_few_objects > 0)
    log::warn(std::to_string(rep.skipped_unresolved_anomaly + rep.skipped_too_few_objects) +
              " datapoints skipped (unresolvable anomaly or too few objects)");
  const double n = rep.evaluated ? static_cast<double>(rep.evaluated) : 1.0;
  for (auto k : k_values) {
    rep.accuracy[k] = rep.evaluated ? static_cast<double>(hit[k]) / n : 0.0;
    rep.scene_accuracy[k] = rep.evaluated ? static_cast<double>(scene_hit[k]) / n : 0.0;
    rep.misses[k];
  }
  return rep;
}

struct SweepCell {
  double alpha = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  double accuracy = 0;
};

// Full factorial over (alpha, m); one cell per (alpha, m, k).
inline std::vector<SweepCell> sweep(const ScoreTable& table, const std::vector<AnomalyDatapoint>& dataset,
                                    const std::vector<double>& alpha_grid, const std::vector<std::size_t>& m_grid,
                                    const std::vector<std::size_t>& k_values) {
  if (alpha_grid.empty() || m_grid.empty() || k_values.empty()) throw ConfigError("sweep grids must be non-empty");
  std::vector<SweepCell> cells;
  for (double a : alpha_grid)
    for (std::size_t m : m_grid) {
      auto rep = evaluate_topk(table, dataset, {a, m}, k_values);
      for (auto k : k_values) cells.push_back({a, m, k, rep.accuracy.at(k)});
    }
  return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "alpha,m,k,accuracy\n";
  for (const auto& c : cells) {
    io::json row = io::json::array({c.alpha, c.accuracy});
    out += row[0].dump() + ',' + std::to_string(c.m) + ',' + std::to_string(c.k) + ',' + row[1].dump() + '\n';
  }
  return out;
}

}  // namespace kgad
