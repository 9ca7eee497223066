#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgad/graph.hpp"
#include "kgad/io.hpp"

namespace kgad {

// One annotated image: its scene type and the set of objects labeled in it.
struct SceneAnnotation {
  std::string scene_id;
  std::string scene_type;
  std::vector<std::string> objects;  // normalized, deduplicated, first-seen order

  bool operator==(const SceneAnnotation&) const = default;
};

using LabelSet = std::set<std::string>;

inline std::vector<std::string> normalize_object_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : raw) {
    auto n = normalize_label(r);
    if (n.empty()) continue;
    if (seen.insert(n).second) out.push_back(std::move(n));
  }
  return out;
}

inline LabelSet normalize_label_set(const std::vector<std::string>& raw) {
  LabelSet out;
  for (const auto& r : raw) {
    auto n = normalize_label(r);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

inline SceneAnnotation make_annotation(std::string scene_id, std::string_view scene_type,
                                       const std::vector<std::string>& objects) {
  SceneAnnotation a{std::move(scene_id), normalize_label(scene_type), normalize_object_list(objects)};
  if (a.scene_type.empty()) throw DataError("scene_type is empty");
  return a;
}

inline SceneAnnotation annotation_from_json(const io::json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  return make_annotation(j.at("scene_id").get<std::string>(), j.at("scene_type").get<std::string>(),
                         j.at("objects").get<std::vector<std::string>>());
}

inline io::json annotation_to_json(const SceneAnnotation& a) {
  return {{"scene_id", a.scene_id}, {"scene_type", a.scene_type}, {"objects", a.objects}};
}

// Malformed records are rejected with their line number; parsing continues.
inline std::vector<SceneAnnotation> parse_annotations(std::string_view jsonl,
                                                      std::vector<io::LineError>* rejects) {
  return io::parse_jsonl<SceneAnnotation>(jsonl, annotation_from_json, rejects);
}

inline std::string annotations_to_jsonl(const std::vector<SceneAnnotation>& as) {
  return io::to_jsonl(as, annotation_to_json);
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestResult {
  KnowledgeGraph graph;
  GraphStats stats;
  std::size_t annotations_used = 0;
  std::size_t annotations_empty = 0;  // no object survived the whitelist
  std::size_t objects_dropped = 0;
};

// AtLocation (object, scene_type) for every surviving object, LocatedNear in
// both orientations for every unordered pair of distinct surviving objects.
inline IngestResult ingest_annotations(const std::vector<SceneAnnotation>& annotations,
                                       const std::optional<LabelSet>& object_whitelist = std::nullopt) {
  if (annotations.empty()) throw DataError("annotation stream is empty");
  IngestResult res;
  auto& g = res.graph;
  const RelationId at = g.relation_id(schema::kAtLocation);
  const RelationId near = g.relation_id(schema::kLocatedNear);

  std::vector<EntityId> ids;
  for (const auto& a : annotations) {
    if (a.scene_type.empty()) throw DataError("annotation '" + a.scene_id + "' has empty scene_type");
    ids.clear();
    for (const auto& raw : a.objects) {
      auto label = normalize_label(raw);
      if (label.empty()) continue;
      if (object_whitelist && !object_whitelist->count(label)) {
        ++res.objects_dropped;
        continue;
      }
      EntityId id = g.add_entity(std::move(label), EntityType::Object);
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    if (ids.empty()) {
      ++res.annotations_empty;
      continue;
    }
    ++res.annotations_used;
    EntityId scene = g.add_entity(normalize_label(a.scene_type), EntityType::Scene);
    for (EntityId o : ids) g.add_triple({o, at, scene});
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        g.add_triple({ids[i], near, ids[j]});
        g.add_triple({ids[j], near, ids[i]});
      }
  }
  res.stats = compute_stats(g);
  return res;
}

// ---------------------------------------------------------------------------
// External triples
// ---------------------------------------------------------------------------

struct ExternalTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

// head\trelation\ttail per line, LF endings.
inline std::vector<ExternalTriple> parse_external_tsv(std::string_view text,
                                                      std::vector<io::LineError>* rejects) {
  std::vector<ExternalTriple> out;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = io::split_tabs(lines[i]);
    if (cols.size() != 3) {
      std::string msg = "expected 3 tab-separated columns, got " + std::to_string(cols.size());
      if (!rejects) throw DataError("line " + std::to_string(i + 1) + ": " + msg);
      rejects->push_back({i + 1, msg});
      continue;
    }
    out.push_back({cols[0], cols[1], cols[2]});
  }
  return out;
}

struct MergeReport {
  std::size_t triples_added = 0;
  std::size_t entities_added = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> rejected;  // one reason per rejected triple
};

// Resolves each label against the type its relation requires. A label that
// only exists under a different type is a schema violation; an unknown label
// creates a new entity of the required type.
inline MergeReport merge_external_triples(KnowledgeGraph& g, const std::vector<ExternalTriple>& extra) {
  MergeReport rep;
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const auto& x = extra[i];
    auto where = [&] { return "triple " + std::to_string(i + 1) + " (" + x.head + ", " + x.relation + ", " + x.tail + "): "; };
    auto rel = g.find_relation(x.relation);
    if (!rel) {
      rep.rejected.push_back(where() + "unknown relation");
      continue;
    }
    const auto& r = g.relation(*rel);
    auto head = normalize_label(x.head), tail = normalize_label(x.tail);
    if (head.empty() || tail.empty()) {
      rep.rejected.push_back(where() + "empty label");
      continue;
    }
    auto resolve = [&](const std::string& label, EntityType need) -> std::optional<std::optional<EntityId>> {
      if (auto id = g.find_entity(label, need)) return std::optional<EntityId>(*id);
      if (g.has_label(label)) return std::nullopt;  // exists with the wrong type
      return std::optional<EntityId>();             // new
    };
    auto h = resolve(head, r.head_type), t = resolve(tail, r.tail_type);
    if (!h || !t) {
      rep.rejected.push_back(where() + "schema-invalid: entity type does not match relation");
      continue;
    }
    if (r.head_type == r.tail_type && head == tail) {
      rep.rejected.push_back(where() + "schema-invalid: self link");
      continue;
    }
    std::size_t before = g.num_entities();
    EntityId hid = h->has_value() ? **h : g.add_entity(head, r.head_type);
    EntityId tid = t->has_value() ? **t : g.add_entity(tail, r.tail_type);
    rep.entities_added += g.num_entities() - before;
    if (g.add_triple({hid, *rel, tid}))
      ++rep.triples_added;
    else
      ++rep.duplicates;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dataset variants
// ---------------------------------------------------------------------------

// Occurrence counts gathered from raw annotations (labels normalized).
struct CooccurrenceCounts {
  std::map<std::string, std::size_t> scene_annotations;                       // scene -> #annotations
  std::map<std::string, std::size_t> object_annotations;                      // object -> #annotations
  std::map<std::pair<std::string, std::string>, std::size_t> object_in_scene; // (object, scene)
  std::map<std::pair<std::string, std::string>, std::size_t> object_pair;     // (a, b), a < b

  static CooccurrenceCounts from(const std::vector<SceneAnnotation>& annotations) {
    CooccurrenceCounts c;
    for (const auto& a : annotations) {
      auto scene = normalize_label(a.scene_type);
      auto objs = normalize_object_list(a.objects);
      ++c.scene_annotations[scene];
      for (const auto& o : objs) {
        ++c.object_annotations[o];
        ++c.object_in_scene[{o, scene}];
      }
      for (std::size_t i = 0; i < objs.size(); ++i)
        for (std::size_t j = i + 1; j < objs.size(); ++j)
          ++c.object_pair[std::minmax(objs[i], objs[j])];
    }
    return c;
  }

  template <typename Map, typename Key>
  static std::size_t get(const Map& m, const Key& k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }

  // count(o in scenes of type s) / count(annotations of type s); 0 when unseen.
  double scene_ratio(const std::string& object, const std::string& scene) const {
    std::size_t den = get(scene_annotations, scene);
    return den ? static_cast<double>(get(object_in_scene, std::pair{object, scene})) / den : 0.0;
  }

  // count(a with b) / min(count(a), count(b)); 0 when unseen.
  double object_ratio(const std::string& a, const std::string& b) const {
    std::size_t den = std::min(get(object_annotations, a), get(object_annotations, b));
    return den ? static_cast<double>(get(object_pair, std::minmax(a, b))) / den : 0.0;
  }
};

// "Filtered" variant. Links with no annotation support (e.g. merged external
// triples) have ratio 0 and survive only a zero threshold.
inline KnowledgeGraph apply_frequency_filter(const KnowledgeGraph& g,
                                             const std::vector<SceneAnnotation>& annotations,
                                             double scene_co_threshold, double object_co_threshold) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(scene_co_threshold) || !in_unit(object_co_threshold))
    throw ConfigError("frequency thresholds must lie in [0, 1]");
  const auto counts = CooccurrenceCounts::from(annotations);
  const RelationId at = g.relation_id(schema::kAtLocation);
  const RelationId near = g.relation_id(schema::kLocatedNear);
  auto keep = [&](const Triple& t) {
    const auto& h = g.entity(t.head).label;
    const auto& tl = g.entity(t.tail).label;
    if (t.relation == at) return counts.scene_ratio(h, tl) >= scene_co_threshold;
    if (t.relation == near) return counts.object_ratio(h, tl) >= object_co_threshold;
    return true;
  };
  return g.filtered(keep, [](const Entity&) { return true; }, /*drop_isolated=*/true);
}

// "Detector" variant: objects outside `classes` go away with all their links.
// Scenes stay even when they lose every link.
inline KnowledgeGraph apply_class_whitelist(const KnowledgeGraph& g, const LabelSet& classes) {
  if (classes.empty()) throw ConfigError("class whitelist is empty");
  LabelSet norm;
  for (const auto& c : classes) norm.insert(normalize_label(c));
  auto keep_entity = [&](const Entity& e) { return e.etype != EntityType::Object || norm.count(e.label) != 0; };
  return g.filtered([](const Triple&) { return true; }, keep_entity, /*drop_isolated=*/false);
}

}  // namespace kgad
