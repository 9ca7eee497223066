#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgad/common.hpp"

namespace kgad {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Kinds are plain enumerators; graph code never switches on them, so adding a
// kind only touches the name table below.
enum class EntityType : std::uint8_t { Object, Scene };

inline constexpr EntityType kAllEntityTypes[] = {EntityType::Object, EntityType::Scene};

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Object: return "object";
    case EntityType::Scene: return "scene";
  }
  return "unknown";
}

inline EntityType entity_type_from_string(std::string_view s) {
  for (EntityType t : kAllEntityTypes)
    if (to_string(t) == s) return t;
  throw DataError("unknown entity type '" + std::string(s) + "'");
}

struct Entity {
  EntityId id = 0;
  std::string label;
  EntityType etype = EntityType::Object;

  bool operator==(const Entity&) const = default;
};

struct RelationType {
  RelationId id = 0;
  std::string name;
  EntityType head_type = EntityType::Object;
  EntityType tail_type = EntityType::Object;
  bool symmetric = false;

  bool operator==(const RelationType&) const = default;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t k = (std::uint64_t{t.head} << 32) ^ (std::uint64_t{t.relation} << 24) ^ t.tail;
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    return static_cast<std::size_t>(k);
  }
};

// Label-level view of a triple, stable across id recompaction.
struct LabelTriple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const LabelTriple&) const = default;
};

namespace schema {

inline constexpr std::string_view kAtLocation = "AtLocation";
inline constexpr std::string_view kLocatedNear = "LocatedNear";

// The household schema: AtLocation (object -> scene) and the symmetric
// LocatedNear (object <-> object).
inline std::vector<RelationType> household() {
  return {
      {0, std::string(kAtLocation), EntityType::Object, EntityType::Scene, false},
      {1, std::string(kLocatedNear), EntityType::Object, EntityType::Object, true},
  };
}

// Accepts the canonical names plus the spaced/underscored spellings found in
// external dumps ("At Location", "located_near", "/r/AtLocation").
inline std::string canonical_relation_name(std::string_view raw) {
  std::string key;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key.rfind("r", 0) == 0 && raw.find('/') != std::string_view::npos) key.erase(0, 1);
  if (key == "atlocation") return std::string(kAtLocation);
  if (key == "locatednear") return std::string(kLocatedNear);
  return std::string(raw);
}

}  // namespace schema

// Entity registry plus a deduplicated triple set with (head, relation) and
// (tail, relation) indices. Mutation is for construction only; once built a
// graph is treated as immutable and can be read concurrently.
class KnowledgeGraph {
 public:
  KnowledgeGraph() : KnowledgeGraph(schema::household()) {}

  explicit KnowledgeGraph(std::vector<RelationType> relations) : relations_(std::move(relations)) {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      if (relations_[i].id != i) throw ContractViolation("relation ids must be contiguous from 0");
      relation_by_name_.emplace(relations_[i].name, static_cast<RelationId>(i));
    }
  }

  // --- entities ------------------------------------------------------------

  const std::vector<Entity>& entities() const { return entities_; }
  std::size_t num_entities() const { return entities_.size(); }

  const Entity& entity(EntityId id) const {
    if (id >= entities_.size()) throw ContractViolation("entity id out of range");
    return entities_[id];
  }

  std::optional<EntityId> find_entity(std::string_view label, EntityType t) const {
    auto it = entity_by_key_.find(key(label, t));
    if (it == entity_by_key_.end()) return std::nullopt;
    return it->second;
  }

  bool has_label(std::string_view label) const {
    for (EntityType t : kAllEntityTypes)
      if (find_entity(label, t)) return true;
    return false;
  }

  // Returns the existing id when (label, type) is already registered.
  EntityId add_entity(std::string label, EntityType t) {
    if (auto id = find_entity(label, t)) return *id;
    auto id = static_cast<EntityId>(entities_.size());
    entity_by_key_.emplace(key(label, t), id);
    entities_.push_back({id, std::move(label), t});
    by_type_[static_cast<std::size_t>(t)].push_back(id);
    return id;
  }

  // Ids of every entity of a type, ascending.
  const std::vector<EntityId>& entities_of_type(EntityType t) const {
    return by_type_[static_cast<std::size_t>(t)];
  }

  // --- relations -----------------------------------------------------------

  const std::vector<RelationType>& relations() const { return relations_; }
  std::size_t num_relations() const { return relations_.size(); }

  const RelationType& relation(RelationId id) const {
    if (id >= relations_.size()) throw ContractViolation("relation id out of range");
    return relations_[id];
  }

  std::optional<RelationId> find_relation(std::string_view name) const {
    auto it = relation_by_name_.find(schema::canonical_relation_name(name));
    if (it == relation_by_name_.end()) return std::nullopt;
    return it->second;
  }

  RelationId relation_id(std::string_view name) const {
    if (auto r = find_relation(name)) return *r;
    throw ContractViolation("relation '" + std::string(name) + "' not in schema");
  }

  // --- triples -------------------------------------------------------------

  bool is_schema_valid(const Triple& t) const {
    if (t.head >= entities_.size() || t.tail >= entities_.size() || t.relation >= relations_.size())
      return false;
    const auto& r = relations_[t.relation];
    if (entities_[t.head].etype != r.head_type || entities_[t.tail].etype != r.tail_type)
      return false;
    return !(r.head_type == r.tail_type && t.head == t.tail);
  }

  // Returns false for duplicates. Throws on schema violations.
  bool add_triple(const Triple& t) {
    if (!is_schema_valid(t)) throw DataError("schema-invalid triple");
    if (!triples_.insert(t).second) return false;
    insert_sorted(by_head_relation_[pack(t.head, t.relation)], t.tail);
    insert_sorted(by_tail_relation_[pack(t.tail, t.relation)], t.head);
    if (count_by_relation_.size() < relations_.size()) count_by_relation_.resize(relations_.size());
    ++count_by_relation_[t.relation];
    return true;
  }

  bool contains(const Triple& t) const { return triples_.count(t) != 0; }

  // Sorted by (head, relation, tail).
  const std::set<Triple>& triples() const { return triples_; }
  std::size_t num_triples() const { return triples_.size(); }

  std::size_t count_relation(RelationId r) const {
    return r < count_by_relation_.size() ? count_by_relation_[r] : 0;
  }

  // Tails t with (head, r, t) in the graph, ascending.
  const std::vector<EntityId>& tails(EntityId head, RelationId r) const {
    auto it = by_head_relation_.find(pack(head, r));
    return it == by_head_relation_.end() ? empty_ : it->second;
  }

  // Heads h with (h, r, tail) in the graph, ascending.
  const std::vector<EntityId>& heads(EntityId tail, RelationId r) const {
    auto it = by_tail_relation_.find(pack(tail, r));
    return it == by_tail_relation_.end() ? empty_ : it->second;
  }

  LabelTriple labels(const Triple& t) const {
    return {entity(t.head).label, relation(t.relation).name, entity(t.tail).label};
  }

  std::set<LabelTriple> label_triples() const {
    std::set<LabelTriple> out;
    for (const auto& t : triples_) out.insert(labels(t));
    return out;
  }

  // Rebuilds both indices from the triple set and compares with the stored ones.
  bool indices_consistent() const {
    std::unordered_map<std::uint64_t, std::vector<EntityId>> bh, bt;
    for (const auto& t : triples_) {
      insert_sorted(bh[pack(t.head, t.relation)], t.tail);
      insert_sorted(bt[pack(t.tail, t.relation)], t.head);
    }
    return bh == by_head_relation_ && bt == by_tail_relation_;
  }

  // Copy keeping only triples accepted by `keep_triple` and entities accepted
  // by `keep_entity`; ids are recompacted in ascending old-id order. When
  // `drop_isolated` is set, entities left without links are removed as well.
  template <typename KeepTriple, typename KeepEntity>
  KnowledgeGraph filtered(KeepTriple keep_triple, KeepEntity keep_entity, bool drop_isolated) const {
    std::vector<bool> live(entities_.size(), false);
    std::vector<Triple> kept;
    for (const auto& t : triples_) {
      if (!keep_entity(entities_[t.head]) || !keep_entity(entities_[t.tail])) continue;
      if (!keep_triple(t)) continue;
      kept.push_back(t);
      live[t.head] = live[t.tail] = true;
    }
    if (!drop_isolated)
      for (const auto& e : entities_) live[e.id] = keep_entity(e);

    KnowledgeGraph out(relations_);
    std::vector<EntityId> remap(entities_.size(), 0);
    for (const auto& e : entities_)
      if (live[e.id]) remap[e.id] = out.add_entity(e.label, e.etype);
    for (const auto& t : kept) out.add_triple({remap[t.head], t.relation, remap[t.tail]});
    return out;
  }

 private:
  static std::uint64_t pack(EntityId e, RelationId r) { return (std::uint64_t{e} << 32) | r; }

  static std::string key(std::string_view label, EntityType t) {
    std::string k(1, static_cast<char>('0' + static_cast<int>(t)));
    k.append(label);
    return k;
  }

  static void insert_sorted(std::vector<EntityId>& v, EntityId x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  }

  std::vector<Entity> entities_;
  std::vector<RelationType> relations_;
  std::unordered_map<std::string, EntityId> entity_by_key_;
  std::unordered_map<std::string, RelationId> relation_by_name_;
  std::vector<EntityId> by_type_[std::size(kAllEntityTypes)];
  std::set<Triple> triples_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_head_relation_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_tail_relation_;
  std::vector<std::size_t> count_by_relation_;
  inline static const std::vector<EntityId> empty_{};
};

// Triple counts per relation in the same shape as the usual link-count table.
// Symmetric relations are stored in both orientations; `undirected` halves them.
struct GraphStats {
  std::size_t entities = 0;
  std::size_t objects = 0;
  std::size_t scenes = 0;
  struct RelationCount {
    std::string name;
    std::size_t stored = 0;
    std::size_t undirected = 0;
  };
  std::vector<RelationCount> relations;
  std::size_t total_stored = 0;
  std::size_t total_undirected = 0;
};

inline GraphStats compute_stats(const KnowledgeGraph& g) {
  GraphStats s;
  s.entities = g.num_entities();
  s.objects = g.entities_of_type(EntityType::Object).size();
  s.scenes = g.entities_of_type(EntityType::Scene).size();
  for (const auto& r : g.relations()) {
    std::size_t n = g.count_relation(r.id);
    std::size_t u = r.symmetric ? n / 2 : n;
    s.relations.push_back({r.name, n, u});
    s.total_stored += n;
    s.total_undirected += u;
  }
  return s;
}

}  // namespace kgad
