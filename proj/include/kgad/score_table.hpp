#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgad/checkpoint.hpp"
#include "kgad/graph.hpp"
#include "kgad/io.hpp"
#include "kgad/model.hpp"

namespace kgad {

inline constexpr std::string_view kScoreTableMagic = "KGADTBL1";
inline constexpr std::size_t kDefaultTableBudgetBytes = std::size_t{2} << 30;

// Precomputed f_r(head, tail) for every schema-valid (head type, tail type)
// pair of every relation. Above the memory budget the table keeps the model
// instead and scores on demand; lookups behave identically in both modes.
class ScoreTable {
 public:
  enum class Mode { Dense, OnDemand };

  static ScoreTable build(const EmbeddingModel& model, const KnowledgeGraph& g,
                          std::size_t memory_budget_bytes = kDefaultTableBudgetBytes) {
    if (model.num_entities != g.num_entities() || model.num_relations != g.num_relations())
      throw ContractViolation("model vocabulary does not match graph");
    ScoreTable t;
    t.relations_ = g.relations();
    t.entities_ = g.entities();
    t.provenance_ = model_hash(model);
    t.index_entities();

    std::size_t cells = 0;
    for (const auto& r : t.relations_) cells += t.rows(r) * t.cols(r);
    if (cells * sizeof(double) > memory_budget_bytes) {
      log::warn("score table needs " + std::to_string(cells * sizeof(double)) +
                " bytes, over budget; scoring on demand");
      t.mode_ = Mode::OnDemand;
      t.model_ = std::make_shared<const EmbeddingModel>(model);
      return t;
    }
    t.mode_ = Mode::Dense;
    t.dense_.resize(t.relations_.size());
    for (const auto& r : t.relations_) {
      const auto& heads = t.by_type_[idx(r.head_type)];
      const auto& tails = t.by_type_[idx(r.tail_type)];
      auto& mat = t.dense_[r.id];
      mat.resize(heads.size() * tails.size());
      for (std::size_t i = 0; i < heads.size(); ++i)
        for (std::size_t j = 0; j < tails.size(); ++j)
          mat[i * tails.size() + j] = score_triple(model, heads[i], r.id, tails[j]);
    }
    return t;
  }

  Mode mode() const { return mode_; }
  std::uint64_t provenance() const { return provenance_; }
  const std::vector<RelationType>& relations() const { return relations_; }
  const std::vector<Entity>& entities() const { return entities_; }

  std::optional<EntityId> find(std::string_view label, EntityType t) const {
    auto& m = by_label_[idx(t)];
    auto it = m.find(std::string(label));
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<EntityId>& entities_of_type(EntityType t) const { return by_type_[idx(t)]; }
  const std::string& label(EntityId e) const { return entities_.at(e).label; }

  RelationId relation_id(std::string_view name) const {
    auto canon = schema::canonical_relation_name(name);
    for (const auto& r : relations_)
      if (r.name == canon) return r.id;
    throw ContractViolation("relation '" + std::string(name) + "' not in score table");
  }

  // f_r(head, tail) exactly as score_triple computes it.
  double raw(RelationId r, EntityId head, EntityId tail) const {
    const auto& rel = relations_.at(r);
    if (entities_.at(head).etype != rel.head_type || entities_.at(tail).etype != rel.tail_type)
      throw ContractViolation("score table lookup with wrong entity types");
    if (mode_ == Mode::OnDemand) return score_triple(*model_, head, r, tail);
    return dense_[r][local_[head] * cols(rel) + local_[tail]];
  }

  // Symmetric relations average both orientations.
  double lookup(RelationId r, EntityId head, EntityId tail) const {
    if (relations_.at(r).symmetric) return 0.5 * (raw(r, head, tail) + raw(r, tail, head));
    return raw(r, head, tail);
  }

  // Dense copy with every entry x replaced by fn(x).
  template <typename Fn>
  ScoreTable transformed(Fn fn) const {
    if (mode_ != Mode::Dense) throw ContractViolation("transform requires a dense table");
    ScoreTable t = *this;
    for (auto& mat : t.dense_)
      for (double& x : mat) x = fn(x);
    return t;
  }

  std::string encode() const {
    if (mode_ != Mode::Dense) throw ContractViolation("only dense score tables can be persisted");
    io::json rels = io::json::array(), ents = io::json::array();
    for (const auto& r : relations_)
      rels.push_back({{"id", r.id}, {"name", r.name}, {"head_type", to_string(r.head_type)},
                      {"tail_type", to_string(r.tail_type)}, {"symmetric", r.symmetric}});
    for (const auto& e : entities_) ents.push_back({{"label", e.label}, {"type", to_string(e.etype)}});
    io::json header{{"format", "kgad-score-table/1"}, {"provenance", provenance_}, {"relations", rels}, {"entities", ents}};
    std::vector<std::pair<std::string, const std::vector<double>*>> arrays;
    for (const auto& r : relations_) arrays.emplace_back(r.name, &dense_[r.id]);
    return io::encode_blob(kScoreTableMagic, std::move(header), arrays);
  }

  static ScoreTable decode(std::string_view bytes) {
    auto blob = io::decode_blob(kScoreTableMagic, bytes);
    ScoreTable t;
    t.mode_ = Mode::Dense;
    t.provenance_ = blob.header.at("provenance").get<std::uint64_t>();
    for (const auto& r : blob.header.at("relations"))
      t.relations_.push_back({r.at("id").get<RelationId>(), r.at("name").get<std::string>(),
                              entity_type_from_string(r.at("head_type").get<std::string>()),
                              entity_type_from_string(r.at("tail_type").get<std::string>()),
                              r.at("symmetric").get<bool>()});
    EntityId next = 0;
    for (const auto& e : blob.header.at("entities"))
      t.entities_.push_back({next++, e.at("label").get<std::string>(), entity_type_from_string(e.at("type").get<std::string>())});
    t.index_entities();
    if (blob.arrays.size() != t.relations_.size()) throw DataError("score table relation count mismatch");
    for (const auto& r : t.relations_)
      if (blob.arrays[r.id].size() != t.rows(r) * t.cols(r)) throw DataError("score table matrix size mismatch");
    t.dense_ = std::move(blob.arrays);
    return t;
  }

  void save(const std::filesystem::path& p) const { io::write_file_atomic(p, encode()); }
  static ScoreTable load(const std::filesystem::path& p) { return decode(io::read_file(p)); }

 private:
  static constexpr std::size_t kTypes = std::size(kAllEntityTypes);
  static std::size_t idx(EntityType t) { return static_cast<std::size_t>(t); }

  std::size_t rows(const RelationType& r) const { return by_type_[idx(r.head_type)].size(); }
  std::size_t cols(const RelationType& r) const { return by_type_[idx(r.tail_type)].size(); }

  void index_entities() {
    local_.assign(entities_.size(), 0);
    for (auto& v : by_type_) v.clear();
    for (auto& m : by_label_) m.clear();
    for (const auto& e : entities_) {
      auto& v = by_type_[idx(e.etype)];
      local_[e.id] = v.size();
      v.push_back(e.id);
      by_label_[idx(e.etype)].emplace(e.label, e.id);
    }
  }

  Mode mode_ = Mode::Dense;
  std::uint64_t provenance_ = 0;
  std::vector<RelationType> relations_;
  std::vector<Entity> entities_;
  std::vector<std::size_t> local_;
  std::vector<EntityId> by_type_[kTypes];
  std::unordered_map<std::string, EntityId> by_label_[kTypes];
  std::vector<std::vector<double>> dense_;
  std::shared_ptr<const EmbeddingModel> model_;
};

}  // namespace kgad
