#pragma once

#include <filesystem>
#include <string>

#include "kgad/graph.hpp"
#include "kgad/io.hpp"

namespace kgad {

inline constexpr std::string_view kGraphFormat = "kgad-graph/1";

// Triples as head\trelation\ttail labels in (head, relation, tail) id order.
// Labels are unambiguous because each relation fixes its head and tail types.
inline std::string graph_to_tsv(const KnowledgeGraph& g) {
  std::string out;
  for (const auto& t : g.triples()) {
    out += g.entity(t.head).label;
    out += '\t';
    out += g.relation(t.relation).name;
    out += '\t';
    out += g.entity(t.tail).label;
    out += '\n';
  }
  return out;
}

inline io::json graph_sidecar(const KnowledgeGraph& g) {
  io::json rels = io::json::array(), ents = io::json::array();
  for (const auto& r : g.relations())
    rels.push_back({{"id", r.id},
                    {"name", r.name},
                    {"head_type", to_string(r.head_type)},
                    {"tail_type", to_string(r.tail_type)},
                    {"symmetric", r.symmetric}});
  for (const auto& e : g.entities())
    ents.push_back({{"id", e.id}, {"label", e.label}, {"type", to_string(e.etype)}});
  return {{"format", kGraphFormat}, {"relations", rels}, {"entities", ents}, {"triples", g.num_triples()}};
}

inline KnowledgeGraph graph_from_text(std::string_view tsv, std::string_view sidecar_text) {
  auto side = io::json::parse(sidecar_text);
  if (side.at("format").get<std::string>() != kGraphFormat) throw DataError("unsupported graph format");
  std::vector<RelationType> rels;
  for (const auto& r : side.at("relations"))
    rels.push_back({r.at("id").get<RelationId>(), r.at("name").get<std::string>(),
                    entity_type_from_string(r.at("head_type").get<std::string>()),
                    entity_type_from_string(r.at("tail_type").get<std::string>()), r.at("symmetric").get<bool>()});
  KnowledgeGraph g(std::move(rels));
  for (const auto& e : side.at("entities")) {
    auto id = g.add_entity(e.at("label").get<std::string>(), entity_type_from_string(e.at("type").get<std::string>()));
    if (id != e.at("id").get<EntityId>()) throw DataError("graph sidecar entity ids are not dense and ordered");
  }
  auto lines = io::split_lines(tsv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = io::split_tabs(lines[i]);
    auto fail = [&](const std::string& m) { return DataError("triples line " + std::to_string(i + 1) + ": " + m); };
    if (cols.size() != 3) throw fail("expected 3 columns");
    auto r = g.find_relation(cols[1]);
    if (!r) throw fail("unknown relation " + cols[1]);
    const auto& rt = g.relation(*r);
    auto h = g.find_entity(cols[0], rt.head_type), t = g.find_entity(cols[2], rt.tail_type);
    if (!h || !t) throw fail("unknown entity");
    g.add_triple({*h, *r, *t});
  }
  if (g.num_triples() != side.at("triples").get<std::size_t>()) throw DataError("triple count mismatch with sidecar");
  return g;
}

struct GraphPaths {
  std::filesystem::path triples;
  std::filesystem::path sidecar;

  static GraphPaths in(const std::filesystem::path& dir) { return {dir / "triples.tsv", dir / "graph.json"}; }
};

inline void save_graph(const KnowledgeGraph& g, const GraphPaths& p) {
  io::write_file_atomic(p.triples, graph_to_tsv(g));
  io::write_file_atomic(p.sidecar, graph_sidecar(g).dump(2) + "\n");
}

inline KnowledgeGraph load_graph(const GraphPaths& p) {
  return graph_from_text(io::read_file(p.triples), io::read_file(p.sidecar));
}

}  // namespace kgad
