#pragma once

#include <filesystem>
#include <string>

#include "kgad/io.hpp"
#include "kgad/model.hpp"
#include "kgad/train.hpp"

namespace kgad {

// Checkpoint layout:
//   bytes 0..7    magic "KGADCKP1"
//   bytes 8..15   header length N, u64 little-endian
//   next N bytes  JSON header: format, kind, dim_entity, dim_relation,
//                 num_entities, num_relations, config, seed, arrays
//   remainder     little-endian f64 arrays in header order:
//                 entity, relation, then rel_matrix (TransR) or
//                 entity_proj, relation_proj (TransD)
inline constexpr std::string_view kCheckpointMagic = "KGADCKP1";

struct Checkpoint {
  EmbeddingModel model;
  TrainConfig config;
};

inline std::string encode_checkpoint(const EmbeddingModel& m, const TrainConfig& config) {
  io::json header{{"format", "kgad-checkpoint/1"},
                  {"kind", to_string(m.kind)},
                  {"dim_entity", m.dim_entity},
                  {"dim_relation", m.dim_relation},
                  {"num_entities", m.num_entities},
                  {"num_relations", m.num_relations},
                  {"config", to_json(config)},
                  {"seed", config.seed}};
  std::vector<std::pair<std::string, const std::vector<double>*>> arrays;
  for (const auto& b : m.blocks()) arrays.emplace_back(std::string(b.name), b.data);
  return io::encode_blob(kCheckpointMagic, std::move(header), arrays);
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  auto blob = io::decode_blob(kCheckpointMagic, bytes);
  const auto& h = blob.header;
  Checkpoint ck;
  auto& m = ck.model;
  m.kind = model_kind_from_string(h.at("kind").get<std::string>());
  m.dim_entity = h.at("dim_entity").get<std::size_t>();
  m.dim_relation = h.at("dim_relation").get<std::size_t>();
  m.num_entities = h.at("num_entities").get<std::size_t>();
  m.num_relations = h.at("num_relations").get<std::size_t>();
  ck.config = train_config_from_json(h.at("config"));

  auto blocks = m.blocks();
  const auto& listed = h.at("arrays");
  if (listed.size() != blocks.size() || blob.arrays.size() != blocks.size())
    throw DataError("checkpoint array list does not match model kind");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::size_t rows = blocks[i].per_entity ? m.num_entities : m.num_relations;
    if (listed[i].at("name").get<std::string>() != blocks[i].name)
      throw DataError("checkpoint array " + std::to_string(i) + " is not '" + std::string(blocks[i].name) + "'");
    if (blob.arrays[i].size() != rows * blocks[i].row)
      throw DataError("checkpoint array '" + std::string(blocks[i].name) + "' has the wrong length");
    *blocks[i].data = std::move(blob.arrays[i]);
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& p, const EmbeddingModel& m, const TrainConfig& c) {
  io::write_file_atomic(p, encode_checkpoint(m, c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) { return decode_checkpoint(io::read_file(p)); }

// Content hash of the serialized parameters, used as score-table provenance.
inline std::uint64_t model_hash(const EmbeddingModel& m) {
  return fnv1a64(encode_checkpoint(m, TrainConfig{}));
}

}  // namespace kgad
