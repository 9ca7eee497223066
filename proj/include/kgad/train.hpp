#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgad/graph.hpp"
#include "kgad/io.hpp"
#include "kgad/model.hpp"

namespace kgad {

enum class LrSchedule : std::uint8_t { None, Linear, OneCycle };

inline std::string_view to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::None: return "none";
    case LrSchedule::Linear: return "linear";
    case LrSchedule::OneCycle: return "onecycle";
  }
  return "unknown";
}

inline LrSchedule lr_schedule_from_string(std::string_view s) {
  std::string k;
  for (unsigned char c : s)
    if (std::isalnum(c)) k.push_back(static_cast<char>(std::tolower(c)));
  if (k == "none" || k == "constant") return LrSchedule::None;
  if (k == "linear") return LrSchedule::Linear;
  if (k == "onecycle" || k == "1cycle") return LrSchedule::OneCycle;
  throw ConfigError("unknown learning-rate schedule '" + std::string(s) + "'");
}

struct TrainConfig {
  ModelKind kind = ModelKind::TransE;
  std::size_t dim_entity = 32;
  std::size_t dim_relation = 32;
  double learning_rate = 0.01;
  LrSchedule lr_schedule = LrSchedule::None;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  double margin = 1.0;
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim_entity == 0 || dim_relation == 0) throw ConfigError("embedding dimensions must be positive");
    if (kind == ModelKind::TransE && dim_entity != dim_relation)
      throw ConfigError("TransE requires dim_entity == dim_relation");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(margin > 0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
    if (negatives_per_positive == 0) throw ConfigError("negatives_per_positive must be positive");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline io::json to_json(const TrainConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"dim_entity", c.dim_entity},
          {"dim_relation", c.dim_relation},
          {"learning_rate", c.learning_rate},
          {"lr_schedule", to_string(c.lr_schedule)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"margin", c.margin},
          {"negatives_per_positive", c.negatives_per_positive},
          {"seed", c.seed}};
}

// Missing keys keep their defaults, so partial grid files are accepted.
inline TrainConfig train_config_from_json(const io::json& j, TrainConfig c = {}) {
  if (j.contains("kind")) c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("dim_entity")) c.dim_entity = j.at("dim_entity").get<std::size_t>();
  if (j.contains("dim_relation")) c.dim_relation = j.at("dim_relation").get<std::size_t>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("lr_schedule")) c.lr_schedule = lr_schedule_from_string(j.at("lr_schedule").get<std::string>());
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("margin")) c.margin = j.at("margin").get<double>();
  if (j.contains("negatives_per_positive")) c.negatives_per_positive = j.at("negatives_per_positive").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace presets {

// Tuned configurations, one per household graph variant.
inline TrainConfig full() {
  TrainConfig c;
  c.kind = ModelKind::TransD;
  c.learning_rate = 5e-3;
  c.lr_schedule = LrSchedule::Linear;
  c.dim_entity = 75;
  c.dim_relation = 75;
  c.epochs = 500;
  return c;
}

inline TrainConfig filtered() {
  TrainConfig c;
  c.kind = ModelKind::TransR;
  c.learning_rate = 1e-3;
  c.lr_schedule = LrSchedule::None;
  c.dim_entity = 300;
  c.dim_relation = 150;
  c.epochs = 1000;
  return c;
}

inline TrainConfig detector() {
  TrainConfig c;
  c.kind = ModelKind::TransD;
  c.learning_rate = 1e-4;
  c.lr_schedule = LrSchedule::None;
  c.dim_entity = 400;
  c.dim_relation = 100;
  c.epochs = 1000;
  return c;
}

inline TrainConfig by_name(std::string_view name) {
  if (name == "full") return full();
  if (name == "filtered") return filtered();
  if (name == "detector") return detector();
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace presets

// Learning rate for a 0-based epoch. Linear decays toward 0 at `epochs`;
// OneCycle warms up linearly from lr/25 to lr over the first 30% of epochs,
// then decays linearly toward 0.
inline double lr_at(const TrainConfig& c, std::size_t epoch) {
  if (c.epochs == 0) return c.learning_rate;
  const double x = static_cast<double>(epoch) / static_cast<double>(c.epochs);
  switch (c.lr_schedule) {
    case LrSchedule::None: return c.learning_rate;
    case LrSchedule::Linear: return c.learning_rate * (1.0 - x);
    case LrSchedule::OneCycle: {
      constexpr double peak = 0.3, start = 1.0 / 25.0;
      if (x < peak) return c.learning_rate * (start + (1.0 - start) * x / peak);
      return c.learning_rate * (1.0 - (x - peak) / (1.0 - peak));
    }
  }
  return c.learning_rate;
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

// Replaces head or tail (fair coin) with a uniformly drawn entity of the same
// type, redrawing both the side and the entity until the result is a
// schema-valid triple absent from the graph. Returns nullopt when no such
// corruption exists.
inline std::optional<Triple> corrupt_triple(const KnowledgeGraph& g, const Triple& t, Rng& rng) {
  const auto& rel = g.relation(t.relation);
  const auto& heads = g.entities_of_type(rel.head_type);
  const auto& tails = g.entities_of_type(rel.tail_type);
  auto legal = [&](const Triple& c) { return g.is_schema_valid(c) && !g.contains(c); };

  constexpr int kAttempts = 64;
  for (int i = 0; i < kAttempts; ++i) {
    Triple c = t;
    if (rng.coin())
      c.head = heads[rng.index(heads.size())];
    else
      c.tail = tails[rng.index(tails.size())];
    if (legal(c)) return c;
  }
  // Dense neighbourhood: enumerate. Same outcome distribution when both
  // slots share a type.
  std::vector<Triple> pool;
  for (EntityId h : heads)
    if (Triple c{h, t.relation, t.tail}; legal(c)) pool.push_back(c);
  for (EntityId tl : tails)
    if (Triple c{t.head, t.relation, tl}; legal(c)) pool.push_back(c);
  if (pool.empty()) return std::nullopt;
  return pool[rng.index(pool.size())];
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean hinge over (positive, negative) pairs
  double lr = 0;
};

struct TrainResult {
  TrainConfig config;
  EmbeddingModel model;
  std::vector<EpochLog> log;
  std::size_t skipped_positives = 0;  // positives with no legal corruption
};

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,loss,lr\n";
  for (const auto& e : log) {
    io::json row = io::json::array({e.loss, e.lr});  // shortest round-trip formatting
    out += std::to_string(e.epoch) + ',' + row[0].dump() + ',' + row[1].dump() + '\n';
  }
  return out;
}

// Margin loss for one (positive, negative) pair.
inline double margin_loss(const EmbeddingModel& m, const Triple& pos, const Triple& neg, double margin) {
  const double v = margin - score_triple(m, pos) + score_triple(m, neg);
  return std::isnan(v) || v > 0 ? v : 0.0;  // NaN must reach the divergence check
}

// grad += d margin_loss / d theta.
inline void add_margin_loss_gradient(const EmbeddingModel& m, const Triple& pos, const Triple& neg,
                                     double margin, EmbeddingModel& grad) {
  if (margin - score_triple(m, pos) + score_triple(m, neg) <= 0) return;
  add_score_gradient(m, pos, -1.0, grad);
  add_score_gradient(m, neg, +1.0, grad);
}

using EpochCallback = std::function<void(const EpochLog&, const EmbeddingModel&)>;

namespace detail {

// Tracks which rows of a gradient buffer are dirty so a batch update only
// touches the parameters it used.
class SparseStep {
 public:
  explicit SparseStep(const EmbeddingModel& m)
      : grad_(m.zeros_like()), ent_dirty_(m.num_entities, false), rel_dirty_(m.num_relations, false) {}

  EmbeddingModel& grad() { return grad_; }

  void touch(const Triple& t) {
    mark(ent_dirty_, ents_, t.head);
    mark(ent_dirty_, ents_, t.tail);
    mark(rel_dirty_, rels_, t.relation);
  }

  void apply(EmbeddingModel& m, double lr) {
    auto gb = grad_.blocks();
    auto mb = m.blocks();
    for (std::size_t b = 0; b < mb.size(); ++b) {
      const auto& rows = mb[b].per_entity ? ents_ : rels_;
      const std::size_t w = mb[b].row;
      for (std::uint32_t r : rows) {
        double* p = mb[b].data->data() + r * w;
        double* g = gb[b].data->data() + r * w;
        for (std::size_t i = 0; i < w; ++i) {
          p[i] -= lr * g[i];
          g[i] = 0.0;
        }
      }
    }
    for (auto e : ents_) ent_dirty_[e] = false;
    for (auto r : rels_) rel_dirty_[r] = false;
    ents_.clear();
    rels_.clear();
  }

 private:
  static void mark(std::vector<bool>& dirty, std::vector<std::uint32_t>& list, std::uint32_t id) {
    if (!dirty[id]) {
      dirty[id] = true;
      list.push_back(id);
    }
  }

  EmbeddingModel grad_;
  std::vector<bool> ent_dirty_, rel_dirty_;
  std::vector<std::uint32_t> ents_, rels_;
};

inline void renormalize_entities(EmbeddingModel& m) {
  for (std::size_t e = 0; e < m.num_entities; ++e) {
    std::span<double> v{m.entity.data() + e * m.dim_entity, m.dim_entity};
    double s = 0;
    for (double x : v) s += x * x;
    if (s > 1.0) {
      s = std::sqrt(s);
      for (double& x : v) x /= s;
    }
  }
}

}  // namespace detail

// Mini-batch SGD on sum of margin losses with filtered negative sampling and
// per-epoch projection of entity vectors onto the unit ball. Deterministic
// given config.seed.
inline TrainResult train(const KnowledgeGraph& g, const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (g.num_triples() == 0) throw DataError("cannot train on an empty graph");
  Rng root(config.seed);
  Rng init_rng = root.fork(1);
  Rng rng = root.fork(2);

  TrainResult res;
  res.config = config;
  res.model = init_model(config.kind, g.num_entities(), g.num_relations(), config.dim_entity,
                         config.dim_relation, init_rng);
  auto& m = res.model;

  std::vector<Triple> positives(g.triples().begin(), g.triples().end());
  detail::SparseStep step(m);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    rng.shuffle(positives);
    double loss_sum = 0;
    std::size_t pairs = 0;
    for (std::size_t start = 0, batch = 0; start < positives.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(positives.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const Triple& pos = positives[i];
        for (std::size_t k = 0; k < config.negatives_per_positive; ++k) {
          auto neg = corrupt_triple(g, pos, rng);
          if (!neg) {
            ++res.skipped_positives;
            break;
          }
          const double l = margin_loss(m, pos, *neg, config.margin);
          if (!std::isfinite(l))
            throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                        std::to_string(batch + 1));
          loss_sum += l;
          ++pairs;
          if (l > 0) {
            step.touch(pos);
            step.touch(*neg);
            add_score_gradient(m, pos, -1.0, step.grad());
            add_score_gradient(m, *neg, +1.0, step.grad());
          }
        }
      }
      step.apply(m, lr);
    }
    detail::renormalize_entities(m);
    if (!m.finite()) throw Error("non-finite parameters after epoch " + std::to_string(epoch + 1));
    EpochLog e{epoch + 1, pairs ? loss_sum / static_cast<double>(pairs) : 0.0, lr};
    res.log.push_back(e);
    if (on_epoch) on_epoch(e, m);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct LeaderboardEntry {
  TrainConfig config;
  std::optional<double> score;
  std::string error;
};

struct GridResult {
  std::size_t best_index = 0;
  TrainConfig best_config;
  TrainResult best;
  std::vector<LeaderboardEntry> leaderboard;  // grid order
};

inline io::json to_json(const std::vector<LeaderboardEntry>& board) {
  io::json out = io::json::array();
  for (const auto& e : board) {
    io::json row{{"config", to_json(e.config)}};
    if (e.score)
      row["score"] = *e.score;
    else
      row["error"] = e.error;
    out.push_back(row);
  }
  return out;
}

using ValidationFn = std::function<double(const EmbeddingModel&)>;

// Trains every config and keeps the argmax of `validate` (higher is better);
// ties go to the earliest config. Failing configs are recorded and skipped.
inline GridResult grid_search(const KnowledgeGraph& g, const ValidationFn& validate,
                              const std::vector<TrainConfig>& grid) {
  if (grid.empty()) throw ConfigError("grid is empty");
  GridResult out;
  std::optional<double> best_score;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    LeaderboardEntry entry{grid[i], std::nullopt, {}};
    try {
      auto trained = train(g, grid[i]);
      double s = validate(trained.model);
      if (!std::isfinite(s)) throw Error("validation score is not finite");
      entry.score = s;
      if (!best_score || s > *best_score) {
        best_score = s;
        out.best_index = i;
        out.best_config = grid[i];
        out.best = std::move(trained);
      }
    } catch (const std::exception& e) {
      entry.error = e.what();
      log::warn("grid config " + std::to_string(i) + " failed: " + e.what());
    }
    out.leaderboard.push_back(std::move(entry));
  }
  if (!best_score) throw Error("every grid configuration failed");
  return out;
}

}  // namespace kgad
