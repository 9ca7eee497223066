#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgad/common.hpp"
#include "kgad/graph.hpp"

namespace kgad {

enum class ModelKind : std::uint8_t { TransE, TransR, TransD };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::TransE: return "TransE";
    case ModelKind::TransR: return "TransR";
    case ModelKind::TransD: return "TransD";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(std::string_view s) {
  std::string k;
  for (unsigned char c : s) k.push_back(static_cast<char>(std::tolower(c)));
  if (k == "transe") return ModelKind::TransE;
  if (k == "transr") return ModelKind::TransR;
  if (k == "transd") return ModelKind::TransD;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

// Translation-family link predictor. Every score is a negated L2 distance, so
// higher means more plausible and 0 is the maximum.
//
// Parameter layout (all row-major):
//   entity         num_entities  x dim_entity
//   relation       num_relations x dim_relation
//   rel_matrix     num_relations x dim_relation x dim_entity     (TransR)
//   entity_proj    num_entities  x dim_entity                    (TransD)
//   relation_proj  num_relations x dim_relation                  (TransD)
struct EmbeddingModel {
  ModelKind kind = ModelKind::TransE;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t dim_entity = 0;
  std::size_t dim_relation = 0;

  std::vector<double> entity;
  std::vector<double> relation;
  std::vector<double> rel_matrix;
  std::vector<double> entity_proj;
  std::vector<double> relation_proj;

  struct Block {
    std::string_view name;
    std::vector<double>* data;
    std::size_t row;  // row width; rows are indexed by entity or relation id
    bool per_entity;
  };

  struct ConstBlock {
    std::string_view name;
    const std::vector<double>* data;
    std::size_t row;
    bool per_entity;
  };

  // Active parameter blocks for this kind, in serialization order.
  std::vector<Block> blocks() {
    std::vector<Block> b{{"entity", &entity, dim_entity, true}, {"relation", &relation, dim_relation, false}};
    if (kind == ModelKind::TransR) b.push_back({"rel_matrix", &rel_matrix, dim_relation * dim_entity, false});
    if (kind == ModelKind::TransD) {
      b.push_back({"entity_proj", &entity_proj, dim_entity, true});
      b.push_back({"relation_proj", &relation_proj, dim_relation, false});
    }
    return b;
  }

  std::vector<ConstBlock> blocks() const {
    std::vector<ConstBlock> out;
    for (const auto& b : const_cast<EmbeddingModel*>(this)->blocks())
      out.push_back({b.name, b.data, b.row, b.per_entity});
    return out;
  }

  std::span<const double> entity_vec(EntityId e) const { return {entity.data() + e * dim_entity, dim_entity}; }
  std::span<const double> relation_vec(RelationId r) const { return {relation.data() + r * dim_relation, dim_relation}; }

  bool finite() const {
    for (const auto& b : blocks())
      if (!all_finite(*b.data)) return false;
    return true;
  }

  double max_entity_norm() const {
    double m = 0;
    for (std::size_t e = 0; e < num_entities; ++e) {
      double s = 0;
      for (double x : entity_vec(static_cast<EntityId>(e))) s += x * x;
      m = std::max(m, std::sqrt(s));
    }
    return m;
  }

  // Zeroed model with the same shape, used as a gradient buffer.
  EmbeddingModel zeros_like() const {
    EmbeddingModel z = *this;
    for (auto& b : z.blocks()) std::fill(b.data->begin(), b.data->end(), 0.0);
    return z;
  }

  bool operator==(const EmbeddingModel&) const = default;
};

namespace detail {

inline void normalize(std::span<double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0)
    for (double& x : v) x /= s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Uniform in [-6/sqrt(d), 6/sqrt(d)] then normalized per vector; TransR
// matrices start at the (rectangular) identity.
inline EmbeddingModel init_model(ModelKind kind, std::size_t num_entities, std::size_t num_relations,
                                 std::size_t dim_entity, std::size_t dim_relation, Rng& rng) {
  if (dim_entity == 0 || dim_relation == 0) throw ConfigError("embedding dimensions must be positive");
  if (kind == ModelKind::TransE && dim_entity != dim_relation)
    throw ConfigError("TransE requires equal entity and relation dimensions");
  EmbeddingModel m;
  m.kind = kind;
  m.num_entities = num_entities;
  m.num_relations = num_relations;
  m.dim_entity = dim_entity;
  m.dim_relation = dim_relation;
  m.entity.resize(num_entities * dim_entity);
  m.relation.resize(num_relations * dim_relation);
  if (kind == ModelKind::TransR) m.rel_matrix.assign(num_relations * dim_relation * dim_entity, 0.0);
  if (kind == ModelKind::TransD) {
    m.entity_proj.resize(num_entities * dim_entity);
    m.relation_proj.resize(num_relations * dim_relation);
  }
  auto fill = [&](std::vector<double>& v, std::size_t width) {
    const double bound = 6.0 / std::sqrt(static_cast<double>(width));
    for (double& x : v) x = rng.uniform(-bound, bound);
    for (std::size_t at = 0; at < v.size(); at += width) detail::normalize({v.data() + at, width});
  };
  fill(m.entity, dim_entity);
  fill(m.relation, dim_relation);
  if (kind == ModelKind::TransR)
    for (std::size_t r = 0; r < num_relations; ++r)
      for (std::size_t i = 0; i < std::min(dim_relation, dim_entity); ++i)
        m.rel_matrix[r * dim_relation * dim_entity + i * dim_entity + i] = 1.0;
  if (kind == ModelKind::TransD) {
    fill(m.entity_proj, dim_entity);
    fill(m.relation_proj, dim_relation);
  }
  return m;
}

namespace detail {

inline void check_ids(const EmbeddingModel& m, const Triple& t) {
  if (t.head >= m.num_entities || t.tail >= m.num_entities || t.relation >= m.num_relations)
    throw ContractViolation("triple ids out of range for model");
}

// Translation residual v such that f = -||v||_2.
//   TransE  v = h + r - t
//   TransR  v = M_r h + r - M_r t
//   TransD  v = h_perp + r - t_perp,  x_perp = (r_p x_p^T + I) x
inline void residual(const EmbeddingModel& m, const Triple& t, std::vector<double>& v) {
  const std::size_t de = m.dim_entity, dr = m.dim_relation;
  auto h = m.entity_vec(t.head), tl = m.entity_vec(t.tail);
  auto r = m.relation_vec(t.relation);
  v.assign(dr, 0.0);
  switch (m.kind) {
    case ModelKind::TransE:
      for (std::size_t i = 0; i < dr; ++i) v[i] = h[i] + r[i] - tl[i];
      break;
    case ModelKind::TransR: {
      const double* M = m.rel_matrix.data() + t.relation * dr * de;
      for (std::size_t i = 0; i < dr; ++i) {
        double s = r[i];
        for (std::size_t j = 0; j < de; ++j) s += M[i * de + j] * (h[j] - tl[j]);
        v[i] = s;
      }
      break;
    }
    case ModelKind::TransD: {
      std::span<const double> hp{m.entity_proj.data() + t.head * de, de};
      std::span<const double> tp{m.entity_proj.data() + t.tail * de, de};
      std::span<const double> rp{m.relation_proj.data() + t.relation * dr, dr};
      const double shift = dot(hp, h) - dot(tp, tl);
      for (std::size_t i = 0; i < dr; ++i) v[i] = rp[i] * shift + r[i] + (i < de ? h[i] - tl[i] : 0.0);
      break;
    }
  }
}

}  // namespace detail

inline double score_triple(const EmbeddingModel& m, const Triple& t) {
  detail::check_ids(m, t);
  thread_local std::vector<double> v;
  detail::residual(m, t, v);
  double s = 0;
  for (double x : v) s += x * x;
  return -std::sqrt(s);
}

inline double score_triple(const EmbeddingModel& m, EntityId head, RelationId relation, EntityId tail) {
  return score_triple(m, Triple{head, relation, tail});
}

// grad += coeff * d f(t) / d theta, with grad shaped like m (see zeros_like).
inline void add_score_gradient(const EmbeddingModel& m, const Triple& t, double coeff, EmbeddingModel& grad) {
  detail::check_ids(m, t);
  const std::size_t de = m.dim_entity, dr = m.dim_relation;
  thread_local std::vector<double> v;
  detail::residual(m, t, v);
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-12) return;  // subgradient 0 at the kink
  // g = coeff * df/dv = -coeff * v / ||v||
  thread_local std::vector<double> g;
  g.resize(dr);
  for (std::size_t i = 0; i < dr; ++i) g[i] = -coeff * v[i] / n;

  double* gh = grad.entity.data() + t.head * de;
  double* gt = grad.entity.data() + t.tail * de;
  double* gr = grad.relation.data() + t.relation * dr;
  for (std::size_t i = 0; i < dr; ++i) gr[i] += g[i];

  switch (m.kind) {
    case ModelKind::TransE:
      for (std::size_t i = 0; i < de; ++i) {
        gh[i] += g[i];
        gt[i] -= g[i];
      }
      break;
    case ModelKind::TransR: {
      const double* M = m.rel_matrix.data() + t.relation * dr * de;
      double* gM = grad.rel_matrix.data() + t.relation * dr * de;
      auto h = m.entity_vec(t.head), tl = m.entity_vec(t.tail);
      for (std::size_t i = 0; i < dr; ++i)
        for (std::size_t j = 0; j < de; ++j) {
          gM[i * de + j] += g[i] * (h[j] - tl[j]);
          gh[j] += M[i * de + j] * g[i];
          gt[j] -= M[i * de + j] * g[i];
        }
      break;
    }
    case ModelKind::TransD: {
      auto h = m.entity_vec(t.head), tl = m.entity_vec(t.tail);
      std::span<const double> hp{m.entity_proj.data() + t.head * de, de};
      std::span<const double> tp{m.entity_proj.data() + t.tail * de, de};
      std::span<const double> rp{m.relation_proj.data() + t.relation * dr, dr};
      double* ghp = grad.entity_proj.data() + t.head * de;
      double* gtp = grad.entity_proj.data() + t.tail * de;
      double* grp = grad.relation_proj.data() + t.relation * dr;
      const double shift = detail::dot(hp, h) - detail::dot(tp, tl);
      const double g_rp = detail::dot(g, rp);
      for (std::size_t i = 0; i < dr; ++i) grp[i] += g[i] * shift;
      for (std::size_t j = 0; j < de; ++j) {
        const double id = j < dr ? g[j] : 0.0;
        gh[j] += g_rp * hp[j] + id;
        gt[j] -= g_rp * tp[j] + id;
        ghp[j] += g_rp * h[j];
        gtp[j] -= g_rp * tl[j];
      }
      break;
    }
  }
}

}  // namespace kgad
