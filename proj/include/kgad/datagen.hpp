#pragma once

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgad/anomaly.hpp"
#include "kgad/common.hpp"
#include "kgad/ingest.hpp"

namespace kgad {

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitSet {
  std::vector<SceneAnnotation> train;
  std::vector<SceneAnnotation> validation;
  std::vector<SceneAnnotation> test;
};

struct SplitCounts {
  std::size_t train = 0, validation = 0, test = 0;
};

// floor(n * ratio) for validation and test, remainder to train. Types with
// fewer annotations than split parts go entirely to train.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
  const std::size_t parts = 1 + (r.validation > 0) + (r.test > 0);
  if (n < parts) return {n, 0, 0};
  constexpr double eps = 1e-9;
  SplitCounts c;
  c.validation = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.validation + eps));
  c.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.test + eps));
  if (c.validation + c.test >= n) {
    // keep one for train
    if (c.validation >= c.test) --c.validation; else --c.test;
  }
  c.train = n - c.validation - c.test;
  return c;
}

// Per-scene-type shuffle and split, concatenated in scene-type order.
inline SplitSet split_annotations(const std::vector<SceneAnnotation>& annotations, const SplitRatios& r,
                                  std::uint64_t seed) {
  if (r.train < 0 || r.validation < 0 || r.test < 0 || std::abs(r.train + r.validation + r.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  std::map<std::string, std::vector<const SceneAnnotation*>> by_type;
  std::set<std::string> ids;
  for (const auto& a : annotations) {
    if (!ids.insert(a.scene_id).second) throw DataError("duplicate scene_id '" + a.scene_id + "'");
    by_type[a.scene_type].push_back(&a);
  }
  SplitSet out;
  Rng rng(seed);
  for (auto& [type, group] : by_type) {
    rng.shuffle(group);
    auto c = split_counts(group.size(), r);
    if (c.train == group.size() && group.size() > 0 && (r.validation > 0 || r.test > 0))
      log::warn("scene type '" + type + "' has " + std::to_string(group.size()) +
                " annotation(s); all assigned to train");
    std::size_t i = 0;
    for (; i < c.train; ++i) out.train.push_back(*group[i]);
    for (; i < c.train + c.validation; ++i) out.validation.push_back(*group[i]);
    for (; i < group.size(); ++i) out.test.push_back(*group[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Anomaly benchmarks
// ---------------------------------------------------------------------------

struct AnomalyPools {
  std::map<std::string, LabelSet> per_scene;  // scene type -> anomalous objects
};

// Objects seen in train, minus those seen in train annotations of the scene
// type. With `unique_only`, the pool is first restricted to objects seen in
// exactly one scene type.
inline AnomalyPools anomaly_pools(const std::vector<SceneAnnotation>& train, bool unique_only) {
  LabelSet all;
  std::map<std::string, LabelSet> present;
  std::map<std::string, std::set<std::string>> types_of;
  for (const auto& a : train) {
    auto& p = present[a.scene_type];
    for (const auto& o : a.objects) {
      all.insert(o);
      p.insert(o);
      types_of[o].insert(a.scene_type);
    }
  }
  AnomalyPools pools;
  for (const auto& [type, seen] : present) {
    auto& pool = pools.per_scene[type];
    for (const auto& o : all)
      if (!seen.count(o) && (!unique_only || types_of[o].size() == 1)) pool.insert(o);
  }
  return pools;
}

namespace detail {

inline std::vector<AnomalyDatapoint> inject(const std::vector<SceneAnnotation>& train,
                                            const std::vector<SceneAnnotation>& eval, bool unique_only) {
  if (train.empty() || eval.empty()) throw DataError("anomaly generation needs non-empty train and eval sets");
  auto pools = anomaly_pools(train, unique_only);
  std::vector<AnomalyDatapoint> out;
  std::size_t unknown_type = 0;
  for (const auto& a : eval) {
    auto it = pools.per_scene.find(a.scene_type);
    if (it == pools.per_scene.end()) {
      ++unknown_type;
      continue;
    }
    for (const auto& anomaly : it->second) {
      AnomalyDatapoint d{a.scene_type, a.objects, anomaly};
      if (std::find(d.objects.begin(), d.objects.end(), anomaly) == d.objects.end()) d.objects.push_back(anomaly);
      if (d.objects.size() < 2) continue;
      out.push_back(std::move(d));
    }
  }
  if (unknown_type)
    log::warn(std::to_string(unknown_type) + " eval annotation(s) have a scene type absent from train; skipped");
  return out;
}

}  // namespace detail

// One datapoint per (eval annotation, anomalous object of its scene type),
// the anomaly appended after the annotation's own objects.
inline std::vector<AnomalyDatapoint> generate_out_of_scene(const std::vector<SceneAnnotation>& train,
                                                           const std::vector<SceneAnnotation>& eval) {
  return detail::inject(train, eval, false);
}

inline std::vector<AnomalyDatapoint> generate_unique_out_of_scene(const std::vector<SceneAnnotation>& train,
                                                                  const std::vector<SceneAnnotation>& eval) {
  return detail::inject(train, eval, true);
}

struct RestrictReport {
  std::size_t kept = 0;
  std::size_t dropped_anomaly_oov = 0;
  std::size_t dropped_too_few_objects = 0;
  std::size_t objects_removed = 0;
};

inline std::vector<AnomalyDatapoint> restrict_to_vocabulary(const std::vector<AnomalyDatapoint>& in,
                                                            const LabelSet& vocabulary, std::size_t min_objects,
                                                            RestrictReport* report = nullptr) {
  if (min_objects < 2) throw ConfigError("min_objects must be at least 2");
  RestrictReport rep;
  std::vector<AnomalyDatapoint> out;
  for (const auto& d : in) {
    if (!vocabulary.count(d.anomaly)) {
      ++rep.dropped_anomaly_oov;
      continue;
    }
    AnomalyDatapoint kept{d.scene_type, {}, d.anomaly};
    for (const auto& o : d.objects) {
      if (vocabulary.count(o))
        kept.objects.push_back(o);
      else
        ++rep.objects_removed;
    }
    if (kept.objects.size() < min_objects) {
      ++rep.dropped_too_few_objects;
      continue;
    }
    out.push_back(std::move(kept));
  }
  rep.kept = out.size();
  if (out.empty()) log::warn("vocabulary restriction removed every datapoint");
  if (report) *report = rep;
  return out;
}

// Object labels of a graph, for restrict_to_vocabulary.
inline LabelSet object_vocabulary(const KnowledgeGraph& g) {
  LabelSet v;
  for (EntityId id : g.entities_of_type(EntityType::Object)) v.insert(g.entity(id).label);
  return v;
}

// ---------------------------------------------------------------------------
// Synthetic worlds
// ---------------------------------------------------------------------------

struct SyntheticWorldSpec {
  std::size_t n_scene_types = 5;
  std::size_t objects_per_scene_cluster = 20;
  double overlap_fraction = 0.1;
  std::size_t annotations_per_scene = 40;
  std::size_t objects_per_annotation = 8;
  std::uint64_t seed = 7;

  void validate() const {
    if (!n_scene_types || !objects_per_scene_cluster || !annotations_per_scene || !objects_per_annotation)
      throw ConfigError("synthetic world counts must be positive");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw ConfigError("overlap_fraction must lie in [0, 1)");
    if (objects_per_annotation > objects_per_scene_cluster)
      throw ConfigError("objects_per_annotation exceeds the cluster size");
  }
};

inline io::json to_json(const SyntheticWorldSpec& s) {
  return {{"n_scene_types", s.n_scene_types},
          {"objects_per_scene_cluster", s.objects_per_scene_cluster},
          {"overlap_fraction", s.overlap_fraction},
          {"annotations_per_scene", s.annotations_per_scene},
          {"objects_per_annotation", s.objects_per_annotation},
          {"seed", s.seed}};
}

struct SyntheticWorld {
  std::vector<SceneAnnotation> annotations;
  std::vector<std::string> scene_types;
  std::vector<std::vector<std::string>> clusters;       // per scene type, cluster members
  std::map<std::string, std::set<std::string>> affinity;  // object -> scene types it belongs to
};

inline io::json ground_truth_json(const SyntheticWorld& w) {
  io::json clusters = io::json::object(), affinity = io::json::object();
  for (std::size_t c = 0; c < w.scene_types.size(); ++c) clusters[w.scene_types[c]] = w.clusters[c];
  for (const auto& [o, ts] : w.affinity) affinity[o] = std::vector<std::string>(ts.begin(), ts.end());
  return {{"clusters", clusters}, {"affinity", affinity}};
}

// Cluster c owns k - floor(overlap * k) fresh objects and borrows the first
// floor(overlap * k) own objects of cluster c + 1 (cyclic). A single cluster
// has no neighbour and never borrows.
inline SyntheticWorld generate_synthetic_world(const SyntheticWorldSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_scene_types, k = spec.objects_per_scene_cluster;
  std::size_t shared = n > 1 ? static_cast<std::size_t>(std::floor(spec.overlap_fraction * static_cast<double>(k) + 1e-9)) : 0;
  shared = std::min(shared, k - shared);  // borrow only from the neighbour's own objects
  const std::size_t own = k - shared;

  SyntheticWorld w;
  auto pad = [](std::size_t i, int width) {
    std::string s = std::to_string(i);
    return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
  };
  std::vector<std::vector<std::string>> owned(n);
  std::size_t next_object = 0;
  for (std::size_t c = 0; c < n; ++c) {
    w.scene_types.push_back("scene_" + pad(c, 2));
    for (std::size_t j = 0; j < own; ++j) owned[c].push_back("object_" + pad(next_object++, 4));
  }
  w.clusters.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    w.clusters[c] = owned[c];
    for (std::size_t j = 0; j < shared; ++j) w.clusters[c].push_back(owned[(c + 1) % n][j]);
    for (const auto& o : w.clusters[c]) w.affinity[o].insert(w.scene_types[c]);
  }

  Rng rng(spec.seed);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t a = 0; a < spec.annotations_per_scene; ++a) {
      auto members = w.clusters[c];
      // partial Fisher-Yates: first objects_per_annotation entries
      for (std::size_t i = 0; i < spec.objects_per_annotation; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.index(members.size() - i));
        std::swap(members[i], members[j]);
      }
      members.resize(spec.objects_per_annotation);
      w.annotations.push_back({w.scene_types[c] + "_" + pad(a, 4), w.scene_types[c], std::move(members)});
    }
  }
  return w;
}

}  // namespace kgad
