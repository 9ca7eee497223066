// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "test_support.hpp"

namespace {

using namespace kgad;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::string> object_labels(const KnowledgeGraph& g) {
  std::vector<std::string> out;
  for (EntityId o : g.entities_of_type(EntityType::Object)) out.push_back(g.entity(o).label);
  return out;
}

std::vector<std::string> sample(std::vector<std::string> pool, Rng& rng, std::size_t lo, std::size_t hi) {
  rng.shuffle(pool);
  pool.resize(std::min(pool.size(), lo + rng.index(hi - lo + 1)));
  return pool;
}

std::vector<std::string> order_of(const AnomalyRanking& r) {
  std::vector<std::string> out;
  for (const auto& c : r.candidates) out.push_back(c.label);
  return out;
}

struct ToyModel {
  KnowledgeGraph graph;
  EmbeddingModel model;
};

ToyModel toy_model() {
  auto g = ingest_annotations(testing::random_annotations(80, 5, 24, 101, 7)).graph;
  TrainConfig c;
  c.kind = ModelKind::TransD;
  c.dim_entity = 16;
  c.dim_relation = 12;
  c.epochs = 60;
  c.batch_size = 128;
  c.seed = 5;
  return {g, train(g, c).model};
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  const auto toy = toy_model();
  const auto table = ScoreTable::build(toy.model, toy.graph);
  const auto pool = object_labels(toy.graph);
  Rng rng(1);
  std::size_t order_mismatch = 0;
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    auto objs = sample(pool, rng, 2, 10);
    const double alpha = i % 5 == 0 ? 1.0 : rng.unit();
    const std::size_t m = 1 + rng.index(5);
    auto got = detect(table, objs, {alpha, m});
    auto want = testing::oracle_detect(toy.model, toy.graph, objs, alpha, m);
    if (got.candidates.size() != want.size()) {
      ++order_mismatch;
      continue;
    }
    for (std::size_t j = 0; j < want.size(); ++j) {
      if (got.candidates[j].label != want[j].label) ++order_mismatch;
      worst = std::max({worst, std::abs(got.candidates[j].z - want[j].z), std::abs(got.candidates[j].z_o - want[j].z_o),
                        std::abs(got.candidates[j].z_s - want[j].z_s)});
    }
  }
  const double secs = seconds_since(t0);
  return {order_mismatch == 0 && worst <= 1e-9 && secs < 10.0,
          fmt("50 datapoints, order mismatches %zu, max |dz| %.2e, %.2f s", order_mismatch, worst, secs)};
}

Outcome planted_anomaly_recovery() {
  const auto t0 = Clock::now();
  SyntheticWorldSpec spec;  // 5 types, 20 objects/cluster, overlap 0.1, 40 annotations/type, seed 7
  TrainConfig cfg;
  cfg.kind = ModelKind::TransE;
  cfg.dim_entity = cfg.dim_relation = 32;
  cfg.epochs = 300;
  cfg.seed = spec.seed;
  auto tw = testing::trained_world(spec, cfg);
  auto ds = generate_unique_out_of_scene(tw.split.train, tw.split.test);
  ds = restrict_to_vocabulary(ds, object_vocabulary(tw.graph), 5);
  auto table = ScoreTable::build(tw.trained.model, tw.graph);
  auto rep = evaluate_topk(table, ds, {}, {1, 3});
  const double secs = seconds_since(t0);
  const double top1 = rep.accuracy.at(1), top3 = rep.accuracy.at(3);
  return {rep.evaluated >= 200 && top1 >= 0.90 && top3 >= 0.98 && secs < 300.0,
          fmt("%zu datapoints, top-1 %.4f, top-3 %.4f, %.1f s", rep.evaluated, top1, top3, secs)};
}

// Exhaustive sort of all candidates for one slot.
std::size_t sorted_rank(const EmbeddingModel& m, const KnowledgeGraph& g, const TripleSet& known, const Triple& t,
                        bool head, bool filtered) {
  const auto& rel = g.relation(t.relation);
  std::vector<std::pair<double, bool>> all;  // (score, is_truth)
  for (EntityId e : g.entities_of_type(head ? rel.head_type : rel.tail_type)) {
    Triple c = head ? Triple{e, t.relation, t.tail} : Triple{t.head, t.relation, e};
    if (!g.is_schema_valid(c)) continue;
    if (c != t && filtered && known.count(c)) continue;
    all.push_back({score_triple(m, c), c == t});
  }
  // descending score, truth after its ties
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second) return i + 1;
  return 0;
}

Outcome link_metric_correctness() {
  auto g = ingest_annotations(testing::random_annotations(25, 4, 30, 77, 6)).graph;
  auto known = triple_set(g);
  std::vector<Triple> test(g.triples().begin(), g.triples().end());
  const std::vector<std::size_t> ks{1, 3, 10};
  std::size_t mismatches = 0, models = 0, mr_violations = 0;
  for (auto kind : {ModelKind::TransE, ModelKind::TransR, ModelKind::TransD})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ++models;
      auto m = testing::random_model(kind, g.num_entities(), 2, 6, kind == ModelKind::TransE ? 6 : 4, seed, 0.7);
      double mr[2] = {0, 0};
      for (bool filtered : {false, true}) {
        auto lm = evaluate_links(m, g, known, test, ks, filtered);
        std::vector<std::size_t> ranks;
        for (const auto& t : test) {
          ranks.push_back(sorted_rank(m, g, known, t, true, filtered));
          ranks.push_back(sorted_rank(m, g, known, t, false, filtered));
        }
        double sum = 0, rec = 0;
        for (auto r : ranks) sum += static_cast<double>(r), rec += 1.0 / static_cast<double>(r);
        const double n = static_cast<double>(ranks.size());
        mismatches += sum / n != lm.mean_rank;
        mismatches += rec / n != lm.mrr;
        for (auto k : ks) {
          const auto hit = std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= k; });
          mismatches += static_cast<double>(hit) / n != lm.hits.at(k);
        }
        mr[filtered] = lm.mean_rank;
      }
      mr_violations += mr[1] > mr[0];
    }
  return {g.num_entities() <= 50 && mismatches == 0 && mr_violations == 0,
          fmt("%zu entities, %zu models, raw+filtered mismatches %zu, filtered>raw MR %zu", g.num_entities(), models,
              mismatches, mr_violations)};
}

Outcome gradient_check() {
  double worst = 0;
  std::string per_kind;
  for (auto kind : {ModelKind::TransE, ModelKind::TransR, ModelKind::TransD}) {
    double w = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) w = std::max(w, testing::gradient_check_error(kind, seed));
    per_kind += fmt("%s %.1e ", std::string(to_string(kind)).c_str(), w);
    worst = std::max(worst, w);
  }
  return {worst < 1e-4, "20 configs per kind, max relative error: " + per_kind};
}

Outcome ranking_invariances() {
  const auto toy = toy_model();
  const auto table = ScoreTable::build(toy.model, toy.graph);
  const auto pool = object_labels(toy.graph);
  Rng rng(5);
  const double a = 2.7, b = -1.3;
  const auto affine = table.transformed([&](double x) { return a * x + b; });
  std::size_t fail_m = 0, fail_affine = 0, fail_perm = 0;
  for (int i = 0; i < 100; ++i) {
    auto objs = sample(pool, rng, 3, 10);
    auto ref = detect(table, objs, {1.0, 1});
    for (std::size_t m : {3, 5}) {
      auto r = detect(table, objs, {1.0, m});
      fail_m += order_of(r) != order_of(ref);
    }
    InferenceConfig cfg{rng.unit(), 1 + rng.index(5)};
    auto base = detect(table, objs, cfg);
    fail_affine += order_of(detect(affine, objs, cfg)) != order_of(base);
    auto shuffled = objs;
    rng.shuffle(shuffled);
    fail_perm += order_of(detect(table, shuffled, cfg)) != order_of(base);
  }
  return {fail_m + fail_affine + fail_perm == 0,
          fmt("100 datapoints, failures: m-independence %zu, affine %zu, permutation %zu", fail_m, fail_affine, fail_perm)};
}

Outcome dataset_soundness() {
  SyntheticWorldSpec spec;
  spec.overlap_fraction = 0.2;
  auto world = generate_synthetic_world(spec);
  auto split = split_annotations(world.annotations, {}, spec.seed);
  std::map<std::string, std::set<std::string>> seen;
  std::set<std::string> all;
  std::map<std::string, std::set<std::string>> types_of;
  for (const auto& an : split.train)
    for (const auto& o : an.objects) {
      seen[an.scene_type].insert(o);
      all.insert(o);
      types_of[o].insert(an.scene_type);
    }
  std::size_t count_mismatch = 0, leaks = 0, not_subset = 0;
  std::vector<AnomalyDatapoint> streams[2];
  std::size_t sizes[2] = {0, 0};
  for (bool unique : {false, true}) {
    std::multiset<std::pair<std::string, std::string>> want, got;
    for (const auto& an : split.test)
      for (const auto& o : all)
        if (!seen[an.scene_type].count(o) && (!unique || types_of[o].size() == 1)) want.insert({an.scene_type, o});
    auto ds = unique ? generate_unique_out_of_scene(split.train, split.test) : generate_out_of_scene(split.train, split.test);
    for (const auto& d : ds) {
      got.insert({d.scene_type, d.anomaly});
      leaks += seen[d.scene_type].count(d.anomaly);
    }
    count_mismatch += got != want;
    sizes[unique] = ds.size();
    streams[unique] = std::move(ds);
  }
  for (const auto& d : streams[1]) not_subset += std::find(streams[0].begin(), streams[0].end(), d) == streams[0].end();
  return {count_mismatch == 0 && leaks == 0 && not_subset == 0 && sizes[1] <= sizes[0],
          fmt("Out %zu, Unique %zu, oracle mismatches %zu, leaks %zu, Unique not in Out %zu", sizes[0], sizes[1],
              count_mismatch, leaks, not_subset)};
}

// Library-level pipeline writing every artifact under dir.
void run_pipeline(const std::filesystem::path& dir) {
  SyntheticWorldSpec spec;
  spec.n_scene_types = 4;
  spec.objects_per_scene_cluster = 12;
  spec.annotations_per_scene = 20;
  spec.objects_per_annotation = 6;
  spec.seed = 3;
  auto world = generate_synthetic_world(spec);
  io::write_file_atomic(dir / "annotations.jsonl", annotations_to_jsonl(world.annotations));
  auto split = split_annotations(world.annotations, {}, spec.seed);
  auto g = ingest_annotations(split.train).graph;
  save_graph(g, GraphPaths::in(dir / "graph"));
  TrainConfig cfg;
  cfg.kind = ModelKind::TransR;
  cfg.dim_entity = 12;
  cfg.dim_relation = 8;
  cfg.epochs = 30;
  cfg.lr_schedule = LrSchedule::OneCycle;
  cfg.seed = spec.seed;
  auto res = train(g, cfg);
  save_checkpoint(dir / "model.ckpt", res.model, res.config);
  io::write_file_atomic(dir / "training_log.csv", training_log_csv(res.log));
  auto out = generate_out_of_scene(split.train, split.test);
  auto uniq = generate_unique_out_of_scene(split.train, split.test);
  io::write_file_atomic(dir / "out.jsonl", datapoints_to_jsonl(out));
  io::write_file_atomic(dir / "unique.jsonl", datapoints_to_jsonl(uniq));
  auto table = ScoreTable::build(res.model, g);
  table.save(dir / "scores.bin");
  std::string rankings;
  for (const auto& r : detect_all(table, out, {0.5, 2})) rankings += (r ? to_json(*r).dump() : "null") + "\n";
  io::write_file_atomic(dir / "rankings.jsonl", rankings);
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "kgad_acceptance_determinism";
  fs::remove_all(root);
  run_pipeline(root / "a");
  run_pipeline(root / "b");
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    auto other = root / "b" / fs::relative(e.path(), root / "a");
    differ += !fs::exists(other) || io::read_file(e.path()) != io::read_file(other);
  }
  fs::remove_all(root);
  return {files >= 9 && differ == 0, fmt("%zu artifacts compared, %zu differ", files, differ)};
}

Outcome unbalanced_split() {
  std::vector<std::string> warnings;
  log::ScopedSink capture([&](std::string_view s) { warnings.emplace_back(s); });
  SyntheticWorldSpec spec;
  auto world = generate_synthetic_world(spec);
  auto corpus = world.annotations;
  corpus.push_back(make_annotation("sauna_0000", "sauna", {"object_0000", "object_0001", "object_0030"}));
  try {
    auto split = split_annotations(corpus, {}, 11);
    auto in = [](const std::vector<SceneAnnotation>& v) {
      return std::count_if(v.begin(), v.end(), [](const SceneAnnotation& a) { return a.scene_type == "sauna"; });
    };
    auto g = ingest_annotations(split.train).graph;
    const bool in_graph = g.find_entity("sauna", EntityType::Scene).has_value();
    generate_out_of_scene(split.train, split.test);
    const bool warned = std::any_of(warnings.begin(), warnings.end(), [](const std::string& w) { return w.find("sauna") != std::string::npos; });
    return {in(split.train) == 1 && in(split.validation) == 0 && in(split.test) == 0 && in_graph && warned,
            fmt("singleton type in train %ld / validation %ld / test %ld, warning %s", static_cast<long>(in(split.train)),
                static_cast<long>(in(split.validation)), static_cast<long>(in(split.test)), warned ? "yes" : "no")};
  } catch (const std::exception& e) {
    return {false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"planted-anomaly recovery", planted_anomaly_recovery},
      {"link-metric correctness", link_metric_correctness},
      {"gradient check", gradient_check},
      {"ranking invariances", ranking_invariances},
      {"dataset-construction soundness", dataset_soundness},
      {"determinism", determinism},
      {"unbalanced-split handling", unbalanced_split},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
