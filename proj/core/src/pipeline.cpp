#include "graspr/pipeline.hpp"

#include <cmath>
#include <mutex>
#include <random>
#include <unordered_map>

#include <fmt/format.h>

#include "graspr/error.hpp"
#include "json.hpp"

namespace graspr {

namespace fs = std::filesystem;
using nlohmann::json;

OddsRatioTable PublishedOddsRatios() {
  return {
      {"reach_volume", "joint_angular_distance", "joint_angle_abs_sum", "joint_to_target_euclid", "object_volume",
       "vemg_abs_sum", "joint_x", "joint_z", "cage_ratio", "joint_y", "target_dist_object", "target_z",
       "target_dist_centroid", "target_y", "target_x", "target_dist_body"},
      {1.417, 1.325, 1.252, 1.206, 0.956, 0.912, 0.908, 0.893, 0.875, 0.825, 0.819, 0.747, 0.691, 0.682, 0.568,
       0.336},
      {0.010, 0.052, 0.062, 0.458, 0.584, 0.421, 0.502, 0.779, 0.149, 0.395, 0.227, 0.040, 0.001, 0.006, 0.047,
       0.002},
  };
}

// ---------------------------------------------------------------- Study

struct Study::Entry {
  explicit Entry(GraspScene s) : scene(std::move(s)) {}
  GraspScene scene;
  std::once_flag geometry_once;
  std::unique_ptr<SceneGeometry> geometry;
  std::once_flag clouds_once;
  std::vector<ReachCloud> clouds;
  std::unique_ptr<FeatureExtractor> extractor;
};

Study::Study(std::vector<GraspScene> scenes, std::optional<EmgModel> emg, Options options)
    : emg_(std::move(emg)), options_(std::move(options)) {
  if (!emg_ && !options_.features.geometric_only) {
    throw Error(ErrorCode::kInvalidArgument, "missing EMG model",
                "vemg_abs_sum needs an EMG model; enable geometric-only mode to compute without it");
  }
  for (GraspScene& s : scenes) {
    for (const auto& e : entries_) {
      if (e->scene.id == s.id) throw Error(ErrorCode::kConflict, fmt::format("duplicate scene id '{}'", s.id));
    }
    entries_.push_back(std::make_unique<Entry>(std::move(s)));
  }
}

Study::~Study() = default;

std::vector<std::string> Study::scene_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries_) ids.push_back(e->scene.id);
  return ids;
}

Study::Entry& Study::entry(const std::string& id) const {
  for (const auto& e : entries_)
    if (e->scene.id == id) return *e;
  throw Error(ErrorCode::kNotFound, fmt::format("unknown scene '{}'", id));
}

const GraspScene& Study::scene(const std::string& id) const { return entry(id).scene; }

const SceneGeometry& Study::geometry(const std::string& id) const {
  Entry& e = entry(id);
  std::call_once(e.geometry_once, [&] { e.geometry = std::make_unique<SceneGeometry>(e.scene); });
  return *e.geometry;
}

const std::vector<ReachCloud>& Study::clouds(const std::string& id) const {
  Entry& e = entry(id);
  const SceneGeometry& geo = geometry(id);
  std::call_once(e.clouds_once, [&] {
    const SimulationConfig& sim = options_.simulation;
    std::optional<fs::path> csv;
    if (options_.cloud_cache) csv = *options_.cloud_cache / (id + ".clouds.csv");
    if (csv && fs::exists(*csv)) {
      e.clouds = CloudsFromCsv(ReadTextFile(*csv));
      std::vector<ReachCloud> ordered;
      for (Finger f : kAllFingers) {
        ReachCloud c;
        c.finger = f;
        for (ReachCloud& loaded : e.clouds)
          if (loaded.finger == f) c.samples = std::move(loaded.samples);
        c.initial_fingertip = geo.InitialFingertip(f);
        if (c.samples.empty()) {
          c.warnings.push_back(fmt::format("{}: immobilized, every swept pose collides", ToString(f)));
        }
        FinalizeCloud(c, sim.alpha);
        ordered.push_back(std::move(c));
      }
      e.clouds = std::move(ordered);
    } else {
      for (Finger f : kAllFingers) e.clouds.push_back(SimulateFinger(geo, f, sim));
      if (csv) {
        WriteTextFile(*csv, CloudsToCsv(e.clouds));
        WriteTextFile(*options_.cloud_cache / (id + ".summary.json"),
                      CloudSummaryToJson({id, id + ".json", RadToDeg(sim.step), sim.alpha}, e.clouds));
      }
    }
    e.extractor = std::make_unique<FeatureExtractor>(geo, e.clouds, emg(), options_.features);
  });
  return e.clouds;
}

const FeatureExtractor& Study::extractor(const std::string& id) const {
  clouds(id);
  return *entry(id).extractor;
}

ReachTask Study::Task(const TargetPoint& target) const { return MakeTask(extractor(target.scene), target); }

ReachTask Study::SampleTask(const std::string& scene, Finger finger, int sample) const {
  const FeatureExtractor& ex = extractor(scene);
  const ReachCloud& c = ex.cloud(finger);
  if (sample < 0 || static_cast<std::size_t>(sample) >= c.samples.size()) {
    throw Error(ErrorCode::kNotFound,
                fmt::format("{} cloud of scene '{}' has no sample {}", ToString(finger), scene, sample));
  }
  TargetPoint t;
  t.id = fmt::format("{}/{}/{}", scene, ToString(finger), sample);
  t.scene = scene;
  t.finger = finger;
  t.position = c.samples[static_cast<std::size_t>(sample)].position;
  t.sample = sample;
  return MakeTask(ex, t);
}

// ---------------------------------------------------------------- pipeline steps

StudyDesign SampleStudy(const Study& study, std::uint64_t seed, const RegionConfig& regions) {
  StudyDesign d;
  for (const std::string& id : study.scene_ids()) {
    const std::vector<ReachCloud>& clouds = study.clouds(id);
    std::vector<Regions> reg;
    for (const ReachCloud& c : clouds) reg.push_back(ExtractRegions(c, study.geometry(id), regions));
    std::vector<TargetPoint> t = SampleTargets(id, clouds, reg, seed);
    d.targets.insert(d.targets.end(), t.begin(), t.end());
  }
  d.pairs = PairTargets(d.targets);
  return d;
}

FeatureTable ComputeFeatures(const Study& study, std::span<const TargetPoint> targets,
                             std::span<const TrialPair> pairs, std::span<const ChoiceRecord> choices) {
  std::vector<std::string> ids = study.scene_ids();
  CheckReferences(ids, targets, pairs, choices);
  std::unordered_map<std::string, const TargetPoint*> tmap;
  for (const TargetPoint& t : targets) tmap[t.id] = &t;
  std::unordered_map<std::string, bool> chosen;
  for (const ChoiceRecord& c : choices) chosen[c.pair_id] = c.chose_a;

  std::unordered_map<std::string, FeatureVector> cache;
  const auto features = [&](const std::string& id) -> const FeatureVector& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, study.Task(*tmap.at(id)).features).first;
    return it->second;
  };
  FeatureTable out;
  const auto n = static_cast<Eigen::Index>(pairs.size());
  out.x.resize(n, kFeatureCount);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrialPair& p = pairs[static_cast<std::size_t>(i)];
    out.pair_ids.push_back(p.id);
    out.x.row(i) = DeltaFeatures(features(p.a), features(p.b)).transpose();
    const auto it = chosen.find(p.id);
    out.labels[i] = it == chosen.end() ? std::numeric_limits<double>::quiet_NaN() : (it->second ? 1.0 : 0.0);
  }
  return out;
}

std::vector<ChoiceRecord> SimulateChoices(const LogisticModel& model, const FeatureTable& features,
                                          std::span<const TrialPair> pairs, std::uint64_t seed,
                                          const std::string& participant) {
  std::unordered_map<std::string, const TrialPair*> pmap;
  for (const TrialPair& p : pairs) pmap[p.id] = &p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ChoiceRecord> out;
  for (std::size_t i = 0; i < features.pair_ids.size(); ++i) {
    const auto it = pmap.find(features.pair_ids[i]);
    if (it == pmap.end()) {
      throw Error(ErrorCode::kDanglingReference, fmt::format("feature row for unknown pair '{}'", features.pair_ids[i]));
    }
    const FeatureVector delta = features.x.row(static_cast<Eigen::Index>(i)).transpose();
    const double p = model.PredictDelta(delta);
    const TrialPair& pr = *it->second;
    ChoiceRecord c{pr.id, pr.scene, pr.a, pr.b, unit(rng) < p, participant, ""};
    // Deterministic timestamps, one second apart.
    const std::size_t s = i % 60, m = (i / 60) % 60, h = i / 3600;
    c.timestamp = fmt::format("2025-01-01T{:02}:{:02}:{:02}Z", h % 24, m, s);
    out.push_back(std::move(c));
  }
  return out;
}

Standardization ReferenceStatistics(std::span<const ReachTask> tasks) {
  if (tasks.size() < 2) throw Error(ErrorCode::kUndefinedStatistic, "reference statistics need at least two tasks");
  const std::size_t n = tasks.size();
  Eigen::MatrixXd deltas(static_cast<Eigen::Index>(n * (n - 1)), kFeatureCount);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) deltas.row(row++) = DeltaFeatures(tasks[i].features, tasks[j].features).transpose();
  return SymmetricReference(deltas);
}

FieldResult PreferenceFieldOf(const Study& study, const LogisticModel& model, const ReachTask& reference,
                              int stride) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be at least 1");
  const FeatureExtractor& ex = study.extractor(reference.target.scene);
  const ReachCloud& cloud = ex.cloud(reference.target.finger);
  FieldResult r;
  std::vector<FeatureVector> candidates;
  for (std::size_t k = 0; k < cloud.samples.size(); k += static_cast<std::size_t>(stride)) {
    r.points.push_back(cloud.samples[k].position);
    r.samples.push_back(static_cast<int>(k));
    candidates.push_back(ex.ComputeSample(reference.target.finger, static_cast<int>(k)));
  }
  r.scores = PreferenceField(model, reference.features, candidates);
  return r;
}

// ---------------------------------------------------------------- bundles

std::string ManifestToJson(const BundleManifest& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "bundle";
  j["skeleton"] = m.skeleton;
  j["odds_ratios"] = m.odds_ratios;
  j["emg_model"] = m.emg_model;
  j["model"] = m.model;
  j["targets"] = m.targets;
  j["pairs"] = m.pairs;
  j["choices"] = m.choices;
  j["cloud_cache"] = m.cloud_cache;
  j["scenes"] = m.scenes;
  j["seed"] = m.seed;
  j["simulation"] = {{"step_deg", m.step_deg}, {"alpha", m.alpha}};
  j["regions"] = {{"near_fraction", m.regions.near_fraction},
                  {"near_cap", m.regions.near_cap},
                  {"far_fraction", m.regions.far_fraction}};
  return j.dump(2) + "\n";
}

BundleManifest ManifestFromJson(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, "bundle: invalid JSON", e.what());
  }
  if (!j.is_object() || j.value("schema_version", 0) != kSchemaVersion || j.value("kind", "") != "bundle") {
    throw Error(ErrorCode::kSchema, "bundle: expected a 'bundle' document with schema_version 1");
  }
  BundleManifest m;
  try {
    m.skeleton = j.value("skeleton", m.skeleton);
    m.odds_ratios = j.value("odds_ratios", m.odds_ratios);
    m.emg_model = j.value("emg_model", m.emg_model);
    m.model = j.value("model", m.model);
    m.targets = j.value("targets", m.targets);
    m.pairs = j.value("pairs", m.pairs);
    m.choices = j.value("choices", m.choices);
    m.cloud_cache = j.value("cloud_cache", m.cloud_cache);
    m.scenes = j.at("scenes").get<std::vector<std::string>>();
    m.seed = j.value("seed", m.seed);
    if (j.contains("simulation")) {
      m.step_deg = j["simulation"].value("step_deg", m.step_deg);
      m.alpha = j["simulation"].value("alpha", m.alpha);
    }
    if (j.contains("regions")) {
      m.regions.near_fraction = j["regions"].value("near_fraction", m.regions.near_fraction);
      m.regions.near_cap = j["regions"].value("near_cap", m.regions.near_cap);
      m.regions.far_fraction = j["regions"].value("far_fraction", m.regions.far_fraction);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, "bundle: malformed field", e.what());
  }
  if (!(m.step_deg > 0.0) || !(m.alpha > 0.0)) throw Error(ErrorCode::kSchema, "bundle: step and alpha must be positive");
  return m;
}

std::unique_ptr<Study> Bundle::MakeStudy() const {
  Study::Options o;
  o.simulation.step = DegToRad(manifest.step_deg);
  o.simulation.alpha = manifest.alpha;
  o.features.geometric_only = !emg.has_value();
  o.cloud_cache = Resolve(manifest.cloud_cache);
  return std::make_unique<Study>(scenes, emg, o);
}

Bundle LoadBundle(const fs::path& root) {
  Bundle b;
  b.root = root;
  b.manifest = ManifestFromJson(ReadTextFile(root / "bundle.json"));
  for (const std::string& s : b.manifest.scenes) b.scenes.push_back(LoadScene(root / s));
  b.odds_ratios = OddsRatioTableFromJson(ReadTextFile(b.Resolve(b.manifest.odds_ratios)));
  if (!b.manifest.emg_model.empty() && fs::exists(b.Resolve(b.manifest.emg_model))) {
    b.emg = EmgModelFromJson(ReadTextFile(b.Resolve(b.manifest.emg_model)));
  }
  b.model = ModelFromJson(ReadTextFile(b.Resolve(b.manifest.model)));
  b.targets = TargetsFromCsv(ReadTextFile(b.Resolve(b.manifest.targets)));
  b.pairs = PairsFromCsv(ReadTextFile(b.Resolve(b.manifest.pairs)));
  std::vector<std::string> ids;
  for (const GraspScene& s : b.scenes) ids.push_back(s.id);
  CheckReferences(ids, b.targets, b.pairs, {});
  return b;
}

void WriteExampleBundle(const fs::path& root, const ExampleBundleOptions& options) {
  BundleManifest m;
  m.seed = options.seed;
  m.step_deg = options.step_deg;

  const HandSkeleton skel = DefaultSkeleton();
  WriteTextFile(root / m.skeleton, SkeletonToJson(skel));
  for (const GraspScene& s : ExampleScenes(skel)) {
    SaveScene(root / "scenes", s, "../" + m.skeleton);
    m.scenes.push_back("scenes/" + s.id + ".json");
  }
  WriteTextFile(root / m.odds_ratios, OddsRatioTableToJson(PublishedOddsRatios()));

  EmgTrainConfig tc = options.emg_training;
  tc.seed = options.seed;
  const EmgTrainResult emg = TrainEmg(SyntheticForearmDataset(skel, options.emg_samples, options.seed), tc);
  WriteTextFile(root / m.emg_model, EmgModelToJson(emg.model));

  // Everything downstream is computed from the files just written.
  std::vector<GraspScene> scenes;
  for (const std::string& s : m.scenes) scenes.push_back(LoadScene(root / s));
  Study::Options so;
  so.simulation.step = DegToRad(m.step_deg);
  so.simulation.alpha = m.alpha;
  if (options.keep_clouds) so.cloud_cache = root / m.cloud_cache;
  const Study study(std::move(scenes), EmgModelFromJson(ReadTextFile(root / m.emg_model)), so);
  const StudyDesign design = SampleStudy(study, m.seed, m.regions);
  WriteTextFile(root / m.targets, TargetsToCsv(design.targets));
  WriteTextFile(root / m.pairs, PairsToCsv(design.pairs));

  std::vector<ReachTask> tasks;
  for (const TargetPoint& t : design.targets) tasks.push_back(study.Task(t));
  const LogisticModel model = PretrainedModel(
      OddsRatioTableFromJson(ReadTextFile(root / m.odds_ratios)), ReferenceStatistics(tasks));
  WriteTextFile(root / m.model, ModelToJson(model));
  WriteTextFile(root / "bundle.json", ManifestToJson(m));
}

}  // namespace graspr
