#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graspr/io.hpp"

namespace graspr {

/// Published odds ratios with their p-values, in table order.
OddsRatioTable PublishedOddsRatios();

/// Scenes with lazily simulated clouds and feature extractors. Clouds come
/// from `cloud_cache` when a matching CSV exists there, otherwise they are
/// simulated (and written to the cache when one is set). Safe for concurrent
/// use once constructed.
class Study {
 public:
  struct Options {
    SimulationConfig simulation;
    FeatureOptions features;
    std::optional<std::filesystem::path> cloud_cache;
  };

  Study(std::vector<GraspScene> scenes, std::optional<EmgModel> emg, Options options);
  ~Study();
  Study(const Study&) = delete;
  Study& operator=(const Study&) = delete;

  std::vector<std::string> scene_ids() const;
  const GraspScene& scene(const std::string& id) const;
  const SceneGeometry& geometry(const std::string& id) const;
  const std::vector<ReachCloud>& clouds(const std::string& id) const;
  const FeatureExtractor& extractor(const std::string& id) const;
  const Options& options() const { return options_; }
  const EmgModel* emg() const { return emg_ ? &*emg_ : nullptr; }

  ReachTask Task(const TargetPoint& target) const;
  /// Task for an arbitrary cloud sample; its id is "<scene>/<finger>/<sample>".
  ReachTask SampleTask(const std::string& scene, Finger finger, int sample) const;

 private:
  struct Entry;
  Entry& entry(const std::string& id) const;

  std::vector<std::unique_ptr<Entry>> entries_;
  std::optional<EmgModel> emg_;
  Options options_;
};

struct StudyDesign {
  std::vector<TargetPoint> targets;
  std::vector<TrialPair> pairs;
};

/// Regions, one target per non-empty (finger, stratum) and all within-scene
/// pairs, scenes in study order.
StudyDesign SampleStudy(const Study& study, std::uint64_t seed, const RegionConfig& regions = {});

/// Delta features (A - B) for each pair, labeled from `choices` when present.
FeatureTable ComputeFeatures(const Study& study, std::span<const TargetPoint> targets,
                             std::span<const TrialPair> pairs, std::span<const ChoiceRecord> choices = {});

/// One simulated choice per feature row: A with probability model(delta).
std::vector<ChoiceRecord> SimulateChoices(const LogisticModel& model, const FeatureTable& features,
                                          std::span<const TrialPair> pairs, std::uint64_t seed,
                                          const std::string& participant = "synthetic");

/// Reference spread for delta features: root mean square over every ordered
/// pair of distinct tasks, across scenes.
Standardization ReferenceStatistics(std::span<const ReachTask> tasks);

struct FieldResult {
  std::vector<Vec3> points;       // wrist frame of the reference scene
  std::vector<int> samples;       // cloud sample indices
  std::vector<double> scores;
};
/// Scores every `stride`-th sample of the reference finger's cloud against
/// the reference task.
FieldResult PreferenceFieldOf(const Study& study, const LogisticModel& model, const ReachTask& reference,
                              int stride = 1);

// Bundles: a directory with bundle.json naming every artifact relative to it.

struct BundleManifest {
  std::string skeleton = "skeleton.json";
  std::string odds_ratios = "published_odds_ratios.json";
  std::string emg_model = "emg_model.json";
  std::string model = "pretrained_model.json";
  std::string targets = "targets.csv";
  std::string pairs = "pairs.csv";
  std::string choices = "choices.csv";  // append-only log, may be absent
  std::string cloud_cache = "clouds";
  std::vector<std::string> scenes;
  std::uint64_t seed = 7;
  double step_deg = 5.0;
  double alpha = 0.1;
  RegionConfig regions;
};
std::string ManifestToJson(const BundleManifest& manifest);
BundleManifest ManifestFromJson(std::string_view text);

struct Bundle {
  std::filesystem::path root;
  BundleManifest manifest;
  std::vector<GraspScene> scenes;
  OddsRatioTable odds_ratios;
  std::optional<EmgModel> emg;
  LogisticModel model;
  std::vector<TargetPoint> targets;
  std::vector<TrialPair> pairs;

  std::filesystem::path Resolve(const std::string& relative) const { return root / relative; }
  /// Study over the bundle's scenes using its cloud cache.
  std::unique_ptr<Study> MakeStudy() const;
};

/// Loads and cross-checks every artifact named by <root>/bundle.json.
Bundle LoadBundle(const std::filesystem::path& root);

struct ExampleBundleOptions {
  std::uint64_t seed = 7;
  double step_deg = 5.0;
  std::size_t emg_samples = 10000;
  EmgTrainConfig emg_training;
  bool keep_clouds = false;
};
/// Writes the bundled example study: skeleton, the four grasp scenes, the
/// odds-ratio table, a synthetic-forearm EMG model, sampled targets and
/// pairs, and the pretrained model with reference statistics from the
/// sampled tasks.
void WriteExampleBundle(const std::filesystem::path& root, const ExampleBundleOptions& options = {});

}  // namespace graspr
