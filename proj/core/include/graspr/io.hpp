#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graspr/emg.hpp"
#include "graspr/features.hpp"
#include "graspr/preference.hpp"
#include "graspr/sampler.hpp"
#include "graspr/scenes.hpp"
#include "graspr/stats.hpp"

namespace graspr {

inline constexpr int kSchemaVersion = 1;

// Files. Failures throw kIo with the path in the message.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);
void AppendTextFile(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double v);

// CSV tables start with "#graspr-csv schema_version=1 kind=<kind>" and a
// header row. Comma separated, '.' decimals, no quoting; identifiers may not
// contain commas, quotes or line breaks.

std::string CloudsToCsv(std::span<const ReachCloud> clouds);
/// Samples only; run FinalizeCloud to rebuild derived fields.
std::vector<ReachCloud> CloudsFromCsv(std::string_view text);

std::string TargetsToCsv(std::span<const TargetPoint> targets);
std::vector<TargetPoint> TargetsFromCsv(std::string_view text);

std::string PairsToCsv(std::span<const TrialPair> pairs);
std::vector<TrialPair> PairsFromCsv(std::string_view text);

/// Single CSV line for a choice (no header), newline terminated.
std::string ChoiceCsvRow(const ChoiceRecord& choice);
std::string ChoicesToCsv(std::span<const ChoiceRecord> choices);
std::vector<ChoiceRecord> ChoicesFromCsv(std::string_view text);
/// Throws kSchema for malformed ids, chosen side or timestamp.
void ValidateChoice(const ChoiceRecord& choice);

/// Delta features per pair, in kFeatureNames order; `labels` is 1 when A
/// was chosen, 0 for B and NaN when unlabeled.
struct FeatureTable {
  std::vector<std::string> pair_ids;
  Eigen::MatrixXd x;
  Eigen::VectorXd labels;

  /// Rows with a label.
  FeatureTable Labeled() const;
};
std::string FeaturesToCsv(const FeatureTable& table);
FeatureTable FeaturesFromCsv(std::string_view text);

/// 22 normalized glove angles then 10 normalized sEMG channels per row.
std::string EmgDatasetToCsv(const EmgDataset& data);
EmgDataset EmgDatasetFromCsv(std::string_view text);

// OBJ.

std::string MeshToObj(const TriMesh& mesh);
/// Accepts v/f records ("f a/b/c" forms, negative indices, polygons fanned).
TriMesh MeshFromObj(std::string_view text);

/// One "v x y z" line per point; with scores, "v x y z r g b" where
/// r = s, g = 0, b = 1 - s after clamping s to [0, 1].
std::string PointsToObj(std::span<const Vec3> points, std::span<const double> scores = {});
struct ObjPoints {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;  // empty when the file has no vertex colors
};
ObjPoints PointsFromObj(std::string_view text);

// JSON documents carry "schema_version" and "kind".

std::string SkeletonToJson(const HandSkeleton& skeleton);
HandSkeleton SkeletonFromJson(std::string_view text);

std::string EmgModelToJson(const EmgModel& model);
EmgModel EmgModelFromJson(std::string_view text);

std::string ModelToJson(const LogisticModel& model);
LogisticModel ModelFromJson(std::string_view text);

std::string OddsRatioTableToJson(const OddsRatioTable& table);
/// Rows are returned in kFeatureNames order.
OddsRatioTable OddsRatioTableFromJson(std::string_view text);

std::string FitReportToJson(const FitReport& report);
std::string SelectionReportToJson(const SelectionReport& report);
std::string PreferenceRatiosToJson(const PreferenceRatioReport& report);

struct CloudSummaryHeader {
  std::string scene;
  std::string scene_file;
  double step_deg = 5.0;
  double alpha = 0.1;
};
std::string CloudSummaryToJson(const CloudSummaryHeader& header, std::span<const ReachCloud> clouds);
CloudSummaryHeader CloudSummaryFromJson(std::string_view text);

// Scenes: a JSON file that references a skeleton JSON and an object OBJ by
// paths relative to the scene file.

struct SceneFileRefs {
  std::string skeleton = "skeleton.json";
  std::string object;  // empty for a free hand
};
std::string SceneToJson(const GraspScene& scene, const SceneFileRefs& refs);
GraspScene LoadScene(const std::filesystem::path& path);
/// Writes <dir>/<id>.json and <dir>/<id>.obj; the skeleton path is taken
/// as given (relative to `dir`).
void SaveScene(const std::filesystem::path& dir, const GraspScene& scene, const std::string& skeleton_ref);

/// Referential integrity across the study tables: unique ids, targets in
/// known scenes, pairs over targets of their own scene, choices over known
/// pairs with matching scene and targets, at most one choice per pair.
/// Throws kDanglingReference or kConflict naming the offending id.
void CheckReferences(std::span<const std::string> scene_ids, std::span<const TargetPoint> targets,
                     std::span<const TrialPair> pairs, std::span<const ChoiceRecord> choices);

}  // namespace graspr
