#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graspr/simulator.hpp"

namespace graspr {

enum class Stratum { kOnObject = 0, kOnHand = 1, kInAir = 2, kInAirMid = 3 };

inline constexpr std::array<Stratum, 4> kAllStrata = {Stratum::kOnObject, Stratum::kOnHand, Stratum::kInAir,
                                                      Stratum::kInAirMid};

std::string_view ToString(Stratum stratum);
Stratum StratumFromString(std::string_view name);

struct RegionConfig {
  double near_fraction = 0.05;  // "as close as possible": lowest fraction of distances
  double near_cap = 0.005;      // and no farther than this, meters
  double far_fraction = 0.25;   // "as far as possible": highest fraction of distances
};

/// Sample indices per stratum, ascending. A sample close to both the object
/// and the static hand belongs to the object region only.
struct Regions {
  Finger finger = Finger::kIndex;
  std::array<std::vector<int>, 4> members;

  const std::vector<int>& operator[](Stratum s) const { return members[static_cast<int>(s)]; }
  std::vector<int>& operator[](Stratum s) { return members[static_cast<int>(s)]; }
};

Regions ExtractRegions(const ReachCloud& cloud, const SceneGeometry& geometry, const RegionConfig& config = {});

struct TargetPoint {
  std::string id;
  std::string scene;
  Finger finger = Finger::kIndex;
  Stratum stratum = Stratum::kOnObject;
  Vec3 position = Vec3::Zero();  // wrist frame
  int sample = -1;               // index into the finger's cloud
};

struct TrialPair {
  std::string id;
  std::string scene;
  std::string a;
  std::string b;
};

/// One two-alternative forced choice.
struct ChoiceRecord {
  std::string pair_id;
  std::string scene;
  std::string target_a;
  std::string target_b;
  bool chose_a = true;
  std::string participant;
  std::string timestamp;  // ISO 8601
};

std::string TargetId(std::string_view scene, Finger finger, Stratum stratum);

/// One uniform draw per non-empty region, in finger then stratum order. Each
/// (scene, finger) has its own stream derived from the seed.
std::vector<TargetPoint> SampleTargets(std::string_view scene, std::span<const ReachCloud> clouds,
                                       std::span<const Regions> regions, std::uint64_t seed);

/// All unordered pairs within each scene, scenes in order of first appearance.
std::vector<TrialPair> PairTargets(std::span<const TargetPoint> targets);

/// Williams design: every condition once per row and column, and every
/// ordered immediate succession equally often. Odd n gives 2n rows.
std::vector<std::vector<int>> BalancedLatinSquare(int n);

/// Stable 64-bit hash used to derive per-stream seeds.
std::uint64_t StableHash(std::string_view text, std::uint64_t seed = 0);

}  // namespace graspr
