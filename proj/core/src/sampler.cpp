#include "graspr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

namespace {

constexpr std::array<std::string_view, 4> kStratumNames = {"on_object", "on_hand", "in_air", "in_air_mid"};

// Indices of the k smallest values (ties at the cut included), k = ceil(fraction * n).
double LowerCut(std::vector<double> values, double fraction) {
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * values.size())));
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

double UpperCut(std::vector<double> values, double fraction) {
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * values.size())));
  const std::size_t idx = values.size() - k;
  std::nth_element(values.begin(), values.begin() + idx, values.end());
  return values[idx];
}

}  // namespace

std::string_view ToString(Stratum stratum) { return kStratumNames[static_cast<int>(stratum)]; }

Stratum StratumFromString(std::string_view name) {
  for (Stratum s : kAllStrata)
    if (ToString(s) == name) return s;
  throw Error(ErrorCode::kSchema, fmt::format("unknown stratum '{}'", name));
}

std::uint64_t StableHash(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

Regions ExtractRegions(const ReachCloud& cloud, const SceneGeometry& geometry, const RegionConfig& config) {
  Regions regions;
  regions.finger = cloud.finger;
  const std::size_t n = cloud.samples.size();
  if (n == 0) return regions;

  std::vector<double> d_object(n), d_hand(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_object[i] = geometry.DistanceToObject(cloud.samples[i].position);
    d_hand[i] = geometry.DistanceToStaticHand(cloud.finger, cloud.samples[i].position);
  }
  std::vector<char> taken(n, 0);
  if (geometry.has_object()) {
    const double cut = std::min(LowerCut(d_object, config.near_fraction), config.near_cap);
    for (std::size_t i = 0; i < n; ++i) {
      if (d_object[i] <= cut) {
        regions[Stratum::kOnObject].push_back(static_cast<int>(i));
        taken[i] = 1;
      }
    }
  }
  const double hand_cut = std::min(LowerCut(d_hand, config.near_fraction), config.near_cap);
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i] && d_hand[i] <= hand_cut) {
      regions[Stratum::kOnHand].push_back(static_cast<int>(i));
      taken[i] = 2;
    }
  }

  std::vector<int> candidates;
  std::vector<double> reach;
  for (int v : cloud.boundary.vertices) {
    if (taken[v]) continue;
    candidates.push_back(v);
    reach.push_back((cloud.samples[v].position - cloud.initial_fingertip).norm());
  }
  if (!candidates.empty()) {
    const double cut = UpperCut(reach, config.far_fraction);
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (reach[k] >= cut) regions[Stratum::kInAir].push_back(candidates[k]);
  }

  int mid = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (cloud.samples[i].position - cloud.centroid).squaredNorm();
    if (d < best) best = d, mid = static_cast<int>(i);
  }
  regions[Stratum::kInAirMid].push_back(mid);
  return regions;
}

std::string TargetId(std::string_view scene, Finger finger, Stratum stratum) {
  return fmt::format("{}/{}/{}", scene, ToString(finger), ToString(stratum));
}

std::vector<TargetPoint> SampleTargets(std::string_view scene, std::span<const ReachCloud> clouds,
                                       std::span<const Regions> regions, std::uint64_t seed) {
  if (clouds.size() != regions.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one region set per cloud is required");
  }
  std::vector<TargetPoint> targets;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const Finger finger = clouds[c].finger;
    std::mt19937_64 rng(StableHash(fmt::format("{}/{}", scene, ToString(finger)), seed));
    for (Stratum s : kAllStrata) {
      const auto& members = regions[c][s];
      if (members.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      const int sample = members[pick(rng)];
      targets.push_back({TargetId(scene, finger, s), std::string(scene), finger, s,
                         clouds[c].samples[sample].position, sample});
    }
  }
  return targets;
}

std::vector<TrialPair> PairTargets(std::span<const TargetPoint> targets) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TargetPoint*>> by_scene;
  for (const TargetPoint& t : targets) {
    auto [it, inserted] = by_scene.try_emplace(t.scene);
    if (inserted) order.push_back(t.scene);
    it->second.push_back(&t);
  }
  std::vector<TrialPair> pairs;
  for (const std::string& scene : order) {
    const auto& group = by_scene[scene];
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        pairs.push_back({fmt::format("p{:04d}", pairs.size() + 1), scene, group[i]->id, group[j]->id});
      }
    }
  }
  return pairs;
}

std::vector<std::vector<int>> BalancedLatinSquare(int n) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "balanced latin square needs n >= 2");
  std::vector<int> first;
  for (int k = 0, lo = 1, hi = n - 1; k < n; ++k) {
    if (k == 0) first.push_back(0);
    else if (k % 2 == 1) first.push_back(lo++);
    else first.push_back(hi--);
  }
  std::vector<std::vector<int>> rows;
  for (int r = 0; r < n; ++r) {
    std::vector<int> row;
    for (int v : first) row.push_back((v + r) % n);
    rows.push_back(row);
  }
  if (n % 2 == 1) {
    for (int r = 0; r < n; ++r) {
      std::vector<int> row = rows[r];
      std::reverse(row.begin(), row.end());
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace graspr
