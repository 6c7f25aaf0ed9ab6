#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "floodrl/network.hpp"

namespace floodrl {

enum class MeasureId {
  DoNothing,
  BioretentionPlanters,
  Soakaway,
  StorageTank,
  PorousAsphalt,
  PerviousConcrete,
  PICP,
  GridPavers,
};

inline constexpr int kActionCount = 8;
inline constexpr int kPhysicalMeasureCount = kActionCount - 1;

std::string_view to_string(MeasureId id);
MeasureId parse_measure(std::string_view name);

enum class EffectKind { None, Volume_m3, Depth_m };
enum class ApplicationRule { None, PerPlanterEvery30m, OncePerRoad, PerSurfaceArea };

std::string_view to_string(EffectKind k);
std::string_view to_string(ApplicationRule r);

struct MeasureSpec {
  MeasureId id = MeasureId::DoNothing;
  EffectKind effectKind = EffectKind::None;
  double effectMagnitude = 0.0;
  ApplicationRule rule = ApplicationRule::None;
  double implCost_dkk = 0.0;
  double maintCost_dkk_per_year = 0.0;
  int lifetime_years = 0;
};

/// Eight entries indexed by MeasureId.
class MeasureCatalog {
public:
  MeasureCatalog();
  explicit MeasureCatalog(std::array<MeasureSpec, kActionCount> specs);

  const MeasureSpec& operator[](MeasureId id) const { return specs_[static_cast<int>(id)]; }
  const MeasureSpec& at(int action) const;
  const std::array<MeasureSpec, kActionCount>& specs() const { return specs_; }
  void validate() const;

private:
  std::array<MeasureSpec, kActionCount> specs_;
};

/// Rates from the published measure table (DKK, m3, m, years).
MeasureCatalog default_catalog();

/// Grammar, one line per physical measure (DoNothing is implicit):
///
///   measure <Name> <volume_m3|depth_m> <magnitude> <rule> <implCost> <maintCost> <lifetime>
///
/// with <rule> one of per_planter_every_30m, once_per_road, per_surface_area.
MeasureCatalog load_catalog(std::string_view source);
std::string write_catalog(const MeasureCatalog& catalog);

/// Car roads of one zone. A road is an unordered node pair; the two
/// directions of a street count once.
struct ZoneRoadStats {
  std::vector<double> roadLengths_m;
  double surfaceArea_m2 = 0.0;
  /// Every car segment of the zone, both directions.
  std::vector<int> carSegments;

  int road_count() const { return static_cast<int>(roadLengths_m.size()); }
  int planter_count() const;
};

std::vector<ZoneRoadStats> zone_road_stats(const TransportNetwork& network, int zones);

double deployment_units(const MeasureSpec& spec, const ZoneRoadStats& stats);

struct Deployment {
  int zone = 0;
  MeasureId measure = MeasureId::DoNothing;
  int deployYear = 0;
  double units = 0.0;
  double baseEffect = 0.0;
  int lifetime_years = 0;
};

/// (baseEffect, age, lifetime) -> effect.
using DecayFunction = std::function<double(double, int, int)>;
double linear_decay(double baseEffect, int age, int lifetime);

double decayed_effect(const Deployment& dep, int currentYear,
                      const DecayFunction& decay = linear_decay);

using ActionMask = std::array<bool, kActionCount>;

struct YearAccounting {
  std::vector<double> maintenance_dkk;   // per zone
  std::vector<double> captureVolume_m3;  // per zone
  std::vector<double> captureDepth_m;    // per segment
  /// zones x kPhysicalMeasureCount decayed effects, row-major.
  std::vector<double> status;
};

class DeploymentLedger {
public:
  DeploymentLedger(MeasureCatalog catalog, std::vector<ZoneRoadStats> zoneStats,
                   std::size_t segmentCount, DecayFunction decay = linear_decay);

  int zone_count() const { return static_cast<int>(stats_.size()); }
  const std::vector<Deployment>& active() const { return active_; }
  const MeasureCatalog& catalog() const { return catalog_; }
  const std::vector<ZoneRoadStats>& zone_stats() const { return stats_; }

  ActionMask action_mask(int zone) const;
  /// Returns the implementation cost. Masked or DoNothing-as-deploy throws.
  double deploy(int zone, MeasureId measure, int year);
  /// Bills and measures every active deployment at `currentYear`, then drops
  /// the ones that reached their lifetime.
  YearAccounting advance_year(int currentYear);
  void clear() { active_.clear(); }

private:
  MeasureCatalog catalog_;
  std::vector<ZoneRoadStats> stats_;
  std::size_t segmentCount_;
  DecayFunction decay_;
  std::vector<Deployment> active_;
};

} // namespace floodrl
