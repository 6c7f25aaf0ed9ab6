#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floodrl/common.hpp"

namespace floodrl {

enum class RcpScenario { RCP26 = 0, RCP45 = 1, RCP85 = 2 };

inline constexpr std::array<RcpScenario, 3> kAllScenarios{RcpScenario::RCP26, RcpScenario::RCP45,
                                                         RcpScenario::RCP85};

std::string to_string(RcpScenario s);
/// Accepts "RCP26", "rcp26", "rcp2.6" and friends.
std::optional<RcpScenario> parse_scenario(std::string_view text);
/// Like parse_scenario but throws a Domain error listing the valid ids.
RcpScenario scenario_or_throw(std::string_view text);

struct TimeSlice {
  int startYear = 0;
  int endYear = 0;

  bool contains(int year) const { return year >= startYear && year <= endYear; }
  friend auto operator<=>(const TimeSlice&, const TimeSlice&) = default;
};

inline constexpr std::array<TimeSlice, 3> kCanonicalSlices{
    TimeSlice{2011, 2040}, TimeSlice{2041, 2070}, TimeSlice{2071, 2100}};

/// Inverse CDF of daily rainfall totals, as (probability, depth) knots.
struct RainQuantileTable {
  std::vector<double> probabilities;
  std::vector<double> depths_mm;

  /// Throws Validation if knots are not strictly ascending in probability,
  /// nondecreasing in depth, within [0,1], or mismatched in length.
  void validate() const;
  /// Linear interpolation between knots; clamps outside the tabulated range.
  double quantile(double u) const;
};

struct RainEvent {
  int year = 0;
  double depth_mm = 0.0;
};

class ScenarioModel {
public:
  using Key = std::pair<RcpScenario, TimeSlice>;

  void set_table(RcpScenario s, TimeSlice slice, RainQuantileTable table);
  const RainQuantileTable& table(RcpScenario s, int year) const;
  const std::map<Key, RainQuantileTable>& tables() const { return tables_; }

  /// Completeness over the canonical slices, per-table validity and the
  /// severity ordering RCP26 <= RCP45 <= RCP85 at every probability.
  void validate() const;

private:
  std::map<Key, RainQuantileTable> tables_;
};

/// Parses the scenario file grammar:
///
///   # comment
///   <scenario> <startYear> <endYear> <p>:<depth_mm> <p>:<depth_mm> ...
///
/// one record per (scenario, slice), knots in ascending probability.
ScenarioModel load_scenario_model(std::string_view source);
std::string write_scenario_model(const ScenarioModel& model);

/// Depth for a given uniform variate; the deterministic core of sample_event.
double event_depth(const ScenarioModel& model, RcpScenario s, int year, double u);

/// Draws exactly one uniform from rng, so event streams stay paired across
/// scenarios that share a seed.
RainEvent sample_event(const ScenarioModel& model, RcpScenario s, int year, Rng& rng);

/// Scales base_table depths by scenario multiplier times slice multiplier.
/// slice_multipliers[s][k] is the factor for scenario s in canonical slice k.
ScenarioModel synth_scenario_model(const std::array<double, 3>& severity_multipliers,
                                   const RainQuantileTable& base_table,
                                   const std::array<std::array<double, 3>, 3>& slice_multipliers);
ScenarioModel synth_scenario_model(const std::array<double, 3>& severity_multipliers,
                                   const RainQuantileTable& base_table);

/// Synthetic annual-event quantile table shipped as the default base.
RainQuantileTable default_base_table();

} // namespace floodrl
