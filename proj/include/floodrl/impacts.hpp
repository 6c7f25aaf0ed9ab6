#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodrl/network.hpp"

namespace floodrl {

/// Piecewise-linear depth (m) -> damage fraction curve, clamped past the last knot.
struct DamageCurve {
  std::vector<double> depths_m;
  std::vector<double> fractions;

  double operator()(double depth_m) const;
  void validate() const;
};

struct RoadClassCost {
  double constructionCost_dkk_per_m2 = 0.0;
  DamageCurve damage;
};

struct CostModel {
  double valueOfTime_dkk_per_h = 100.0;
  double cancellationFactor = 0.8;
  std::map<std::string, RoadClassCost, std::less<>> roadClasses;

  const RoadClassCost& road_class(std::string_view name) const;
  void validate() const;
};

/// Synthetic defaults: damage ramps linearly from 0 to 0.5 over 0 to 1 m.
CostModel default_cost_model();

/// Grammar:
///
///   value_of_time <dkk_per_h>
///   cancellation_factor <fraction>
///   class <name> <constructionCost_dkk_per_m2> <depth>:<fraction> ...
CostModel load_cost_model(std::string_view source);
std::string write_cost_model(const CostModel& model);

/// Per-zone I, D and C for one timestep, in DKK.
struct ZoneImpacts {
  std::vector<double> infrastructure_dkk;
  std::vector<double> delay_dkk;
  std::vector<double> cancellation_dkk;
};

std::vector<double> infrastructure_damage(const TransportNetwork& network,
                                          std::span<const double> segmentDepths,
                                          const CostModel& cost, int zones);

/// Completed trips only: max(0, t - t') * value of time, booked to the origin zone.
std::vector<double> delay_costs(std::span<const Trip> trips, std::span<const TripOutcome> outcomes,
                                const CostModel& cost, int zones);

/// Cancelled trips only: factor * t' * value of time, booked to the origin zone.
std::vector<double> cancellation_costs(std::span<const Trip> trips,
                                       std::span<const TripOutcome> outcomes,
                                       const CostModel& cost, int zones);

ZoneImpacts compute_impacts(const TransportNetwork& network, std::span<const double> segmentDepths,
                            std::span<const Trip> trips, std::span<const TripOutcome> outcomes,
                            const CostModel& cost, int zones);

} // namespace floodrl
