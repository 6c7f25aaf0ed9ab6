#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodrl/common.hpp"

namespace floodrl {

enum class Mode { Car = 0, Bicycle = 1, Walk = 2 };
inline constexpr std::array<Mode, 3> kAllModes{Mode::Car, Mode::Bicycle, Mode::Walk};

std::string to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view text);

inline constexpr double kBicycleMaxSpeed_kmh = 16.2;
inline constexpr double kWalkMaxSpeed_kmh = 5.65;

/// Water depth at which a mode can no longer traverse a segment.
double impassable_depth_m(Mode m);

/// Linear decay from maxSpeed at zero depth to zero at the mode's cutoff.
double disrupted_speed(Mode mode, double maxSpeed_kmh, double depth_m);

/// Pluggable depth-disruption curve: (mode, maxSpeed_kmh, depth_m) -> km/h.
using SpeedFunction = std::function<double(Mode, double, double)>;

struct NetworkNode {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  int zone = 0;
};

struct Segment {
  int id = 0;
  int from = 0;
  int to = 0;
  Mode mode = Mode::Car;
  double length_m = 0.0;
  double maxSpeed_kmh = 0.0;
  double surfaceArea_m2 = 0.0;
  std::string roadClass;
  /// Zone of the start node.
  int zone = 0;
  /// Raster cells under the segment; filled by georeference().
  std::vector<int> cells;
};

/// Shared node set with mode-tagged directed segments. Node and segment ids
/// are their positions in the respective vectors.
class TransportNetwork {
public:
  TransportNetwork() = default;
  TransportNetwork(std::vector<NetworkNode> nodes, std::vector<Segment> segments);

  const std::vector<NetworkNode>& nodes() const { return nodes_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::vector<Segment>& mutable_segments() { return segments_; }
  /// Outgoing segment ids of a node for one mode, ascending.
  std::span<const int> outgoing(Mode m, int node) const;
  /// Nodes of a zone with at least one outgoing segment of the mode.
  const std::vector<int>& zone_nodes(Mode m, int zone) const;
  int zone_count() const { return zoneCount_; }

private:
  std::vector<NetworkNode> nodes_;
  std::vector<Segment> segments_;
  std::array<std::vector<std::vector<int>>, 3> outgoing_;
  std::array<std::vector<std::vector<int>>, 3> zoneNodes_;
  int zoneCount_ = 0;
};

/// Grammar, one record per line, '#' comments:
///
///   node <id> <x_m> <y_m> <zone>
///   segment <id> <from> <to> <car|bicycle|walk> <length_m> <maxSpeed_kmh> <surfaceArea_m2> <roadClass>
TransportNetwork load_network(std::string_view source);
std::string write_network(const TransportNetwork& network);

struct Trip {
  int id = 0;
  Mode mode = Mode::Walk;
  int originZone = 0;
  int destinationZone = 0;
  int originNode = -1;
  int destinationNode = -1;
  /// Free-flow travel time and route, set by prepare_trips.
  double baseTime_h = 0.0;
  std::vector<int> basePath;
};

enum class TripStatus { Completed, Cancelled };

struct TripOutcome {
  int tripId = 0;
  TripStatus status = TripStatus::Completed;
  double time_h = 0.0;
};

/// Grammar: `trip <id> <mode> <originZone> <destZone> [<originNode> <destNode>]`.
std::vector<Trip> load_trips(std::string_view source);
std::string write_trips(std::span<const Trip> trips);

/// Samples missing origin/destination nodes uniformly over zone nodes and
/// computes free-flow base times. Throws Validation if a trip is unroutable
/// on the dry network.
void prepare_trips(const TransportNetwork& network, std::vector<Trip>& trips, std::uint64_t seed);

/// Shortest path by travel time over segments with positive speed. Ties are
/// broken by fewer segments, then by the lexicographically smaller sequence
/// of segment ids.
TripOutcome route_trip(const TransportNetwork& network, const Trip& trip,
                       std::span<const double> segmentDepths, const SpeedFunction& speed = {});

/// Outcomes aligned with trips. Trips sharing (mode, origin) share one search;
/// a prepared trip whose free-flow route is dry keeps its base time.
std::vector<TripOutcome> simulate_all(const TransportNetwork& network, std::span<const Trip> trips,
                                      std::span<const double> segmentDepths,
                                      const SpeedFunction& speed = {});

/// Single-source shortest times (hours) for one mode; +inf where unreachable.
std::vector<double> shortest_times(const TransportNetwork& network, Mode mode, int origin,
                                   std::span<const double> segmentDepths,
                                   const SpeedFunction& speed = {});

} // namespace floodrl
