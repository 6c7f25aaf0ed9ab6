#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "floodrl/adaptation.hpp"
#include "floodrl/climate.hpp"
#include "floodrl/floodsim.hpp"
#include "floodrl/impacts.hpp"
#include "floodrl/network.hpp"

namespace floodrl {

/// Knobs for the synthetic city. Zones are rectangular blocks laid out in
/// rows; streets form a lattice shared by all three modes.
struct SynthOptions {
  int zones = 12;
  int trips = 400;
  std::uint64_t seed = 7;
  double cellSize_m = 5.0;
  int blockCells = 16;
  int streetSpacingCells = 8;
  /// Share of zones that get a terrain hollow.
  double hollowFraction = 0.5;
  double hollowDepth_m = 1.2;
  std::array<double, 3> modeShares{0.027, 0.193, 0.780}; // car, bicycle, walk
  std::array<double, 3> severity{1.0, 1.15, 1.35};       // RCP26, RCP45, RCP85

  void validate() const;
};

struct SynthCity {
  TerrainGrid terrain;
  TransportNetwork network;
  std::vector<Trip> trips;
};

/// Deterministic per seed; network is georeferenced, trips prepared.
SynthCity synth_city(const SynthOptions& options);

/// Trip counts per mode by largest remainder, so shares are as exact as the
/// total allows.
std::array<int, 3> split_by_shares(int total, const std::array<double, 3>& shares);

/// Everything an environment needs.
struct World {
  std::string name = "world";
  std::uint64_t seed = 0;
  TerrainGrid terrain;
  TransportNetwork network;
  std::vector<Trip> trips;
  ScenarioModel climate;
  CostModel costs;
  MeasureCatalog catalog;

  int zone_count() const { return terrain.zone_count(); }
};

World synth_world(const SynthOptions& options, std::string name = "synthetic");

/// Directory layout: world.json, terrain.txt, network.txt, trips.txt,
/// scenarios.txt, costs.txt, measures.txt. Refuses to overwrite unless force.
void save_world(const World& world, const std::filesystem::path& dir, bool force = false);
World load_world(const std::filesystem::path& dir);

/// Undirected zone adjacency from shared cell borders.
struct ZoneGraph {
  int zones = 0;
  std::vector<std::pair<int, int>> edges; // a < b, sorted

  bool connected() const;
  std::vector<std::vector<int>> adjacency_lists() const;
};

ZoneGraph zone_graph(const TerrainGrid& terrain);

} // namespace floodrl
