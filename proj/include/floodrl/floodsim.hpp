#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodrl/climate.hpp"
#include "floodrl/network.hpp"

namespace floodrl {

/// Row-major elevation raster with a traffic-zone label per cell.
///
/// Cells on the outer edge of the raster drain out of the domain at their own
/// elevation; a raster of height (or width) one is treated as a transect, so
/// only its two ends are edges. Cells labelled kOutletZone are interior sinks.
struct TerrainGrid {
  static constexpr int kOutletZone = -1;

  int width = 0;
  int height = 0;
  double cellArea_m2 = 1.0;
  std::vector<double> elevation_m;
  std::vector<int> zoneOf;

  std::size_t cell_count() const { return static_cast<std::size_t>(width) * height; }
  double cell_size_m() const;
  int zone_count() const;
  bool is_edge(int cell) const;
  bool is_outlet(int cell) const { return is_edge(cell) || zoneOf[cell] == kOutletZone; }
  /// In-grid 4-neighbours.
  std::vector<int> neighbours(int cell) const;
  void validate() const;
};

/// Grammar:
///
///   terrain <width> <height> <cellArea_m2>
///   <height rows of width elevations>
///   <height rows of width zone ids, -1 marks an outlet cell>
TerrainGrid load_terrain(std::string_view source);
std::string write_terrain(const TerrainGrid& grid);

inline constexpr int kOutletTarget = -1;

struct Depression {
  int id = 0;
  /// Every member cell, including those of merged sub-depressions.
  std::vector<int> cells;
  /// +inf when the depression never overflows (no drainage path at all).
  double rimElevation_m = 0.0;
  double capacity_m3 = 0.0;
  /// Leaf depression receiving the overflow, or kOutletTarget.
  int spillTarget = kOutletTarget;
  /// Depression formed when this one merged with its siblings, or -1 when it
  /// spills towards the outlet.
  int parent = -1;
  std::vector<int> children;
};

struct FloodField {
  std::vector<double> depth_m;
  double outflow_m3 = 0.0;
  /// Rainfall volume after zone captures; equals stored volume plus outflow.
  double input_m3 = 0.0;

  double stored_m3(double cellArea) const;
};

/// Merge tree of terrain depressions, built once per terrain by sweeping
/// cells in ascending (elevation, index) order with a union-find.
class DepressionHierarchy {
public:
  explicit DepressionHierarchy(const TerrainGrid& grid);

  const std::vector<Depression>& depressions() const { return nodes_; }
  /// Leaf depression that rain on `cell` ends in, or kOutletTarget.
  int drain_target(int cell) const { return drainLeaf_[cell]; }
  /// Smallest depression whose own cells include `cell`, or -1.
  int owner(int cell) const { return owner_[cell]; }

  /// Fills depressions from per-cell inflow volumes (m3). Water entering an
  /// outlet cell or overflowing to the outlet is reported as outflow.
  FloodField fill(std::span<const double> cellInflow_m3) const;

private:
  struct NodeData {
    std::vector<int> ownCells;      // ascending (elevation, index)
    std::size_t childCellCount = 0; // cells of all children subtrees
    double childElevationSum = 0.0;
    int entryLeaf = kOutletTarget;  // where sibling overflow enters this node
  };

  double solve_level(int node, double volume) const;
  double fill_node(int node, std::vector<double>& leafIn, std::vector<double>& level) const;

  std::vector<Depression> nodes_;
  std::vector<NodeData> data_;
  std::vector<int> drainLeaf_;
  std::vector<int> owner_;
  std::vector<int> roots_; // top-level depressions, in descending outlet-join order
  double cellArea_ = 1.0;
  std::vector<double> elevation_;
};

std::vector<Depression> build_depression_hierarchy(const TerrainGrid& grid);

/// zoneCapture_m3 may be empty (no capture) or hold one entry per zone.
FloodField simulate_flood(const DepressionHierarchy& hierarchy, const TerrainGrid& grid,
                          const RainEvent& event, std::span<const double> zoneCapture_m3);
FloodField simulate_flood(const TerrainGrid& grid, const RainEvent& event,
                          std::span<const double> zoneCapture_m3 = {});

/// Assigns each segment the raster cells its straight line passes through.
/// Node coordinates are metres from the raster's lower-left corner.
void georeference(TransportNetwork& network, const TerrainGrid& grid);

/// Segment depth = max covered cell depth minus pavement capture, floored at 0.
/// pavementCapture_m may be empty or hold one entry per segment.
std::vector<double> project_to_segments(const FloodField& field, const TerrainGrid& grid,
                                        const TransportNetwork& network,
                                        std::span<const double> pavementCapture_m);

} // namespace floodrl
