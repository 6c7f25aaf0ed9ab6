#include "floodrl/floodsim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace floodrl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kOcean = -2;
} // namespace

double TerrainGrid::cell_size_m() const { return std::sqrt(cellArea_m2); }

int TerrainGrid::zone_count() const {
  int n = 0;
  for (int z : zoneOf) n = std::max(n, z + 1);
  return n;
}

bool TerrainGrid::is_edge(int cell) const {
  const int x = cell % width;
  const int y = cell / width;
  if (width > 1 && (x == 0 || x == width - 1)) return true;
  if (height > 1 && (y == 0 || y == height - 1)) return true;
  return false;
}

std::vector<int> TerrainGrid::neighbours(int cell) const {
  std::vector<int> out;
  out.reserve(4);
  const int x = cell % width;
  const int y = cell / width;
  if (y > 0) out.push_back(cell - width);
  if (x > 0) out.push_back(cell - 1);
  if (x + 1 < width) out.push_back(cell + 1);
  if (y + 1 < height) out.push_back(cell + width);
  return out;
}

void TerrainGrid::validate() const {
  require(width > 0 && height > 0, ErrorKind::Validation, "terrain must have at least one cell");
  require(cellArea_m2 > 0.0 && std::isfinite(cellArea_m2), ErrorKind::Validation,
          "cell area must be positive");
  require(elevation_m.size() == cell_count() && zoneOf.size() == cell_count(),
          ErrorKind::Validation, "terrain raster sizes do not match width x height");
  for (double e : elevation_m) {
    require(std::isfinite(e), ErrorKind::Validation, "terrain elevations must be finite");
  }
  for (int z : zoneOf) {
    require(z >= kOutletZone, ErrorKind::Validation, "zone ids must be >= -1");
  }
}

TerrainGrid load_terrain(std::string_view source) {
  std::istringstream in{std::string(source)};
  std::string tag;
  TerrainGrid g;
  // Skip comment lines before the header.
  std::string line;
  std::ostringstream body;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    body << line << '\n';
  }
  std::istringstream f(body.str());
  if (!(f >> tag) || tag != "terrain") fail(ErrorKind::Parse, "terrain file: missing 'terrain' header");
  if (!(f >> g.width >> g.height >> g.cellArea_m2)) {
    fail(ErrorKind::Parse, "terrain file: header must be 'terrain <width> <height> <cellArea>'");
  }
  require(g.width > 0 && g.height > 0, ErrorKind::Parse, "terrain file: nonpositive dimensions");
  const std::size_t n = g.cell_count();
  g.elevation_m.resize(n);
  g.zoneOf.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(f >> g.elevation_m[i])) {
      fail(ErrorKind::Parse, "terrain file: expected " + std::to_string(n) + " elevations, got " +
                                 std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(f >> g.zoneOf[i])) {
      fail(ErrorKind::Parse, "terrain file: expected " + std::to_string(n) + " zone ids, got " +
                                 std::to_string(i));
    }
  }
  g.validate();
  return g;
}

std::string write_terrain(const TerrainGrid& g) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "terrain " << g.width << ' ' << g.height << ' ' << g.cellArea_m2 << '\n';
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) out << (x ? " " : "") << g.elevation_m[y * g.width + x];
    out << '\n';
  }
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) out << (x ? " " : "") << g.zoneOf[y * g.width + x];
    out << '\n';
  }
  return out.str();
}

DepressionHierarchy::DepressionHierarchy(const TerrainGrid& grid)
    : cellArea_(grid.cellArea_m2), elevation_(grid.elevation_m) {
  grid.validate();
  const int n = static_cast<int>(grid.cell_count());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto lower = [&](int a, int b) {
    return elevation_[a] < elevation_[b] || (elevation_[a] == elevation_[b] && a < b);
  };
  std::sort(order.begin(), order.end(), lower);

  std::vector<int> uf(n, -1);
  std::vector<int> compNode(n, kOcean);
  const auto find = [&](int c) {
    int r = c;
    while (uf[r] != r) r = uf[r];
    while (uf[c] != r) {
      const int next = uf[c];
      uf[c] = r;
      c = next;
    }
    return r;
  };

  drainLeaf_.assign(n, kOutletTarget);
  owner_.assign(n, -1);
  std::vector<char> processed(n, 0);
  std::vector<int> joinedOcean; // depressions in the order they reached the outlet

  const auto newNode = [&]() {
    Depression d;
    d.id = static_cast<int>(nodes_.size());
    d.rimElevation_m = kInf;
    d.capacity_m3 = kInf;
    nodes_.push_back(d);
    data_.emplace_back();
    return d.id;
  };
  const auto subtreeStats = [&](int node, std::size_t& count, double& sum) {
    count = data_[node].childCellCount + data_[node].ownCells.size();
    sum = data_[node].childElevationSum;
    for (int c : data_[node].ownCells) sum += elevation_[c];
  };
  // Lowest processed neighbour of `c` whose component root differs from `exclude`.
  const auto lowestNeighbour = [&](int c, int excludeRoot, int onlyRoot) {
    int best = -1;
    for (int nb : grid.neighbours(c)) {
      if (!processed[nb]) continue;
      const int r = find(nb);
      if (excludeRoot >= 0 && r == excludeRoot) continue;
      if (onlyRoot >= 0 && r != onlyRoot) continue;
      if (best < 0 || lower(nb, best)) best = nb;
    }
    return best;
  };
  const auto close = [&](int node, int rimCell, int spillVia) {
    Depression& d = nodes_[node];
    d.rimElevation_m = elevation_[rimCell];
    std::size_t count = 0;
    double sum = 0.0;
    subtreeStats(node, count, sum);
    d.capacity_m3 = std::max(0.0, cellArea_ * (static_cast<double>(count) * d.rimElevation_m - sum));
    d.spillTarget = spillVia >= 0 ? drainLeaf_[spillVia] : kOutletTarget;
  };

  for (int c : order) {
    const bool outletCell = grid.is_outlet(c);
    std::vector<int> roots;
    int lowestNb = -1;
    for (int nb : grid.neighbours(c)) {
      if (!processed[nb]) continue;
      const int r = find(nb);
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
      if (lowestNb < 0 || lower(nb, lowestNb)) lowestNb = nb;
    }
    processed[c] = 1;
    uf[c] = c;

    if (grid.zoneOf[c] == TerrainGrid::kOutletZone) {
      drainLeaf_[c] = kOutletTarget;
    } else if (lowestNb >= 0) {
      drainLeaf_[c] = drainLeaf_[lowestNb];
    }

    if (roots.empty()) {
      if (outletCell) {
        compNode[c] = kOcean;
      } else {
        const int leaf = newNode();
        data_[leaf].ownCells.push_back(c);
        owner_[c] = leaf;
        drainLeaf_[c] = leaf;
        compNode[c] = leaf;
      }
      continue;
    }

    bool touchesOcean = outletCell;
    std::vector<int> depRoots;
    for (int r : roots) {
      if (compNode[r] == kOcean) touchesOcean = true;
      else depRoots.push_back(r);
    }

    // Two or more depressions meeting at c become children of a new node
    // owning c; each child spills over c towards its lowest outside neighbour.
    const auto merge = [&](std::vector<int> deps) {
      std::sort(deps.begin(), deps.end(), [&](int a, int b) { return compNode[a] < compNode[b]; });
      const int parent = newNode();
      for (int r : deps) {
        const int node = compNode[r];
        close(node, c, lowestNeighbour(c, r, -1));
        data_[node].entryLeaf = drainLeaf_[lowestNeighbour(c, -1, r)];
        nodes_[node].parent = parent;
        nodes_[parent].children.push_back(node);
        std::size_t count = 0;
        double sum = 0.0;
        subtreeStats(node, count, sum);
        data_[parent].childCellCount += count;
        data_[parent].childElevationSum += sum;
      }
      data_[parent].ownCells.push_back(c);
      owner_[c] = parent;
      return parent;
    };

    if (touchesOcean) {
      // Overflow runs down to the lowest neighbour already draining out; on
      // the border with no such neighbour it leaves the domain at c.
      int oceanNb = -1;
      for (int nb : grid.neighbours(c)) {
        if (!processed[nb] || uf[nb] < 0 || compNode[find(nb)] != kOcean) continue;
        if (oceanNb < 0 || lower(nb, oceanNb)) oceanNb = nb;
      }
      const int spillVia = grid.zoneOf[c] == TerrainGrid::kOutletZone ? c : oceanNb;
      if (depRoots.size() > 1) {
        const int parent = merge(depRoots);
        close(parent, c, spillVia);
        joinedOcean.push_back(parent);
      } else if (depRoots.size() == 1) {
        close(compNode[depRoots.front()], c, spillVia);
        joinedOcean.push_back(compNode[depRoots.front()]);
      }
      for (int r : roots) uf[r] = c;
      compNode[c] = kOcean;
    } else if (depRoots.size() == 1) {
      const int r = depRoots.front();
      uf[c] = r;
      data_[compNode[r]].ownCells.push_back(c);
      owner_[c] = compNode[r];
    } else {
      const int parent = merge(depRoots);
      for (int r : depRoots) uf[r] = c;
      compNode[c] = parent;
    }
  }

  // Depressions that never reach the outlet absorb everything they receive.
  for (const auto& d : nodes_) {
    if (d.parent < 0 && !std::isfinite(d.rimElevation_m)) roots_.push_back(d.id);
  }
  for (auto it = joinedOcean.rbegin(); it != joinedOcean.rend(); ++it) roots_.push_back(*it);

  // Export member cells: own cells plus all descendants' cells.
  for (auto& d : nodes_) {
    d.cells = data_[d.id].ownCells;
    for (int child : d.children) {
      d.cells.insert(d.cells.end(), nodes_[child].cells.begin(), nodes_[child].cells.end());
    }
    std::sort(d.cells.begin(), d.cells.end());
  }
}

double DepressionHierarchy::solve_level(int node, double volume) const {
  const NodeData& nd = data_[node];
  double count = static_cast<double>(nd.childCellCount);
  double sum = nd.childElevationSum;
  const double target = volume / cellArea_;
  for (int c : nd.ownCells) {
    const double e = elevation_[c];
    if (count > 0.0 && count * e - sum >= target) break;
    count += 1.0;
    sum += e;
  }
  double level = (target + sum) / count;
  if (level > nodes_[node].rimElevation_m) level = nodes_[node].rimElevation_m;
  return level;
}

double DepressionHierarchy::fill_node(int node, std::vector<double>& subtotal,
                                      std::vector<double>& level) const {
  const Depression& d = nodes_[node];
  const auto fillSelf = [&](double water) {
    if (water >= d.capacity_m3) {
      level[node] = d.rimElevation_m;
      return water - d.capacity_m3;
    }
    level[node] = solve_level(node, water);
    return 0.0;
  };
  if (d.children.empty()) return fillSelf(subtotal[node]);

  // Pass overflow between children until each holds at most its capacity.
  // Water a child spills past its siblings leaves this node unstored; water
  // with no underfull sibling left raises this node's own lake.
  const std::size_t m = d.children.size();
  constexpr std::size_t kOut = static_cast<std::size_t>(-1);
  const auto capOf = [&](std::size_t i) { return nodes_[d.children[i]].capacity_m3; };
  const auto siblingOf = [&](int leaf) {
    int x = leaf;
    while (x >= 0 && nodes_[x].parent != node) x = nodes_[x].parent;
    for (std::size_t j = 0; j < m; ++j) {
      if (x >= 0 && d.children[j] == x) return j;
    }
    return kOut;
  };
  const auto addAlong = [&](int leaf, int stopAt, double amount) {
    for (int x = leaf; x >= 0; x = nodes_[x].parent) {
      subtotal[x] += amount;
      if (x == stopAt) break;
    }
  };
  std::vector<double> held;
  for (int k : d.children) held.push_back(subtotal[k]);
  double passedOn = 0.0;
  double pooled = 0.0;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (held[i] <= capOf(i)) continue;
      const double excess = held[i] - capOf(i);
      held[i] = capOf(i);
      subtotal[d.children[i]] -= excess;
      moved = true;
      // follow the spill chain through full siblings
      int leaf = nodes_[d.children[i]].spillTarget;
      std::size_t t = siblingOf(leaf);
      std::vector<char> seen(m, 0);
      seen[i] = 1;
      while (t != kOut && held[t] >= capOf(t) && !seen[t]) {
        seen[t] = 1;
        leaf = nodes_[d.children[t]].spillTarget;
        t = siblingOf(leaf);
      }
      if (t == kOut) {
        passedOn += excess;
        continue;
      }
      if (held[t] >= capOf(t)) {
        t = kOut;
        for (std::size_t j = 0; j < m; ++j) {
          if (held[j] < capOf(j)) {
            t = j;
            break;
          }
        }
        if (t == kOut) {
          pooled += excess;
          continue;
        }
        leaf = data_[d.children[t]].entryLeaf;
      }
      held[t] += excess;
      addAlong(leaf, d.children[t], excess);
    }
  }
  for (int k : d.children) fill_node(k, subtotal, level);
  if (pooled <= 0.0) return passedOn;
  double childCapacity = 0.0;
  for (std::size_t j = 0; j < m; ++j) childCapacity += capOf(j);
  return passedOn + fillSelf(childCapacity + pooled);
}

FloodField DepressionHierarchy::fill(std::span<const double> inflow) const {
  FloodField field;
  const std::size_t n = elevation_.size();
  require(inflow.size() == n, ErrorKind::Validation, "inflow vector does not match the terrain");
  field.depth_m.assign(n, 0.0);

  std::vector<double> subtotal(nodes_.size(), 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    field.input_m3 += inflow[c];
    const int leaf = drainLeaf_[c];
    if (leaf == kOutletTarget) field.outflow_m3 += inflow[c];
    else subtotal[leaf] += inflow[c];
  }
  // Children precede parents in id order.
  for (const auto& d : nodes_) {
    if (d.parent >= 0) subtotal[d.parent] += subtotal[d.id];
  }

  std::vector<double> level(nodes_.size(), -kInf);
  for (int root : roots_) {
    const double overflow = fill_node(root, subtotal, level);
    if (overflow <= 0.0) continue;
    const int target = nodes_[root].spillTarget;
    if (target == kOutletTarget) {
      field.outflow_m3 += overflow;
    } else {
      for (int x = target; x >= 0; x = nodes_[x].parent) subtotal[x] += overflow;
    }
  }

  std::vector<double> effective(nodes_.size(), -kInf);
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    const int p = nodes_[id].parent;
    effective[id] = std::max(level[id], p >= 0 ? effective[p] : -kInf);
  }
  for (std::size_t c = 0; c < n; ++c) {
    const int o = owner_[c];
    if (o >= 0) field.depth_m[c] = std::max(0.0, effective[o] - elevation_[c]);
  }
  return field;
}

std::vector<Depression> build_depression_hierarchy(const TerrainGrid& grid) {
  return DepressionHierarchy(grid).depressions();
}

double FloodField::stored_m3(double cellArea) const {
  double s = 0.0;
  for (double d : depth_m) s += d;
  return s * cellArea;
}

FloodField simulate_flood(const DepressionHierarchy& hierarchy, const TerrainGrid& grid,
                          const RainEvent& event, std::span<const double> zoneCapture_m3) {
  require(event.depth_mm >= 0.0 && std::isfinite(event.depth_mm), ErrorKind::Validation,
          "rain depth must be finite and nonnegative");
  const int zones = grid.zone_count();
  require(zoneCapture_m3.empty() || static_cast<int>(zoneCapture_m3.size()) >= zones,
          ErrorKind::Validation, "zone capture vector shorter than the zone count");
  for (double c : zoneCapture_m3) {
    require(c >= 0.0 && !std::isnan(c), ErrorKind::Validation, "capture volumes must be >= 0");
  }
  const double perCell = event.depth_mm / 1000.0 * grid.cellArea_m2;

  std::vector<std::size_t> zoneCells(zones, 0);
  for (int z : grid.zoneOf) {
    if (z >= 0) ++zoneCells[z];
  }
  std::vector<double> keep(zones, 1.0);
  if (!zoneCapture_m3.empty() && perCell > 0.0) {
    for (int z = 0; z < zones; ++z) {
      const double input = perCell * static_cast<double>(zoneCells[z]);
      if (input <= 0.0) continue;
      keep[z] = (input - std::min(zoneCapture_m3[z], input)) / input;
    }
  }
  std::vector<double> inflow(grid.cell_count());
  for (std::size_t c = 0; c < inflow.size(); ++c) {
    const int z = grid.zoneOf[c];
    inflow[c] = z >= 0 ? perCell * keep[z] : perCell;
  }
  return hierarchy.fill(inflow);
}

FloodField simulate_flood(const TerrainGrid& grid, const RainEvent& event,
                          std::span<const double> zoneCapture_m3) {
  return simulate_flood(DepressionHierarchy(grid), grid, event, zoneCapture_m3);
}

void georeference(TransportNetwork& network, const TerrainGrid& grid) {
  const double size = grid.cell_size_m();
  const auto& nodes = network.nodes();
  for (Segment& s : network.mutable_segments()) {
    const auto& a = nodes[s.from];
    const auto& b = nodes[s.to];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (size * 0.25))));
    std::set<int> cells;
    for (int k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / steps;
      const double px = a.x + t * (b.x - a.x);
      const double py = a.y + t * (b.y - a.y);
      int cx = static_cast<int>(std::floor(px / size));
      int cy = static_cast<int>(std::floor(py / size));
      // Points on the far raster border belong to the last cell.
      if (cx == grid.width && px <= grid.width * size) cx = grid.width - 1;
      if (cy == grid.height && py <= grid.height * size) cy = grid.height - 1;
      if (cx < 0 || cy < 0 || cx >= grid.width || cy >= grid.height) {
        fail(ErrorKind::Validation,
             "mapping error: segment " + std::to_string(s.id) + " leaves the terrain raster");
      }
      cells.insert(cy * grid.width + cx);
    }
    s.cells.assign(cells.begin(), cells.end());
  }
}

std::vector<double> project_to_segments(const FloodField& field, const TerrainGrid& grid,
                                        const TransportNetwork& network,
                                        std::span<const double> pavementCapture_m) {
  const auto& segs = network.segments();
  require(pavementCapture_m.empty() || pavementCapture_m.size() == segs.size(),
          ErrorKind::Validation, "pavement capture vector does not match the network");
  require(field.depth_m.size() == grid.cell_count(), ErrorKind::Validation,
          "flood field does not match the terrain");
  std::vector<double> out(segs.size(), 0.0);
  for (const Segment& s : segs) {
    if (s.cells.empty()) {
      fail(ErrorKind::Validation,
           "mapping error: segment " + std::to_string(s.id) + " covers no terrain cell");
    }
    double d = 0.0;
    for (int c : s.cells) d = std::max(d, field.depth_m[c]);
    if (!pavementCapture_m.empty()) d -= pavementCapture_m[s.id];
    out[s.id] = std::max(0.0, d);
  }
  return out;
}

} // namespace floodrl
