#include "floodrl/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

namespace floodrl {

void SynthOptions::validate() const {
  require(zones >= 1, ErrorKind::Validation, "synth_city needs at least one zone");
  require(trips >= 0, ErrorKind::Validation, "trip count must be nonnegative");
  require(cellSize_m > 0.0, ErrorKind::Validation, "cell size must be positive");
  require(streetSpacingCells >= 2 && blockCells >= streetSpacingCells, ErrorKind::Validation,
          "blocks must hold at least one street spacing");
  require(hollowFraction >= 0.0 && hollowFraction <= 1.0, ErrorKind::Validation,
          "hollow fraction must lie in [0, 1]");
  require(hollowDepth_m >= 0.0, ErrorKind::Validation, "hollow depth must be nonnegative");
  double total = 0.0;
  for (double s : modeShares) {
    require(s >= 0.0, ErrorKind::Validation, "mode shares must be nonnegative");
    total += s;
  }
  require(std::abs(total - 1.0) < 1e-6, ErrorKind::Validation, "mode shares must sum to 1");
}

std::array<int, 3> split_by_shares(int total, const std::array<double, 3>& shares) {
  std::array<int, 3> counts{};
  std::array<double, 3> rest{};
  int used = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = total * shares[i];
    counts[i] = static_cast<int>(std::floor(exact));
    rest[i] = exact - counts[i];
    used += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rest[a] > rest[b]; });
  for (int k = 0; used < total; k = (k + 1) % 3, ++used) ++counts[order[k]];
  return counts;
}

namespace {

struct Layout {
  int width = 0;
  int height = 0;
  std::vector<int> zoneOf;
  std::vector<std::array<int, 4>> boxes; // x0, x1, y0, y1 in cells, half-open
};

// Zones in rows of near-equal count, each row split evenly in x.
Layout block_layout(int zones, int block) {
  const int rows = std::max(1, static_cast<int>(std::lround(std::sqrt(zones))));
  std::vector<int> perRow(rows, zones / rows);
  for (int r = 0; r < zones % rows; ++r) ++perRow[r];
  const int cols = *std::max_element(perRow.begin(), perRow.end());

  Layout l;
  l.width = cols * block;
  l.height = rows * block;
  l.zoneOf.assign(static_cast<std::size_t>(l.width) * l.height, 0);
  int zone = 0;
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < perRow[r]; ++k, ++zone) {
      const int x0 = l.width * k / perRow[r];
      const int x1 = l.width * (k + 1) / perRow[r];
      l.boxes.push_back({x0, x1, r * block, (r + 1) * block});
      for (int y = r * block; y < (r + 1) * block; ++y) {
        for (int x = x0; x < x1; ++x) l.zoneOf[y * l.width + x] = zone;
      }
    }
  }
  return l;
}

} // namespace

SynthCity synth_city(const SynthOptions& o) {
  o.validate();
  Rng rng(mix_seed(o.seed, 0x5171));
  const Layout layout = block_layout(o.zones, o.blockCells);
  const double cs = o.cellSize_m;

  SynthCity city;
  TerrainGrid& g = city.terrain;
  g.width = layout.width;
  g.height = layout.height;
  g.cellArea_m2 = cs * cs;
  g.zoneOf = layout.zoneOf;
  g.elevation_m.resize(g.cell_count());
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      // gentle tilt towards the x = 0 shore plus a little roughness
      g.elevation_m[y * g.width + x] =
          5.0 + 0.004 * (x + 0.5) * cs + 0.001 * (y + 0.5) * cs + 0.01 * rng.normal();
    }
  }

  std::vector<int> order(o.zones);
  std::iota(order.begin(), order.end(), 0);
  for (int i = o.zones - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  const int hollows = static_cast<int>(std::ceil(o.hollowFraction * o.zones - 1e-9));
  for (int h = 0; h < hollows; ++h) {
    const auto& box = layout.boxes[order[h]];
    const double w = (box[1] - box[0]) * cs;
    const double hgt = (box[3] - box[2]) * cs;
    const double cx = box[0] * cs + w * (0.3 + 0.4 * rng.uniform());
    const double cy = box[2] * cs + hgt * (0.3 + 0.4 * rng.uniform());
    const double depth = o.hollowDepth_m * (0.6 + 0.8 * rng.uniform());
    const double sigma = std::min(w, hgt) * (0.15 + 0.1 * rng.uniform());
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const double dx = (x + 0.5) * cs - cx;
        const double dy = (y + 0.5) * cs - cy;
        g.elevation_m[y * g.width + x] -= depth * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      }
    }
  }
  g.validate();

  // street lattice
  const int S = o.streetSpacingCells;
  const int nx = g.width / S;
  const int ny = g.height / S;
  std::vector<NetworkNode> nodes;
  auto node_id = [&](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int cx = i * S + S / 2;
      const int cy = j * S + S / 2;
      nodes.push_back({node_id(i, j), (cx + 0.5) * cs, (cy + 0.5) * cs, g.zoneOf[cy * g.width + cx]});
    }
  }
  std::vector<Segment> segs;
  auto add = [&](int a, int b, bool primary) {
    const double len = std::hypot(nodes[b].x - nodes[a].x, nodes[b].y - nodes[a].y);
    for (auto [f, t] : {std::pair{a, b}, std::pair{b, a}}) {
      for (Mode m : kAllModes) {
        Segment s;
        s.id = static_cast<int>(segs.size());
        s.from = f;
        s.to = t;
        s.mode = m;
        s.length_m = len;
        switch (m) {
        case Mode::Car:
          s.maxSpeed_kmh = primary ? 50.0 : 40.0;
          s.surfaceArea_m2 = len * (primary ? 9.0 : 7.0);
          s.roadClass = primary ? "primary" : "residential";
          break;
        case Mode::Bicycle:
          s.maxSpeed_kmh = kBicycleMaxSpeed_kmh;
          s.surfaceArea_m2 = len * 2.0;
          s.roadClass = "cycleway";
          break;
        case Mode::Walk:
          s.maxSpeed_kmh = kWalkMaxSpeed_kmh;
          s.surfaceArea_m2 = len * 2.0;
          s.roadClass = "footway";
          break;
        }
        segs.push_back(std::move(s));
      }
    }
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) add(node_id(i, j), node_id(i + 1, j), j % 3 == 0);
      if (j + 1 < ny) add(node_id(i, j), node_id(i, j + 1), i % 3 == 0);
    }
  }
  city.network = TransportNetwork(std::move(nodes), std::move(segs));
  georeference(city.network, g);

  const std::array<int, 3> counts = split_by_shares(o.trips, o.modeShares);
  std::vector<Mode> modes;
  for (int m = 0; m < 3; ++m) modes.insert(modes.end(), counts[m], kAllModes[m]);
  for (int i = static_cast<int>(modes.size()) - 1; i > 0; --i) std::swap(modes[i], modes[rng.below(i + 1)]);
  for (int i = 0; i < o.trips; ++i) {
    Trip t;
    t.id = i;
    t.mode = modes[i];
    t.originZone = static_cast<int>(rng.below(o.zones));
    t.destinationZone = static_cast<int>(rng.below(o.zones));
    city.trips.push_back(t);
  }
  prepare_trips(city.network, city.trips, mix_seed(o.seed, 0x7219));
  return city;
}

World synth_world(const SynthOptions& options, std::string name) {
  SynthCity city = synth_city(options);
  World w;
  w.name = std::move(name);
  w.seed = options.seed;
  w.terrain = std::move(city.terrain);
  w.network = std::move(city.network);
  w.trips = std::move(city.trips);
  w.climate = synth_scenario_model(options.severity, default_base_table());
  w.costs = default_cost_model();
  w.catalog = default_catalog();
  return w;
}

void save_world(const World& world, const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir / "world.json") && !force) {
    fail(ErrorKind::Validation, dir.string() + " already holds a world (use force to overwrite)");
  }
  fs::create_directories(dir);
  nlohmann::json meta{{"name", world.name},
                      {"seed", world.seed},
                      {"zones", world.zone_count()},
                      {"trips", world.trips.size()},
                      {"format", 1}};
  write_text_file(dir / "world.json", meta.dump(2) + "\n");
  write_text_file(dir / "terrain.txt", write_terrain(world.terrain));
  write_text_file(dir / "network.txt", write_network(world.network));
  write_text_file(dir / "trips.txt", write_trips(world.trips));
  write_text_file(dir / "scenarios.txt", write_scenario_model(world.climate));
  write_text_file(dir / "costs.txt", write_cost_model(world.costs));
  write_text_file(dir / "measures.txt", write_catalog(world.catalog));
}

World load_world(const std::filesystem::path& dir) {
  World w;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(dir / "world.json"));
    w.name = meta.at("name").get<std::string>();
    w.seed = meta.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, (dir / "world.json").string() + ": " + e.what());
  }
  w.terrain = load_terrain(read_text_file(dir / "terrain.txt"));
  w.network = load_network(read_text_file(dir / "network.txt"));
  georeference(w.network, w.terrain);
  w.trips = load_trips(read_text_file(dir / "trips.txt"));
  prepare_trips(w.network, w.trips, mix_seed(w.seed, 0x7219));
  w.climate = load_scenario_model(read_text_file(dir / "scenarios.txt"));
  w.costs = load_cost_model(read_text_file(dir / "costs.txt"));
  w.catalog = load_catalog(read_text_file(dir / "measures.txt"));
  for (const Segment& s : w.network.segments()) w.costs.road_class(s.roadClass);
  for (const NetworkNode& n : w.network.nodes()) {
    require(n.zone >= 0 && n.zone < w.zone_count(), ErrorKind::Validation,
            "network node " + std::to_string(n.id) + " lies in an unknown zone");
  }
  return w;
}

bool ZoneGraph::connected() const {
  if (zones <= 1) return true;
  const auto adj = adjacency_lists();
  std::vector<bool> seen(zones, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int z = stack.back();
    stack.pop_back();
    for (int n : adj[z]) {
      if (!seen[n]) {
        seen[n] = true;
        ++count;
        stack.push_back(n);
      }
    }
  }
  return count == zones;
}

std::vector<std::vector<int>> ZoneGraph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(zones);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

ZoneGraph zone_graph(const TerrainGrid& terrain) {
  ZoneGraph g;
  g.zones = terrain.zone_count();
  std::vector<std::pair<int, int>> edges;
  for (int y = 0; y < terrain.height; ++y) {
    for (int x = 0; x < terrain.width; ++x) {
      const int a = terrain.zoneOf[y * terrain.width + x];
      if (a < 0) continue;
      for (auto [dx, dy] : {std::pair{1, 0}, std::pair{0, 1}}) {
        if (x + dx >= terrain.width || y + dy >= terrain.height) continue;
        const int b = terrain.zoneOf[(y + dy) * terrain.width + x + dx];
        if (b >= 0 && b != a) edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

} // namespace floodrl
