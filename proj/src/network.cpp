#include "floodrl/network.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

namespace floodrl {

std::string to_string(Mode m) {
  switch (m) {
  case Mode::Car: return "car";
  case Mode::Bicycle: return "bicycle";
  case Mode::Walk: return "walk";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "car") return Mode::Car;
  if (text == "bicycle" || text == "bike") return Mode::Bicycle;
  if (text == "walk") return Mode::Walk;
  return std::nullopt;
}

double impassable_depth_m(Mode m) {
  switch (m) {
  case Mode::Car: return 0.30;
  case Mode::Bicycle: return 0.20;
  case Mode::Walk: return 1.50;
  }
  return 0.0;
}

double disrupted_speed(Mode mode, double maxSpeed_kmh, double depth_m) {
  require(depth_m >= 0.0 && !std::isnan(depth_m), ErrorKind::Validation,
          "negative water depth passed to disrupted_speed");
  const double cutoff = impassable_depth_m(mode);
  if (depth_m >= cutoff) return 0.0;
  return maxSpeed_kmh * (1.0 - depth_m / cutoff);
}

TransportNetwork::TransportNetwork(std::vector<NetworkNode> nodes, std::vector<Segment> segments)
    : nodes_(std::move(nodes)), segments_(std::move(segments)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    require(nodes_[i].id == static_cast<int>(i), ErrorKind::Validation,
            "node ids must be 0..N-1 in order");
    require(nodes_[i].zone >= 0, ErrorKind::Validation, "node zone must be nonnegative");
    zoneCount_ = std::max(zoneCount_, nodes_[i].zone + 1);
  }
  const int n = static_cast<int>(nodes_.size());
  for (auto& out : outgoing_) out.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    Segment& s = segments_[i];
    require(s.id == static_cast<int>(i), ErrorKind::Validation,
            "segment ids must be 0..M-1 in order");
    require(s.from >= 0 && s.from < n && s.to >= 0 && s.to < n, ErrorKind::Validation,
            "segment " + std::to_string(s.id) + " references an unknown node");
    require(s.length_m > 0.0 && std::isfinite(s.length_m), ErrorKind::Validation,
            "segment " + std::to_string(s.id) + " must have positive length");
    require(s.surfaceArea_m2 >= 0.0, ErrorKind::Validation, "negative surface area");
    if (s.mode == Mode::Bicycle) s.maxSpeed_kmh = kBicycleMaxSpeed_kmh;
    if (s.mode == Mode::Walk) s.maxSpeed_kmh = kWalkMaxSpeed_kmh;
    require(s.maxSpeed_kmh > 0.0, ErrorKind::Validation,
            "segment " + std::to_string(s.id) + " must have positive max speed");
    s.zone = nodes_[s.from].zone;
    outgoing_[static_cast<int>(s.mode)][s.from].push_back(s.id);
  }
  for (std::size_t m = 0; m < 3; ++m) {
    zoneNodes_[m].assign(zoneCount_, {});
    for (const auto& node : nodes_) {
      if (!outgoing_[m][node.id].empty()) zoneNodes_[m][node.zone].push_back(node.id);
    }
  }
}

std::span<const int> TransportNetwork::outgoing(Mode m, int node) const {
  return outgoing_[static_cast<int>(m)][node];
}

const std::vector<int>& TransportNetwork::zone_nodes(Mode m, int zone) const {
  static const std::vector<int> empty;
  if (zone < 0 || zone >= zoneCount_) return empty;
  return zoneNodes_[static_cast<int>(m)][zone];
}

namespace {

[[noreturn]] void parse_fail(const std::string& file, int line, const std::string& why) {
  fail(ErrorKind::Parse, file + " line " + std::to_string(line) + ": " + why);
}

std::string strip_comment(std::string line) {
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  return line;
}

} // namespace

TransportNetwork load_network(std::string_view source) {
  std::istringstream in{std::string(source)};
  std::vector<NetworkNode> nodes;
  std::vector<Segment> segments;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream f(strip_comment(line));
    std::string kind;
    if (!(f >> kind)) continue;
    if (kind == "node") {
      NetworkNode n;
      if (!(f >> n.id >> n.x >> n.y >> n.zone)) parse_fail("network", lineNo, "malformed node");
      nodes.push_back(n);
    } else if (kind == "segment") {
      Segment s;
      std::string mode;
      if (!(f >> s.id >> s.from >> s.to >> mode >> s.length_m >> s.maxSpeed_kmh >>
            s.surfaceArea_m2 >> s.roadClass)) {
        parse_fail("network", lineNo, "malformed segment");
      }
      auto m = parse_mode(mode);
      if (!m) parse_fail("network", lineNo, "unknown mode '" + mode + "'");
      s.mode = *m;
      segments.push_back(std::move(s));
    } else {
      parse_fail("network", lineNo, "unknown record '" + kind + "'");
    }
  }
  return TransportNetwork(std::move(nodes), std::move(segments));
}

std::string write_network(const TransportNetwork& network) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# node <id> <x_m> <y_m> <zone>\n";
  for (const auto& n : network.nodes()) {
    out << "node " << n.id << ' ' << n.x << ' ' << n.y << ' ' << n.zone << '\n';
  }
  out << "# segment <id> <from> <to> <mode> <length_m> <maxSpeed_kmh> <surfaceArea_m2> "
         "<roadClass>\n";
  for (const auto& s : network.segments()) {
    out << "segment " << s.id << ' ' << s.from << ' ' << s.to << ' ' << to_string(s.mode) << ' '
        << s.length_m << ' ' << s.maxSpeed_kmh << ' ' << s.surfaceArea_m2 << ' ' << s.roadClass
        << '\n';
  }
  return out.str();
}

std::vector<Trip> load_trips(std::string_view source) {
  std::istringstream in{std::string(source)};
  std::vector<Trip> trips;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream f(strip_comment(line));
    std::string kind;
    if (!(f >> kind)) continue;
    if (kind != "trip") parse_fail("trips", lineNo, "unknown record '" + kind + "'");
    Trip t;
    std::string mode;
    if (!(f >> t.id >> mode >> t.originZone >> t.destinationZone)) {
      parse_fail("trips", lineNo, "malformed trip");
    }
    auto m = parse_mode(mode);
    if (!m) parse_fail("trips", lineNo, "unknown mode '" + mode + "'");
    t.mode = *m;
    int o = -1, d = -1;
    if (f >> o) {
      if (!(f >> d)) parse_fail("trips", lineNo, "origin node given without destination node");
      t.originNode = o;
      t.destinationNode = d;
    }
    trips.push_back(t);
  }
  return trips;
}

std::string write_trips(std::span<const Trip> trips) {
  std::ostringstream out;
  out << "# trip <id> <mode> <originZone> <destZone> <originNode> <destNode>\n";
  for (const auto& t : trips) {
    out << "trip " << t.id << ' ' << to_string(t.mode) << ' ' << t.originZone << ' '
        << t.destinationZone << ' ' << t.originNode << ' ' << t.destinationNode << '\n';
  }
  return out.str();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double segment_speed(const Segment& s, double depth, const SpeedFunction& speed) {
  return speed ? speed(s.mode, s.maxSpeed_kmh, depth) : disrupted_speed(s.mode, s.maxSpeed_kmh, depth);
}

/// Dijkstra over (time, segment count, segment-id sequence).
struct ShortestPathTree {
  std::vector<double> time;
  std::vector<int> edges;
  std::vector<int> predSegment;

  void run(const TransportNetwork& net, Mode mode, int origin, std::span<const double> depths,
           const SpeedFunction& speed, int target = -1) {
    const std::size_t n = net.nodes().size();
    time.assign(n, kInf);
    edges.assign(n, std::numeric_limits<int>::max());
    predSegment.assign(n, -1);
    std::vector<char> settled(n, 0);
    using Key = std::tuple<double, int, int>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
    time[origin] = 0.0;
    edges[origin] = 0;
    heap.emplace(0.0, 0, origin);
    const auto& segs = net.segments();
    while (!heap.empty()) {
      auto [t, k, u] = heap.top();
      heap.pop();
      if (settled[u] || t != time[u] || k != edges[u]) continue;
      settled[u] = 1;
      if (u == target) break;
      for (int sid : net.outgoing(mode, u)) {
        const Segment& s = segs[sid];
        const double v_kmh = segment_speed(s, depths[sid], speed);
        if (!(v_kmh > 0.0)) continue;
        const int v = s.to;
        if (settled[v]) continue;
        const double cand = t + s.length_m / (1000.0 * v_kmh);
        const int candEdges = k + 1;
        bool better = cand < time[v] || (cand == time[v] && candEdges < edges[v]);
        if (!better && cand == time[v] && candEdges == edges[v]) better = sequence_less(segs, u, sid, v);
        if (better) {
          time[v] = cand;
          edges[v] = candEdges;
          predSegment[v] = sid;
          heap.emplace(cand, candEdges, v);
        }
      }
    }
  }

  std::vector<int> path_to(const std::vector<Segment>& segs, int node) const {
    std::vector<int> seq;
    while (predSegment[node] >= 0) {
      seq.push_back(predSegment[node]);
      node = segs[predSegment[node]].from;
    }
    std::reverse(seq.begin(), seq.end());
    return seq;
  }

  bool sequence_less(const std::vector<Segment>& segs, int u, int viaSegment, int v) const {
    std::vector<int> cand = path_to(segs, u);
    cand.push_back(viaSegment);
    return cand < path_to(segs, v);
  }
};

} // namespace

std::vector<double> shortest_times(const TransportNetwork& network, Mode mode, int origin,
                                   std::span<const double> depths, const SpeedFunction& speed) {
  require(depths.size() == network.segments().size(), ErrorKind::Validation,
          "segment depth vector does not match the network");
  ShortestPathTree tree;
  tree.run(network, mode, origin, depths, speed);
  return tree.time;
}

TripOutcome route_trip(const TransportNetwork& network, const Trip& trip,
                       std::span<const double> depths, const SpeedFunction& speed) {
  require(depths.size() == network.segments().size(), ErrorKind::Validation,
          "segment depth vector does not match the network");
  if (trip.originNode == trip.destinationNode) return {trip.id, TripStatus::Completed, 0.0};
  ShortestPathTree tree;
  tree.run(network, trip.mode, trip.originNode, depths, speed, trip.destinationNode);
  const double t = tree.time[trip.destinationNode];
  if (!std::isfinite(t)) return {trip.id, TripStatus::Cancelled, 0.0};
  return {trip.id, TripStatus::Completed, t};
}

std::vector<TripOutcome> simulate_all(const TransportNetwork& network, std::span<const Trip> trips,
                                      std::span<const double> depths, const SpeedFunction& speed) {
  require(depths.size() == network.segments().size(), ErrorKind::Validation,
          "segment depth vector does not match the network");
  std::vector<TripOutcome> outcomes(trips.size());
  if (trips.empty()) return outcomes;

  // A dry mode graph reproduces the free-flow times exactly.
  std::array<bool, 3> wet{false, false, false};
  for (const auto& s : network.segments()) {
    if (depths[s.id] > 0.0) wet[static_cast<int>(s.mode)] = true;
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const Trip& t = trips[i];
    const bool routeDry =
        !t.basePath.empty() &&
        std::all_of(t.basePath.begin(), t.basePath.end(), [&](int sid) { return depths[sid] <= 0.0; });
    if (!speed && (!wet[static_cast<int>(t.mode)] || routeDry)) {
      outcomes[i] = {t.id, TripStatus::Completed, t.baseTime_h};
    } else {
      groups[{static_cast<int>(t.mode), t.originNode}].push_back(i);
    }
  }
  ShortestPathTree tree;
  for (const auto& [key, members] : groups) {
    tree.run(network, static_cast<Mode>(key.first), key.second, depths, speed);
    for (std::size_t i : members) {
      const Trip& t = trips[i];
      const double time = t.originNode == t.destinationNode ? 0.0 : tree.time[t.destinationNode];
      outcomes[i] = std::isfinite(time) ? TripOutcome{t.id, TripStatus::Completed, time}
                                        : TripOutcome{t.id, TripStatus::Cancelled, 0.0};
    }
  }
  return outcomes;
}

void prepare_trips(const TransportNetwork& network, std::vector<Trip>& trips, std::uint64_t seed) {
  Rng rng(seed);
  const int nNodes = static_cast<int>(network.nodes().size());
  for (Trip& t : trips) {
    for (int* node : {&t.originNode, &t.destinationNode}) {
      const int zone = node == &t.originNode ? t.originZone : t.destinationZone;
      if (*node < 0) {
        const auto& pool = network.zone_nodes(t.mode, zone);
        require(!pool.empty(), ErrorKind::Validation,
                "zone " + std::to_string(zone) + " has no " + to_string(t.mode) + " nodes");
        *node = pool[rng.below(pool.size())];
      }
      require(*node < nNodes, ErrorKind::Validation, "trip node out of range");
      require(network.nodes()[*node].zone == zone, ErrorKind::Validation,
              "trip " + std::to_string(t.id) + " node does not lie in its zone");
    }
  }
  const std::vector<double> dry(network.segments().size(), 0.0);
  std::map<std::pair<int, int>, ShortestPathTree> cache;
  for (Trip& t : trips) {
    t.basePath.clear();
    if (t.originNode == t.destinationNode) {
      t.baseTime_h = 0.0;
      continue;
    }
    auto key = std::make_pair(static_cast<int>(t.mode), t.originNode);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, ShortestPathTree{}).first;
      it->second.run(network, t.mode, t.originNode, dry, {});
    }
    const double base = it->second.time[t.destinationNode];
    require(std::isfinite(base), ErrorKind::Validation,
            "trip " + std::to_string(t.id) + " is unroutable on the dry network");
    t.baseTime_h = base;
    t.basePath = it->second.path_to(network.segments(), t.destinationNode);
  }
}

} // namespace floodrl
