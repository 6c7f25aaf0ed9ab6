#include "floodrl/env.hpp"

#include <cmath>

#include "json.hpp"

namespace floodrl {

void EnvConfig::validate() const {
  require(startYear < endYear, ErrorKind::Validation, "startYear must precede endYear");
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::Validation, "discount must lie in (0, 1]");
  require(rewardScale > 0.0 && std::isfinite(rewardScale), ErrorKind::Validation,
          "reward scale must be positive");
  require(!fixedRain_mm || *fixedRain_mm >= 0.0, ErrorKind::Validation,
          "fixed rainfall must be nonnegative");
}

RewardComponents& RewardComponents::operator+=(const RewardComponents& o) {
  infrastructure += o.infrastructure;
  delay += o.delay;
  cancellation += o.cancellation;
  implementation += o.implementation;
  maintenance += o.maintenance;
  return *this;
}

namespace {

ZoneDescriptors compute_descriptors(const WorldModel& m) {
  const int zones = m.zone_count();
  const World& w = m.world;
  ZoneDescriptors d = ZoneDescriptors::Zero(zones, kDescriptorCount);
  for (int z = 0; z < zones; ++z) {
    d(z, 0) = std::log1p(m.roadStats[z].road_count());
    d(z, 1) = std::log1p(m.roadStats[z].surfaceArea_m2 / 1000.0);
  }
  const FloodField field =
      simulate_flood(m.hierarchy, w.terrain, RainEvent{2024, kReferenceStorm_mm}, {});
  const std::vector<double> depths = project_to_segments(field, w.terrain, w.network, {});
  for (int z = 0; z < zones; ++z) {
    const auto& segs = m.roadStats[z].carSegments;
    double sum = 0.0;
    for (int s : segs) sum += depths[s];
    d(z, 2) = segs.empty() ? 0.0 : 10.0 * sum / segs.size();
  }
  std::vector<double> stored(zones, 0.0);
  for (std::size_t c = 0; c < field.depth_m.size(); ++c) {
    const int z = w.terrain.zoneOf[c];
    if (z >= 0) stored[z] += field.depth_m[c] * w.terrain.cellArea_m2;
  }
  std::vector<double> origins(zones, 0.0);
  for (const Trip& t : w.trips) origins[t.originZone] += 1.0;
  for (int z = 0; z < zones; ++z) {
    d(z, 3) = std::log1p(stored[z] / 10.0);
    d(z, 4) = std::log1p(origins[z]);
  }
  return d;
}

} // namespace

WorldModel::WorldModel(World w)
    : world(std::move(w)), hierarchy(world.terrain),
      roadStats(zone_road_stats(world.network, world.zone_count())), graph(zone_graph(world.terrain)) {
  require(graph.zones >= 1, ErrorKind::Validation, "world has no zones");
  require(graph.connected(), ErrorKind::Validation, "zone graph is not connected");
  require(world.network.zone_count() <= graph.zones, ErrorKind::Validation,
          "network references zones missing from the terrain");
  for (const Trip& t : world.trips) {
    require(t.originZone >= 0 && t.originZone < graph.zones && t.destinationZone >= 0 &&
                t.destinationZone < graph.zones,
            ErrorKind::Validation, "trip " + std::to_string(t.id) + " references an unknown zone");
  }
  descriptors = compute_descriptors(*this);
}

FloodEnv::FloodEnv(std::shared_ptr<const WorldModel> world, EnvConfig config)
    : world_(std::move(world)), config_(config),
      ledger_(world_->world.catalog, world_->roadStats, world_->world.network.segments().size()) {
  config_.validate();
  for (int y : {config_.startYear, config_.endYear}) world_->world.climate.table(config_.scenario, y);
  state_ = ZoneState::Zero(zone_count(), kZoneFeatureCount);
}

const ZoneState& FloodEnv::reset() { return reset(config_.seed); }

const ZoneState& FloodEnv::reset(std::uint64_t seed) {
  episodeSeed_ = seed;
  events_.reseed(mix_seed(seed, 0xE7E7));
  ledger_.clear();
  state_.setZero();
  year_ = config_.startYear;
  started_ = true;
  return state_;
}

std::vector<ActionMask> FloodEnv::masks() const {
  std::vector<ActionMask> out(zone_count());
  for (int z = 0; z < zone_count(); ++z) out[z] = ledger_.action_mask(z);
  return out;
}

StepResult FloodEnv::step(std::span<const int> actions) {
  require(started_, ErrorKind::Protocol, "step called before reset");
  require(!done(), ErrorKind::Protocol, "step called after the episode ended");
  const int zones = zone_count();
  require(static_cast<int>(actions.size()) == zones, ErrorKind::Validation,
          "joint action needs " + std::to_string(zones) + " entries");
  for (int z = 0; z < zones; ++z) {
    require(actions[z] >= 0 && actions[z] < kActionCount, ErrorKind::Validation,
            "action id out of range in zone " + std::to_string(z));
    if (actions[z] != 0 && !ledger_.action_mask(z)[actions[z]]) {
      fail(ErrorKind::Feasibility, "action " + std::string(to_string(static_cast<MeasureId>(actions[z]))) +
                                       " is masked in zone " + std::to_string(z));
    }
  }
  const World& w = world_->world;

  StepResult r;
  r.year = year_;
  r.actions.assign(actions.begin(), actions.end());
  r.implementation_dkk.assign(zones, 0.0);
  for (int z = 0; z < zones; ++z) {
    if (actions[z] != 0) r.implementation_dkk[z] = ledger_.deploy(z, static_cast<MeasureId>(actions[z]), year_);
  }
  YearAccounting acc = ledger_.advance_year(year_);
  r.maintenance_dkk = acc.maintenance_dkk;

  r.event = sample_event(w.climate, config_.scenario, year_, events_);
  if (config_.fixedRain_mm) r.event.depth_mm = *config_.fixedRain_mm;

  const FloodField field = simulate_flood(world_->hierarchy, w.terrain, r.event, acc.captureVolume_m3);
  const std::vector<double> depths = project_to_segments(field, w.terrain, w.network, acc.captureDepth_m);
  const std::vector<TripOutcome> outcomes = simulate_all(w.network, w.trips, depths);
  r.impacts = compute_impacts(w.network, depths, w.trips, outcomes, w.costs, zones);

  for (int z = 0; z < zones; ++z) {
    state_(z, 0) = r.impacts.infrastructure_dkk[z];
    state_(z, 1) = r.impacts.delay_dkk[z];
    state_(z, 2) = r.impacts.cancellation_dkk[z];
    for (int m = 0; m < kPhysicalMeasureCount; ++m) {
      state_(z, 3 + m) = acc.status[z * kPhysicalMeasureCount + m];
    }
    r.components.infrastructure += r.impacts.infrastructure_dkk[z];
    r.components.delay += r.impacts.delay_dkk[z];
    r.components.cancellation += r.impacts.cancellation_dkk[z];
    r.components.implementation += r.implementation_dkk[z];
    r.components.maintenance += r.maintenance_dkk[z];
  }
  require(state_.allFinite(), ErrorKind::Numerical, "non-finite zone state");
  r.reward = -r.components.total();
  r.scaledReward = r.reward * config_.rewardScale;
  r.state = state_;

  ++year_;
  r.done = done();
  return r;
}

double episode_return(std::span<const double> rewards, double gamma) {
  require(!rewards.empty(), ErrorKind::Validation, "episode_return needs at least one reward");
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

std::string trajectory_line(const StepResult& r) {
  nlohmann::json j{{"year", r.year},
                   {"rain_mm", r.event.depth_mm},
                   {"actions", r.actions},
                   {"I", r.components.infrastructure},
                   {"D", r.components.delay},
                   {"C", r.components.cancellation},
                   {"A", r.components.implementation},
                   {"M", r.components.maintenance},
                   {"reward", r.reward}};
  return j.dump();
}

} // namespace floodrl
