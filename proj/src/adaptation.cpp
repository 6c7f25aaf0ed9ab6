#include "floodrl/adaptation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace floodrl {

namespace {

constexpr std::array<std::string_view, kActionCount> kMeasureNames = {
    "DoNothing",        "BioretentionPlanters", "Soakaway", "StorageTank", "PorousAsphalt",
    "PerviousConcrete", "PICP",                 "GridPavers"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

ApplicationRule parse_rule(std::string_view s) {
  if (s == "per_planter_every_30m") return ApplicationRule::PerPlanterEvery30m;
  if (s == "once_per_road") return ApplicationRule::OncePerRoad;
  if (s == "per_surface_area") return ApplicationRule::PerSurfaceArea;
  fail(ErrorKind::Parse, "unknown application rule '" + std::string(s) + "'");
}

EffectKind parse_effect(std::string_view s) {
  if (s == "volume_m3") return EffectKind::Volume_m3;
  if (s == "depth_m") return EffectKind::Depth_m;
  fail(ErrorKind::Parse, "unknown effect kind '" + std::string(s) + "'");
}

} // namespace

std::string_view to_string(MeasureId id) { return kMeasureNames[static_cast<int>(id)]; }

MeasureId parse_measure(std::string_view name) {
  const std::string key = lower(name);
  for (int i = 0; i < kActionCount; ++i) {
    if (lower(kMeasureNames[i]) == key) return static_cast<MeasureId>(i);
  }
  fail(ErrorKind::Domain, "unknown measure '" + std::string(name) + "'");
}

std::string_view to_string(EffectKind k) {
  switch (k) {
  case EffectKind::None: return "none";
  case EffectKind::Volume_m3: return "volume_m3";
  case EffectKind::Depth_m: return "depth_m";
  }
  return "?";
}

std::string_view to_string(ApplicationRule r) {
  switch (r) {
  case ApplicationRule::None: return "none";
  case ApplicationRule::PerPlanterEvery30m: return "per_planter_every_30m";
  case ApplicationRule::OncePerRoad: return "once_per_road";
  case ApplicationRule::PerSurfaceArea: return "per_surface_area";
  }
  return "?";
}

MeasureCatalog::MeasureCatalog() : MeasureCatalog(default_catalog()) {}

MeasureCatalog::MeasureCatalog(std::array<MeasureSpec, kActionCount> specs) : specs_(specs) {
  validate();
}

const MeasureSpec& MeasureCatalog::at(int action) const {
  require(action >= 0 && action < kActionCount, ErrorKind::Domain,
          "action id " + std::to_string(action) + " out of range");
  return specs_[action];
}

void MeasureCatalog::validate() const {
  for (int i = 0; i < kActionCount; ++i) {
    const MeasureSpec& s = specs_[i];
    require(static_cast<int>(s.id) == i, ErrorKind::Validation, "catalog entries out of order");
    if (s.id == MeasureId::DoNothing) {
      require(s.effectKind == EffectKind::None && s.rule == ApplicationRule::None &&
                  s.implCost_dkk == 0.0 && s.maintCost_dkk_per_year == 0.0 &&
                  s.lifetime_years == 0 && s.effectMagnitude == 0.0,
              ErrorKind::Validation, "DoNothing must have no effect, cost or lifetime");
      continue;
    }
    const std::string name(to_string(s.id));
    require(s.effectKind != EffectKind::None && s.rule != ApplicationRule::None,
            ErrorKind::Validation, name + " needs an effect kind and application rule");
    require(s.effectMagnitude > 0.0 && s.implCost_dkk > 0.0 && s.maintCost_dkk_per_year > 0.0 &&
                s.lifetime_years > 0,
            ErrorKind::Validation, name + " needs positive magnitude, costs and lifetime");
  }
}

MeasureCatalog default_catalog() {
  using enum MeasureId;
  using enum ApplicationRule;
  using EffectKind::Volume_m3, EffectKind::Depth_m;
  return MeasureCatalog(std::array<MeasureSpec, kActionCount>{{
      {DoNothing, EffectKind::None, 0.0, ApplicationRule::None, 0.0, 0.0, 0},
      {BioretentionPlanters, Volume_m3, 2.0, PerPlanterEvery30m, 14312.0, 24.0, 40},
      {Soakaway, Volume_m3, 5.4, OncePerRoad, 7273.0, 1.9, 30},
      {StorageTank, Volume_m3, 15.0, OncePerRoad, 104896.0, 5.0, 50},
      {PorousAsphalt, Depth_m, 0.3, PerSurfaceArea, 995.77, 0.635, 30},
      {PerviousConcrete, Depth_m, 0.45, PerSurfaceArea, 1199.81, 0.635, 30},
      {PICP, Depth_m, 0.25, PerSurfaceArea, 1046.78, 5.195, 50},
      {GridPavers, Depth_m, 0.2, PerSurfaceArea, 1097.79, 5.195, 30},
  }});
}

MeasureCatalog load_catalog(std::string_view source) {
  std::array<MeasureSpec, kActionCount> specs{};
  std::array<bool, kActionCount> seen{};
  specs[0] = MeasureSpec{};
  seen[0] = true;
  std::istringstream in{std::string(source)};
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream f(line);
    std::string key;
    if (!(f >> key)) continue;
    const std::string where = "catalog line " + std::to_string(lineNo) + ": ";
    if (key != "measure") fail(ErrorKind::Parse, where + "unknown key '" + key + "'");
    std::string name, kind, rule;
    MeasureSpec s;
    if (!(f >> name >> kind >> s.effectMagnitude >> rule >> s.implCost_dkk >>
          s.maintCost_dkk_per_year >> s.lifetime_years)) {
      fail(ErrorKind::Parse, where + "expected 7 fields after 'measure'");
    }
    try {
      s.id = parse_measure(name);
      s.effectKind = parse_effect(kind);
      s.rule = parse_rule(rule);
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where + e.what());
    }
    const int idx = static_cast<int>(s.id);
    if (idx == 0) fail(ErrorKind::Parse, where + "DoNothing is implicit");
    if (seen[idx]) fail(ErrorKind::Parse, where + "duplicate measure '" + name + "'");
    seen[idx] = true;
    specs[idx] = s;
  }
  for (int i = 1; i < kActionCount; ++i) {
    require(seen[i], ErrorKind::Completeness,
            "catalog is missing measure '" + std::string(kMeasureNames[i]) + "'");
  }
  return MeasureCatalog(specs);
}

std::string write_catalog(const MeasureCatalog& catalog) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# measure <Name> <effect kind> <magnitude> <rule> <implCost_dkk> "
         "<maintCost_dkk_per_year> <lifetime_years>\n";
  for (const MeasureSpec& s : catalog.specs()) {
    if (s.id == MeasureId::DoNothing) continue;
    out << "measure " << to_string(s.id) << ' ' << to_string(s.effectKind) << ' '
        << s.effectMagnitude << ' ' << to_string(s.rule) << ' ' << s.implCost_dkk << ' '
        << s.maintCost_dkk_per_year << ' ' << s.lifetime_years << '\n';
  }
  return out.str();
}

int ZoneRoadStats::planter_count() const {
  int n = 0;
  for (double len : roadLengths_m) n += static_cast<int>(std::floor(len / 30.0 + 1e-9));
  return n;
}

std::vector<ZoneRoadStats> zone_road_stats(const TransportNetwork& network, int zones) {
  std::vector<ZoneRoadStats> out(zones);
  std::vector<std::map<std::pair<int, int>, bool>> seen(zones);
  for (const Segment& s : network.segments()) {
    if (s.mode != Mode::Car) continue;
    require(s.zone >= 0 && s.zone < zones, ErrorKind::Validation,
            "segment " + std::to_string(s.id) + " lies outside the zone range");
    ZoneRoadStats& z = out[s.zone];
    z.carSegments.push_back(s.id);
    const auto key = std::minmax(s.from, s.to);
    if (seen[s.zone].emplace(key, true).second) {
      z.roadLengths_m.push_back(s.length_m);
      z.surfaceArea_m2 += s.surfaceArea_m2;
    }
  }
  return out;
}

double deployment_units(const MeasureSpec& spec, const ZoneRoadStats& stats) {
  switch (spec.rule) {
  case ApplicationRule::PerPlanterEvery30m: return stats.planter_count();
  case ApplicationRule::OncePerRoad: return stats.road_count();
  case ApplicationRule::PerSurfaceArea: return stats.surfaceArea_m2;
  case ApplicationRule::None: return 0.0;
  }
  return 0.0;
}

double linear_decay(double baseEffect, int age, int lifetime) {
  return baseEffect * (1.0 - static_cast<double>(age) / lifetime);
}

double decayed_effect(const Deployment& dep, int currentYear, const DecayFunction& decay) {
  const int age = currentYear - dep.deployYear;
  require(age >= 0, ErrorKind::Contract, "deployment queried before its deploy year");
  require(age <= dep.lifetime_years, ErrorKind::Contract,
          "deployment past its lifetime should have been expired");
  return decay(dep.baseEffect, age, dep.lifetime_years);
}

DeploymentLedger::DeploymentLedger(MeasureCatalog catalog, std::vector<ZoneRoadStats> zoneStats,
                                   std::size_t segmentCount, DecayFunction decay)
    : catalog_(std::move(catalog)), stats_(std::move(zoneStats)), segmentCount_(segmentCount),
      decay_(std::move(decay)) {}

ActionMask DeploymentLedger::action_mask(int zone) const {
  require(zone >= 0 && zone < zone_count(), ErrorKind::Domain,
          "zone " + std::to_string(zone) + " out of range");
  ActionMask mask;
  mask.fill(true);
  for (const Deployment& d : active_) {
    if (d.zone == zone) mask[static_cast<int>(d.measure)] = false;
  }
  return mask;
}

double DeploymentLedger::deploy(int zone, MeasureId measure, int year) {
  require(measure != MeasureId::DoNothing, ErrorKind::Contract, "DoNothing is not deployable");
  if (!action_mask(zone)[static_cast<int>(measure)]) {
    fail(ErrorKind::Feasibility, std::string(to_string(measure)) + " is already active in zone " +
                                     std::to_string(zone));
  }
  const MeasureSpec& spec = catalog_[measure];
  const double units = deployment_units(spec, stats_[zone]);
  if (units <= 0.0) return 0.0; // zone without car roads
  Deployment d;
  d.zone = zone;
  d.measure = measure;
  d.deployYear = year;
  d.units = units;
  d.baseEffect = spec.effectKind == EffectKind::Volume_m3 ? units * spec.effectMagnitude
                                                          : spec.effectMagnitude;
  d.lifetime_years = spec.lifetime_years;
  active_.push_back(d);
  return units * spec.implCost_dkk;
}

YearAccounting DeploymentLedger::advance_year(int currentYear) {
  const int zones = zone_count();
  YearAccounting acc;
  acc.maintenance_dkk.assign(zones, 0.0);
  acc.captureVolume_m3.assign(zones, 0.0);
  acc.captureDepth_m.assign(segmentCount_, 0.0);
  acc.status.assign(static_cast<std::size_t>(zones) * kPhysicalMeasureCount, 0.0);
  for (const Deployment& d : active_) {
    const MeasureSpec& spec = catalog_[d.measure];
    const double effect = decayed_effect(d, currentYear, decay_);
    acc.maintenance_dkk[d.zone] += d.units * spec.maintCost_dkk_per_year;
    acc.status[d.zone * kPhysicalMeasureCount + static_cast<int>(d.measure) - 1] += effect;
    if (spec.effectKind == EffectKind::Volume_m3) {
      acc.captureVolume_m3[d.zone] += effect;
    } else {
      for (int seg : stats_[d.zone].carSegments) acc.captureDepth_m[seg] += effect;
    }
  }
  std::erase_if(active_, [&](const Deployment& d) {
    return currentYear - d.deployYear >= d.lifetime_years;
  });
  return acc;
}

} // namespace floodrl
