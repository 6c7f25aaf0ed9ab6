#include "floodrl/impacts.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace floodrl {

double DamageCurve::operator()(double depth_m) const {
  return interp_clamped(depths_m, fractions, depth_m);
}

void DamageCurve::validate() const {
  require(!depths_m.empty() && depths_m.size() == fractions.size(), ErrorKind::Validation,
          "damage curve needs matching, nonempty knot lists");
  require(depths_m.front() == 0.0 && fractions.front() == 0.0, ErrorKind::Validation,
          "damage curve must start at (0, 0)");
  for (std::size_t i = 0; i < depths_m.size(); ++i) {
    require(fractions[i] >= 0.0 && fractions[i] <= 1.0, ErrorKind::Validation,
            "damage fractions must lie in [0, 1]");
    if (i > 0) {
      require(depths_m[i] > depths_m[i - 1], ErrorKind::Validation,
              "damage curve depths must be strictly ascending");
      require(fractions[i] >= fractions[i - 1], ErrorKind::Validation,
              "damage curve must be nondecreasing");
    }
  }
}

const RoadClassCost& CostModel::road_class(std::string_view name) const {
  auto it = roadClasses.find(name);
  if (it == roadClasses.end()) {
    fail(ErrorKind::Config, "unknown road class '" + std::string(name) + "' in cost model");
  }
  return it->second;
}

void CostModel::validate() const {
  require(valueOfTime_dkk_per_h > 0.0, ErrorKind::Validation, "value of time must be positive");
  require(cancellationFactor >= 0.0 && cancellationFactor <= 1.0, ErrorKind::Validation,
          "cancellation factor must lie in [0, 1]");
  for (const auto& [name, rc] : roadClasses) {
    require(rc.constructionCost_dkk_per_m2 >= 0.0, ErrorKind::Validation,
            "construction cost of '" + name + "' must be nonnegative");
    rc.damage.validate();
  }
}

CostModel default_cost_model() {
  CostModel m;
  const DamageCurve ramp{{0.0, 1.0}, {0.0, 0.5}};
  m.roadClasses["primary"] = {4000.0, ramp};
  m.roadClasses["residential"] = {3000.0, ramp};
  m.roadClasses["cycleway"] = {1500.0, ramp};
  m.roadClasses["footway"] = {1000.0, ramp};
  return m;
}

CostModel load_cost_model(std::string_view source) {
  CostModel m;
  std::istringstream in{std::string(source)};
  std::string line;
  int lineNo = 0;
  auto parseError = [&](const std::string& why) {
    fail(ErrorKind::Parse, "cost file line " + std::to_string(lineNo) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream f(line);
    std::string key;
    if (!(f >> key)) continue;
    if (key == "value_of_time") {
      if (!(f >> m.valueOfTime_dkk_per_h)) parseError("expected a number");
    } else if (key == "cancellation_factor") {
      if (!(f >> m.cancellationFactor)) parseError("expected a number");
    } else if (key == "class") {
      std::string name;
      RoadClassCost rc;
      if (!(f >> name >> rc.constructionCost_dkk_per_m2)) parseError("expected name and cost");
      std::string knot;
      while (f >> knot) {
        const auto colon = knot.find(':');
        if (colon == std::string::npos) parseError("knot '" + knot + "' is not <depth>:<fraction>");
        try {
          rc.damage.depths_m.push_back(std::stod(knot.substr(0, colon)));
          rc.damage.fractions.push_back(std::stod(knot.substr(colon + 1)));
        } catch (const std::logic_error&) {
          parseError("non-numeric knot '" + knot + "'");
        }
      }
      m.roadClasses[name] = std::move(rc);
    } else {
      parseError("unknown key '" + key + "'");
    }
  }
  m.validate();
  return m;
}

std::string write_cost_model(const CostModel& m) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "value_of_time " << m.valueOfTime_dkk_per_h << '\n';
  out << "cancellation_factor " << m.cancellationFactor << '\n';
  out << "# class <name> <constructionCost_dkk_per_m2> <depth_m>:<damage fraction> ...\n";
  for (const auto& [name, rc] : m.roadClasses) {
    out << "class " << name << ' ' << rc.constructionCost_dkk_per_m2;
    for (std::size_t i = 0; i < rc.damage.depths_m.size(); ++i) {
      out << ' ' << rc.damage.depths_m[i] << ':' << rc.damage.fractions[i];
    }
    out << '\n';
  }
  return out.str();
}

std::vector<double> infrastructure_damage(const TransportNetwork& network,
                                          std::span<const double> depths, const CostModel& cost,
                                          int zones) {
  require(depths.size() == network.segments().size(), ErrorKind::Validation,
          "segment depth vector does not match the network");
  std::vector<double> out(zones, 0.0);
  for (const Segment& s : network.segments()) {
    const RoadClassCost& rc = cost.road_class(s.roadClass);
    require(depths[s.id] >= 0.0, ErrorKind::Validation, "segment depths must be >= 0");
    if (depths[s.id] <= 0.0) continue;
    const double fraction = rc.damage(depths[s.id]);
    out[s.zone] += rc.constructionCost_dkk_per_m2 * s.surfaceArea_m2 * fraction;
  }
  return out;
}

namespace {
void check_aligned(std::span<const Trip> trips, std::span<const TripOutcome> outcomes) {
  require(trips.size() == outcomes.size(), ErrorKind::Validation,
          "trip outcomes are not aligned with trips");
}
} // namespace

std::vector<double> delay_costs(std::span<const Trip> trips, std::span<const TripOutcome> outcomes,
                                const CostModel& cost, int zones) {
  check_aligned(trips, outcomes);
  std::vector<double> out(zones, 0.0);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (outcomes[i].status != TripStatus::Completed) continue;
    const double delay = std::max(0.0, outcomes[i].time_h - trips[i].baseTime_h);
    out[trips[i].originZone] += delay * cost.valueOfTime_dkk_per_h;
  }
  return out;
}

std::vector<double> cancellation_costs(std::span<const Trip> trips,
                                       std::span<const TripOutcome> outcomes, const CostModel& cost,
                                       int zones) {
  check_aligned(trips, outcomes);
  std::vector<double> out(zones, 0.0);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (outcomes[i].status != TripStatus::Cancelled) continue;
    out[trips[i].originZone] +=
        cost.cancellationFactor * trips[i].baseTime_h * cost.valueOfTime_dkk_per_h;
  }
  return out;
}

ZoneImpacts compute_impacts(const TransportNetwork& network, std::span<const double> depths,
                            std::span<const Trip> trips, std::span<const TripOutcome> outcomes,
                            const CostModel& cost, int zones) {
  return ZoneImpacts{infrastructure_damage(network, depths, cost, zones),
                     delay_costs(trips, outcomes, cost, zones),
                     cancellation_costs(trips, outcomes, cost, zones)};
}

} // namespace floodrl
