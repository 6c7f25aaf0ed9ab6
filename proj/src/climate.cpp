#include "floodrl/climate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace floodrl {

std::string to_string(RcpScenario s) {
  switch (s) {
  case RcpScenario::RCP26: return "RCP26";
  case RcpScenario::RCP45: return "RCP45";
  case RcpScenario::RCP85: return "RCP85";
  }
  return "?";
}

std::optional<RcpScenario> parse_scenario(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '.' || c == '_' || c == '-') continue;
    key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "RCP26") return RcpScenario::RCP26;
  if (key == "RCP45") return RcpScenario::RCP45;
  if (key == "RCP85") return RcpScenario::RCP85;
  return std::nullopt;
}

RcpScenario scenario_or_throw(std::string_view text) {
  if (auto s = parse_scenario(text)) return *s;
  fail(ErrorKind::Domain,
       "unknown scenario '" + std::string(text) + "'; valid ids: RCP26, RCP45, RCP85");
}

void RainQuantileTable::validate() const {
  require(!probabilities.empty(), ErrorKind::Validation, "quantile table has no knots");
  require(probabilities.size() == depths_mm.size(), ErrorKind::Validation,
          "quantile table probability/depth length mismatch");
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    const double d = depths_mm[i];
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::Validation,
            "probability outside [0,1]");
    require(std::isfinite(d) && d >= 0.0, ErrorKind::Validation, "negative or non-finite depth");
    if (i > 0) {
      require(p > probabilities[i - 1], ErrorKind::Validation,
              "probabilities must be strictly ascending");
      require(d >= depths_mm[i - 1], ErrorKind::Validation, "depths must be nondecreasing");
    }
  }
}

double RainQuantileTable::quantile(double u) const {
  return interp_clamped(probabilities, depths_mm, u);
}

void ScenarioModel::set_table(RcpScenario s, TimeSlice slice, RainQuantileTable table) {
  require(slice.startYear <= slice.endYear, ErrorKind::Validation, "slice start after end");
  table.validate();
  tables_[{s, slice}] = std::move(table);
}

const RainQuantileTable& ScenarioModel::table(RcpScenario s, int year) const {
  for (const auto& [key, tab] : tables_) {
    if (key.first == s && key.second.contains(year)) return tab;
  }
  fail(ErrorKind::Domain, "year " + std::to_string(year) + " lies outside every time slice of " +
                              to_string(s));
}

void ScenarioModel::validate() const {
  for (RcpScenario s : kAllScenarios) {
    for (const TimeSlice& slice : kCanonicalSlices) {
      if (!tables_.count({s, slice})) {
        fail(ErrorKind::Completeness, "missing table for " + to_string(s) + " " +
                                          std::to_string(slice.startYear) + "-" +
                                          std::to_string(slice.endYear));
      }
    }
  }
  for (const auto& [key, tab] : tables_) tab.validate();

  // Piecewise-linear curves: checking the union of knots is sufficient.
  for (const TimeSlice& slice : kCanonicalSlices) {
    std::set<double> knots;
    for (RcpScenario s : kAllScenarios) {
      const auto& t = tables_.at({s, slice});
      knots.insert(t.probabilities.begin(), t.probabilities.end());
    }
    for (double p : knots) {
      const double d26 = tables_.at({RcpScenario::RCP26, slice}).quantile(p);
      const double d45 = tables_.at({RcpScenario::RCP45, slice}).quantile(p);
      const double d85 = tables_.at({RcpScenario::RCP85, slice}).quantile(p);
      if (!(d26 <= d45 && d45 <= d85)) {
        std::ostringstream msg;
        msg << "severity ordering violated in slice " << slice.startYear << "-" << slice.endYear
            << " at p=" << p << " (" << d26 << ", " << d45 << ", " << d85 << ")";
        fail(ErrorKind::Validation, msg.str());
      }
    }
  }
}

ScenarioModel load_scenario_model(std::string_view source) {
  ScenarioModel model;
  std::istringstream in{std::string(source)};
  std::string line;
  int lineNo = 0;
  std::set<ScenarioModel::Key> seen;
  auto parseError = [&](const std::string& why) {
    fail(ErrorKind::Parse, "scenario file line " + std::to_string(lineNo) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string id;
    if (!(fields >> id)) continue;
    const auto scenario = parse_scenario(id);
    if (!scenario) parseError("unknown scenario id '" + id + "'");
    TimeSlice slice;
    if (!(fields >> slice.startYear >> slice.endYear)) parseError("expected start and end year");
    RainQuantileTable table;
    std::string knot;
    while (fields >> knot) {
      const auto colon = knot.find(':');
      if (colon == std::string::npos) parseError("knot '" + knot + "' is not <p>:<depth>");
      try {
        std::size_t used = 0;
        const double p = std::stod(knot.substr(0, colon), &used);
        if (used != colon) parseError("bad probability in '" + knot + "'");
        const std::string rest = knot.substr(colon + 1);
        const double d = std::stod(rest, &used);
        if (used != rest.size()) parseError("bad depth in '" + knot + "'");
        table.probabilities.push_back(p);
        table.depths_mm.push_back(d);
      } catch (const std::logic_error&) {
        parseError("non-numeric knot '" + knot + "'");
      }
    }
    if (table.probabilities.empty()) parseError("record has no quantile knots");
    if (!seen.insert({*scenario, slice}).second) parseError("duplicate record");
    try {
      model.set_table(*scenario, slice, std::move(table));
    } catch (const Error& e) {
      fail(e.kind(), "scenario file line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  model.validate();
  return model;
}

std::string write_scenario_model(const ScenarioModel& model) {
  std::ostringstream out;
  out << "# scenario startYear endYear probability:depth_mm ...\n";
  out << std::setprecision(17);
  for (const auto& [key, tab] : model.tables()) {
    out << to_string(key.first) << ' ' << key.second.startYear << ' ' << key.second.endYear;
    for (std::size_t i = 0; i < tab.probabilities.size(); ++i) {
      out << ' ' << tab.probabilities[i] << ':' << tab.depths_mm[i];
    }
    out << '\n';
  }
  return out.str();
}

double event_depth(const ScenarioModel& model, RcpScenario s, int year, double u) {
  return model.table(s, year).quantile(u);
}

RainEvent sample_event(const ScenarioModel& model, RcpScenario s, int year, Rng& rng) {
  const double u = rng.uniform();
  return RainEvent{year, event_depth(model, s, year, u)};
}

ScenarioModel synth_scenario_model(const std::array<double, 3>& severity,
                                   const RainQuantileTable& base,
                                   const std::array<std::array<double, 3>, 3>& slices) {
  base.validate();
  for (std::size_t s = 0; s < 3; ++s) {
    require(severity[s] > 0.0, ErrorKind::Validation, "severity multipliers must be positive");
    if (s > 0) {
      require(severity[s] >= severity[s - 1], ErrorKind::Validation,
              "severity multipliers must be ordered RCP26 <= RCP45 <= RCP85");
    }
    for (std::size_t k = 0; k < 3; ++k) {
      require(slices[s][k] > 0.0, ErrorKind::Validation, "slice multipliers must be positive");
      if (k > 0) {
        require(slices[s][k] >= slices[s][k - 1], ErrorKind::Validation,
                "later slices must not receive smaller multipliers");
      }
    }
  }
  ScenarioModel model;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < 3; ++k) {
      RainQuantileTable t = base;
      for (double& d : t.depths_mm) d *= severity[s] * slices[s][k];
      model.set_table(kAllScenarios[s], kCanonicalSlices[k], std::move(t));
    }
  }
  model.validate();
  return model;
}

ScenarioModel synth_scenario_model(const std::array<double, 3>& severity,
                                   const RainQuantileTable& base) {
  // Mild intensification across slices, steeper for the severe pathways.
  const std::array<std::array<double, 3>, 3> slices{{
      {1.00, 1.02, 1.04},
      {1.00, 1.05, 1.10},
      {1.00, 1.10, 1.22},
  }};
  return synth_scenario_model(severity, base, slices);
}

RainQuantileTable default_base_table() {
  return RainQuantileTable{{0.0, 0.2, 0.5, 0.8, 0.95, 0.99, 1.0},
                           {0.0, 8.0, 18.0, 32.0, 50.0, 75.0, 110.0}};
}

} // namespace floodrl
