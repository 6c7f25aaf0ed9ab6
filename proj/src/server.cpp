#include "floodrl/server.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "httplib.h"

#include "floodrl/ppo.hpp"

namespace floodrl {

namespace {

using json = nlohmann::json;

json components_json(const RewardComponents& c) {
  return json{{"I", c.infrastructure},
              {"D", c.delay},
              {"C", c.cancellation},
              {"A", c.implementation},
              {"M", c.maintenance}};
}

json masks_json(const std::vector<ActionMask>& masks) {
  json out = json::array();
  for (const ActionMask& m : masks) out.push_back(std::vector<bool>(m.begin(), m.end()));
  return out;
}

json state_json(const ZoneState& s) {
  json zones = json::array();
  for (Eigen::Index z = 0; z < s.rows(); ++z) {
    std::vector<double> status(kPhysicalMeasureCount);
    for (int m = 0; m < kPhysicalMeasureCount; ++m) status[m] = s(z, 3 + m);
    zones.push_back({{"I", s(z, 0)}, {"D", s(z, 1)}, {"C", s(z, 2)}, {"status", status}});
  }
  return zones;
}

json step_json(const StepResult& r) {
  return json{{"year", r.year},
              {"rain_mm", r.event.depth_mm},
              {"actions", r.actions},
              {"components", components_json(r.components)},
              {"reward", r.reward},
              {"impacts",
               {{"I", r.impacts.infrastructure_dkk},
                {"D", r.impacts.delay_dkk},
                {"C", r.impacts.cancellation_dkk},
                {"A", r.implementation_dkk},
                {"M", r.maintenance_dkk}}},
              {"done", r.done}};
}

json graph_json(const ZoneGraph& g) {
  json edges = json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  return json{{"zones", g.zones}, {"edges", edges}};
}

json catalog_json(const MeasureCatalog& cat) {
  json out = json::array();
  for (int a = 0; a < kActionCount; ++a) {
    const MeasureSpec& m = cat.at(a);
    out.push_back({{"id", a},
                   {"name", std::string(to_string(m.id))},
                   {"effectKind", std::string(to_string(m.effectKind))},
                   {"effectMagnitude", m.effectMagnitude},
                   {"rule", std::string(to_string(m.rule))},
                   {"implCost_dkk", m.implCost_dkk},
                   {"maintCost_dkk_per_year", m.maintCost_dkk_per_year},
                   {"lifetime_years", m.lifetime_years}});
  }
  return out;
}

// Bounding box per zone in metres from the raster's lower-left corner.
json layout_json(const TerrainGrid& t) {
  const int zones = t.zone_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::array<double, 4>> box(zones, {inf, inf, -inf, -inf});
  const double cs = t.cell_size_m();
  for (std::size_t c = 0; c < t.cell_count(); ++c) {
    const int z = t.zoneOf[c];
    if (z < 0) continue;
    const double x = static_cast<double>(c % t.width) * cs;
    const double y = static_cast<double>(c / t.width) * cs;
    auto& b = box[z];
    b[0] = std::min(b[0], x);
    b[1] = std::min(b[1], y);
    b[2] = std::max(b[2], x + cs);
    b[3] = std::max(b[3], y + cs);
  }
  json out = json::array();
  for (int z = 0; z < zones; ++z) {
    out.push_back({{"zone", z}, {"x0", box[z][0]}, {"y0", box[z][1]}, {"x1", box[z][2]}, {"y1", box[z][3]}});
  }
  return out;
}

template <class T>
T field_or(const json& req, const char* key, T fallback) {
  if (!req.contains(key) || req[key].is_null()) return fallback;
  const json& v = req[key];
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ApiError(400, "validation", std::string(key) + " must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ApiError(400, "validation", std::string(key) + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned() && v.get<long long>() < 0)
        throw ApiError(400, "validation", std::string(key) + " must be non-negative");
    }
  } else {
    if (!v.is_number()) throw ApiError(400, "validation", std::string(key) + " must be a number");
  }
  return v.get<T>();
}

std::vector<int> parse_actions(const json& req, const FloodEnv& env) {
  if (!req.is_object() || !req.contains("actions") || !req["actions"].is_array())
    throw ApiError(400, "validation", "request needs an 'actions' array");
  const json& a = req["actions"];
  const int zones = env.zone_count();
  if (static_cast<int>(a.size()) != zones)
    throw ApiError(400, "validation", "actions needs " + std::to_string(zones) + " entries",
                   json{{"expected", zones}, {"got", a.size()}});
  std::vector<int> actions(zones);
  for (int z = 0; z < zones; ++z) {
    if (!a[z].is_number_integer() || a[z].get<long long>() < 0 || a[z].get<long long>() >= kActionCount)
      throw ApiError(400, "validation", "action in zone " + std::to_string(z) + " must be an integer in [0, 7]");
    actions[z] = a[z].get<int>();
  }
  const auto masks = env.masks();
  std::vector<int> offending;
  for (int z = 0; z < zones; ++z) {
    if (actions[z] != 0 && !masks[z][actions[z]]) offending.push_back(z);
  }
  if (!offending.empty())
    throw ApiError(409, "feasibility", "masked actions in some zones", json{{"zones", offending}});
  return actions;
}

std::vector<int> policy_action(const PolicyParams& policy, const FloodEnv& env,
                               const std::shared_ptr<const Eigen::MatrixXd>& adjacency) {
  const Observation obs = observe_env(env, adjacency);
  return greedy(evaluate(policy, *obs.adjacency, obs.features, obs.masks).dist);
}

template <class T>
void put(std::string& buf, const T& v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

} // namespace

json ApiError::body() const {
  return json{{"version", kApiVersion}, {"error", {{"code", code}, {"message", what()}, {"details", details}}}};
}

ApiError to_api_error(const Error& e) {
  int status = 500;
  switch (e.kind()) {
  case ErrorKind::NotFound: status = 404; break;
  case ErrorKind::Feasibility:
  case ErrorKind::Protocol: status = 409; break;
  case ErrorKind::Validation:
  case ErrorKind::Parse:
  case ErrorKind::Domain:
  case ErrorKind::Config:
  case ErrorKind::Completeness: status = 400; break;
  default: break;
  }
  json details = json::object();
  if (e.kind() == ErrorKind::Domain && std::string_view(e.what()).find("scenario") != std::string_view::npos) {
    json valid = json::array();
    for (RcpScenario s : {RcpScenario::RCP26, RcpScenario::RCP45, RcpScenario::RCP85}) valid.push_back(to_string(s));
    details["validScenarios"] = valid;
  }
  return ApiError(status, to_string(e.kind()), e.what(), details);
}

SessionService::Session::Session(std::string id_, std::string world_, std::shared_ptr<const WorldModel> model_,
                                 EnvConfig config_)
    : id(std::move(id_)), world(std::move(world_)), model(model_), config(config_), env(std::move(model_), config_) {}

void SessionService::register_world(const std::string& name, std::shared_ptr<const WorldModel> world) {
  require(world != nullptr, ErrorKind::Validation, "null world");
  std::lock_guard lock(mutex_);
  worlds_[name] = std::move(world);
}

void SessionService::register_policy(const std::string& name, std::shared_ptr<const PolicyParams> policy) {
  require(policy != nullptr, ErrorKind::Validation, "null policy");
  require(policy->input_dim() == kPolicyInputDim, ErrorKind::Config, "policy input dimension does not match the env");
  std::lock_guard lock(mutex_);
  policies_[name] = std::move(policy);
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "not_found", "unknown session '" + id + "'");
  return it->second;
}

std::string SessionService::hash_env(const FloodEnv& env, const std::vector<std::vector<int>>& history) {
  std::string buf;
  put(buf, env.year());
  put(buf, env.started());
  const ZoneState& s = env.state();
  for (Eigen::Index i = 0; i < s.size(); ++i) put(buf, s.data()[i]);
  for (const Deployment& d : env.ledger().active()) {
    put(buf, d.zone);
    put(buf, static_cast<int>(d.measure));
    put(buf, d.deployYear);
    put(buf, d.units);
    put(buf, d.baseEffect);
    put(buf, d.lifetime_years);
  }
  for (std::uint64_t w : env.event_rng().state()) put(buf, w);
  for (const auto& row : history) {
    put(buf, static_cast<int>(row.size()));
    for (int a : row) put(buf, a);
  }
  return fnv1a_hex(buf);
}

json SessionService::session_payload(const Session& s) const {
  return json{{"version", kApiVersion},
              {"id", s.id},
              {"world", s.world},
              {"scenario", to_string(s.config.scenario)},
              {"seed", s.config.seed},
              {"startYear", s.config.startYear},
              {"endYear", s.config.endYear},
              {"year", s.env.year()},
              {"elapsed", s.history.size()},
              {"done", s.env.done()},
              {"policy", s.policy ? json(s.policyName) : json(nullptr)},
              {"state", state_json(s.env.state())},
              {"masks", masks_json(s.env.masks())},
              {"hash", hash_env(s.env, s.history)}};
}

json SessionService::create_session(const json& req) {
  if (!req.is_object()) throw ApiError(400, "validation", "request must be an object");
  if (!req.contains("world") || !req["world"].is_string()) throw ApiError(400, "validation", "request needs 'world'");
  const std::string worldName = req["world"].get<std::string>();

  EnvConfig cfg;
  cfg.scenario = scenario_or_throw(field_or<std::string>(req, "scenario", "RCP45"));
  cfg.seed = field_or<std::uint64_t>(req, "seed", 0);
  cfg.startYear = field_or<int>(req, "startYear", cfg.startYear);
  cfg.endYear = field_or<int>(req, "endYear", cfg.endYear);
  if (req.contains("fixedRain_mm") && !req["fixedRain_mm"].is_null())
    cfg.fixedRain_mm = field_or<double>(req, "fixedRain_mm", 0.0);
  cfg.validate();

  std::shared_ptr<const WorldModel> model;
  std::shared_ptr<const PolicyParams> policy;
  const std::string policyName = field_or<std::string>(req, "policy", "");
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    auto w = worlds_.find(worldName);
    if (w == worlds_.end()) {
      json known = json::array();
      for (const auto& [name, _] : worlds_) known.push_back(name);
      throw ApiError(404, "not_found", "unknown world '" + worldName + "'", json{{"worlds", known}});
    }
    model = w->second;
    if (!policyName.empty()) {
      auto p = policies_.find(policyName);
      if (p == policies_.end()) throw ApiError(404, "not_found", "unknown policy '" + policyName + "'");
      policy = p->second;
    }
    s = std::make_shared<Session>("s" + std::to_string(nextId_++), worldName, model, cfg);
    s->policy = policy;
    s->policyName = policyName;
    s->env.reset(cfg.seed);
    sessions_[s->id] = s;
  }
  std::lock_guard lock(s->mutex);
  json out = session_payload(*s);
  out["graph"] = graph_json(model->graph);
  out["catalog"] = catalog_json(model->world.catalog);
  return out;
}

json SessionService::get_session(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  json out = session_payload(*s);
  json steps = json::array();
  for (const StepResult& r : s->results) steps.push_back(step_json(r));
  out["history"] = steps;
  return out;
}

json SessionService::step(const std::string& id, const json& req) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->env.done()) throw ApiError(409, "protocol", "session already reached its final year");
  const std::vector<int> actions = parse_actions(req, s->env);
  StepResult r = s->env.step(actions);
  s->history.push_back(actions);
  json out = step_json(r);
  out["version"] = kApiVersion;
  out["masks"] = masks_json(s->env.masks());
  out["hash"] = hash_env(s->env, s->history);
  s->results.push_back(std::move(r));
  return out;
}

json SessionService::whatif(const std::string& id, const json& req) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->env.done()) throw ApiError(409, "protocol", "session already reached its final year");
  const std::vector<int> actions = parse_actions(req, s->env);
  const int requested = field_or<int>(req, "horizon", 0);
  if (requested < 0) throw ApiError(400, "validation", "horizon must be non-negative");
  const std::string mode = field_or<std::string>(req, "policy", "none");
  if (mode != "none" && mode != "attached")
    throw ApiError(400, "validation", "policy must be \"none\" or \"attached\"");
  if (mode == "attached" && !s->policy) throw ApiError(409, "no_policy", "session has no attached policy");
  const std::uint64_t nonce = field_or<std::uint64_t>(req, "nonce", 0);

  const int remaining = s->config.endYear - s->env.year();
  const int horizon = std::min(requested, remaining);
  const std::uint64_t previewSeed =
      mix_seed(mix_seed(s->config.seed, static_cast<std::uint64_t>(s->env.year())), nonce);

  FloodEnv clone = s->env;
  clone.reseed_events(previewSeed);
  std::shared_ptr<const Eigen::MatrixXd> adjacency;
  if (mode == "attached") adjacency = std::make_shared<Eigen::MatrixXd>(normalized_adjacency(clone.graph()));

  json steps = json::array();
  RewardComponents totals;
  double reward = 0.0;
  for (int k = 0; k <= horizon; ++k) {
    std::vector<int> a;
    if (k == 0)
      a = actions;
    else if (adjacency)
      a = policy_action(*s->policy, clone, adjacency);
    else
      a.assign(clone.zone_count(), 0);
    const StepResult r = clone.step(a);
    totals += r.components;
    reward += r.reward;
    steps.push_back(step_json(r));
  }
  return json{{"version", kApiVersion},
              {"year", s->env.year()},
              {"previewSeed", previewSeed},
              {"requestedHorizon", requested},
              {"horizon", horizon},
              {"clamped", horizon < requested},
              {"policy", mode},
              {"steps", steps},
              {"totals", components_json(totals)},
              {"reward", reward}};
}

json SessionService::compare(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (!s->policy) throw ApiError(409, "no_policy", "session has no attached policy");

  FloodEnv env(s->model, s->config);
  env.reset(s->config.seed);
  auto adjacency = std::make_shared<Eigen::MatrixXd>(normalized_adjacency(env.graph()));
  json years = json::array(), human = json::array(), policy = json::array();
  json humanActions = json::array(), policyActions = json::array();
  RewardComponents humanTotal, policyTotal;
  for (const StepResult& h : s->results) {
    const StepResult p = env.step(policy_action(*s->policy, env, adjacency));
    years.push_back(h.year);
    json hj = components_json(h.components);
    hj["reward"] = h.reward;
    hj["rain_mm"] = h.event.depth_mm;
    json pj = components_json(p.components);
    pj["reward"] = p.reward;
    pj["rain_mm"] = p.event.depth_mm;
    human.push_back(hj);
    policy.push_back(pj);
    humanActions.push_back(h.actions);
    policyActions.push_back(p.actions);
    humanTotal += h.components;
    policyTotal += p.components;
  }
  return json{{"version", kApiVersion},
              {"policyName", s->policyName},
              {"years", years},
              {"human", human},
              {"policy", policy},
              {"humanActions", humanActions},
              {"policyActions", policyActions},
              {"cumulative",
               {{"human", components_json(humanTotal)},
                {"policy", components_json(policyTotal)},
                {"humanCost", humanTotal.total()},
                {"policyCost", policyTotal.total()}}}};
}

json SessionService::worlds() const {
  std::lock_guard lock(mutex_);
  json out = json::array();
  for (const auto& [name, model] : worlds_) {
    out.push_back({{"name", name},
                   {"zones", model->zone_count()},
                   {"graph", graph_json(model->graph)},
                   {"layout", layout_json(model->world.terrain)}});
  }
  json policies = json::array();
  for (const auto& [name, _] : policies_) policies.push_back(name);
  return json{{"version", kApiVersion}, {"worlds", out}, {"policies", policies}};
}

json SessionService::catalog() const {
  return json{{"version", kApiVersion}, {"measures", catalog_json(MeasureCatalog{})}};
}

std::string SessionService::state_hash(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return hash_env(s->env, s->history);
}

bool SessionService::replay_matches(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  FloodEnv env(s->model, s->config);
  env.reset(s->config.seed);
  for (const auto& a : s->history) env.step(a);
  return hash_env(env, s->history) == hash_env(s->env, s->history) && env.state() == s->env.state();
}

void mount_routes(httplib::Server& server, SessionService& service) {
  auto respond = [](httplib::Response& res, int okStatus, const std::function<json()>& fn) {
    ApiError err(500, "internal", "internal error");
    try {
      const json body = fn();
      res.status = okStatus;
      res.set_content(body.dump(), "application/json");
      return;
    } catch (const ApiError& e) {
      err = e;
    } catch (const Error& e) {
      err = to_api_error(e);
    } catch (const json::exception& e) {
      err = ApiError(400, "validation", e.what());
    } catch (const std::exception& e) {
      err = ApiError(500, "internal", e.what());
    }
    res.status = err.status;
    res.set_content(err.body().dump(), "application/json");
  };
  auto body_of = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ApiError(400, "parse", std::string("invalid JSON body: ") + e.what());
    }
  };

  server.Post("/sessions", [&service, respond, body_of](const httplib::Request& req, httplib::Response& res) {
    respond(res, 201, [&] { return service.create_session(body_of(req)); });
  });
  server.Get(R"(/sessions/([^/]+))", [&service, respond](const httplib::Request& req, httplib::Response& res) {
    respond(res, 200, [&] { return service.get_session(req.matches[1]); });
  });
  server.Post(R"(/sessions/([^/]+)/step)",
              [&service, respond, body_of](const httplib::Request& req, httplib::Response& res) {
                respond(res, 200, [&] { return service.step(req.matches[1], body_of(req)); });
              });
  server.Post(R"(/sessions/([^/]+)/whatif)",
              [&service, respond, body_of](const httplib::Request& req, httplib::Response& res) {
                respond(res, 200, [&] { return service.whatif(req.matches[1], body_of(req)); });
              });
  server.Get(R"(/sessions/([^/]+)/compare)", [&service, respond](const httplib::Request& req, httplib::Response& res) {
    respond(res, 200, [&] { return service.compare(req.matches[1]); });
  });
  server.Get("/worlds", [&service, respond](const httplib::Request&, httplib::Response& res) {
    respond(res, 200, [&] { return service.worlds(); });
  });
  server.Get("/catalog", [&service, respond](const httplib::Request&, httplib::Response& res) {
    respond(res, 200, [&] { return service.catalog(); });
  });
}

} // namespace floodrl
