#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "floodrl/env.hpp"
#include "floodrl/policy.hpp"

namespace httplib {
class Server;
}

namespace floodrl {

inline constexpr int kApiVersion = 1;

/// Error surfaced to API clients: HTTP status plus a machine-readable code.
struct ApiError : std::runtime_error {
  int status;
  std::string code;
  nlohmann::json details;
  ApiError(int status, std::string code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), status(status), code(std::move(code)), details(std::move(details)) {}
  nlohmann::json body() const;
};

/// Maps library errors onto HTTP statuses (404 not found, 409 feasibility and
/// protocol, 400 bad input, 500 otherwise).
ApiError to_api_error(const Error& e);

/// In-process session store behind the HTTP routes. Every method takes and
/// returns JSON payloads and throws ApiError.
class SessionService {
public:
  void register_world(const std::string& name, std::shared_ptr<const WorldModel> world);
  void register_policy(const std::string& name, std::shared_ptr<const PolicyParams> policy);

  /// {world, scenario?, seed?, startYear?, endYear?, fixedRain_mm?, policy?}
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json get_session(const std::string& id) const;
  /// {actions: [zones]}
  nlohmann::json step(const std::string& id, const nlohmann::json& request);
  /// {actions: [zones], horizon?, policy?: "none" | "attached", nonce?}
  nlohmann::json whatif(const std::string& id, const nlohmann::json& request) const;
  nlohmann::json compare(const std::string& id) const;
  nlohmann::json worlds() const;
  nlohmann::json catalog() const;

  /// Digest of everything that determines the session's future.
  std::string state_hash(const std::string& id) const;
  /// Rebuilds the session from its seed and history and compares hashes.
  bool replay_matches(const std::string& id) const;

private:
  struct Session {
    std::string id;
    std::string world;
    std::shared_ptr<const WorldModel> model;
    EnvConfig config;
    FloodEnv env;
    std::vector<std::vector<int>> history;
    std::vector<StepResult> results;
    std::shared_ptr<const PolicyParams> policy;
    std::string policyName;
    mutable std::mutex mutex;

    Session(std::string id, std::string world, std::shared_ptr<const WorldModel> model, EnvConfig config);
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json session_payload(const Session& s) const;
  static std::string hash_env(const FloodEnv& env, const std::vector<std::vector<int>>& history);

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const WorldModel>> worlds_;
  std::map<std::string, std::shared_ptr<const PolicyParams>> policies_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t nextId_ = 1;
};

/// Registers the routes on an httplib server.
void mount_routes(httplib::Server& server, SessionService& service);

} // namespace floodrl
