#include "floodrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace floodrl {

// ------------------------------------------------------------- flood adapter

FloodRlEnv::FloodRlEnv(std::shared_ptr<const WorldModel> world, EnvConfig config)
    : env_(world, config), adjacency_(std::make_shared<Eigen::MatrixXd>(normalized_adjacency(world->graph))) {}

Observation observe_env(const FloodEnv& env, std::shared_ptr<const Eigen::MatrixXd> adjacency) {
  const double frac = static_cast<double>(env.steps_taken()) / env.config().horizon();
  return Observation{std::move(adjacency), policy_features(env.state(), env.world().descriptors, frac), env.masks()};
}

Observation FloodRlEnv::observe() const { return observe_env(env_, adjacency_); }

Observation FloodRlEnv::reset(std::uint64_t seed) {
  env_.reset(seed);
  return observe();
}

EnvTransition FloodRlEnv::step(std::span<const int> actions) {
  const StepResult r = env_.step(actions);
  return EnvTransition{observe(), r.scaledReward, r.reward, r.components, r.done};
}

// -------------------------------------------------------------------- config

void PpoConfig::validate() const {
  require(batchSize > 0 && stepsPerUpdate > 0 && epochs > 0 && parallelEnvs > 0 && maxSteps > 0 &&
              hidden > 0,
          ErrorKind::Validation, "PPO sizes must be positive");
  require(entropyCoef >= 0.0 && valueCoef >= 0.0, ErrorKind::Validation, "loss coefficients must be nonnegative");
  require(klLimit > 0.0, ErrorKind::Validation, "KL limit must be positive");
  require(clip > 0.0 && learningRate > 0.0 && maxGradNorm > 0.0, ErrorKind::Validation,
          "clip, learning rate and gradient clip must be positive");
  require(gaeLambda >= 0.0 && gaeLambda <= 1.0 && gamma > 0.0 && gamma <= 1.0, ErrorKind::Validation,
          "GAE lambda and discount must lie in (0, 1]");
  require(plateauPatience >= 0 && emaAlpha > 0.0 && emaAlpha <= 1.0, ErrorKind::Validation,
          "plateau settings out of range");
}

// ---------------------------------------------------------------- advantages

void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  for (int e = 0; e < buf.envs; ++e) {
    double gae = 0.0;
    for (int t = buf.steps - 1; t >= 0; --t) {
      Transition& tr = buf.at(e, t);
      const double next = t + 1 < buf.steps ? buf.at(e, t + 1).value : buf.bootstrap[e];
      const double live = tr.done ? 0.0 : 1.0;
      const double delta = tr.reward + gamma * next * live - tr.value;
      gae = delta + gamma * lambda * live * gae;
      tr.advantage = gae;
      tr.ret = gae + tr.value;
    }
  }
}

void normalize_advantages(RolloutBuffer& buf) {
  if (buf.data.empty()) return;
  double mean = 0.0;
  for (const Transition& t : buf.data) mean += t.advantage;
  mean /= static_cast<double>(buf.size());
  double var = 0.0;
  for (const Transition& t : buf.data) var += (t.advantage - mean) * (t.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(buf.size()));
  for (Transition& t : buf.data) t.advantage = sd > 0.0 ? (t.advantage - mean) / sd : t.advantage - mean;
}

std::string curve_line(const CurvePoint& p) {
  nlohmann::json j{{"step", p.step},
                   {"update", p.update},
                   {"episodes", p.episodes},
                   {"mean_return", p.meanReturn},
                   {"mean_return_raw", p.meanReturnRaw},
                   {"I", p.meanComponents.infrastructure},
                   {"D", p.meanComponents.delay},
                   {"C", p.meanComponents.cancellation},
                   {"A", p.meanComponents.implementation},
                   {"M", p.meanComponents.maintenance},
                   {"smoothed", p.smoothed}};
  return j.dump();
}

// ------------------------------------------------------------------- trainer

PpoTrainer::PpoTrainer(PpoConfig config, EnvFactory factory)
    : config_(config), factory_(std::move(factory)), sampleRng_(mix_seed(config.seed, 1)),
      shuffleRng_(mix_seed(config.seed, 2)) {
  config_.validate();
  require(static_cast<bool>(factory_), ErrorKind::Validation, "trainer needs an environment factory");
  slots_.resize(config_.parallelEnvs);
  for (int e = 0; e < config_.parallelEnvs; ++e) {
    slots_[e].env = factory_(e);
    require(slots_[e].env != nullptr, ErrorKind::Validation, "environment factory returned nothing");
  }
  params_ = PolicyParams::random(slots_[0].env->input_dim(), config_.hidden, config_.seed);
  adam_ = Adam(params_.size());
  for (int e = 0; e < config_.parallelEnvs; ++e) start_episode(slots_[e], e);
}

double PpoTrainer::current_learning_rate() const {
  if (!config_.annealLearningRate) return config_.learningRate;
  const double left = 1.0 - static_cast<double>(steps_) / static_cast<double>(config_.maxSteps);
  return config_.learningRate * std::max(left, 0.05);
}

std::uint64_t PpoTrainer::episode_seed(int env, long index) const {
  return mix_seed(mix_seed(config_.seed, 0x1000 + static_cast<std::uint64_t>(env)), static_cast<std::uint64_t>(index));
}

void PpoTrainer::start_episode(Slot& slot, int env) {
  slot.episodeSeed = episode_seed(env, slot.episodeIndex);
  slot.obs = slot.env->reset(slot.episodeSeed);
  slot.history.clear();
  slot.episodeReturn = 0.0;
  slot.episodeReturnRaw = 0.0;
  slot.episodeComponents = {};
}

RolloutBuffer PpoTrainer::collect() {
  RolloutBuffer buf;
  buf.envs = config_.parallelEnvs;
  buf.steps = config_.stepsPerUpdate;
  buf.data.resize(static_cast<std::size_t>(buf.envs) * buf.steps);
  buf.bootstrap.assign(buf.envs, 0.0);
  for (int t = 0; t < buf.steps; ++t) {
    for (int e = 0; e < buf.envs; ++e) {
      Slot& slot = slots_[e];
      const PolicyOutput out = evaluate(params_, *slot.obs.adjacency, slot.obs.features, slot.obs.masks);
      JointSample s = sample(out.dist, sampleRng_);
      EnvTransition step = slot.env->step(s.actions);

      Transition& tr = buf.at(e, t);
      tr.adjacency = slot.obs.adjacency;
      tr.features = std::move(slot.obs.features);
      tr.masks = std::move(slot.obs.masks);
      tr.actions = s.actions;
      tr.logProb = s.logProb;
      tr.value = out.value;
      tr.reward = step.reward;
      tr.done = step.done;
      ++steps_;

      slot.history.push_back(std::move(s.actions));
      slot.episodeReturn += step.reward;
      slot.episodeReturnRaw += step.rawReward;
      slot.episodeComponents += step.components;
      if (step.done) {
        ++doneEpisodes_;
        doneReturn_ += slot.episodeReturn;
        doneReturnRaw_ += slot.episodeReturnRaw;
        doneComponents_ += slot.episodeComponents;
        ++slot.episodeIndex;
        start_episode(slot, e);
      } else {
        slot.obs = std::move(step.next);
      }
    }
  }
  for (int e = 0; e < buf.envs; ++e) {
    const Slot& slot = slots_[e];
    buf.bootstrap[e] = evaluate(params_, *slot.obs.adjacency, slot.obs.features, slot.obs.masks).value;
  }
  compute_gae(buf, config_.gamma, config_.gaeLambda);
  return buf;
}

namespace {

void gather(const RolloutBuffer& buf, std::span<const std::size_t> idx, std::vector<GraphInput>& inputs,
            std::vector<PpoTarget>& targets) {
  inputs.clear();
  targets.clear();
  for (std::size_t i : idx) {
    const Transition& t = buf.data[i];
    inputs.push_back({t.adjacency.get(), &t.features, &t.masks});
    targets.push_back({&t.actions, t.logProb, t.advantage, t.ret});
  }
}

double buffer_kl(const PolicyParams& p, const RolloutBuffer& buf, const LossCoefficients& coef) {
  std::vector<std::size_t> idx(buf.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<GraphInput> inputs;
  std::vector<PpoTarget> targets;
  double total = 0.0;
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const std::size_t n = std::min(chunk, idx.size() - start);
    gather(buf, std::span<const std::size_t>(idx).subspan(start, n), inputs, targets);
    total += ppo_loss(p, inputs, targets, coef, nullptr).approxKl * static_cast<double>(n);
  }
  return total / static_cast<double>(idx.size());
}

} // namespace

UpdateMetrics PpoTrainer::update(RolloutBuffer& buf) {
  require(!buf.data.empty(), ErrorKind::Contract, "update needs a filled buffer");
  normalize_advantages(buf);
  const LossCoefficients coef{config_.clip, config_.entropyCoef, config_.valueCoef};
  UpdateMetrics m;
  std::vector<std::size_t> order(buf.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<GraphInput> inputs;
  std::vector<PpoTarget> targets;
  Eigen::VectorXd grad;
  int minibatches = 0;

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    const double kl = buffer_kl(params_, buf, coef);
    m.klPerEpoch.push_back(kl);
    if (epoch > 0 && kl > config_.klLimit) {
      m.klAbort = true;
      break;
    }
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffleRng_.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += config_.batchSize) {
      const std::size_t n = std::min<std::size_t>(config_.batchSize, order.size() - start);
      gather(buf, std::span<const std::size_t>(order).subspan(start, n), inputs, targets);
      const LossStats st = ppo_loss(params_, inputs, targets, coef, &grad);
      const double norm = grad.norm();
      if (norm > config_.maxGradNorm) grad *= config_.maxGradNorm / norm;
      adam_.step(params_.theta, grad, current_learning_rate());
      m.policyLoss += st.policy;
      m.valueLoss += st.value;
      m.entropy += st.entropy;
      m.clipFraction += st.clipFraction;
      ++minibatches;
    }
    ++m.epochsRun;
  }
  if (!m.klAbort) m.klPerEpoch.push_back(buffer_kl(params_, buf, coef));
  m.meanKl = m.klPerEpoch.back();
  if (minibatches > 0) {
    m.policyLoss /= minibatches;
    m.valueLoss /= minibatches;
    m.entropy /= minibatches;
    m.clipFraction /= minibatches;
  }
  require(params_.theta.allFinite(), ErrorKind::Numerical, "non-finite weights after update");
  return m;
}

CurvePoint PpoTrainer::iterate() {
  RolloutBuffer buf = collect();
  update(buf);
  ++updates_;
  CurvePoint p;
  p.step = steps_;
  p.update = updates_;
  p.episodes = doneEpisodes_;
  if (doneEpisodes_ > 0) {
    const double inv = 1.0 / doneEpisodes_;
    p.meanReturn = doneReturn_ * inv;
    p.meanReturnRaw = doneReturnRaw_ * inv;
    p.meanComponents = {doneComponents_.infrastructure * inv, doneComponents_.delay * inv,
                        doneComponents_.cancellation * inv, doneComponents_.implementation * inv,
                        doneComponents_.maintenance * inv};
    ema_ = ema_ ? (1.0 - config_.emaAlpha) * *ema_ + config_.emaAlpha * p.meanReturn : p.meanReturn;
    if (!haveBest_ || *ema_ > bestEma_ + config_.plateauMinDelta) {
      bestEma_ = *ema_;
      haveBest_ = true;
      sinceBest_ = 0;
    } else {
      ++sinceBest_;
    }
  }
  p.smoothed = ema_.value_or(0.0);
  doneEpisodes_ = 0;
  doneReturn_ = doneReturnRaw_ = 0.0;
  doneComponents_ = {};
  curve_.push_back(p);
  return p;
}

bool PpoTrainer::plateaued() const {
  return config_.plateauPatience > 0 && sinceBest_ >= config_.plateauPatience;
}

TrainResult PpoTrainer::train(const std::function<void(const PpoTrainer&, const CurvePoint&)>& on_update) {
  while (steps_ < config_.maxSteps && !plateaued()) {
    const CurvePoint p = iterate();
    if (on_update) on_update(*this, p);
  }
  return TrainResult{curve_, updates_, steps_, plateaued()};
}

// ------------------------------------------------------------- resumability

namespace {

NamedArray vec_array(std::string name, const std::vector<double>& v) {
  return NamedArray{std::move(name), 1, static_cast<Eigen::Index>(v.size()), v};
}

void push_u64(std::vector<double>& out, std::uint64_t v) {
  out.push_back(static_cast<double>(v >> 32));
  out.push_back(static_cast<double>(v & 0xffffffffULL));
}

std::uint64_t pop_u64(const std::vector<double>& in, std::size_t& k) {
  const auto hi = static_cast<std::uint64_t>(in.at(k));
  const auto lo = static_cast<std::uint64_t>(in.at(k + 1));
  k += 2;
  return (hi << 32) | lo;
}

void push_components(std::vector<double>& out, const RewardComponents& c) {
  out.insert(out.end(), {c.infrastructure, c.delay, c.cancellation, c.implementation, c.maintenance});
}

RewardComponents pop_components(const std::vector<double>& in, std::size_t& k) {
  RewardComponents c{in.at(k), in.at(k + 1), in.at(k + 2), in.at(k + 3), in.at(k + 4)};
  k += 5;
  return c;
}

} // namespace

std::string PpoTrainer::save_state() const {
  std::vector<NamedArray> arrays;
  for (NamedArray a : params_to_arrays(params_)) {
    a.name = "params/" + a.name;
    arrays.push_back(std::move(a));
  }
  arrays.push_back(vec_array("adam/m", std::vector<double>(adam_.m.data(), adam_.m.data() + adam_.m.size())));
  arrays.push_back(vec_array("adam/v", std::vector<double>(adam_.v.data(), adam_.v.data() + adam_.v.size())));

  std::vector<double> c;
  push_u64(c, static_cast<std::uint64_t>(adam_.t));
  for (std::uint64_t s : sampleRng_.state()) push_u64(c, s);
  for (std::uint64_t s : shuffleRng_.state()) push_u64(c, s);
  push_u64(c, static_cast<std::uint64_t>(steps_));
  push_u64(c, static_cast<std::uint64_t>(updates_));
  c.push_back(ema_ ? 1.0 : 0.0);
  c.push_back(ema_.value_or(0.0));
  c.push_back(haveBest_ ? 1.0 : 0.0);
  c.push_back(bestEma_);
  c.push_back(sinceBest_);
  c.push_back(doneEpisodes_);
  c.push_back(doneReturn_);
  c.push_back(doneReturnRaw_);
  push_components(c, doneComponents_);
  c.push_back(static_cast<double>(slots_.size()));
  arrays.push_back(vec_array("trainer", c));

  for (std::size_t e = 0; e < slots_.size(); ++e) {
    const Slot& s = slots_[e];
    std::vector<double> meta;
    push_u64(meta, static_cast<std::uint64_t>(s.episodeIndex));
    meta.push_back(s.episodeReturn);
    meta.push_back(s.episodeReturnRaw);
    push_components(meta, s.episodeComponents);
    arrays.push_back(vec_array("env" + std::to_string(e) + "/meta", meta));
    NamedArray h{"env" + std::to_string(e) + "/history", static_cast<Eigen::Index>(s.history.size()),
                 s.history.empty() ? 0 : static_cast<Eigen::Index>(s.history[0].size()), {}};
    for (const auto& step : s.history) h.data.insert(h.data.end(), step.begin(), step.end());
    arrays.push_back(std::move(h));
  }

  NamedArray curve{"curve", static_cast<Eigen::Index>(curve_.size()), 12, {}};
  for (const CurvePoint& p : curve_) {
    curve.data.insert(curve.data.end(), {static_cast<double>(p.step), static_cast<double>(p.update),
                                         static_cast<double>(p.episodes), p.meanReturn, p.meanReturnRaw});
    push_components(curve.data, p.meanComponents);
    curve.data.push_back(p.smoothed);
    curve.data.push_back(0.0);
  }
  arrays.push_back(std::move(curve));
  return encode_arrays(arrays);
}

void PpoTrainer::load_state(std::string_view bytes) {
  const std::vector<NamedArray> arrays = decode_arrays(bytes);
  std::vector<NamedArray> ps;
  for (const NamedArray& a : arrays) {
    if (a.name.rfind("params/", 0) == 0) ps.push_back({a.name.substr(7), a.rows, a.cols, a.data});
  }
  PolicyParams p = params_from_arrays(ps);
  require(p.input_dim() == params_.input_dim() && p.hidden() == params_.hidden(), ErrorKind::Config,
          "checkpoint does not match the trainer's network shape");
  params_ = std::move(p);
  const NamedArray& m = find_array(arrays, "adam/m");
  const NamedArray& v = find_array(arrays, "adam/v");
  require(static_cast<Eigen::Index>(m.data.size()) == params_.size() &&
              static_cast<Eigen::Index>(v.data.size()) == params_.size(),
          ErrorKind::Parse, "optimizer state has the wrong size");
  adam_.m = Eigen::Map<const Eigen::VectorXd>(m.data.data(), params_.size());
  adam_.v = Eigen::Map<const Eigen::VectorXd>(v.data.data(), params_.size());

  const std::vector<double>& c = find_array(arrays, "trainer").data;
  std::size_t k = 0;
  adam_.t = static_cast<long>(pop_u64(c, k));
  std::array<std::uint64_t, 4> st{};
  for (auto& s : st) s = pop_u64(c, k);
  sampleRng_.set_state(st);
  for (auto& s : st) s = pop_u64(c, k);
  shuffleRng_.set_state(st);
  steps_ = static_cast<long>(pop_u64(c, k));
  updates_ = static_cast<int>(pop_u64(c, k));
  const bool hasEma = c.at(k++) != 0.0;
  const double ema = c.at(k++);
  ema_ = hasEma ? std::optional<double>(ema) : std::nullopt;
  haveBest_ = c.at(k++) != 0.0;
  bestEma_ = c.at(k++);
  sinceBest_ = static_cast<int>(c.at(k++));
  doneEpisodes_ = static_cast<int>(c.at(k++));
  doneReturn_ = c.at(k++);
  doneReturnRaw_ = c.at(k++);
  doneComponents_ = pop_components(c, k);
  require(static_cast<std::size_t>(c.at(k++)) == slots_.size(), ErrorKind::Config,
          "checkpoint was written with a different number of environments");

  for (std::size_t e = 0; e < slots_.size(); ++e) {
    Slot& s = slots_[e];
    const std::vector<double>& meta = find_array(arrays, "env" + std::to_string(e) + "/meta").data;
    std::size_t j = 0;
    s.episodeIndex = static_cast<long>(pop_u64(meta, j));
    start_episode(s, static_cast<int>(e));
    s.episodeReturn = meta.at(j++);
    s.episodeReturnRaw = meta.at(j++);
    s.episodeComponents = pop_components(meta, j);
    const NamedArray& h = find_array(arrays, "env" + std::to_string(e) + "/history");
    for (Eigen::Index r = 0; r < h.rows; ++r) {
      std::vector<int> a(h.cols);
      for (Eigen::Index q = 0; q < h.cols; ++q) a[q] = static_cast<int>(h.data[r * h.cols + q]);
      EnvTransition t = s.env->step(a);
      require(!t.done, ErrorKind::Parse, "replayed episode ended early");
      s.obs = std::move(t.next);
      s.history.push_back(std::move(a));
    }
  }

  const NamedArray& curve = find_array(arrays, "curve");
  curve_.clear();
  for (Eigen::Index r = 0; r < curve.rows; ++r) {
    const double* d = curve.data.data() + r * curve.cols;
    CurvePoint p;
    p.step = static_cast<long>(d[0]);
    p.update = static_cast<int>(d[1]);
    p.episodes = static_cast<int>(d[2]);
    p.meanReturn = d[3];
    p.meanReturnRaw = d[4];
    p.meanComponents = {d[5], d[6], d[7], d[8], d[9]};
    p.smoothed = d[10];
    curve_.push_back(p);
  }
}

} // namespace floodrl
