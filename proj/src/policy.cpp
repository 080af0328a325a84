#include "lfo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

#include "lfo/grad.hpp"
#include "lfo/optim.hpp"
#include "lfo/parallel.hpp"
#include "lfo/rng.hpp"

namespace lfo {

namespace {

constexpr std::uint64_t kMeanStream = 0x3ea1;
constexpr std::uint64_t kValueStream = 0x77b2;
constexpr std::uint64_t kShuffleStream = 0x51f;
constexpr std::uint64_t kBcStream = 0xbc0;
constexpr std::uint64_t kRolloutStream = 0x8011;
constexpr std::uint64_t kPpoStream = 0x990;
constexpr std::uint64_t kProbeStream = 0xe0e;

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

std::array<double, 2> target_position(const std::vector<Target>& layout, int color) {
  for (const Target& t : layout)
    if (t.color == color) return {t.x, t.y};
  throw DataError("scene layout has no target of color " + std::to_string(color));
}

void check_policy_params(const PolicyModel& policy) {
  policy.spec.validate();
  check_params(policy.spec.mean, policy.mean);
  check_params(policy.spec.value, policy.value);
  for (double ls : policy.log_std)
    if (ls < kLogStdMin || ls > kLogStdMax)
      throw ShapeError("policy log_std outside its clamp range");
}

// Single-row forward on pre-widened parameters.
double value_of(const NetSpec& spec, const double* params, const Observation& obs) {
  MlpFwd f;
  mlp_forward(spec, params, obs.data(), 1, f);
  return f.a.back().front();
}

std::array<double, 2> mean_of(const NetSpec& spec, const double* params,
                              const Observation& obs) {
  MlpFwd f;
  mlp_forward(spec, params, obs.data(), 1, f);
  return {f.a.back()[0], f.a.back()[1]};
}

double log_prob(const std::array<double, 2>& log_std, const std::array<double, 2>& mean,
                const std::array<double, 2>& action) {
  double lp = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double sigma = std::exp(log_std[d]);
    const double z = (action[d] - mean[d]) / sigma;
    lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi;
  }
  return lp;
}

}  // namespace

int observation_width(const EnvConfig& config) { return 6 + 2 * config.num_targets; }

Observation make_observation(const EnvConfig& config, const ArmState& state) {
  if (static_cast<int>(state.targets.size()) != config.num_targets)
    throw ShapeError("state target count does not match the environment config");
  Observation obs;
  obs.reserve(observation_width(config));
  for (int j = 0; j < 2; ++j) {
    obs.push_back(std::sin(state.angles[j]));
    obs.push_back(std::cos(state.angles[j]));
  }
  obs.push_back(state.velocities[0]);
  obs.push_back(state.velocities[1]);
  std::vector<Target> ordered = state.targets;
  std::sort(ordered.begin(), ordered.end(),
            [](const Target& a, const Target& b) { return a.color < b.color; });
  for (const Target& t : ordered) {
    obs.push_back(t.x);
    obs.push_back(t.y);
  }
  return obs;
}

void PolicySpec::validate() const {
  mean.validate();
  value.validate();
  if (mean.output_width() != 2) throw ConfigError("policy mean net must emit 2 torques");
  if (value.output_width() != 1) throw ConfigError("value net must emit 1 estimate");
  if (mean.input_width() != value.input_width())
    throw ConfigError("mean and value nets must share the observation width");
}

PolicySpec make_policy_spec(int obs_width, int hidden) {
  if (obs_width < 1) throw ConfigError("observation width must be positive");
  if (hidden < 1) throw ConfigError("policy hidden width must be positive");
  PolicySpec spec;
  spec.mean = mlp({obs_width, hidden, hidden, 2}, Act::Tanh);
  spec.value = mlp({obs_width, hidden, hidden, 1}, Act::Tanh);
  spec.validate();
  return spec;
}

PolicyModel init_policy(const EnvConfig& config, int hidden, std::uint64_t seed) {
  PolicyModel policy;
  policy.spec = make_policy_spec(observation_width(config), hidden);
  policy.mean = init_params(policy.spec.mean, mix_seed(seed, kMeanStream));
  policy.value = init_params(policy.spec.value, mix_seed(seed, kValueStream));
  return policy;
}

std::array<double, 2> policy_mean_action(const PolicyModel& policy,
                                         const Observation& obs) {
  check_policy_params(policy);
  if (static_cast<int>(obs.size()) != policy.spec.mean.input_width())
    throw ShapeError("observation width does not match the policy");
  const std::vector<double> w = widen(policy.mean);
  return mean_of(policy.spec.mean, w.data(), obs);
}

double policy_log_prob(const PolicyModel& policy, const Observation& obs,
                       const std::array<double, 2>& action) {
  const std::array<double, 2> mu = policy_mean_action(policy, obs);
  return log_prob(policy.log_std, mu, action);
}

void Trajectory::validate() const {
  const std::size_t t = rewards.size();
  if (t == 0) throw ShapeError("empty trajectory");
  if (observations.size() != t || frames.size() != t || actions.size() != t ||
      values.size() != t || dones.size() != t)
    throw ShapeError("trajectory arrays must share one length");
  for (double r : rewards)
    if (!std::isfinite(r)) throw NumericError("non-finite reward in trajectory");
}

void RewardSource::validate() const {
  if (kind == Kind::Inferred && model == nullptr)
    throw ConfigError("inferred reward source needs a model");
  if (!(scale > 0.0)) throw ConfigError("reward scale must be positive");
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda) {
  if (values.size() != rewards.size() + 1)
    throw ShapeError("gae needs one bootstrap value beyond the rewards");
  std::vector<double> adv(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
  }
  return adv;
}

double ppo_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void PpoConfig::validate() const {
  if (clip_eps <= 0.0) throw ConfigError("clip_eps must be positive");
  if (epochs < 0) throw ConfigError("ppo epochs must be non-negative");
  if (minibatch < 1) throw ConfigError("ppo minibatch must be positive");
  if (lr <= 0.0) throw ConfigError("ppo lr must be positive");
  if (value_coef < 0.0 || entropy_coef < 0.0)
    throw ConfigError("ppo coefficients must be non-negative");
}

void PpoBatch::validate() const {
  if (n() < 1) throw ShapeError("empty ppo batch");
  const std::size_t count = advantages.size();
  if (obs_width < 1 ||
      observations.size() != count * static_cast<std::size_t>(obs_width) ||
      actions.size() != count || returns.size() != count ||
      old_log_probs.size() != count)
    throw ShapeError("ppo batch arrays must share one length");
}

PpoBatch build_ppo_batch(const PolicyModel& policy,
                         const std::vector<Trajectory>& trajectories, double gamma,
                         double lambda) {
  check_policy_params(policy);
  if (trajectories.empty()) throw ShapeError("no trajectories to batch");
  PpoBatch batch;
  batch.obs_width = policy.spec.mean.input_width();
  const std::vector<double> wm = widen(policy.mean);
  for (const Trajectory& traj : trajectories) {
    traj.validate();
    if (traj.dones.back() == 0)
      throw ShapeError("trajectory must end with a done flag");
    std::vector<double> values(traj.values.begin(), traj.values.end());
    values.push_back(0.0);  // episodic: no bootstrap past the final step
    const std::vector<double> adv = gae(traj.rewards, values, gamma, lambda);
    for (int t = 0; t < traj.length(); ++t) {
      const Observation& obs = traj.observations[t];
      if (static_cast<int>(obs.size()) != batch.obs_width)
        throw ShapeError("observation width does not match the policy");
      batch.observations.insert(batch.observations.end(), obs.begin(), obs.end());
      batch.actions.push_back(traj.actions[t]);
      batch.advantages.push_back(adv[t]);
      batch.returns.push_back(adv[t] + traj.values[t]);
      const std::array<double, 2> mu = mean_of(policy.spec.mean, wm.data(), obs);
      batch.old_log_probs.push_back(log_prob(policy.log_std, mu, traj.actions[t]));
    }
  }
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= batch.n();
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  const double denom = std::max(std::sqrt(var / batch.n()), 1e-8);
  for (double& a : batch.advantages) a = (a - mean) / denom;
  return batch;
}

PolicyModel ppo_update(const PolicyModel& policy, const PpoBatch& batch,
                       const PpoConfig& config) {
  check_policy_params(policy);
  config.validate();
  batch.validate();
  if (batch.obs_width != policy.spec.mean.input_width())
    throw ShapeError("ppo batch was built for a different observation width");

  const NetSpec& mean_spec = policy.spec.mean;
  const NetSpec& value_spec = policy.spec.value;
  const std::size_t nm = mean_spec.param_count();
  const std::size_t nv = value_spec.param_count();
  std::vector<double> theta = widen(policy.mean);
  {
    const std::vector<double> wv = widen(policy.value);
    theta.insert(theta.end(), wv.begin(), wv.end());
  }
  theta.push_back(policy.log_std[0]);
  theta.push_back(policy.log_std[1]);

  OptimizerState opt = make_adam(config.lr);
  Rng rng(mix_seed(config.seed, kShuffleStream));
  std::vector<int> order(batch.n());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(theta.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < batch.n(); start += config.minibatch) {
      const int m = std::min(config.minibatch, batch.n() - start);
      std::vector<double> obs(static_cast<std::size_t>(m) * batch.obs_width);
      for (int i = 0; i < m; ++i)
        std::memcpy(obs.data() + static_cast<std::size_t>(i) * batch.obs_width,
                    batch.observations.data() +
                        static_cast<std::size_t>(order[start + i]) * batch.obs_width,
                    sizeof(double) * batch.obs_width);
      MlpFwd fm;
      MlpFwd fv;
      mlp_forward(mean_spec, theta.data(), obs.data(), m, fm);
      mlp_forward(value_spec, theta.data() + nm, obs.data(), m, fv);

      const std::array<double, 2> log_std{theta[nm + nv], theta[nm + nv + 1]};
      const double inv_m = 1.0 / m;
      std::vector<double> d_mean(static_cast<std::size_t>(m) * 2);
      std::vector<double> d_value(m);
      std::array<double, 2> g_ls{0.0, 0.0};
      double loss = 0.0;
      for (int i = 0; i < m; ++i) {
        const int idx = order[start + i];
        const std::array<double, 2> mu{fm.a.back()[2 * i], fm.a.back()[2 * i + 1]};
        const std::array<double, 2>& act = batch.actions[idx];
        const double lp = log_prob(log_std, mu, act);
        const double ratio = std::exp(lp - batch.old_log_probs[idx]);
        const double adv = batch.advantages[idx];
        const double surr = ppo_surrogate(ratio, adv, config.clip_eps);
        const double clipped = std::clamp(ratio, 1.0 - config.clip_eps,
                                          1.0 + config.clip_eps);
        // Gradient flows only through the unclipped branch of the min.
        const double w = ratio * adv <= clipped * adv ? ratio * adv : 0.0;
        for (int d = 0; d < 2; ++d) {
          const double sigma = std::exp(log_std[d]);
          const double z = (act[d] - mu[d]) / sigma;
          d_mean[static_cast<std::size_t>(i) * 2 + d] = -w * (z / sigma) * inv_m;
          g_ls[d] += -w * (z * z - 1.0) * inv_m;
        }
        const double v = fv.a.back()[i];
        const double verr = v - batch.returns[idx];
        loss += (-surr + config.value_coef * verr * verr) * inv_m;
        d_value[i] = config.value_coef * 2.0 * verr * inv_m;
      }
      const double entropy =
          log_std[0] + log_std[1] + 2.0 * (kHalfLog2Pi + 0.5);
      loss -= config.entropy_coef * entropy;
      g_ls[0] -= config.entropy_coef;
      g_ls[1] -= config.entropy_coef;
      if (!std::isfinite(loss)) throw NumericError("non-finite ppo loss");

      std::fill(grad.begin(), grad.end(), 0.0);
      mlp_backward(mean_spec, theta.data(), fm, d_mean.data(), grad.data(), nullptr,
                   nullptr);
      mlp_backward(value_spec, theta.data() + nm, fv, d_value.data(), grad.data() + nm,
                   nullptr, nullptr);
      grad[nm + nv] = g_ls[0];
      grad[nm + nv + 1] = g_ls[1];
      step_inplace(opt, theta, grad);
      theta[nm + nv] = std::clamp(theta[nm + nv], kLogStdMin, kLogStdMax);
      theta[nm + nv + 1] = std::clamp(theta[nm + nv + 1], kLogStdMin, kLogStdMax);
    }
  }

  PolicyModel next = policy;
  next.mean = narrow(mean_spec, std::span(theta).first(nm));
  next.value = narrow(value_spec, std::span(theta).subspan(nm, nv));
  next.log_std = {theta[nm + nv], theta[nm + nv + 1]};
  return next;
}

void BcConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("bc lr must be positive");
  if (steps < 0) throw ConfigError("bc steps must be non-negative");
  if (batch < 1) throw ConfigError("bc batch must be positive");
}

std::vector<Observation> demo_observations(const EnvConfig& config,
                                           const LabeledVideo& video) {
  if (video.states.size() != video.frames.size())
    throw ShapeError("demo video lacks per-frame states");
  std::vector<Observation> out;
  out.reserve(video.states.size());
  for (const std::array<float, 4>& s : video.states) {
    ArmState state;
    state.angles = {s[0], s[1]};
    state.velocities = {s[2], s[3]};
    state.targets = video.targets;
    out.push_back(make_observation(config, state));
  }
  return out;
}

PolicyModel bc_pretrain(PolicyModel policy, const std::vector<Observation>& observations,
                        const std::vector<std::array<double, 2>>& actions,
                        const BcConfig& config) {
  check_policy_params(policy);
  config.validate();
  if (observations.empty() || observations.size() != actions.size())
    throw DataError("behavioral cloning needs matching demo states and actions");

  const NetSpec& spec = policy.spec.mean;
  const int width = spec.input_width();
  Batch all;
  all.loss = LossKind::Mse;
  all.n = static_cast<int>(observations.size());
  all.input_width = width;
  all.target_width = 2;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (static_cast<int>(observations[i].size()) != width)
      throw ShapeError("demo observation width does not match the policy");
    all.inputs.insert(all.inputs.end(), observations[i].begin(), observations[i].end());
    all.targets.push_back(actions[i][0]);
    all.targets.push_back(actions[i][1]);
  }

  std::vector<double> theta = widen(policy.mean);
  OptimizerState opt = make_adam(config.lr);
  Rng rng(mix_seed(config.seed, kBcStream));
  Batch mini;
  mini.loss = LossKind::Mse;
  mini.input_width = width;
  mini.target_width = 2;
  for (int step = 0; step < config.steps; ++step) {
    mini.n = config.batch;
    mini.inputs.assign(static_cast<std::size_t>(config.batch) * width, 0.0);
    mini.targets.assign(static_cast<std::size_t>(config.batch) * 2, 0.0);
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t idx = rng.index(all.n);
      std::memcpy(mini.inputs.data() + static_cast<std::size_t>(b) * width,
                  all.inputs.data() + idx * width, sizeof(double) * width);
      mini.targets[static_cast<std::size_t>(b) * 2] = all.targets[idx * 2];
      mini.targets[static_cast<std::size_t>(b) * 2 + 1] = all.targets[idx * 2 + 1];
    }
    const LossGrad lg = loss_and_grad_d(spec, theta.data(), mini);
    step_inplace(opt, theta, std::span(lg.grad));
  }
  policy.mean = narrow(spec, theta);
  return policy;
}

ActionFn policy_controller(const EnvConfig& config, const PolicyModel& policy) {
  check_policy_params(policy);
  const auto wm = std::make_shared<const std::vector<double>>(widen(policy.mean));
  const NetSpec spec = policy.spec.mean;
  return [config, spec, wm](const ArmState& state) {
    return mean_of(spec, wm->data(), make_observation(config, state));
  };
}

ActionFn expert_controller(const EnvConfig& config, int target_color) {
  return [config, target_color](const ArmState& state) {
    return expert_action(config, state, target_color);
  };
}

void RlTrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("rl iterations must be non-negative");
  if (rollouts_per_iter < 1) throw ConfigError("rollouts per iteration must be positive");
  if (horizon < 1) throw ConfigError("rl horizon must be positive");
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw ConfigError("gamma and lambda must lie in [0, 1]");
  if (probe_episodes < 1) throw ConfigError("probe episodes must be positive");
  if (hidden < 1) throw ConfigError("policy hidden width must be positive");
  if (log_std_init < kLogStdMin || log_std_init > kLogStdMax)
    throw ConfigError("log_std_init must lie in the log_std clamp range");
  ppo.validate();
  bc_config.validate();
}

namespace {

Trajectory collect_rollout(const EnvConfig& env, const TaskSpec& task,
                           const std::vector<Target>& layout, int subtask_index,
                           const PolicyModel& policy, const RewardSource& source,
                           int horizon, Rng rng) {
  const std::array<double, 2> goal =
      target_position(layout, task.target_colors[subtask_index]);
  ArmState state;
  state.angles = {rng.uniform(-std::numbers::pi, std::numbers::pi),
                  rng.uniform(-std::numbers::pi, std::numbers::pi)};
  state.targets = layout;

  const std::vector<double> wm = widen(policy.mean);
  const std::vector<double> wv = widen(policy.value);
  const std::array<double, 2> sigma{std::exp(policy.log_std[0]),
                                    std::exp(policy.log_std[1])};

  Frame frame = render(env, state);
  std::optional<AnchoredReward> anchored;
  double g_prev = 0.0;
  if (source.kind == RewardSource::Kind::Inferred) {
    anchored.emplace(*source.model, frame);
    g_prev = anchored->g(frame);
  }

  Trajectory traj;
  for (int t = 0; t < horizon; ++t) {
    Observation obs = make_observation(env, state);
    const std::array<double, 2> mu = mean_of(policy.spec.mean, wm.data(), obs);
    const std::array<double, 2> action{mu[0] + sigma[0] * rng.normal(),
                                       mu[1] + sigma[1] * rng.normal()};
    const ArmState next = step_dynamics(env, state, action);
    Frame next_frame = render(env, next);

    double reward = 0.0;
    if (source.kind == RewardSource::Kind::GroundTruthDense) {
      const std::array<double, 2> ee = fk(env, next.angles);
      reward = -std::hypot(ee[0] - goal[0], ee[1] - goal[1]) -
               0.01 * (action[0] * action[0] + action[1] * action[1]);
    } else {
      const double g_next = anchored->g(next_frame);
      reward = source.scale * (g_next - g_prev);
      g_prev = g_next;
    }

    traj.values.push_back(value_of(policy.spec.value, wv.data(), obs));
    traj.observations.push_back(std::move(obs));
    traj.frames.push_back(std::move(frame));
    traj.actions.push_back(action);
    traj.rewards.push_back(reward);
    traj.dones.push_back(t + 1 == horizon ? 1 : 0);

    state = next;
    frame = std::move(next_frame);
  }
  return traj;
}

}  // namespace

PolicyTrainResult train_policy(const EnvConfig& config, const TaskSpec& task,
                               const std::vector<Target>& layout, int subtask_index,
                               const RewardSource& source, const RlTrainConfig& config_rl,
                               const LabeledVideo* demo) {
  config.validate();
  task.validate(config);
  config_rl.validate();
  source.validate();
  if (subtask_index < 0 || subtask_index >= task.k())
    throw ConfigError("subtask index out of range");
  target_position(layout, task.target_colors[subtask_index]);  // fail early

  PolicyModel policy = init_policy(config, config_rl.hidden, config_rl.seed);
  policy.log_std = {config_rl.log_std_init, config_rl.log_std_init};
  if (config_rl.bc) {
    if (demo == nullptr)
      throw DependencyError("behavioral cloning requested without a demonstration");
    std::vector<std::array<double, 2>> acts;
    acts.reserve(demo->actions.size());
    for (const std::array<float, 2>& a : demo->actions)
      acts.push_back({a[0], a[1]});
    BcConfig bc = config_rl.bc_config;
    bc.seed = mix_seed(config_rl.seed, kBcStream);
    policy = bc_pretrain(std::move(policy), demo_observations(config, *demo), acts, bc);
  }

  PolicyTrainResult result;
  const std::uint64_t roll_seed = mix_seed(config_rl.seed, kRolloutStream);
  for (int iter = 0; iter < config_rl.iterations; ++iter) {
    std::vector<Trajectory> trajs(config_rl.rollouts_per_iter);
    std::exception_ptr err = nullptr;
    const int nt = par::threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
    for (int j = 0; j < config_rl.rollouts_per_iter; ++j) {
      try {
        const std::uint64_t s = mix_seed(
            roll_seed,
            static_cast<std::uint64_t>(iter) * config_rl.rollouts_per_iter + j);
        trajs[j] = collect_rollout(config, task, layout, subtask_index, policy, source,
                                   config_rl.horizon, Rng(s));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);

    const PpoBatch batch =
        build_ppo_batch(policy, trajs, config_rl.gamma, config_rl.lambda);
    PpoConfig ppo = config_rl.ppo;
    ppo.seed = mix_seed(mix_seed(config_rl.seed, kPpoStream), iter);
    if (config_rl.lr_anneal)
      ppo.lr *= 1.0 - static_cast<double>(iter) / config_rl.iterations;
    policy = ppo_update(policy, batch, ppo);
    if (std::getenv("LFO_RL_DEBUG") != nullptr) {
      double ret = 0.0;
      for (const Trajectory& t : trajs)
        for (double r : t.rewards) ret += r;
      std::fprintf(stderr, "iter %3d  mean return %8.3f  log_std %.2f %.2f\n", iter,
                   ret / trajs.size(), policy.log_std[0], policy.log_std[1]);
    }

    result.success_curve.push_back(evaluate_policy(
        config, task, layout, subtask_index, policy, config_rl.probe_episodes,
        mix_seed(mix_seed(config_rl.seed, kProbeStream), iter), config_rl.horizon));
  }
  result.policy = std::move(policy);
  return result;
}

double evaluate_policy(const EnvConfig& config, const TaskSpec& task,
                       const std::vector<Target>& layout, int subtask_index,
                       const ActionFn& act, int n_trials, std::uint64_t seed,
                       int horizon) {
  config.validate();
  if (n_trials < 1) throw ConfigError("evaluation needs at least one trial");
  if (subtask_index < 0 || subtask_index >= task.k())
    throw ConfigError("subtask index out of range");
  const std::array<double, 2> goal =
      target_position(layout, task.target_colors[subtask_index]);

  std::vector<unsigned char> ok(n_trials, 0);
  std::exception_ptr err = nullptr;
  const int nt = par::threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int trial = 0; trial < n_trials; ++trial) {
    try {
      Rng rng(mix_seed(seed, trial));
      ArmState state;
      state.angles = {rng.uniform(-std::numbers::pi, std::numbers::pi),
                      rng.uniform(-std::numbers::pi, std::numbers::pi)};
      state.targets = layout;
      std::vector<std::array<double, 2>> trace{fk(config, state.angles)};
      for (int t = 0; t < horizon; ++t) {
        state = step_dynamics(config, state, act(state));
        trace.push_back(fk(config, state.angles));
      }
      ok[trial] = success_check(config, trace, goal) ? 1 : 0;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  int successes = 0;
  for (unsigned char o : ok) successes += o;
  return static_cast<double>(successes) / n_trials;
}

double evaluate_policy(const EnvConfig& config, const TaskSpec& task,
                       const std::vector<Target>& layout, int subtask_index,
                       const PolicyModel& policy, int n_trials, std::uint64_t seed,
                       int horizon) {
  return evaluate_policy(config, task, layout, subtask_index,
                         policy_controller(config, policy), n_trials, seed, horizon);
}

SequenceResult execute_sequence(const std::vector<ActionFn>& controllers,
                                const EnvConfig& config, const TaskSpec& task,
                                const std::vector<Target>& layout,
                                const std::vector<int>& order, int n_trials,
                                std::uint64_t seed, int horizon) {
  config.validate();
  task.validate(config);
  if (n_trials < 1) throw ConfigError("sequence evaluation needs at least one trial");
  if (controllers.size() != order.size() ||
      static_cast<int>(controllers.size()) != task.k())
    throw ConfigError("need one controller per subtask in demo order");
  std::vector<std::array<double, 2>> goals;
  for (int sub : order) {
    if (sub < 0 || sub >= task.k()) throw ConfigError("subtask order entry out of range");
    goals.push_back(target_position(layout, task.target_colors[sub]));
  }

  const int k = task.k();
  std::vector<std::vector<unsigned char>> stage_ok(n_trials,
                                                   std::vector<unsigned char>(k, 0));
  std::exception_ptr err = nullptr;
  const int nt = par::threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int trial = 0; trial < n_trials; ++trial) {
    try {
      Rng rng(mix_seed(seed, trial));
      ArmState state;
      state.angles = {rng.uniform(-std::numbers::pi, std::numbers::pi),
                      rng.uniform(-std::numbers::pi, std::numbers::pi)};
      state.targets = layout;
      for (int stage = 0; stage < k; ++stage) {
        int held = 0;
        for (int t = 0; t < horizon && held < config.hold_frames; ++t) {
          state = step_dynamics(config, state, controllers[stage](state));
          const std::array<double, 2> ee = fk(config, state.angles);
          const double dist = std::hypot(ee[0] - goals[stage][0], ee[1] - goals[stage][1]);
          held = dist <= config.target_radius ? held + 1 : 0;
        }
        stage_ok[trial][stage] = held >= config.hold_frames ? 1 : 0;
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  SequenceResult result;
  result.per_subtask.assign(k, 0.0);
  int all = 0;
  for (int trial = 0; trial < n_trials; ++trial) {
    bool whole = true;
    for (int stage = 0; stage < k; ++stage) {
      result.per_subtask[stage] += stage_ok[trial][stage];
      whole = whole && stage_ok[trial][stage] != 0;
    }
    all += whole ? 1 : 0;
  }
  for (double& r : result.per_subtask) r /= n_trials;
  result.overall = static_cast<double>(all) / n_trials;
  return result;
}

SequenceResult execute_sequence(const std::vector<PolicyModel>& policies,
                                const EnvConfig& config, const TaskSpec& task,
                                const std::vector<Target>& layout,
                                const std::vector<int>& order, int n_trials,
                                std::uint64_t seed, int horizon) {
  std::vector<ActionFn> controllers;
  controllers.reserve(policies.size());
  for (const PolicyModel& p : policies)
    controllers.push_back(policy_controller(config, p));
  return execute_sequence(controllers, config, task, layout, order, n_trials, seed,
                          horizon);
}

}  // namespace lfo
