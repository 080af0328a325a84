#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "lfo/policy.hpp"
#include "lfo/rng.hpp"

using namespace lfo;

namespace {

// One-step bandit trajectory: fixed observation, immediate reward, no value.
Trajectory bandit_step(const Observation& obs, const std::array<double, 2>& action,
                       double reward) {
  Trajectory t;
  t.observations = {obs};
  t.frames = {Frame{}};
  t.actions = {action};
  t.rewards = {reward};
  t.values = {0.0};
  t.dones = {1};
  return t;
}

PolicyModel bandit_policy(std::uint64_t seed) {
  PolicyModel p;
  p.spec = make_policy_spec(2, 16);
  p.mean = init_params(p.spec.mean, seed);
  p.value = init_params(p.spec.value, seed + 1);
  p.log_std = {-1.0, -1.0};
  return p;
}

double held_out_mse(const PolicyModel& policy, const std::vector<Observation>& obs,
                    const std::vector<std::array<double, 2>>& acts) {
  double sum = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::array<double, 2> mu = policy_mean_action(policy, obs[i]);
    sum += (mu[0] - acts[i][0]) * (mu[0] - acts[i][0]) +
           (mu[1] - acts[i][1]) * (mu[1] - acts[i][1]);
  }
  return sum / static_cast<double>(obs.size());
}

}  // namespace

TEST_CASE("observations lay out proprioception then sorted targets") {
  EnvConfig env;
  CHECK(observation_width(env) == 14);
  ArmState state;
  state.angles = {0.0, std::numbers::pi / 2.0};
  state.velocities = {0.1, -0.2};
  state.targets = {{3, 0.5, 0.6}, {0, -0.1, 0.2}, {2, 0.3, -0.4}, {1, 0.7, 0.8}};
  const Observation obs = make_observation(env, state);
  REQUIRE(static_cast<int>(obs.size()) == 14);
  CHECK(obs[0] == doctest::Approx(0.0));
  CHECK(obs[1] == doctest::Approx(1.0));
  CHECK(obs[2] == doctest::Approx(1.0));
  CHECK(obs[3] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(obs[4] == doctest::Approx(0.1));
  CHECK(obs[5] == doctest::Approx(-0.2));
  // color 0 first, then 1, 2, 3
  CHECK(obs[6] == doctest::Approx(-0.1));
  CHECK(obs[7] == doctest::Approx(0.2));
  CHECK(obs[8] == doctest::Approx(0.7));
  CHECK(obs[12] == doctest::Approx(0.5));
  state.targets.pop_back();
  CHECK_THROWS_AS(make_observation(env, state), ShapeError);
}

TEST_CASE("gae matches hand arithmetic and the cumulative-sum oracle") {
  CHECK(gae(std::vector<double>{1.0}, std::vector<double>{0.0, 0.0}, 1.0, 1.0)[0] ==
        doctest::Approx(1.0));

  const auto zero = gae(std::vector<double>(5, 0.0), std::vector<double>(6, 0.0), 0.99,
                        0.95);
  for (double a : zero) CHECK(a == 0.0);

  const auto g0 = gae(std::vector<double>{1.0, 2.0},
                      std::vector<double>{0.5, 0.5, 0.0}, 0.0, 0.7);
  CHECK(g0[0] == doctest::Approx(0.5));
  CHECK(g0[1] == doctest::Approx(1.5));

  // gamma = lambda = 1 with zero values reduces to reversed cumulative sums.
  Rng rng(3);
  std::vector<double> rewards(12);
  for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
  const auto adv = gae(rewards, std::vector<double>(13, 0.0), 1.0, 1.0);
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    double tail = 0.0;
    for (std::size_t u = t; u < rewards.size(); ++u) tail += rewards[u];
    CHECK(adv[t] == doctest::Approx(tail).epsilon(1e-12));
  }

  CHECK_THROWS_AS(gae(rewards, std::vector<double>(12, 0.0), 1.0, 1.0), ShapeError);
}

TEST_CASE("ppo surrogate clips exactly as specified") {
  CHECK(ppo_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(ppo_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  for (double a : {-2.0, -0.3, 0.0, 0.7, 3.0})
    CHECK(ppo_surrogate(1.0, a, 0.2) == doctest::Approx(a));
  // Beyond the clip boundary the objective never increases with |r - 1|.
  for (double a : {1.0, -1.0}) {
    double prev = ppo_surrogate(1.2, a, 0.2);
    for (double r = 1.3; r < 2.5; r += 0.1) {
      const double cur = ppo_surrogate(r, a, 0.2);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    prev = ppo_surrogate(0.8, a, 0.2);
    for (double r = 0.7; r > 0.05; r -= 0.1) {
      const double cur = ppo_surrogate(r, a, 0.2);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("log probabilities match the Gaussian density") {
  PolicyModel p = bandit_policy(7);
  std::fill(p.mean.values.begin(), p.mean.values.end(), 0.0f);
  p.log_std = {0.0, 0.0};
  const Observation obs{0.3, -0.4};
  const std::array<double, 2> act{1.0, -2.0};
  // mu = 0, sigma = 1: lp = -0.5 * (1 + 4) - ln(2 pi)
  const double want = -0.5 * 5.0 - std::log(2.0 * std::numbers::pi);
  CHECK(policy_log_prob(p, obs, act) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("reward scaling leaves normalized advantages unchanged") {
  const PolicyModel policy = bandit_policy(11);
  Rng rng(12);
  std::vector<Trajectory> plain;
  std::vector<Trajectory> scaled;
  for (int i = 0; i < 32; ++i) {
    const Observation obs{1.0, 0.5};
    const std::array<double, 2> a{rng.normal(), rng.normal()};
    const double r = rng.uniform(-2.0, 1.0);
    plain.push_back(bandit_step(obs, a, r));
    scaled.push_back(bandit_step(obs, a, 3.7 * r));
  }
  const PpoBatch b1 = build_ppo_batch(policy, plain, 0.99, 0.95);
  const PpoBatch b2 = build_ppo_batch(policy, scaled, 0.99, 0.95);
  REQUIRE(b1.n() == b2.n());
  for (int i = 0; i < b1.n(); ++i)
    CHECK(std::fabs(b1.advantages[i] - b2.advantages[i]) <= 1e-6);

  PpoConfig cfg;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  cfg.epochs = 1;
  cfg.minibatch = 32;
  const PolicyModel u1 = ppo_update(policy, b1, cfg);
  const PolicyModel u2 = ppo_update(policy, b2, cfg);
  for (std::size_t i = 0; i < u1.mean.values.size(); ++i)
    CHECK(std::fabs(u1.mean.values[i] - u2.mean.values[i]) <= 1e-6);
}

TEST_CASE("ppo update degenerate cases leave the policy alone") {
  const PolicyModel policy = bandit_policy(13);
  Rng rng(14);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 16; ++i)
    trajs.push_back(bandit_step({1.0, 0.5}, {rng.normal(), rng.normal()},
                                rng.uniform(-1.0, 1.0)));
  PpoBatch batch = build_ppo_batch(policy, trajs, 0.99, 0.95);

  PpoConfig cfg;
  cfg.epochs = 0;
  const PolicyModel same = ppo_update(policy, batch, cfg);
  CHECK(same.mean.values == policy.mean.values);
  CHECK(same.value.values == policy.value.values);
  CHECK(same.log_std == policy.log_std);

  // Zero advantages with both auxiliary terms off: zero gradient, zero step.
  std::fill(batch.advantages.begin(), batch.advantages.end(), 0.0);
  cfg.epochs = 4;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  const PolicyModel still = ppo_update(policy, batch, cfg);
  CHECK(still.mean.values == policy.mean.values);
  CHECK(still.log_std == policy.log_std);
}

TEST_CASE("ppo solves the quadratic bandit") {
  PolicyModel policy = bandit_policy(15);
  const Observation obs{1.0, 0.5};
  PpoConfig cfg;
  cfg.lr = 3e-3;
  Rng rng(16);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 64; ++i) {
      const std::array<double, 2> mu = policy_mean_action(policy, obs);
      const std::array<double, 2> a{
          mu[0] + std::exp(policy.log_std[0]) * rng.normal(),
          mu[1] + std::exp(policy.log_std[1]) * rng.normal()};
      trajs.push_back(bandit_step(obs, a, -(a[0] * a[0] + a[1] * a[1])));
    }
    cfg.seed = iter;
    policy = ppo_update(policy, build_ppo_batch(policy, trajs, 0.99, 0.95), cfg);
  }
  const std::array<double, 2> mu = policy_mean_action(policy, obs);
  CHECK(std::fabs(mu[0]) < 0.1);
  CHECK(std::fabs(mu[1]) < 0.1);
}

TEST_CASE("trajectory validation catches ragged arrays and bad rewards") {
  Trajectory t = bandit_step({1.0, 0.5}, {0.0, 0.0}, 0.5);
  CHECK_NOTHROW(t.validate());
  t.actions.clear();
  CHECK_THROWS_AS(t.validate(), ShapeError);
  Trajectory u = bandit_step({1.0, 0.5}, {0.0, 0.0}, std::nan(""));
  CHECK_THROWS_AS(u.validate(), NumericError);
  Trajectory d = bandit_step({1.0, 0.5}, {0.0, 0.0}, 0.5);
  d.dones = {0};
  CHECK_THROWS_AS(build_ppo_batch(bandit_policy(1), {d}, 0.99, 0.95), ShapeError);
}

TEST_CASE("behavioral cloning regresses onto expert actions") {
  EnvConfig env;
  TaskSpec task;
  task.target_colors = {0, 1};
  task.distractor_colors = {2, 3};
  Rng lay_rng(21);
  const std::vector<Target> layout = place_targets(env, {0, 1, 2, 3}, lay_rng);
  const LabeledVideo demo = rollout_expert(env, task, {0, 1}, 900, 4, &layout);
  const std::vector<Observation> obs = demo_observations(env, demo);
  std::vector<std::array<double, 2>> acts;
  for (const auto& a : demo.actions) acts.push_back({a[0], a[1]});
  REQUIRE(obs.size() == acts.size());

  const std::size_t split = obs.size() * 4 / 5;
  const std::vector<Observation> train_o(obs.begin(), obs.begin() + split);
  const std::vector<std::array<double, 2>> train_a(acts.begin(), acts.begin() + split);
  const std::vector<Observation> held_o(obs.begin() + split, obs.end());
  const std::vector<std::array<double, 2>> held_a(acts.begin() + split, acts.end());

  PolicyModel policy = init_policy(env, 32, 77);
  BcConfig cfg;
  cfg.steps = 0;
  const PolicyModel untouched = bc_pretrain(policy, train_o, train_a, cfg);
  CHECK(untouched.mean.values == policy.mean.values);

  cfg.steps = 300;
  const double before = held_out_mse(policy, held_o, held_a);
  const PolicyModel cloned = bc_pretrain(policy, train_o, train_a, cfg);
  const PolicyModel cloned2 = bc_pretrain(policy, train_o, train_a, cfg);
  CHECK(cloned.mean.values == cloned2.mean.values);
  CHECK(cloned.value.values == policy.value.values);
  CHECK(cloned.log_std == policy.log_std);
  CHECK(held_out_mse(cloned, held_o, held_a) < before);

  CHECK_THROWS_AS(bc_pretrain(policy, {}, {}, cfg), DataError);
}

TEST_CASE("expert controller evaluation and sequencing") {
  EnvConfig env;
  TaskSpec task;
  task.target_colors = {0, 1};
  task.distractor_colors = {2, 3};
  Rng lay_rng(31);
  const std::vector<Target> layout = place_targets(env, {0, 1, 2, 3}, lay_rng);

  const ActionFn expert0 = expert_controller(env, 0);
  const double rate =
      evaluate_policy(env, task, layout, 0, expert0, 100, 5000);
  CHECK(rate >= 0.95);
  CHECK(rate <= 1.0);
  CHECK(evaluate_policy(env, task, layout, 0, expert0, 100, 5000) == rate);

  const std::vector<ActionFn> experts{expert0, expert_controller(env, 1)};
  const SequenceResult seq = execute_sequence(experts, env, task, layout, {0, 1}, 100, 1);
  CHECK(seq.overall >= 0.9);
  CHECK(seq.overall <= std::min(seq.per_subtask[0], seq.per_subtask[1]));

  // A spinning controller can never satisfy the hold criterion.
  const ActionFn spinner = [&env](const ArmState&) {
    return std::array<double, 2>{env.torque_limit, env.torque_limit};
  };
  const SequenceResult stuck =
      execute_sequence({spinner, experts[1]}, env, task, layout, {0, 1}, 50, 2);
  CHECK(stuck.per_subtask[0] == 0.0);
  CHECK(stuck.overall == 0.0);
}

TEST_CASE("dense-reward training lifts a random policy") {
  EnvConfig env;
  TaskSpec task;
  task.target_colors = {0, 1};
  task.distractor_colors = {2, 3};
  Rng lay_rng(47);
  const std::vector<Target> layout = place_targets(env, {0, 1, 2, 3}, lay_rng);

  const PolicyModel fresh = init_policy(env, 64, 123);
  const double untrained = evaluate_policy(env, task, layout, 0, fresh, 50, 60);
  CHECK(untrained <= 0.2);

  RewardSource source;  // ground-truth dense
  RlTrainConfig cfg;
  cfg.iterations = 90;
  cfg.seed = 123;
  const PolicyTrainResult out = train_policy(env, task, layout, 0, source, cfg);
  REQUIRE(out.success_curve.size() == 90);
  const double trained = evaluate_policy(env, task, layout, 0, out.policy, 50, 60);
  CHECK(trained >= 0.9);
  CHECK(trained > untrained);
}

TEST_CASE("train_policy is deterministic and validates its inputs") {
  EnvConfig env;
  TaskSpec task;
  task.target_colors = {0, 1};
  task.distractor_colors = {2, 3};
  Rng lay_rng(53);
  const std::vector<Target> layout = place_targets(env, {0, 1, 2, 3}, lay_rng);

  RlTrainConfig cfg;
  cfg.iterations = 2;
  cfg.rollouts_per_iter = 4;
  cfg.hidden = 16;
  cfg.probe_episodes = 4;
  cfg.seed = 9;
  RewardSource source;
  const PolicyTrainResult a = train_policy(env, task, layout, 0, source, cfg);
  const PolicyTrainResult b = train_policy(env, task, layout, 0, source, cfg);
  CHECK(a.policy.mean.values == b.policy.mean.values);
  CHECK(a.policy.value.values == b.policy.value.values);
  CHECK(a.policy.log_std == b.policy.log_std);
  CHECK(a.success_curve == b.success_curve);

  CHECK_THROWS_AS(train_policy(env, task, layout, 5, source, cfg), ConfigError);
  RewardSource broken;
  broken.kind = RewardSource::Kind::Inferred;
  CHECK_THROWS_AS(train_policy(env, task, layout, 0, broken, cfg), ConfigError);
  RlTrainConfig bc_cfg = cfg;
  bc_cfg.bc = true;
  CHECK_THROWS_AS(train_policy(env, task, layout, 0, source, bc_cfg), DependencyError);
}
