#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lfo/net.hpp"
#include "lfo/reacher.hpp"
#include "lfo/reward.hpp"
#include "lfo/taskgen.hpp"

namespace lfo {

// Policy input: sin/cos of both joints, joint velocities, then every target
// position ordered by color index. Width is fixed by the environment config.
using Observation = std::vector<double>;

int observation_width(const EnvConfig& config);  // 6 + 2 * num_targets
Observation make_observation(const EnvConfig& config, const ArmState& state);

struct PolicySpec {
  NetSpec mean;   // observation -> 2 torques
  NetSpec value;  // observation -> 1
  void validate() const;
};

PolicySpec make_policy_spec(int obs_width, int hidden = 64);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicyModel {
  PolicySpec spec;
  ParamVector mean;
  ParamVector value;
  std::array<double, 2> log_std{-2.0, -2.0};  // state-independent, clamped
};

PolicyModel init_policy(const EnvConfig& config, int hidden, std::uint64_t seed);

// Mean action (no exploration noise); the evaluation-time policy.
std::array<double, 2> policy_mean_action(const PolicyModel& policy,
                                         const Observation& obs);

// Gaussian log density of an action under the policy at the given observation.
double policy_log_prob(const PolicyModel& policy, const Observation& obs,
                       const std::array<double, 2>& action);

// One episode of a single subtask: parallel arrays of equal length T.
struct Trajectory {
  std::vector<Observation> observations;
  std::vector<Frame> frames;  // rendered pre-action frame per step
  std::vector<std::array<double, 2>> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<unsigned char> dones;
  int length() const { return static_cast<int>(rewards.size()); }
  void validate() const;  // equal lengths, finite rewards
};

struct RewardSource {
  enum class Kind { GroundTruthDense, Inferred };
  Kind kind = Kind::GroundTruthDense;
  const RewardModel* model = nullptr;  // inferred only
  double scale = 10.0;                 // multiplier on inferred g-differences
  void validate() const;
};

// Generalized advantage estimation; values carries one bootstrap entry beyond
// the rewards.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda);

// Per-sample clipped objective min(r*A, clip(r, 1-eps, 1+eps)*A), to be
// maximized.
double ppo_surrogate(double ratio, double advantage, double clip_eps);

struct PpoConfig {
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double lr = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::uint64_t seed = 0;
  void validate() const;
};

// Flattened trajectories with advantages normalized to mean 0 / std 1
// (std floor 1e-8) and log probabilities under the collecting policy.
struct PpoBatch {
  int obs_width = 0;
  std::vector<double> observations;  // n x obs_width
  std::vector<std::array<double, 2>> actions;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> old_log_probs;
  int n() const { return static_cast<int>(advantages.size()); }
  void validate() const;
};

PpoBatch build_ppo_batch(const PolicyModel& policy,
                         const std::vector<Trajectory>& trajectories, double gamma,
                         double lambda);

// Adam ascent on mean surrogate - value_coef * MSE + entropy_coef * entropy,
// `epochs` passes over seeded shuffled minibatches.
PolicyModel ppo_update(const PolicyModel& policy, const PpoBatch& batch,
                       const PpoConfig& config);

struct BcConfig {
  double lr = 1e-3;
  int steps = 200;
  int batch = 64;
  std::uint64_t seed = 0;
  void validate() const;
};

// Observations for every frame of an expert video (recorded states plus the
// video's scene layout).
std::vector<Observation> demo_observations(const EnvConfig& config,
                                           const LabeledVideo& video);

// MSE regression of the mean net onto demo actions; value net and log_std
// untouched.
PolicyModel bc_pretrain(PolicyModel policy, const std::vector<Observation>& observations,
                        const std::vector<std::array<double, 2>>& actions,
                        const BcConfig& config);

// Arbitrary controller for evaluation plumbing: state -> torques.
using ActionFn = std::function<std::array<double, 2>(const ArmState&)>;

ActionFn policy_controller(const EnvConfig& config, const PolicyModel& policy);
ActionFn expert_controller(const EnvConfig& config, int target_color);

struct RlTrainConfig {
  int iterations = 150;
  int rollouts_per_iter = 16;
  int horizon = 60;  // steps per subtask episode
  double gamma = 0.99;
  double lambda = 0.95;
  PpoConfig ppo;
  int probe_episodes = 20;
  int hidden = 64;
  double log_std_init = -2.0;  // initial exploration spread, clamped like log_std
  bool lr_anneal = true;       // decay the ppo lr linearly to zero over iterations
  bool bc = false;  // behavioral-cloning warm start
  BcConfig bc_config;
  std::uint64_t seed = 0;
  void validate() const;
};

struct PolicyTrainResult {
  PolicyModel policy;
  std::vector<double> success_curve;  // probe success rate per iteration
};

// PPO on one subtask of the task in a fixed scene; the demo (when given and
// config.bc is set) warm-starts the mean net.
PolicyTrainResult train_policy(const EnvConfig& config, const TaskSpec& task,
                               const std::vector<Target>& layout, int subtask_index,
                               const RewardSource& source, const RlTrainConfig& config_rl,
                               const LabeledVideo* demo = nullptr);

// Seeded initial states, mean-action rollouts of `horizon` steps, success per
// the hold criterion on the end-effector trace.
double evaluate_policy(const EnvConfig& config, const TaskSpec& task,
                       const std::vector<Target>& layout, int subtask_index,
                       const ActionFn& act, int n_trials, std::uint64_t seed,
                       int horizon = 60);

double evaluate_policy(const EnvConfig& config, const TaskSpec& task,
                       const std::vector<Target>& layout, int subtask_index,
                       const PolicyModel& policy, int n_trials, std::uint64_t seed,
                       int horizon = 60);

struct SequenceResult {
  std::vector<double> per_subtask;  // success rate per execution position
  double overall = 0.0;
};

// Runs the controllers in demo order within one episode: each gets a
// per-subtask budget of `horizon` steps and advances once its hold criterion
// is met or the budget expires. Overall success = all subtasks in order.
SequenceResult execute_sequence(const std::vector<ActionFn>& controllers,
                                const EnvConfig& config, const TaskSpec& task,
                                const std::vector<Target>& layout,
                                const std::vector<int>& order, int n_trials,
                                std::uint64_t seed, int horizon = 60);

SequenceResult execute_sequence(const std::vector<PolicyModel>& policies,
                                const EnvConfig& config, const TaskSpec& task,
                                const std::vector<Target>& layout,
                                const std::vector<int>& order, int n_trials,
                                std::uint64_t seed, int horizon = 60);

}  // namespace lfo
