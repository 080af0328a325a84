#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lfo/localizer.hpp"
#include "lfo/net.hpp"
#include "lfo/taskgen.hpp"

namespace lfo {

// Frame-level progress predictor g: a shared frame embedder feeding an order
// logit. One model is trained per subtask from that subtask's localized
// frames; its g-differences act as the surrogate reward.
struct RewardSpec {
  NetSpec embedder;   // flattened frame -> E_r
  NetSpec predictor;  // concat of two embeddings -> 1 logit

  std::size_t param_count() const;
  void validate() const;  // predictor input must be twice the embedding width
};

RewardSpec make_reward_spec(int image_size, int hidden = 64, int embed_dim = 32);

struct RewardModel {
  RewardSpec spec;
  ParamVector embedder;
  ParamVector predictor;
  Normalization norm;
  int subtask_id = 0;
  double final_loss = 0.0;
};

// A video paired with one activity label per frame - ground truth or the
// localizer's predictions. Non-owning; the video must outlive the view.
struct LocalizedVideo {
  const LabeledVideo* video = nullptr;
  std::vector<int> frame_labels;  // kNoneLabel = assigned to no subtask
};

// Each frame inherits its snippet's label; frames past the last full snippet
// get kNoneLabel.
std::vector<int> frame_labels_from_snippets(const std::vector<int>& snippet_labels,
                                            int snippet_length, int frame_count);

struct OrderPair {
  Frame frame_a;
  Frame frame_b;
  int target = 0;  // 1 iff frame_a precedes frame_b in the source video
  int video_id = 0;
  int activity = 0;
};

// Draws frame pairs carrying the given activity label, both frames from the
// same video and at least min_gap frame indices apart. Presentation order is
// randomized so either chronological direction is equally likely.
std::vector<OrderPair> sample_order_pairs(const std::vector<LocalizedVideo>& videos,
                                          int activity, int n, int min_gap,
                                          std::uint64_t seed);

// Flips each pair's target with the given probability (label-noise arm).
std::vector<OrderPair> flip_pair_targets(std::vector<OrderPair> pairs, double prob,
                                         std::uint64_t seed);

struct RewardTrainConfig {
  double lr = 1e-3;
  int steps = 400;
  int batch = 64;
  double weight_decay = 0.0;  // decoupled shrink per Adam step
  double noise_std = 0.0;     // Gaussian noise on normalized inputs while training
  std::uint64_t seed = 0;
  int hidden = 64;
  int embed_dim = 32;
  int subtask_id = 0;
  void validate() const;
};

RewardModel init_reward(const RewardTrainConfig& config, const Normalization& norm,
                        int image_size);

// Adam on the logistic order-prediction loss over seeded minibatches of
// pairs, starting from init_reward; final full-batch loss is recorded.
RewardModel train_reward(const std::vector<OrderPair>& pairs, const Normalization& norm,
                         const RewardTrainConfig& config);

// Raw order logit g(a, b). Pure; safe to share one model across threads.
double g_eval(const RewardModel& model, const Frame& a, const Frame& b);

// Mean logistic CE of the model's logits against the pair targets.
double pair_loss(const RewardModel& model, const std::vector<OrderPair>& pairs);

// Fraction of pairs whose logit sign matches the chronological order.
double pair_accuracy(const RewardModel& model, const std::vector<OrderPair>& pairs);

// Anchored progress reward R_t = g(o0, ot1) - g(o0, ot); exactly the
// difference of the two g_eval calls.
double step_reward(const RewardModel& model, const Frame& o0, const Frame& ot,
                   const Frame& ot1);

// Rollout-time evaluator: widens the parameters and embeds the anchor once,
// then scores frames against it. g(frame) is bitwise equal to
// g_eval(model, anchor, frame).
class AnchoredReward {
 public:
  AnchoredReward(const RewardModel& model, const Frame& anchor);
  double g(const Frame& frame) const;

 private:
  RewardSpec spec_;
  Normalization norm_;
  std::vector<double> theta_;
  std::vector<double> anchor_embed_;
};

// Cumulative sums of step_reward along the video, anchored at its first
// frame; length = frame count - 1.
std::vector<double> progress_curve(const RewardModel& model,
                                   const std::vector<Frame>& frames);

// Spearman rank correlation with average ranks on ties; 0 when either series
// is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace lfo
