#include "lfo/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <string>
#include <utility>

#include "lfo/grad.hpp"
#include "lfo/optim.hpp"
#include "lfo/rng.hpp"

namespace lfo {

namespace {

constexpr std::uint64_t kEmbedStream = 0xe3b;
constexpr std::uint64_t kPredStream = 0x9c4;
constexpr std::uint64_t kTrainStream = 0x7ea;

void check_reward_params(const RewardModel& model) {
  model.spec.validate();
  check_params(model.spec.embedder, model.embedder);
  check_params(model.spec.predictor, model.predictor);
}

// Flattened per-channel-normalized pixels of one frame.
void normalize_frame(const Normalization& norm, const Frame& frame, int width,
                     double* out) {
  if (static_cast<int>(frame.pixels.size()) != width)
    throw ShapeError("frame size does not match the reward embedder input");
  for (int i = 0; i < width; ++i) {
    const int c = i % 3;
    out[i] = (static_cast<double>(frame.pixels[i]) - norm.mean[c]) / norm.std[c];
  }
}

// Pair rows ready for the nets: normalized first frames, normalized second
// frames, and the order targets.
struct PairRows {
  int n = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> targets;
};

PairRows pair_rows(const RewardSpec& spec, const Normalization& norm,
                   const std::vector<OrderPair>& pairs) {
  const int f = spec.embedder.input_width();
  PairRows rows;
  rows.n = static_cast<int>(pairs.size());
  rows.a.resize(static_cast<std::size_t>(rows.n) * f);
  rows.b.resize(static_cast<std::size_t>(rows.n) * f);
  rows.targets.resize(rows.n);
  for (int i = 0; i < rows.n; ++i) {
    normalize_frame(norm, pairs[i].frame_a, f, rows.a.data() + static_cast<std::size_t>(i) * f);
    normalize_frame(norm, pairs[i].frame_b, f, rows.b.data() + static_cast<std::size_t>(i) * f);
    rows.targets[i] = static_cast<double>(pairs[i].target);
  }
  return rows;
}

// Logits g(a_i, b_i) for every row: shared embedder on both frames, concat,
// predictor.
std::vector<double> pair_logits(const RewardSpec& spec, const double* params,
                                const PairRows& rows) {
  const int n = rows.n;
  const int e = spec.embedder.output_width();
  MlpFwd fa;
  MlpFwd fb;
  mlp_forward(spec.embedder, params, rows.a.data(), n, fa);
  mlp_forward(spec.embedder, params, rows.b.data(), n, fb);
  std::vector<double> cat(static_cast<std::size_t>(n) * 2 * e);
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * 2 * e;
    std::memcpy(cat.data() + off, fa.a.back().data() + static_cast<std::size_t>(i) * e,
                sizeof(double) * e);
    std::memcpy(cat.data() + off + e, fb.a.back().data() + static_cast<std::size_t>(i) * e,
                sizeof(double) * e);
  }
  MlpFwd fp;
  mlp_forward(spec.predictor, params + spec.embedder.param_count(), cat.data(), n, fp);
  return fp.a.back();
}

// Mean logistic CE over the rows; when grad != nullptr also accumulates the
// gradient (embedder block first, then predictor).
double pair_loss_grad(const RewardSpec& spec, const double* params, const PairRows& rows,
                      double* grad) {
  const int n = rows.n;
  const int e = spec.embedder.output_width();
  const std::size_t ec = spec.embedder.param_count();

  MlpFwd fa;
  MlpFwd fb;
  mlp_forward(spec.embedder, params, rows.a.data(), n, fa);
  mlp_forward(spec.embedder, params, rows.b.data(), n, fb);
  std::vector<double> cat(static_cast<std::size_t>(n) * 2 * e);
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * 2 * e;
    std::memcpy(cat.data() + off, fa.a.back().data() + static_cast<std::size_t>(i) * e,
                sizeof(double) * e);
    std::memcpy(cat.data() + off + e, fb.a.back().data() + static_cast<std::size_t>(i) * e,
                sizeof(double) * e);
  }
  MlpFwd fp;
  mlp_forward(spec.predictor, params + ec, cat.data(), n, fp);

  Batch head;
  head.n = n;
  head.loss = LossKind::LogisticCe;
  head.targets = rows.targets;
  const LossHead lh = loss_head(head, 1, fp.a.back().data(), nullptr);
  if (grad == nullptr) return lh.loss;

  std::vector<double> dcat(cat.size(), 0.0);
  mlp_backward(spec.predictor, params + ec, fp, lh.g.data(), grad + ec, dcat.data(),
               nullptr);
  std::vector<double> da(static_cast<std::size_t>(n) * e);
  std::vector<double> db(static_cast<std::size_t>(n) * e);
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * 2 * e;
    std::memcpy(da.data() + static_cast<std::size_t>(i) * e, dcat.data() + off,
                sizeof(double) * e);
    std::memcpy(db.data() + static_cast<std::size_t>(i) * e, dcat.data() + off + e,
                sizeof(double) * e);
  }
  mlp_backward(spec.embedder, params, fa, da.data(), grad, nullptr, nullptr);
  mlp_backward(spec.embedder, params, fb, db.data(), grad, nullptr, nullptr);
  return lh.loss;
}

std::vector<double> widen_reward(const RewardModel& model) {
  std::vector<double> theta = widen(model.embedder);
  const std::vector<double> pred = widen(model.predictor);
  theta.insert(theta.end(), pred.begin(), pred.end());
  return theta;
}

}  // namespace

std::size_t RewardSpec::param_count() const {
  return embedder.param_count() + predictor.param_count();
}

void RewardSpec::validate() const {
  embedder.validate();
  predictor.validate();
  if (predictor.input_width() != 2 * embedder.output_width())
    throw ConfigError("reward predictor input must be twice the embedding width");
  if (predictor.output_width() != 1)
    throw ConfigError("reward predictor must emit a single logit");
}

RewardSpec make_reward_spec(int image_size, int hidden, int embed_dim) {
  if (image_size < 1) throw ConfigError("image_size must be positive");
  RewardSpec spec;
  spec.embedder = mlp({image_size * image_size * 3, hidden, embed_dim}, Act::Tanh);
  spec.predictor = mlp({2 * embed_dim, hidden, 1}, Act::Tanh);
  spec.validate();
  return spec;
}

std::vector<int> frame_labels_from_snippets(const std::vector<int>& snippet_labels,
                                            int snippet_length, int frame_count) {
  if (snippet_length < 1) throw ConfigError("snippet_length must be positive");
  const int covered = static_cast<int>(snippet_labels.size()) * snippet_length;
  if (covered > frame_count)
    throw ShapeError("snippet labels cover more frames than the video has");
  std::vector<int> out(frame_count, kNoneLabel);
  for (std::size_t s = 0; s < snippet_labels.size(); ++s)
    for (int f = 0; f < snippet_length; ++f)
      out[s * snippet_length + f] = snippet_labels[s];
  return out;
}

std::vector<OrderPair> sample_order_pairs(const std::vector<LocalizedVideo>& videos,
                                          int activity, int n, int min_gap,
                                          std::uint64_t seed) {
  if (n < 1) throw ConfigError("pair count must be positive");
  if (min_gap < 1) throw ConfigError("min_gap must be positive");

  // Videos able to yield at least one valid pair: two frames of the activity
  // whose indices span min_gap.
  struct Source {
    int video_id = 0;
    const LabeledVideo* video = nullptr;
    std::vector<int> idx;
  };
  std::vector<Source> sources;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const LocalizedVideo& lv = videos[vi];
    if (lv.video == nullptr) throw ShapeError("localized video without a source video");
    if (lv.frame_labels.size() != lv.video->frames.size())
      throw ShapeError("frame labels do not match the video length");
    Source src;
    src.video_id = static_cast<int>(vi);
    src.video = lv.video;
    for (std::size_t f = 0; f < lv.frame_labels.size(); ++f)
      if (lv.frame_labels[f] == activity) src.idx.push_back(static_cast<int>(f));
    if (src.idx.size() >= 2 && src.idx.back() - src.idx.front() >= min_gap)
      sources.push_back(std::move(src));
  }
  if (sources.empty())
    throw DataError("no video has two frames of activity " + std::to_string(activity) +
                    " at least " + std::to_string(min_gap) + " frames apart");

  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(activity)));
  std::vector<OrderPair> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    const Source& src = sources[rng.index(static_cast<int>(sources.size()))];
    const int m = static_cast<int>(src.idx.size());
    int lo = -1;
    int hi = -1;
    for (int tries = 0; tries < 64 && lo < 0; ++tries) {
      const int i = src.idx[rng.index(m)];
      const int j = src.idx[rng.index(m)];
      if (std::abs(i - j) >= min_gap) {
        lo = std::min(i, j);
        hi = std::max(i, j);
      }
    }
    if (lo < 0) {  // guaranteed valid by the source filter
      lo = src.idx.front();
      hi = src.idx.back();
    }
    OrderPair pair;
    pair.video_id = src.video_id;
    pair.activity = activity;
    if (rng.coin()) {
      pair.frame_a = src.video->frames[lo];
      pair.frame_b = src.video->frames[hi];
      pair.target = 1;
    } else {
      pair.frame_a = src.video->frames[hi];
      pair.frame_b = src.video->frames[lo];
      pair.target = 0;
    }
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<OrderPair> flip_pair_targets(std::vector<OrderPair> pairs, double prob,
                                         std::uint64_t seed) {
  if (prob < 0.0 || prob > 1.0) throw ConfigError("flip probability must be in [0, 1]");
  Rng rng(seed);
  for (OrderPair& p : pairs)
    if (rng.uniform() < prob) p.target = 1 - p.target;
  return pairs;
}

void RewardTrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("reward lr must be positive");
  if (steps < 0) throw ConfigError("reward steps must be non-negative");
  if (batch < 1) throw ConfigError("reward batch must be positive");
  if (hidden < 1 || embed_dim < 1)
    throw ConfigError("reward net sizes must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (noise_std < 0.0) throw ConfigError("noise std must be non-negative");
}

RewardModel init_reward(const RewardTrainConfig& config, const Normalization& norm,
                        int image_size) {
  config.validate();
  RewardModel model;
  model.spec = make_reward_spec(image_size, config.hidden, config.embed_dim);
  model.embedder = init_params(model.spec.embedder, mix_seed(config.seed, kEmbedStream));
  model.predictor =
      init_params(model.spec.predictor, mix_seed(config.seed, kPredStream));
  model.norm = norm;
  model.subtask_id = config.subtask_id;
  return model;
}

RewardModel train_reward(const std::vector<OrderPair>& pairs, const Normalization& norm,
                         const RewardTrainConfig& config) {
  config.validate();
  if (pairs.size() < 2) throw DataError("reward training needs at least two pairs");
  bool any0 = false;
  bool any1 = false;
  for (const OrderPair& p : pairs) (p.target != 0 ? any1 : any0) = true;
  if (!any0 || !any1)
    throw DataError("order pair targets are single-class; both orders are required");

  const Frame& f0 = pairs.front().frame_a;
  RewardModel model = init_reward(config, norm, f0.width);
  const PairRows all = pair_rows(model.spec, norm, pairs);

  std::vector<double> theta = widen_reward(model);
  OptimizerState opt = make_adam(config.lr);
  Rng rng(mix_seed(config.seed, kTrainStream));

  const int f = model.spec.embedder.input_width();
  PairRows mini;
  mini.n = config.batch;
  mini.a.resize(static_cast<std::size_t>(config.batch) * f);
  mini.b.resize(static_cast<std::size_t>(config.batch) * f);
  mini.targets.resize(config.batch);
  std::vector<double> g(model.spec.param_count());
  for (int step = 0; step < config.steps; ++step) {
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t idx = rng.index(all.n);
      std::memcpy(mini.a.data() + static_cast<std::size_t>(b) * f,
                  all.a.data() + idx * f, sizeof(double) * f);
      std::memcpy(mini.b.data() + static_cast<std::size_t>(b) * f,
                  all.b.data() + idx * f, sizeof(double) * f);
      mini.targets[b] = all.targets[idx];
    }
    if (config.noise_std > 0.0) {
      for (double& v : mini.a) v += config.noise_std * rng.normal();
      for (double& v : mini.b) v += config.noise_std * rng.normal();
    }
    std::fill(g.begin(), g.end(), 0.0);
    pair_loss_grad(model.spec, theta.data(), mini, g.data());
    step_inplace(opt, theta, g);
    if (config.weight_decay > 0.0) {
      const double shrink = 1.0 - config.lr * config.weight_decay;
      for (double& v : theta) v *= shrink;
    }
  }

  const std::size_t ec = model.spec.embedder.param_count();
  model.embedder = narrow(model.spec.embedder, std::span(theta).first(ec));
  model.predictor = narrow(model.spec.predictor, std::span(theta).subspan(ec));
  model.final_loss = pair_loss_grad(model.spec, theta.data(), all, nullptr);
  return model;
}

double g_eval(const RewardModel& model, const Frame& a, const Frame& b) {
  check_reward_params(model);
  const int f = model.spec.embedder.input_width();
  PairRows rows;
  rows.n = 1;
  rows.a.resize(f);
  rows.b.resize(f);
  rows.targets.assign(1, 0.0);
  normalize_frame(model.norm, a, f, rows.a.data());
  normalize_frame(model.norm, b, f, rows.b.data());
  const std::vector<double> theta = widen_reward(model);
  return pair_logits(model.spec, theta.data(), rows).front();
}

double pair_loss(const RewardModel& model, const std::vector<OrderPair>& pairs) {
  check_reward_params(model);
  if (pairs.empty()) throw DataError("no pairs to evaluate");
  const PairRows rows = pair_rows(model.spec, model.norm, pairs);
  const std::vector<double> theta = widen_reward(model);
  return pair_loss_grad(model.spec, theta.data(), rows, nullptr);
}

double pair_accuracy(const RewardModel& model, const std::vector<OrderPair>& pairs) {
  check_reward_params(model);
  if (pairs.empty()) throw DataError("no pairs to evaluate");
  const PairRows rows = pair_rows(model.spec, model.norm, pairs);
  const std::vector<double> theta = widen_reward(model);
  const std::vector<double> z = pair_logits(model.spec, theta.data(), rows);
  int correct = 0;
  for (int i = 0; i < rows.n; ++i)
    if ((z[i] > 0.0) == (pairs[i].target == 1)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(rows.n);
}

double step_reward(const RewardModel& model, const Frame& o0, const Frame& ot,
                   const Frame& ot1) {
  return g_eval(model, o0, ot1) - g_eval(model, o0, ot);
}

AnchoredReward::AnchoredReward(const RewardModel& model, const Frame& anchor)
    : spec_(model.spec), norm_(model.norm), theta_(widen_reward(model)) {
  check_reward_params(model);
  const int f = spec_.embedder.input_width();
  std::vector<double> row(f);
  normalize_frame(norm_, anchor, f, row.data());
  MlpFwd fa;
  mlp_forward(spec_.embedder, theta_.data(), row.data(), 1, fa);
  anchor_embed_ = fa.a.back();
}

double AnchoredReward::g(const Frame& frame) const {
  const int f = spec_.embedder.input_width();
  const int e = spec_.embedder.output_width();
  std::vector<double> row(f);
  normalize_frame(norm_, frame, f, row.data());
  MlpFwd fb;
  mlp_forward(spec_.embedder, theta_.data(), row.data(), 1, fb);
  std::vector<double> cat(2 * e);
  std::memcpy(cat.data(), anchor_embed_.data(), sizeof(double) * e);
  std::memcpy(cat.data() + e, fb.a.back().data(), sizeof(double) * e);
  MlpFwd fp;
  mlp_forward(spec_.predictor, theta_.data() + spec_.embedder.param_count(), cat.data(),
              1, fp);
  return fp.a.back().front();
}

std::vector<double> progress_curve(const RewardModel& model,
                                   const std::vector<Frame>& frames) {
  if (frames.size() < 2) throw ShapeError("progress_curve needs at least two frames");
  std::vector<double> curve;
  curve.reserve(frames.size() - 1);
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    acc += step_reward(model, frames.front(), frames[t], frames[t + 1]);
    curve.push_back(acc);
  }
  return curve;
}

namespace {

// Average ranks (1-based); ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs) {
  const int n = static_cast<int>(xs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (int k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("spearman needs equal-length series");
  if (xs.size() < 2) throw ShapeError("spearman needs at least two points");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const int n = static_cast<int>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lfo
