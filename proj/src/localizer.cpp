#include "lfo/localizer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "lfo/optim.hpp"
#include "lfo/parallel.hpp"
#include "lfo/rng.hpp"

namespace lfo {

namespace {

constexpr std::uint64_t kInitStream = 0x10c;
constexpr std::uint64_t kTrainStream = 0x7ea;

void check_localizer_params(const LocalizerSpec& spec, const ParamVector& p) {
  if (p.values.size() != spec.param_count())
    throw ShapeError("parameter count does not match the localizer spec");
  if (p.spec_hash != localizer_hash(spec))
    throw ShapeError("parameter vector was built for a different localizer spec");
}

ParamVector narrow_localizer(const LocalizerSpec& spec, std::span<const double> values) {
  ParamVector out;
  out.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out.values[i] = static_cast<float>(values[i]);
  out.spec_hash = localizer_hash(spec);
  return out;
}

}  // namespace

Normalization compute_normalization(const std::vector<LabeledVideo>& videos) {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::array<double, 3> sumsq{0.0, 0.0, 0.0};
  std::array<std::int64_t, 3> count{0, 0, 0};
  for (const LabeledVideo& v : videos) {
    for (const Frame& f : v.frames) {
      const std::size_t np = f.pixels.size();
      for (std::size_t i = 0; i < np; ++i) {
        const int c = static_cast<int>(i % 3);
        const double x = f.pixels[i];
        sum[c] += x;
        sumsq[c] += x * x;
        ++count[c];
      }
    }
  }
  if (count[0] == 0) throw DataError("no frames to normalize over");
  Normalization norm;
  for (int c = 0; c < 3; ++c) {
    const double n = static_cast<double>(count[c]);
    norm.mean[c] = sum[c] / n;
    const double var = std::max(sumsq[c] / n - norm.mean[c] * norm.mean[c], 0.0);
    norm.std[c] = std::max(std::sqrt(var), 1e-6);
  }
  return norm;
}

NetSpec LocalizerSpec::head() const {
  NetSpec h;
  h.layer_sizes = {embed.output_width(), k};
  return h;
}

std::size_t LocalizerSpec::param_count() const {
  return embed.param_count() + head().param_count();
}

void LocalizerSpec::validate() const {
  embed.validate();
  if (k < 2) throw ConfigError("localizer needs at least two classes");
  if (snippet_length < 1) throw ConfigError("snippet_length must be positive");
}

LocalizerSpec make_localizer(int image_size, int k, int snippet_length, int hidden,
                             int embed_dim) {
  if (image_size < 1) throw ConfigError("image_size must be positive");
  LocalizerSpec spec;
  spec.embed = mlp({image_size * image_size * 3, hidden, embed_dim}, Act::Tanh);
  spec.k = k;
  spec.snippet_length = snippet_length;
  spec.validate();
  return spec;
}

std::uint64_t localizer_hash(const LocalizerSpec& spec) {
  std::uint64_t h = mix_seed(spec.embed.hash(), spec.head().hash());
  h = mix_seed(h, static_cast<std::uint64_t>(spec.snippet_length));
  return h;
}

SnippetObjective::SnippetObjective(NetSpec embed, int k, int snippet_length)
    : embed_(std::move(embed)), s_(snippet_length) {
  LocalizerSpec spec{embed_, k, snippet_length};
  spec.validate();
  head_ = spec.head();
}

std::size_t SnippetObjective::param_count() const {
  return embed_.param_count() + head_.param_count();
}

namespace {

void check_snippet_batch(const NetSpec& embed, int k, int s, const Batch& data) {
  if (data.n < 1) throw ShapeError("empty snippet batch");
  if (data.input_width != s * embed.input_width())
    throw ShapeError("snippet batch width does not match spec");
  if (data.loss != LossKind::SoftmaxCe)
    throw ShapeError("snippet batches use softmax_ce");
  if (static_cast<int>(data.labels.size()) != data.n)
    throw ShapeError("snippet batch needs one label per row");
  for (int lab : data.labels)
    if (lab < 0 || lab >= k) throw ShapeError("snippet label out of range");
}

void pool_rows(const std::vector<double>& per_frame, int n, int s, int e,
               std::vector<double>& pooled) {
  pooled.assign(static_cast<std::size_t>(n) * e, 0.0);
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < s; ++f) {
      const double* src = per_frame.data() + (static_cast<std::size_t>(i) * s + f) * e;
      double* dst = pooled.data() + static_cast<std::size_t>(i) * e;
      for (int j = 0; j < e; ++j) dst[j] += inv * src[j];
    }
}

void scatter_rows(const std::vector<double>& pooled, int n, int s, int e,
                  std::vector<double>& per_frame) {
  per_frame.resize(static_cast<std::size_t>(n) * s * e);
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < s; ++f) {
      const double* src = pooled.data() + static_cast<std::size_t>(i) * e;
      double* dst = per_frame.data() + (static_cast<std::size_t>(i) * s + f) * e;
      for (int j = 0; j < e; ++j) dst[j] = inv * src[j];
    }
}

}  // namespace

double SnippetObjective::loss_grad(const double* params, const Batch& data,
                                   double* grad) const {
  check_snippet_batch(embed_, head_.output_width(), s_, data);
  const int n = data.n;
  const int e = embed_.output_width();
  const int frames = n * s_;
  const std::size_t ec = embed_count();

  MlpFwd fe;
  mlp_forward(embed_, params, data.inputs.data(), frames, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), n, s_, e, pooled);
  MlpFwd fh;
  mlp_forward(head_, params + ec, pooled.data(), n, fh);

  const LossHead lh = loss_head(data, head_.output_width(), fh.a.back().data(), nullptr);

  std::vector<double> pooled_delta(static_cast<std::size_t>(n) * e, 0.0);
  mlp_backward(head_, params + ec, fh, lh.g.data(), grad + ec, pooled_delta.data(),
               nullptr);
  std::vector<double> frame_delta;
  scatter_rows(pooled_delta, n, s_, e, frame_delta);
  mlp_backward(embed_, params, fe, frame_delta.data(), grad, nullptr, nullptr);
  return lh.loss;
}

void SnippetObjective::hvp(const double* params, const double* v, const Batch& data,
                           double* hv) const {
  check_snippet_batch(embed_, head_.output_width(), s_, data);
  const int n = data.n;
  const int e = embed_.output_width();
  const int frames = n * s_;
  const std::size_t ec = embed_count();

  MlpFwd fe;
  mlp_forward(embed_, params, data.inputs.data(), frames, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), n, s_, e, pooled);
  MlpFwd fh;
  mlp_forward(head_, params + ec, pooled.data(), n, fh);

  MlpTan te;
  mlp_forward_tangent(embed_, params, v, fe, nullptr, te);
  std::vector<double> pooled_t;
  pool_rows(te.t.back(), n, s_, e, pooled_t);
  MlpTan th;
  mlp_forward_tangent(head_, params + ec, v + ec, fh, pooled_t.data(), th);

  const LossHead lh =
      loss_head(data, head_.output_width(), fh.a.back().data(), th.tz.back().data());

  std::vector<double> scratch(param_count(), 0.0);
  std::vector<double> pooled_delta(static_cast<std::size_t>(n) * e, 0.0);
  MlpBack bh;
  mlp_backward(head_, params + ec, fh, lh.g.data(), scratch.data() + ec,
               pooled_delta.data(), &bh);
  std::vector<double> pooled_dtan(static_cast<std::size_t>(n) * e, 0.0);
  mlp_backward_tangent(head_, params + ec, v + ec, fh, th, bh, lh.g.data(), lh.tg.data(),
                       hv + ec, pooled_dtan.data());

  std::vector<double> frame_delta;
  std::vector<double> frame_dtan;
  scatter_rows(pooled_delta, n, s_, e, frame_delta);
  scatter_rows(pooled_dtan, n, s_, e, frame_dtan);
  MlpBack be;
  mlp_backward(embed_, params, fe, frame_delta.data(), scratch.data(), nullptr, &be);
  mlp_backward_tangent(embed_, params, v, fe, te, be, frame_delta.data(),
                       frame_dtan.data(), hv, nullptr);
}

double SnippetObjective::loss_only(const double* params, const Batch& data) const {
  check_snippet_batch(embed_, head_.output_width(), s_, data);
  const int n = data.n;
  const int e = embed_.output_width();
  MlpFwd fe;
  mlp_forward(embed_, params, data.inputs.data(), n * s_, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), n, s_, e, pooled);
  MlpFwd fh;
  mlp_forward(head_, params + embed_count(), pooled.data(), n, fh);
  return loss_head(data, head_.output_width(), fh.a.back().data(), nullptr).loss;
}

namespace {

void append_snippet_row(const LocalizerSpec& spec, const Normalization& norm,
                        const std::vector<Frame>& frames, int start,
                        std::vector<double>& out) {
  const int f = spec.embed.input_width();
  for (int s = 0; s < spec.snippet_length; ++s) {
    const Frame& fr = frames[start + s];
    if (static_cast<int>(fr.pixels.size()) != f)
      throw ShapeError("frame size does not match the localizer input width");
    const std::size_t base = out.size();
    out.resize(base + f);
    for (int i = 0; i < f; ++i) {
      const int c = i % 3;
      out[base + i] = (static_cast<double>(fr.pixels[i]) - norm.mean[c]) / norm.std[c];
    }
  }
}

}  // namespace

Batch snippet_batch(const LocalizerSpec& spec, const Normalization& norm,
                    const std::vector<const LabeledVideo*>& videos) {
  Batch b;
  b.loss = LossKind::SoftmaxCe;
  b.input_width = spec.snippet_length * spec.embed.input_width();
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const LabeledVideo& v = *videos[vi];
    const auto snips = snippet_slice(v, spec.snippet_length, static_cast<int>(vi));
    for (const auto& [snip, label] : snips) {
      append_snippet_row(spec, norm, v.frames, snip.start, b.inputs);
      b.labels.push_back(label);
      ++b.n;
    }
  }
  if (b.n == 0) throw DataError("no snippets in batch");
  return b;
}

std::vector<double> snippet_logits(const LocalizerSpec& spec, const ParamVector& params,
                                   const Normalization& norm,
                                   const std::vector<Frame>& frames, int start) {
  check_localizer_params(spec, params);
  if (start < 0 || start + spec.snippet_length > static_cast<int>(frames.size()))
    throw ShapeError("snippet start out of range");
  std::vector<double> row;
  append_snippet_row(spec, norm, frames, start, row);
  const std::vector<double> w = widen(params);
  const int e = spec.embed.output_width();
  MlpFwd fe;
  mlp_forward(spec.embed, w.data(), row.data(), spec.snippet_length, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), 1, spec.snippet_length, e, pooled);
  std::vector<double> logits(spec.k);
  forward_batch(spec.head(), w.data() + spec.embed.param_count(), pooled.data(), 1,
                logits.data());
  return logits;
}

ParamVector init_localizer_params(const LocalizerSpec& spec, std::uint64_t seed) {
  spec.validate();
  const ParamVector pe = init_params(spec.embed, mix_seed(seed, 1));
  const ParamVector ph = init_params(spec.head(), mix_seed(seed, 2));
  ParamVector out;
  out.values.reserve(pe.values.size() + ph.values.size());
  out.values.insert(out.values.end(), pe.values.begin(), pe.values.end());
  out.values.insert(out.values.end(), ph.values.begin(), ph.values.end());
  out.spec_hash = localizer_hash(spec);
  return out;
}

namespace {

ParamVector finetune_batch(const SnippetObjective& obj, const LocalizerSpec& spec,
                           ParamVector theta, const Batch& demo, double alpha,
                           int steps) {
  if (steps < 0) throw ConfigError("fine-tune steps must be non-negative");
  OptimizerState sgd = make_sgd(alpha);
  std::vector<double> g(obj.param_count());
  for (int step = 0; step < steps; ++step) {
    const std::vector<double> w = widen(theta);
    std::fill(g.begin(), g.end(), 0.0);
    obj.loss_grad(w.data(), demo, g.data());
    auto [next, state] = optimizer_step(std::move(sgd), theta, g);
    theta = std::move(next);
    theta.spec_hash = localizer_hash(spec);
    sgd = std::move(state);
  }
  return theta;
}

void check_class_coverage(const Batch& demo, int k, const char* what) {
  std::vector<int> seen(k, 0);
  for (int lab : demo.labels) ++seen[lab];
  for (int c = 0; c < k; ++c)
    if (seen[c] == 0)
      throw DataError(std::string(what) + " has no snippets of class " +
                      std::to_string(c));
}

}  // namespace

ParamVector inner_finetune(const MetaModel& meta, const LabeledVideo& demo, int steps) {
  check_localizer_params(meta.spec, meta.theta);
  const Batch b = snippet_batch(meta.spec, meta.norm, {&demo});
  check_class_coverage(b, meta.spec.k, "demo video");
  const SnippetObjective obj(meta.spec.embed, meta.spec.k, meta.spec.snippet_length);
  return finetune_batch(obj, meta.spec, meta.theta, b, meta.inner_alpha, steps);
}

void MetaTrainConfig::validate() const {
  if (mode != "maml_exact" && mode != "maml_first_order" && mode != "reptile")
    throw ConfigError("unknown meta-training mode: " + mode);
  if (inner_alpha < 0.0) throw ConfigError("inner_alpha must be non-negative");
  if (iters < 0) throw ConfigError("iters must be non-negative");
  if (task_batch < 1) throw ConfigError("task_batch must be positive");
  if (reptile_inner_steps < 1) throw ConfigError("reptile_inner_steps must be positive");
  if (snippet_length < 1) throw ConfigError("snippet_length must be positive");
  if (embed_hidden < 1 || embed_dim < 1) throw ConfigError("embedding widths must be positive");
}

MetaModel meta_train(const std::vector<LabeledVideo>& videos, int k,
                     const MetaTrainConfig& config) {
  config.validate();
  if (videos.empty()) throw DataError("meta-training needs videos");

  std::map<int, std::vector<int>> by_task;
  for (std::size_t i = 0; i < videos.size(); ++i)
    by_task[videos[i].task_id].push_back(static_cast<int>(i));
  if (by_task.size() < 2) throw DataError("meta-training needs at least two tasks");
  for (const auto& [task, vids] : by_task)
    if (vids.size() < 2)
      throw DataError("task " + std::to_string(task) +
                      " has fewer than two videos; cannot split demo and target");
  if (config.task_batch > static_cast<int>(by_task.size()))
    throw ConfigError("task_batch exceeds the number of tasks");

  const Frame& f0 = videos.front().frames.front();
  MetaModel meta;
  meta.spec = make_localizer(f0.width, k, config.snippet_length, config.embed_hidden,
                             config.embed_dim);
  meta.inner_alpha = config.inner_alpha;
  meta.trained_with = config.mode;
  meta.norm = compute_normalization(videos);

  std::vector<Batch> batches(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i)
    batches[i] = snippet_batch(meta.spec, meta.norm, {&videos[i]});

  std::vector<std::vector<int>> task_videos;
  for (const auto& [task, vids] : by_task) task_videos.push_back(vids);
  const int num_tasks = static_cast<int>(task_videos.size());

  const ParamVector theta0 =
      init_localizer_params(meta.spec, mix_seed(config.seed, kInitStream));
  const SnippetObjective obj(meta.spec.embed, meta.spec.k, meta.spec.snippet_length);
  const std::size_t pc = obj.param_count();
  const bool reptile = config.mode == "reptile";
  const double lr = config.meta_lr >= 0.0 ? config.meta_lr : (reptile ? 0.5 : 3e-3);

  std::vector<double> theta = widen(theta0);
  OptimizerState opt = make_adam(lr);
  Rng rng(mix_seed(config.seed, kTrainStream));
  std::vector<int> task_order(num_tasks);

  for (int iter = 0; iter < config.iters; ++iter) {
    std::iota(task_order.begin(), task_order.end(), 0);
    rng.shuffle(task_order);
    struct Pair {
      int demo = 0;
      int query = 0;
    };
    std::vector<Pair> picks(config.task_batch);
    for (int b = 0; b < config.task_batch; ++b) {
      const auto& vids = task_videos[task_order[b]];
      const int m = static_cast<int>(vids.size());
      const int di = static_cast<int>(rng.index(m));
      int qi = static_cast<int>(rng.index(m - 1));
      if (qi >= di) ++qi;
      picks[b] = {vids[di], vids[qi]};
    }

    if (!reptile) {
      const bool first_order = config.mode == "maml_first_order";
      std::vector<MetaGrad> mg(config.task_batch);
      std::exception_ptr err = nullptr;
      const int nt = par::threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
      for (int b = 0; b < config.task_batch; ++b) {
        try {
          mg[b] = meta_grad(obj, theta.data(), batches[picks[b].demo],
                            batches[picks[b].query], config.inner_alpha, first_order);
        } catch (...) {
#pragma omp critical
          if (!err) err = std::current_exception();
        }
      }
      if (err) std::rethrow_exception(err);

      std::vector<double> g(pc, 0.0);
      for (int b = 0; b < config.task_batch; ++b)
        for (std::size_t i = 0; i < pc; ++i) g[i] += mg[b].grad[i];
      step_inplace(opt, theta, g);
    } else {
      const ParamVector cur = narrow_localizer(meta.spec, theta);
      std::vector<ParamVector> adapted(config.task_batch);
      std::exception_ptr err = nullptr;
      const int nt = par::threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
      for (int b = 0; b < config.task_batch; ++b) {
        try {
          adapted[b] = finetune_batch(obj, meta.spec, cur, batches[picks[b].demo],
                                      config.inner_alpha, config.reptile_inner_steps);
        } catch (...) {
#pragma omp critical
          if (!err) err = std::current_exception();
        }
      }
      if (err) std::rethrow_exception(err);

      if (lr != 0.0) {
        const double scale = lr / config.task_batch;
        for (int b = 0; b < config.task_batch; ++b)
          for (std::size_t i = 0; i < pc; ++i)
            theta[i] += scale * (static_cast<double>(adapted[b].values[i]) - theta[i]);
      }
    }
  }

  meta.theta = narrow_localizer(meta.spec, theta);
  return meta;
}

LocalizationResult localize(const LocalizerSpec& spec, const ParamVector& theta_tau,
                            const Normalization& norm, const LabeledVideo& video,
                            double threshold) {
  check_localizer_params(spec, theta_tau);
  const int s = spec.snippet_length;
  const int num = static_cast<int>(video.frames.size()) / s;
  if (num == 0) throw DataError("video shorter than one snippet");

  std::vector<double> rows;
  for (int i = 0; i < num; ++i)
    append_snippet_row(spec, norm, video.frames, i * s, rows);

  const std::vector<double> w = widen(theta_tau);
  const int e = spec.embed.output_width();
  MlpFwd fe;
  mlp_forward(spec.embed, w.data(), rows.data(), num * s, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), num, s, e, pooled);
  std::vector<double> logits(static_cast<std::size_t>(num) * spec.k);
  forward_batch(spec.head(), w.data() + spec.embed.param_count(), pooled.data(), num,
                logits.data());

  LocalizationResult res;
  res.labels.resize(num);
  res.probs.resize(num);
  for (int i = 0; i < num; ++i) {
    const double* z = logits.data() + static_cast<std::size_t>(i) * spec.k;
    double zmax = z[0];
    int arg = 0;
    for (int j = 1; j < spec.k; ++j)
      if (z[j] > zmax) {
        zmax = z[j];
        arg = j;
      }
    double denom = 0.0;
    for (int j = 0; j < spec.k; ++j) denom += std::exp(z[j] - zmax);
    const double p = 1.0 / denom;  // exp(0) numerator for the arg-max class
    res.probs[i] = p;
    res.labels[i] = (threshold >= 0.0 && p < threshold) ? kNoneLabel : arg;
  }
  return res;
}

BaselineModel baseline_train(const std::vector<LabeledVideo>& videos,
                             const std::vector<TaskSpec>& tasks,
                             const BaselineConfig& config) {
  if (config.lr <= 0.0) throw ConfigError("baseline lr must be positive");
  if (config.steps < 0) throw ConfigError("baseline steps must be non-negative");
  if (config.batch < 1) throw ConfigError("baseline batch must be positive");
  if (videos.empty()) throw DataError("baseline training needs videos");

  std::vector<int> classes;
  for (const LabeledVideo& v : videos) {
    if (v.task_id < 0 || v.task_id >= static_cast<int>(tasks.size()))
      throw DataError("video task_id outside the task list");
    for (int c : tasks[v.task_id].target_colors) classes.push_back(c);
  }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw DataError("baseline training needs at least two colors");

  BaselineModel model;
  model.classes = classes;
  model.norm = compute_normalization(videos);
  const Frame& f0 = videos.front().frames.front();
  model.spec = make_localizer(f0.width, static_cast<int>(classes.size()),
                              config.snippet_length, config.embed_hidden,
                              config.embed_dim);

  Batch all;
  all.loss = LossKind::SoftmaxCe;
  all.input_width = model.spec.snippet_length * model.spec.embed.input_width();
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const LabeledVideo& v = *&videos[vi];
    const auto snips = snippet_slice(v, model.spec.snippet_length, static_cast<int>(vi));
    for (const auto& [snip, label] : snips) {
      const int color = tasks[v.task_id].target_colors[label];
      const auto it = std::lower_bound(classes.begin(), classes.end(), color);
      append_snippet_row(model.spec, model.norm, v.frames, snip.start, all.inputs);
      all.labels.push_back(static_cast<int>(it - classes.begin()));
      ++all.n;
    }
  }
  check_class_coverage(all, model.spec.k, "baseline training set");

  const SnippetObjective obj(model.spec.embed, model.spec.k, model.spec.snippet_length);
  const ParamVector theta0 =
      init_localizer_params(model.spec, mix_seed(config.seed, kInitStream));
  std::vector<double> theta = widen(theta0);
  OptimizerState opt = make_adam(config.lr);
  Rng rng(mix_seed(config.seed, kTrainStream));

  const int width = all.input_width;
  Batch mini;
  mini.loss = LossKind::SoftmaxCe;
  mini.input_width = width;
  std::vector<double> g(obj.param_count());
  for (int step = 0; step < config.steps; ++step) {
    mini.n = config.batch;
    mini.inputs.assign(static_cast<std::size_t>(config.batch) * width, 0.0);
    mini.labels.assign(config.batch, 0);
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t idx = rng.index(all.n);
      std::memcpy(mini.inputs.data() + static_cast<std::size_t>(b) * width,
                  all.inputs.data() + idx * width, sizeof(double) * width);
      mini.labels[b] = all.labels[idx];
    }
    std::fill(g.begin(), g.end(), 0.0);
    obj.loss_grad(theta.data(), mini, g.data());
    step_inplace(opt, theta, g);
  }

  model.params = narrow_localizer(model.spec, theta);
  model.final_loss = obj.loss_only(theta.data(), all);
  return model;
}

std::vector<double> baseline_features(const BaselineModel& model,
                                      const LabeledVideo& video) {
  check_localizer_params(model.spec, model.params);
  const int s = model.spec.snippet_length;
  const int num = static_cast<int>(video.frames.size()) / s;
  if (num == 0) throw DataError("video shorter than one snippet");
  std::vector<double> rows;
  for (int i = 0; i < num; ++i)
    append_snippet_row(model.spec, model.norm, video.frames, i * s, rows);
  const std::vector<double> w = widen(model.params);
  MlpFwd fe;
  mlp_forward(model.spec.embed, w.data(), rows.data(), num * s, fe);
  std::vector<double> pooled;
  pool_rows(fe.a.back(), num, s, model.spec.embed.output_width(), pooled);
  return pooled;
}

LocalizationResult baseline_localize(const BaselineModel& model,
                                     const LabeledVideo& demo,
                                     const LabeledVideo& target) {
  const int s = model.spec.snippet_length;
  const int e = model.spec.embed.output_width();
  const std::vector<double> demo_feat = baseline_features(model, demo);
  const std::vector<double> tgt_feat = baseline_features(model, target);
  const auto demo_snips = snippet_slice(demo, s);
  const int nd = static_cast<int>(demo_snips.size());
  const int nt = static_cast<int>(tgt_feat.size()) / e;

  LocalizationResult res;
  res.labels.resize(nt);
  res.probs.assign(nt, 1.0);
  for (int i = 0; i < nt; ++i) {
    const double* q = tgt_feat.data() + static_cast<std::size_t>(i) * e;
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int d = 0; d < nd; ++d) {
      const double* p = demo_feat.data() + static_cast<std::size_t>(d) * e;
      double dist = 0.0;
      for (int j = 0; j < e; ++j) {
        const double diff = q[j] - p[j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = d;
      }
    }
    res.labels[i] = demo_snips[arg].second;
  }
  return res;
}

Metrics localization_metrics(const std::vector<int>& gt, const std::vector<int>& pred,
                             int k) {
  if (gt.size() != pred.size()) throw ShapeError("label arrays differ in length");
  if (gt.empty()) throw ShapeError("empty label arrays");
  if (k < 1) throw ShapeError("class count must be positive");
  const int n = static_cast<int>(gt.size());
  for (int i = 0; i < n; ++i) {
    if (gt[i] < 0 || gt[i] >= k) throw ShapeError("ground-truth label out of range");
    if (pred[i] >= k || (pred[i] < 0 && pred[i] != kNoneLabel))
      throw ShapeError("predicted label out of range");
  }

  Metrics m;
  int correct = 0;
  std::vector<int> inter(k, 0), gtc(k, 0), pc(k, 0);
  for (int i = 0; i < n; ++i) {
    if (gt[i] == pred[i]) ++correct;
    ++gtc[gt[i]];
    if (pred[i] != kNoneLabel) ++pc[pred[i]];
    if (gt[i] == pred[i]) ++inter[gt[i]];
  }
  m.accuracy = static_cast<double>(correct) / n;
  m.per_class_iou.assign(k, 1.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    const int uni = gtc[c] + pc[c] - inter[c];
    if (uni == 0) continue;  // absent everywhere: excluded from the mean
    m.per_class_iou[c] = static_cast<double>(inter[c]) / uni;
    sum += m.per_class_iou[c];
    ++present;
  }
  m.miou = present > 0 ? sum / present : 0.0;
  return m;
}

}  // namespace lfo
