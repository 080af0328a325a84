#include "lfo/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lfo/parallel.hpp"

namespace lfo {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    default: return "meta_test";
  }
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation") return Split::Validation;
  if (name == "meta_test") return Split::MetaTest;
  throw ConfigError("unknown split: " + name);
}

void TaskSpec::validate(const EnvConfig& env) const {
  if (target_colors.empty()) throw ConfigError("task has no target colors");
  std::vector<int> all = target_colors;
  all.insert(all.end(), distractor_colors.begin(), distractor_colors.end());
  for (int c : all) {
    if (c < 0 || c >= static_cast<int>(env.palette.size())) {
      throw ConfigError("task color outside the palette");
    }
  }
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("task colors must be distinct");
  }
  if (static_cast<int>(all.size()) != env.num_targets) {
    throw ConfigError("task colors must fill the scene exactly");
  }
}

void DatasetManifest::validate() const {
  env.validate();
  if (tasks.empty()) throw ConfigError("manifest has no tasks");
  if (videos_per_task < 1) throw ConfigError("videos_per_task must be positive");
  if (snippet_length < 1) throw ConfigError("snippet_length must be positive");
  for (const TaskSpec& t : tasks) t.validate(env);
}

namespace {

std::vector<std::vector<int>> combinations(std::vector<int> colors, int k) {
  std::sort(colors.begin(), colors.end());
  const int n = static_cast<int>(colors.size());
  std::vector<std::vector<int>> out;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<int> combo(k);
    for (int i = 0; i < k; ++i) combo[i] = colors[idx[i]];
    out.push_back(std::move(combo));
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<TaskSpec> build_tasks(const std::vector<int>& colors, int k, int scene_size) {
  std::vector<TaskSpec> tasks;
  for (std::vector<int>& combo : combinations(colors, k)) {
    TaskSpec t;
    t.target_colors = std::move(combo);
    std::vector<int> rest;
    for (int c : colors) {
      if (std::find(t.target_colors.begin(), t.target_colors.end(), c) ==
          t.target_colors.end()) {
        rest.push_back(c);
      }
    }
    std::sort(rest.begin(), rest.end());
    const int need = scene_size - k;
    if (static_cast<int>(rest.size()) < need) {
      throw ConfigError("not enough colors to fill the scene with distractors");
    }
    t.distractor_colors.assign(rest.begin(), rest.begin() + need);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<std::vector<int>> permutations(int k) {
  std::vector<int> base(k);
  for (int i = 0; i < k; ++i) base[i] = i;
  std::vector<std::vector<int>> out;
  do {
    out.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

const Target& target_by_color(const std::vector<Target>& targets, int color) {
  for (const Target& t : targets) {
    if (t.color == color) return t;
  }
  throw DataError("scene is missing a task color");
}

}  // namespace

std::pair<std::vector<TaskSpec>, std::vector<TaskSpec>> sample_task_splits(
    const std::vector<int>& train_colors, const std::vector<int>& meta_colors, int k,
    int scene_size) {
  if (k < 1) throw ConfigError("k must be positive");
  if (static_cast<int>(train_colors.size()) < k ||
      static_cast<int>(meta_colors.size()) < k) {
    throw ConfigError("color list smaller than k");
  }
  for (int c : train_colors) {
    if (std::find(meta_colors.begin(), meta_colors.end(), c) != meta_colors.end()) {
      throw ConfigError("train and meta-test color lists overlap");
    }
  }
  return {build_tasks(train_colors, k, scene_size),
          build_tasks(meta_colors, k, scene_size)};
}

std::vector<Target> place_targets(const EnvConfig& config, const std::vector<int>& colors,
                                  Rng& rng) {
  const double reach = config.link1 + config.link2;
  const double lo = std::max(std::abs(config.link1 - config.link2) + config.target_radius,
                             0.3 * reach);
  const double hi = 0.95 * reach;
  // keep disks from abutting when the radius grows past the default
  const double min_sep = std::max(0.3 * reach, 2.2 * config.target_radius);
  std::vector<Target> out;
  for (int c : colors) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double ang = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double rad = rng.uniform(lo, hi);
      // snap to the render grid so every disk rasterizes with an identical
      // footprint; re-check the band because snapping moves the point a little
      const auto [x, y] = snap_to_pixel_corner(config, rad * std::cos(ang),
                                               rad * std::sin(ang));
      const double snapped_rad = std::hypot(x, y);
      if (snapped_rad < lo || snapped_rad > hi) continue;
      bool clear = true;
      for (const Target& other : out) {
        if (std::hypot(x - other.x, y - other.y) < min_sep) {
          clear = false;
          break;
        }
      }
      if (clear) {
        out.push_back(Target{c, x, y});
        placed = true;
      }
    }
    if (!placed) throw DataError("target placement failed to satisfy separation");
  }
  return out;
}

LabeledVideo rollout_expert(const EnvConfig& config, const TaskSpec& task,
                            const std::vector<int>& order, std::uint64_t seed,
                            int snippet_length, const std::vector<Target>* layout) {
  config.validate();
  task.validate(config);
  const int k = task.k();
  {
    std::vector<int> check = order;
    std::sort(check.begin(), check.end());
    if (static_cast<int>(order.size()) != k) {
      throw ConfigError("order must permute the subtasks");
    }
    for (int i = 0; i < k; ++i) {
      if (check[i] != i) throw ConfigError("order must permute the subtasks");
    }
  }
  Rng rng(seed);
  LabeledVideo video;
  video.order = order;
  std::vector<int> scene_colors = task.target_colors;
  scene_colors.insert(scene_colors.end(), task.distractor_colors.begin(),
                      task.distractor_colors.end());
  video.targets = layout != nullptr ? *layout : place_targets(config, scene_colors, rng);
  ArmState state;
  state.angles = {rng.uniform(-std::numbers::pi, std::numbers::pi),
                  rng.uniform(-std::numbers::pi, std::numbers::pi)};
  state.targets = video.targets;
  int phase = 0;
  int run = 0;
  bool done = false;
  // the video ends when the last subtask's hold completes, so lengths vary
  for (int t = 0; t < config.episode_length && !done; ++t) {
    const int active = order[phase];
    const int color = task.target_colors[active];
    video.frames.push_back(render(config, state));
    video.frame_labels.push_back(active);
    video.states.push_back({static_cast<float>(state.angles[0]),
                            static_cast<float>(state.angles[1]),
                            static_cast<float>(state.velocities[0]),
                            static_cast<float>(state.velocities[1])});
    const std::array<double, 2> action = expert_action(config, state, color);
    video.actions.push_back(
        {static_cast<float>(action[0]), static_cast<float>(action[1])});
    state = step_dynamics(config, state, action);
    const std::array<double, 2> ee = fk(config, state.angles);
    const Target& goal = target_by_color(video.targets, color);
    if (std::hypot(ee[0] - goal.x, ee[1] - goal.y) <= config.target_radius) {
      ++run;
    } else {
      run = 0;
    }
    if (run >= config.hold_frames) {
      if (phase + 1 < k) {
        ++phase;
        run = 0;
      } else {
        done = true;
      }
    }
  }
  if (!done) throw DataError("episode budget exhausted before all subtasks completed");
  video.snippet_labels.clear();
  for (const auto& pair : snippet_slice(video, snippet_length)) {
    video.snippet_labels.push_back(pair.second);
  }
  return video;
}

std::vector<LabeledVideo> generate_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  const int nt = static_cast<int>(manifest.tasks.size());
  const int nv = manifest.videos_per_task;
  // One scene layout per task identity: every video of a task, in any split,
  // shares the scene, the way recordings of one desk do. Start pose and
  // subtask order still vary per video; a different task means a new scene.
  std::vector<std::vector<Target>> layouts(nt);
  for (int ti = 0; ti < nt; ++ti) {
    const TaskSpec& task = manifest.tasks[ti];
    std::vector<int> scene_colors = task.target_colors;
    scene_colors.insert(scene_colors.end(), task.distractor_colors.begin(),
                        task.distractor_colors.end());
    std::uint64_t lay_seed = 0x5ce7e;
    for (int c : scene_colors) lay_seed = mix_seed(lay_seed, static_cast<std::uint64_t>(c));
    Rng lay_rng(lay_seed);
    layouts[ti] = place_targets(manifest.env, scene_colors, lay_rng);
  }
  std::vector<LabeledVideo> out(static_cast<std::size_t>(nt) * nv);
  std::string error;
#pragma omp parallel for schedule(static) num_threads(par::threads())
  for (int i = 0; i < nt * nv; ++i) {
    const int ti = i / nv;
    const int vi = i % nv;
    const TaskSpec& task = manifest.tasks[ti];
    const std::vector<std::vector<int>> orders = permutations(task.k());
    const std::vector<int>& order = orders[vi % orders.size()];
    bool ok = false;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
      const std::uint64_t seed = mix_seed(
          mix_seed(manifest.seed, static_cast<std::uint64_t>(ti)),
          static_cast<std::uint64_t>(vi) * 16 + static_cast<std::uint64_t>(attempt));
      try {
        out[i] = rollout_expert(manifest.env, task, order, seed, manifest.snippet_length,
                                &layouts[ti]);
        out[i].task_id = ti;
        ok = true;
      } catch (const DataError&) {
        // reseed and retry
      }
    }
    if (!ok) {
#pragma omp critical
      if (error.empty()) {
        error = "dataset generation failed for task " + std::to_string(ti);
      }
    }
  }
  if (!error.empty()) throw DataError(error);
  return out;
}

std::vector<std::pair<Snippet, int>> snippet_slice(const LabeledVideo& video, int s,
                                                   int video_id) {
  if (s < 1) throw ConfigError("snippet length must be positive");
  const int count = static_cast<int>(video.frames.size()) / s;
  std::vector<std::pair<Snippet, int>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int start = i * s;
    // majority vote; ties go to the label seen earliest in the snippet
    std::vector<int> uniq;
    std::vector<int> cnt;
    for (int f = start; f < start + s; ++f) {
      const int label = video.frame_labels[f];
      const auto it = std::find(uniq.begin(), uniq.end(), label);
      if (it == uniq.end()) {
        uniq.push_back(label);
        cnt.push_back(1);
      } else {
        ++cnt[it - uniq.begin()];
      }
    }
    int best = 0;
    for (int j = 1; j < static_cast<int>(uniq.size()); ++j) {
      if (cnt[j] > cnt[best]) best = j;
    }
    out.emplace_back(Snippet{video_id, start, s}, uniq[best]);
  }
  return out;
}

}  // namespace lfo
