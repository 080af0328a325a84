#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lfo/reacher.hpp"
#include "lfo/rng.hpp"

namespace lfo {

struct TaskSpec {
  std::vector<int> target_colors;      // K distinct colors, the subtasks
  std::vector<int> distractor_colors;  // disjoint fill-up to the scene size
  int k() const { return static_cast<int>(target_colors.size()); }
  void validate(const EnvConfig& env) const;  // throws ConfigError
};

struct LabeledVideo {
  std::vector<Frame> frames;
  std::vector<int> frame_labels;    // active subtask index in [0,K)
  std::vector<int> snippet_labels;  // majority vote per non-overlapping snippet
  std::vector<std::array<float, 4>> states;   // angles + velocities per frame
  std::vector<std::array<float, 2>> actions;  // expert torque per frame
  std::vector<Target> targets;                // scene layout, fixed per video
  int task_id = 0;
  std::vector<int> order;  // subtask presentation order
};

struct Snippet {
  int video_id = 0;
  int start = 0;
  int length = 0;
};

enum class Split { Train, Validation, MetaTest };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct DatasetManifest {
  Split split = Split::Train;
  std::vector<TaskSpec> tasks;
  int videos_per_task = 0;
  int snippet_length = 4;
  std::uint64_t seed = 0;
  EnvConfig env;
  void validate() const;
};

// All C(|colors|, K) combinations per list, lexicographic; distractors are the
// smallest remaining colors of the same list.
std::pair<std::vector<TaskSpec>, std::vector<TaskSpec>> sample_task_splits(
    const std::vector<int>& train_colors, const std::vector<int>& meta_colors, int k,
    int scene_size);

// Seeded rejection sampling inside the reachable annulus with pairwise
// separation, one target per color in the given order.
std::vector<Target> place_targets(const EnvConfig& config, const std::vector<int>& colors,
                                  Rng& rng);

// One expert episode; every subtask must complete (hold criterion) within the
// episode budget or a DataError is thrown. A non-null layout pins the target
// positions (the reward pool and the RL phase share one scene).
LabeledVideo rollout_expert(const EnvConfig& config, const TaskSpec& task,
                            const std::vector<int>& order, std::uint64_t seed,
                            int snippet_length = 4,
                            const std::vector<Target>* layout = nullptr);

std::vector<LabeledVideo> generate_dataset(const DatasetManifest& manifest);

std::vector<std::pair<Snippet, int>> snippet_slice(const LabeledVideo& video, int s,
                                                   int video_id = 0);

void save_dataset(const std::string& path, const DatasetManifest& manifest,
                  const std::vector<LabeledVideo>& videos);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<LabeledVideo> videos;
};

LoadedDataset load_dataset(const std::string& path);

}  // namespace lfo
