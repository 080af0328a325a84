#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "lfo/reacher.hpp"
#include "lfo/rng.hpp"
#include "lfo/taskgen.hpp"

using namespace lfo;

namespace {

constexpr double kPi = std::numbers::pi;

TaskSpec two_color_task() {
  TaskSpec t;
  t.target_colors = {0, 1};
  t.distractor_colors = {2, 3};
  return t;
}

bool frames_equal(const Frame& a, const Frame& b) {
  return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

bool videos_equal(const LabeledVideo& a, const LabeledVideo& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (!frames_equal(a.frames[i], b.frames[i])) return false;
  }
  if (a.frame_labels != b.frame_labels || a.snippet_labels != b.snippet_labels) {
    return false;
  }
  if (a.states != b.states || a.actions != b.actions) return false;
  if (a.task_id != b.task_id || a.order != b.order) return false;
  if (a.targets.size() != b.targets.size()) return false;
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    if (a.targets[i].color != b.targets[i].color || a.targets[i].x != b.targets[i].x ||
        a.targets[i].y != b.targets[i].y) {
      return false;
    }
  }
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("forward kinematics hits the textbook points") {
  EnvConfig cfg;
  auto close = [](const std::array<double, 2>& p, double x, double y) {
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(y).epsilon(1e-12));
  };
  close(fk(cfg, {0.0, 0.0}), 1.0, 0.0);
  close(fk(cfg, {kPi / 2, 0.0}), 0.0, 1.0);
  close(fk(cfg, {kPi / 2, -kPi / 2}), 0.5, 0.5);
}

TEST_CASE("reach never exceeds the combined link length") {
  EnvConfig cfg;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double t1 = -kPi + 2.0 * kPi * i / 99.0;
      const double t2 = -kPi + 2.0 * kPi * j / 99.0;
      const std::array<double, 2> p = fk(cfg, {t1, t2});
      CHECK(std::hypot(p[0], p[1]) <= cfg.link1 + cfg.link2 + 1e-12);
    }
  }
}

TEST_CASE("inverse kinematics inverts reachable points") {
  EnvConfig cfg;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double ang = rng.uniform(-kPi, kPi);
    const double rad = rng.uniform(0.1, 0.99);
    const std::array<double, 2> goal = ik(cfg, rad * std::cos(ang), rad * std::sin(ang));
    const std::array<double, 2> p = fk(cfg, goal);
    CHECK(p[0] == doctest::Approx(rad * std::cos(ang)).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(rad * std::sin(ang)).epsilon(1e-9));
    CHECK(goal[1] >= -1e-12);  // elbow-up branch keeps the second joint in [0, pi]
  }
  // out-of-reach points land on the boundary
  const std::array<double, 2> far = ik(cfg, 3.0, 4.0);
  const std::array<double, 2> p = fk(cfg, far);
  CHECK(std::hypot(p[0], p[1]) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dynamics leave a resting arm in place") {
  EnvConfig cfg;
  ArmState s;
  s.angles = {0.4, -1.1};
  const ArmState next = step_dynamics(cfg, s, {0.0, 0.0});
  CHECK(next.angles[0] == 0.4);
  CHECK(next.angles[1] == -1.1);
  CHECK(next.time_step == 1);
}

TEST_CASE("actions beyond the torque limit clamp") {
  EnvConfig cfg;
  ArmState s;
  s.velocities = {0.01, -0.02};
  const ArmState a = step_dynamics(cfg, s, {10.0, -10.0});
  const ArmState b = step_dynamics(cfg, s, {cfg.torque_limit, -cfg.torque_limit});
  CHECK(a.angles == b.angles);
  CHECK(a.velocities == b.velocities);
}

TEST_CASE("undamped coasting advances the first joint") {
  EnvConfig cfg;
  cfg.damping = 1.0;
  ArmState s;
  s.velocities = {0.1, 0.0};
  const ArmState next = step_dynamics(cfg, s, {0.0, 0.0});
  CHECK(next.angles[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(next.angles[1] == 0.0);
}

TEST_CASE("stepping preserves the target list") {
  EnvConfig cfg;
  ArmState s;
  s.targets = {Target{0, 0.25, -0.5}, Target{3, -0.7, 0.1}};
  const ArmState next = step_dynamics(cfg, s, {0.03, 0.03});
  REQUIRE(next.targets.size() == 2);
  CHECK(next.targets[0].color == 0);
  CHECK(next.targets[0].x == 0.25);
  CHECK(next.targets[0].y == -0.5);
  CHECK(next.targets[1].color == 3);
  CHECK(next.targets[1].x == -0.7);
  CHECK(next.targets[1].y == 0.1);
}

TEST_CASE("rendering is deterministic and bounded") {
  EnvConfig cfg;
  ArmState s;
  s.angles = {0.7, -0.4};
  s.targets = {Target{0, 0.5, 0.5}, Target{2, -0.4, -0.6}};
  const Frame a = render(cfg, s);
  const Frame b = render(cfg, s);
  CHECK(frames_equal(a, b));
  CHECK(a.pixels.size() ==
        static_cast<std::size_t>(cfg.image_size) * cfg.image_size * 3);
  for (float v : a.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("off-window targets leave only arm pixels") {
  EnvConfig cfg;
  ArmState s;
  s.angles = {0.3, 0.5};
  s.targets = {Target{0, 7.0, 7.0}, Target{1, -9.0, 2.0}};
  const Frame f = render(cfg, s);
  for (std::size_t i = 0; i < f.pixels.size(); i += 3) {
    const bool white = f.pixels[i] == 1.0f && f.pixels[i + 1] == 1.0f &&
                       f.pixels[i + 2] == 1.0f;
    const bool black = f.pixels[i] == 0.0f && f.pixels[i + 1] == 0.0f &&
                       f.pixels[i + 2] == 0.0f;
    CHECK((white || black));
  }
}

TEST_CASE("a target disk appears at its mapped pixels") {
  EnvConfig cfg;
  ArmState s;
  s.angles = {kPi, 0.0};  // arm points left, away from the target
  s.targets = {Target{2, 0.5, 0.5}};
  const Frame f = render(cfg, s);
  const auto& rgb = cfg.palette[2];
  // world (0.5, 0.5) -> pixel column (0.5+1.2)*10 = 17, row (1.2-0.5)*10 = 7
  int colored = 0;
  double sum_col = 0.0;
  double sum_row = 0.0;
  for (int row = 0; row < f.height; ++row) {
    for (int col = 0; col < f.width; ++col) {
      const float* p = f.pixels.data() + (static_cast<std::size_t>(row) * f.width + col) * 3;
      if (p[0] == rgb[0] && p[1] == rgb[1] && p[2] == rgb[2]) {
        ++colored;
        sum_col += col + 0.5;
        sum_row += row + 0.5;
      }
    }
  }
  REQUIRE(colored > 0);
  CHECK(std::abs(sum_col / colored - 17.0) <= 1.0);
  CHECK(std::abs(sum_row / colored - 7.0) <= 1.0);
}

TEST_CASE("a centered target survives arm overdraw next to the base") {
  EnvConfig cfg;
  ArmState s;
  s.angles = {0.0, 0.0};  // arm along +x through the center row
  s.targets = {Target{1, 0.0, 0.0}};
  const Frame f = render(cfg, s);
  const auto& rgb = cfg.palette[1];
  int colored_near_center = 0;
  for (int row = 10; row <= 13; ++row) {
    for (int col = 10; col <= 13; ++col) {
      const float* p = f.pixels.data() + (static_cast<std::size_t>(row) * f.width + col) * 3;
      if (p[0] == rgb[0] && p[1] == rgb[1] && p[2] == rgb[2]) ++colored_near_center;
    }
  }
  CHECK(colored_near_center >= 2);
}

TEST_CASE("expert at its goal outputs no torque") {
  EnvConfig cfg;
  const std::array<double, 2> goal = ik(cfg, 0.4, 0.3);
  ArmState s;
  s.angles = goal;
  s.targets = {Target{0, 0.4, 0.3}};
  const std::array<double, 2> a = expert_action(cfg, s, 0);
  CHECK(std::abs(a[0]) <= 1e-12);
  CHECK(std::abs(a[1]) <= 1e-12);
}

TEST_CASE("expert drives through the angle wrap, not the long way") {
  EnvConfig cfg;
  const std::array<double, 2> target = fk(cfg, {-kPi + 0.1, 0.0});
  ArmState s;
  s.angles = {kPi - 0.1, 0.0};
  s.targets = {Target{0, target[0], target[1]}};
  const std::array<double, 2> a = expert_action(cfg, s, 0);
  CHECK(a[0] > 0.0);  // increasing theta1 crosses +pi directly
}

TEST_CASE("expert reaches and holds from random starts") {
  EnvConfig cfg;
  Rng rng(12345);
  int held = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    ArmState s;
    s.angles = {rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
    const double ang = rng.uniform(-kPi, kPi);
    const double rad = rng.uniform(0.3, 0.95);
    const Target tgt{0, rad * std::cos(ang), rad * std::sin(ang)};
    s.targets = {tgt};
    std::vector<std::array<double, 2>> trace;
    for (int i = 0; i < cfg.episode_length; ++i) {
      s = step_dynamics(cfg, s, expert_action(cfg, s, 0));
      trace.push_back(fk(cfg, s.angles));
    }
    if (success_check(cfg, trace, {tgt.x, tgt.y})) ++held;
  }
  CHECK(held >= static_cast<int>(0.95 * trials));
}

TEST_CASE("expert lookup rejects colors not in the scene") {
  EnvConfig cfg;
  ArmState s;
  s.targets = {Target{0, 0.5, 0.0}};
  CHECK_THROWS_AS(expert_action(cfg, s, 3), DataError);
}

TEST_CASE("hold windows decide success") {
  EnvConfig cfg;
  cfg.hold_frames = 4;
  const std::array<double, 2> target{0.5, 0.0};
  std::vector<std::array<double, 2>> in(4, {0.5, 0.0});
  CHECK(success_check(cfg, in, target));
  std::vector<std::array<double, 2>> broken;
  for (int rep = 0; rep < 5; ++rep) {
    for (int i = 0; i < 3; ++i) broken.push_back({0.5, 0.0});
    broken.push_back({-0.5, 0.0});
  }
  CHECK_FALSE(success_check(cfg, broken, target));
  CHECK_FALSE(success_check(cfg, {}, target));
}

TEST_CASE("task splits enumerate color combinations") {
  const auto [train, meta] = sample_task_splits({0, 1, 2, 3}, {4, 5, 6, 7}, 2, 4);
  CHECK(train.size() == 6);
  CHECK(meta.size() == 6);
  CHECK(train[0].target_colors == std::vector<int>{0, 1});
  CHECK(train[0].distractor_colors == std::vector<int>{2, 3});
  CHECK(train[5].target_colors == std::vector<int>{2, 3});
  for (const TaskSpec& t : train) {
    for (int c : t.target_colors) CHECK(c <= 3);
    for (int c : t.distractor_colors) CHECK(c <= 3);
  }
  for (const TaskSpec& t : meta) {
    for (int c : t.target_colors) CHECK(c >= 4);
    for (int c : t.distractor_colors) CHECK(c >= 4);
  }
}

TEST_CASE("three-of-six split counts match the binomial") {
  const auto [train, meta] =
      sample_task_splits({0, 1, 2, 3, 4, 5}, {6, 7, 8, 9}, 3, 4);
  CHECK(train.size() == 20);
  (void)meta;
}

TEST_CASE("overlapping split colors are rejected") {
  CHECK_THROWS_AS(sample_task_splits({0, 1, 2}, {2, 3, 4}, 2, 4), ConfigError);
}

TEST_CASE("snippet slicing drops the ragged tail") {
  LabeledVideo v;
  v.frame_labels = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  v.frames.resize(10);
  const auto snippets = snippet_slice(v, 4);
  REQUIRE(snippets.size() == 2);
  CHECK(snippets[0].first.start == 0);
  CHECK(snippets[1].first.start == 4);
  CHECK(snippets[0].second == 0);
  CHECK(snippets[1].second == 1);
}

TEST_CASE("snippet label ties go to the earlier label") {
  LabeledVideo v;
  v.frame_labels = {0, 0, 1, 1};
  v.frames.resize(4);
  CHECK(snippet_slice(v, 4)[0].second == 0);
  LabeledVideo w;
  w.frame_labels = {1, 1, 0, 0};
  w.frames.resize(4);
  CHECK(snippet_slice(w, 4)[0].second == 1);
}

TEST_CASE("unit snippets copy the frame labels") {
  LabeledVideo v;
  v.frame_labels = {1, 0, 1, 0};
  v.frames.resize(4);
  const auto snippets = snippet_slice(v, 1);
  REQUIRE(snippets.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(snippets[i].second == v.frame_labels[i]);
}

TEST_CASE("expert rollouts carry ordered label blocks") {
  EnvConfig cfg;
  const TaskSpec task = two_color_task();
  const LabeledVideo v = rollout_expert(cfg, task, {0, 1}, 99);
  REQUIRE(static_cast<int>(v.frames.size()) <= cfg.episode_length);
  REQUIRE(v.frames.size() >= 2u * cfg.hold_frames);  // at least two held phases
  for (std::size_t i = 1; i < v.frame_labels.size(); ++i) {
    CHECK(v.frame_labels[i] >= v.frame_labels[i - 1]);  // 0-block then 1-block
  }
  CHECK(v.frame_labels.front() == 0);
  CHECK(v.frame_labels.back() == 1);
  for (int l : v.frame_labels) CHECK((l == 0 || l == 1));
  // the video ends right as the second hold completes
  CHECK(std::count(v.frame_labels.begin(), v.frame_labels.end(), 1) >= cfg.hold_frames);
  const LabeledVideo swapped = rollout_expert(cfg, task, {1, 0}, 99);
  CHECK(swapped.frame_labels.front() == 1);
  CHECK(swapped.frame_labels.back() == 0);
}

TEST_CASE("identical rollout inputs give identical videos") {
  EnvConfig cfg;
  const TaskSpec task = two_color_task();
  const LabeledVideo a = rollout_expert(cfg, task, {0, 1}, 4321);
  const LabeledVideo b = rollout_expert(cfg, task, {0, 1}, 4321);
  CHECK(videos_equal(a, b));
}

TEST_CASE("a pinned layout overrides placement") {
  EnvConfig cfg;
  const TaskSpec task = two_color_task();
  std::vector<Target> layout{Target{0, 0.5, 0.3}, Target{1, -0.5, 0.3},
                             Target{2, 0.5, -0.3}, Target{3, -0.5, -0.3}};
  const LabeledVideo v = rollout_expert(cfg, task, {0, 1}, 7, 4, &layout);
  REQUIRE(v.targets.size() == 4);
  CHECK(v.targets[0].x == 0.5);
  CHECK(v.targets[1].x == -0.5);
}

TEST_CASE("dataset generation matches the manifest and repeats bitwise") {
  DatasetManifest m;
  const auto [train, meta] = sample_task_splits({0, 1, 2, 3}, {4, 5, 6, 7}, 2, 4);
  (void)meta;
  m.split = Split::Train;
  m.tasks = train;
  m.videos_per_task = 2;
  m.seed = 31;
  const std::vector<LabeledVideo> a = generate_dataset(m);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].task_id == static_cast<int>(i / 2));
    for (int l : a[i].snippet_labels) {
      CHECK(l >= 0);
      CHECK(l < 2);
    }
  }
  // order cycling puts both presentations in every two-video task
  for (int t = 0; t < 6; ++t) {
    CHECK(a[2 * t].order == std::vector<int>{0, 1});
    CHECK(a[2 * t + 1].order == std::vector<int>{1, 0});
  }
  const std::vector<LabeledVideo> b = generate_dataset(m);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(videos_equal(a[i], b[i]));
}

TEST_CASE("dataset files round-trip losslessly") {
  namespace fs = std::filesystem;
  DatasetManifest m;
  const auto [train, meta] = sample_task_splits({0, 1, 2, 3}, {4, 5, 6, 7}, 2, 4);
  (void)meta;
  m.split = Split::Train;
  m.tasks = {train[0], train[1]};
  m.videos_per_task = 2;
  m.seed = 77;
  const std::vector<LabeledVideo> videos = generate_dataset(m);
  const fs::path dir = fs::temp_directory_path() / "lfo_test_io";
  fs::create_directories(dir);
  const std::string path = (dir / "roundtrip.lfod").string();
  save_dataset(path, m, videos);
  const LoadedDataset loaded = load_dataset(path);
  REQUIRE(loaded.videos.size() == videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    CHECK(videos_equal(loaded.videos[i], videos[i]));
  }
  CHECK(loaded.manifest.seed == m.seed);
  CHECK(loaded.manifest.videos_per_task == m.videos_per_task);

  // a second save of the loaded data reproduces the bytes exactly
  const std::string path2 = (dir / "roundtrip2.lfod").string();
  save_dataset(path2, loaded.manifest, loaded.videos);
  CHECK(slurp(path) == slurp(path2));

  SUBCASE("corrupted magic is rejected") {
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    const std::string bad = (dir / "bad_magic.lfod").string();
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(bad), FormatError);
  }
  SUBCASE("future versions are rejected") {
    std::string bytes = slurp(path);
    bytes[4] = 99;
    const std::string bad = (dir / "bad_version.lfod").string();
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_dataset(bad), FormatError);
  }
  SUBCASE("truncated payloads are rejected") {
    const std::string bytes = slurp(path);
    const std::string bad = (dir / "short.lfod").string();
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
    CHECK_THROWS_AS(load_dataset(bad), FormatError);
  }
}
