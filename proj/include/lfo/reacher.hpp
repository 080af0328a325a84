#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lfo/errors.hpp"

namespace lfo {

struct EnvConfig {
  double link1 = 0.5;
  double link2 = 0.5;
  double torque_limit = 0.05;
  double damping = 0.9;  // velocity retention per step
  double target_radius = 0.08;
  int hold_frames = 16;
  int episode_length = 120;
  int image_size = 24;
  int num_targets = 4;  // colors shown per scene
  double kp = 0.02;     // expert PD gains
  double kd = 0.1;
  std::vector<std::array<float, 3>> palette;

  EnvConfig();
  void validate() const;  // throws ConfigError
};

struct Target {
  int color = 0;
  double x = 0.0;
  double y = 0.0;
};

struct ArmState {
  std::array<double, 2> angles{};      // wrapped to (-pi, pi]
  std::array<double, 2> velocities{};  // rad per step
  std::vector<Target> targets;
  int time_step = 0;
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // w*h*3 row-major rgb in [0,1]
};

// Canonical angle in (-pi, pi].
double wrap_angle(double a);

std::array<double, 2> fk(const EnvConfig& config, const std::array<double, 2>& angles);

// Elbow-up inverse kinematics; out-of-reach points are pulled to the
// reachable annulus boundary first.
std::array<double, 2> ik(const EnvConfig& config, double x, double y);

ArmState step_dynamics(const EnvConfig& config, const ArmState& state,
                       std::array<double, 2> action);

Frame render(const EnvConfig& config, const ArmState& state);

// Nearest world point that maps onto a pixel corner of the render grid. Disks
// centered on a corner always cover the same pixel footprint, so a disk's
// visible area depends only on what occludes it, not on where it sits.
std::array<double, 2> snap_to_pixel_corner(const EnvConfig& config, double x, double y);

// PD control toward the IK goal for the target of the given color.
std::array<double, 2> expert_action(const EnvConfig& config, const ArmState& state,
                                    int target_color);

// True iff some window of >= hold_frames consecutive trace points lies within
// target_radius of the target.
bool success_check(const EnvConfig& config,
                   const std::vector<std::array<double, 2>>& ee_trace,
                   const std::array<double, 2>& target);

}  // namespace lfo
