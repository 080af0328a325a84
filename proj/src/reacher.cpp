#include "lfo/reacher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lfo {

namespace {
constexpr double kViewHalf = 1.2;  // rendered world window is [-1.2, 1.2]^2
}

EnvConfig::EnvConfig()
    : palette{{0.90f, 0.10f, 0.10f},   // red
              {0.10f, 0.90f, 0.10f},   // green
              {0.15f, 0.30f, 0.95f},   // blue
              {0.90f, 0.90f, 0.10f},   // yellow
              {0.90f, 0.10f, 0.90f},   // magenta
              {0.10f, 0.90f, 0.90f},   // cyan
              {0.95f, 0.55f, 0.10f},   // orange
              {0.55f, 0.15f, 0.85f}} {}  // purple

void EnvConfig::validate() const {
  if (link1 <= 0.0 || link2 <= 0.0) throw ConfigError("link lengths must be positive");
  if (hold_frames >= episode_length) {
    throw ConfigError("hold_frames must be smaller than episode_length");
  }
  if (hold_frames < 1) throw ConfigError("hold_frames must be positive");
  if (image_size < 8) throw ConfigError("image_size too small to draw the scene");
  if (torque_limit <= 0.0) throw ConfigError("torque_limit must be positive");
  if (damping < 0.0 || damping > 1.0) throw ConfigError("damping must lie in [0,1]");
  if (target_radius <= 0.0) throw ConfigError("target_radius must be positive");
  if (num_targets < 1) throw ConfigError("num_targets must be positive");
  if (static_cast<int>(palette.size()) < num_targets) {
    throw ConfigError("palette smaller than the number of scene targets");
  }
}

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;  // already canonical
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

std::array<double, 2> fk(const EnvConfig& config, const std::array<double, 2>& angles) {
  const double t1 = angles[0];
  const double t12 = angles[0] + angles[1];
  return {config.link1 * std::cos(t1) + config.link2 * std::cos(t12),
          config.link1 * std::sin(t1) + config.link2 * std::sin(t12)};
}

std::array<double, 2> ik(const EnvConfig& config, double x, double y) {
  const double l1 = config.link1;
  const double l2 = config.link2;
  double r = std::hypot(x, y);
  const double r_max = l1 + l2;
  const double r_min = std::abs(l1 - l2);
  if (r > r_max || r < r_min) {
    const double clamped = std::clamp(r, r_min, r_max);
    if (r > 0.0) {
      x *= clamped / r;
      y *= clamped / r;
    } else {
      x = clamped;  // degenerate origin request with unequal links
    }
    r = clamped;
  }
  const double d = std::clamp((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double t2 = std::acos(d);  // elbow-up branch
  const double t1 =
      std::atan2(y, x) - std::atan2(l2 * std::sin(t2), l1 + l2 * std::cos(t2));
  return {wrap_angle(t1), wrap_angle(t2)};
}

ArmState step_dynamics(const EnvConfig& config, const ArmState& state,
                       std::array<double, 2> action) {
  ArmState next = state;
  for (int j = 0; j < 2; ++j) {
    const double a = std::clamp(action[j], -config.torque_limit, config.torque_limit);
    next.velocities[j] = config.damping * state.velocities[j] + a;
    next.angles[j] = wrap_angle(state.angles[j] + next.velocities[j]);
  }
  next.time_step = state.time_step + 1;
  return next;
}

namespace {

// world -> continuous pixel coordinates (x right, y up; row 0 is the top)
inline double px_x(const EnvConfig& c, double wx) {
  return (wx + kViewHalf) * c.image_size / (2.0 * kViewHalf);
}
inline double px_y(const EnvConfig& c, double wy) {
  return (kViewHalf - wy) * c.image_size / (2.0 * kViewHalf);
}

inline void put_pixel(Frame& f, int col, int row, float r, float g, float b) {
  if (col < 0 || col >= f.width || row < 0 || row >= f.height) return;
  float* p = f.pixels.data() + (static_cast<std::size_t>(row) * f.width + col) * 3;
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void draw_disk(Frame& f, const EnvConfig& c, const Target& t) {
  const double cx = px_x(c, t.x);
  const double cy = px_y(c, t.y);
  const double scale = c.image_size / (2.0 * kViewHalf);
  const double radius = std::max(1.0, c.target_radius * scale);
  const auto& rgb = c.palette[t.color];
  const int lo_col = static_cast<int>(std::floor(cx - radius - 1.0));
  const int hi_col = static_cast<int>(std::ceil(cx + radius + 1.0));
  const int lo_row = static_cast<int>(std::floor(cy - radius - 1.0));
  const int hi_row = static_cast<int>(std::ceil(cy + radius + 1.0));
  for (int row = lo_row; row <= hi_row; ++row) {
    for (int col = lo_col; col <= hi_col; ++col) {
      const double dx = (col + 0.5) - cx;
      const double dy = (row + 0.5) - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        put_pixel(f, col, row, rgb[0], rgb[1], rgb[2]);
      }
    }
  }
}

void draw_line(Frame& f, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put_pixel(f, x0, y0, 1.0f, 1.0f, 1.0f);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

Frame render(const EnvConfig& config, const ArmState& state) {
  Frame f;
  f.width = config.image_size;
  f.height = config.image_size;
  f.pixels.assign(static_cast<std::size_t>(f.width) * f.height * 3, 0.0f);
  for (const Target& t : state.targets) {
    if (t.color < 0 || t.color >= static_cast<int>(config.palette.size())) {
      throw ConfigError("target color outside the palette");
    }
    draw_disk(f, config, t);
  }
  const std::array<double, 2> elbow{config.link1 * std::cos(state.angles[0]),
                                    config.link1 * std::sin(state.angles[0])};
  const std::array<double, 2> ee = fk(config, state.angles);
  const auto px = [&](double wx) { return static_cast<int>(std::floor(px_x(config, wx))); };
  const auto py = [&](double wy) { return static_cast<int>(std::floor(px_y(config, wy))); };
  draw_line(f, px(0.0), py(0.0), px(elbow[0]), py(elbow[1]));
  draw_line(f, px(elbow[0]), py(elbow[1]), px(ee[0]), py(ee[1]));
  return f;
}

std::array<double, 2> snap_to_pixel_corner(const EnvConfig& config, double x, double y) {
  const double cell = 2.0 * kViewHalf / config.image_size;
  const double sx = std::round(px_x(config, x)) * cell - kViewHalf;
  const double sy = kViewHalf - std::round(px_y(config, y)) * cell;
  return {sx, sy};
}

std::array<double, 2> expert_action(const EnvConfig& config, const ArmState& state,
                                    int target_color) {
  const Target* found = nullptr;
  for (const Target& t : state.targets) {
    if (t.color == target_color) {
      found = &t;
      break;
    }
  }
  if (found == nullptr) {
    throw DataError("expert target color not present in the scene");
  }
  const std::array<double, 2> goal = ik(config, found->x, found->y);
  std::array<double, 2> action{};
  for (int j = 0; j < 2; ++j) {
    const double err = wrap_angle(goal[j] - state.angles[j]);
    const double torque = config.kp * err - config.kd * state.velocities[j];
    action[j] = std::clamp(torque, -config.torque_limit, config.torque_limit);
  }
  return action;
}

bool success_check(const EnvConfig& config,
                   const std::vector<std::array<double, 2>>& ee_trace,
                   const std::array<double, 2>& target) {
  int run = 0;
  for (const auto& p : ee_trace) {
    const double d = std::hypot(p[0] - target[0], p[1] - target[1]);
    if (d <= config.target_radius) {
      if (++run >= config.hold_frames) return true;
    } else {
      run = 0;
    }
  }
  return false;
}

}  // namespace lfo
