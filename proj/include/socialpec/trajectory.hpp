#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "socialpec/common.hpp"

namespace socialpec {

// 2-D location in meters, world or egocentric frame.
struct State {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const State& a, const State& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// States of one pedestrian at a constant timestep interval.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<State> states, long start_t = 0)
      : states_(std::move(states)), start_t_(start_t) {
    if (states_.empty()) throw ShapeError("trajectory: needs at least one state");
    for (const auto& s : states_)
      if (!is_finite(s.x) || !is_finite(s.y))
        throw NumericError("trajectory: non-finite state");
  }

  std::size_t length() const { return states_.size(); }
  long start_t() const { return start_t_; }
  const State& at(std::size_t i) const { return states_.at(i); }
  const State& front() const { return states_.front(); }
  const State& back() const { return states_.back(); }
  const std::vector<State>& states() const { return states_; }

  Trajectory slice(std::size_t start, std::size_t len) const {
    if (start + len > states_.size())
      throw ShapeError("trajectory slice: out of range");
    return Trajectory(
        std::vector<State>(states_.begin() + static_cast<long>(start),
                           states_.begin() + static_cast<long>(start + len)),
        start_t_ + static_cast<long>(start));
  }

 private:
  std::vector<State> states_;
  long start_t_ = 0;
};

// M trajectories covering the same timestep range. Immutable once built.
class Scene {
 public:
  Scene(std::vector<Trajectory> trajectories, double dt = 0.4)
      : trajectories_(std::move(trajectories)), dt_(dt) {
    if (trajectories_.empty()) throw ShapeError("scene: needs at least one trajectory");
    const std::size_t len = trajectories_.front().length();
    for (const auto& t : trajectories_)
      if (t.length() != len)
        throw ShapeError("scene: trajectories must have equal length");
  }

  std::size_t size() const { return trajectories_.size(); }  // M
  std::size_t length() const { return trajectories_.front().length(); }
  double dt() const { return dt_; }
  const Trajectory& at(std::size_t m) const { return trajectories_.at(m); }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  Scene slice(std::size_t start, std::size_t len) const {
    std::vector<Trajectory> out;
    out.reserve(size());
    for (const auto& t : trajectories_) out.push_back(t.slice(start, len));
    return Scene(std::move(out), dt_);
  }

 private:
  std::vector<Trajectory> trajectories_;
  double dt_;
};

// Egocentric frame: origin at the target's last observed position, +x along
// its heading.
struct EgoFrame {
  State origin;
  double heading = 0.0;  // radians, in (-pi, pi]
};

// Heading comes from the last nonzero displacement, scanning backwards; a
// fully stationary trajectory keeps the world +x direction.
inline EgoFrame ego_frame_of(const Trajectory& traj) {
  if (traj.length() < 2)
    throw ShapeError("ego_frame_of: insufficient history (need >= 2 states)");
  EgoFrame frame;
  frame.origin = traj.back();
  for (std::size_t i = traj.length() - 1; i > 0; --i) {
    const double dx = traj.at(i).x - traj.at(i - 1).x;
    const double dy = traj.at(i).y - traj.at(i - 1).y;
    if (dx != 0.0 || dy != 0.0) {
      double h = std::atan2(dy, dx);
      if (h <= -M_PI) h = M_PI;
      frame.heading = h;
      break;
    }
  }
  return frame;
}

// World -> ego: translate the origin out, rotate the heading onto +x.
inline State to_ego(const State& s, const EgoFrame& f) {
  const double c = std::cos(f.heading), sn = std::sin(f.heading);
  const double dx = s.x - f.origin.x, dy = s.y - f.origin.y;
  return State{c * dx + sn * dy, -sn * dx + c * dy};
}

// Ego -> world; exact inverse of to_ego.
inline State convert_back(const State& s, const EgoFrame& f) {
  const double c = std::cos(f.heading), sn = std::sin(f.heading);
  return State{c * s.x - sn * s.y + f.origin.x, sn * s.x + c * s.y + f.origin.y};
}

inline Trajectory to_ego(const Trajectory& traj, const EgoFrame& f) {
  std::vector<State> out;
  out.reserve(traj.length());
  for (const auto& s : traj.states()) out.push_back(to_ego(s, f));
  return Trajectory(std::move(out), traj.start_t());
}

inline Scene to_ego(const Scene& scene, const EgoFrame& frame) {
  std::vector<Trajectory> out;
  out.reserve(scene.size());
  for (const auto& t : scene.trajectories()) out.push_back(to_ego(t, frame));
  return Scene(std::move(out), scene.dt());
}

// Rigid transform of the whole scene into the target pedestrian's ego frame.
inline Scene convert(const Scene& scene, std::size_t target) {
  if (target >= scene.size())
    throw ShapeError("convert: target index " + std::to_string(target) +
                     " out of range (M=" + std::to_string(scene.size()) + ")");
  return to_ego(scene, ego_frame_of(scene.at(target)));
}

}  // namespace socialpec
