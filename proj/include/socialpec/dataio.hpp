#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "socialpec/rng.hpp"
#include "socialpec/trajectory.hpp"

namespace socialpec {

inline constexpr double kFrameInterval = 0.4;  // seconds between annotations

struct AnnotationRow {
  long frame = 0;
  long ped = 0;
  double x = 0.0;
  double y = 0.0;
};

// Parsed annotation file: rows sorted by (frame, ped), plus the inferred
// frame id step between consecutive annotations.
struct AnnotationFile {
  std::vector<AnnotationRow> rows;
  long frame_step = 1;
  std::string name;
};

namespace detail {

inline long to_integral(double v, std::size_t line_no, const char* what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-6)
    throw DataError("line " + std::to_string(line_no) + ": " + what +
                    " is not an integer");
  return static_cast<long>(r);
}

inline long infer_frame_step(const std::vector<long>& sorted_unique_frames) {
  long step = 0;
  for (std::size_t i = 1; i < sorted_unique_frames.size(); ++i) {
    const long d = sorted_unique_frames[i] - sorted_unique_frames[i - 1];
    if (d > 0 && (step == 0 || d < step)) step = d;
  }
  return step > 0 ? step : 1;
}

}  // namespace detail

// Community-standard four-column text: frame_id ped_id x y, whitespace
// delimited (tabs or spaces). Malformed lines are reported by number.
inline AnnotationFile parse_annotations(std::istream& is, const std::string& name) {
  AnnotationFile file;
  file.name = name;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::pair<long, long>> seen;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    double f, p, x, y;
    if (!(ls >> f)) continue;  // blank line
    if (!(ls >> p >> x >> y))
      throw DataError(name + ": line " + std::to_string(line_no) +
                      ": expected four numeric columns");
    std::string extra;
    if (ls >> extra)
      throw DataError(name + ": line " + std::to_string(line_no) +
                      ": trailing content '" + extra + "'");
    if (!is_finite(x) || !is_finite(y))
      throw DataError(name + ": line " + std::to_string(line_no) +
                      ": non-finite coordinates");
    AnnotationRow row{detail::to_integral(f, line_no, "frame id"),
                      detail::to_integral(p, line_no, "pedestrian id"), x, y};
    if (!seen.emplace(row.frame, row.ped).second)
      throw DataError(name + ": line " + std::to_string(line_no) +
                      ": duplicate (frame, pedestrian) pair (" +
                      std::to_string(row.frame) + ", " + std::to_string(row.ped) + ")");
    file.rows.push_back(row);
  }
  if (file.rows.empty()) throw DataError(name + ": no annotations");
  std::sort(file.rows.begin(), file.rows.end(), [](const auto& a, const auto& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
  });
  std::vector<long> frames;
  for (const auto& r : file.rows)
    if (frames.empty() || frames.back() != r.frame) frames.push_back(r.frame);
  file.frame_step = detail::infer_frame_step(frames);
  return file;
}

inline AnnotationFile load_annotations(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open annotation file '" + path + "'");
  return parse_annotations(is, path);
}

inline void write_annotations(std::ostream& os, const AnnotationFile& file) {
  os.precision(17);
  for (const auto& r : file.rows)
    os << r.frame << ' ' << r.ped << ' ' << r.x << ' ' << r.y << '\n';
}

// One training/eval sample: a scene of t_h + t_pred aligned states.
struct Window {
  Scene scene;
  std::string dataset;
  long start_frame = 0;
  std::vector<long> ped_ids;
};

// Sliding windows over consecutive annotated frames. A pedestrian joins a
// window only if present at every one of its frames; windows without any
// such pedestrian are dropped. stride counts frame positions.
inline std::vector<Window> make_windows(const AnnotationFile& file,
                                        std::size_t t_h = 8, std::size_t t_pred = 12,
                                        std::size_t stride = 1,
                                        double dt = kFrameInterval) {
  if (stride == 0) throw ShapeError("make_windows: stride must be positive");
  const std::size_t span = t_h + t_pred;

  std::vector<long> frames;
  for (const auto& r : file.rows)
    if (frames.empty() || frames.back() != r.frame) frames.push_back(r.frame);

  std::unordered_map<long, std::unordered_map<long, State>> by_ped;
  for (const auto& r : file.rows) by_ped[r.ped][r.frame] = State{r.x, r.y};
  std::vector<long> ped_order;
  {
    std::unordered_set<long> seen;
    for (const auto& r : file.rows)
      if (seen.insert(r.ped).second) ped_order.push_back(r.ped);
    std::sort(ped_order.begin(), ped_order.end());
  }

  std::vector<Window> windows;
  if (frames.size() < span) return windows;
  for (std::size_t i = 0; i + span <= frames.size(); i += stride) {
    bool consecutive = true;
    for (std::size_t k = 1; k < span; ++k)
      if (frames[i + k] - frames[i] != static_cast<long>(k) * file.frame_step) {
        consecutive = false;
        break;
      }
    if (!consecutive) continue;

    std::vector<Trajectory> trajs;
    std::vector<long> ids;
    for (long ped : ped_order) {
      const auto& track = by_ped[ped];
      std::vector<State> states;
      states.reserve(span);
      bool full = true;
      for (std::size_t k = 0; k < span; ++k) {
        auto it = track.find(frames[i + k]);
        if (it == track.end()) {
          full = false;
          break;
        }
        states.push_back(it->second);
      }
      if (!full) continue;
      trajs.emplace_back(std::move(states), static_cast<long>(i));
      ids.push_back(ped);
    }
    if (trajs.empty()) continue;
    windows.push_back(
        Window{Scene(std::move(trajs), dt), file.name, frames[i], std::move(ids)});
  }
  return windows;
}

// Plain-text dataset manifest: one "name path" pair per line; a name may
// repeat to merge several files into one dataset. Relative paths resolve
// against the manifest's directory.
struct DatasetManifest {
  std::vector<std::pair<std::string, std::string>> entries;
};

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset manifest '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path();
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string name, file_path;
    if (!(ls >> name)) continue;
    if (name[0] == '#') continue;
    if (!(ls >> file_path))
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": expected 'name path'");
    std::filesystem::path p(file_path);
    if (p.is_relative()) p = base / p;
    manifest.entries.emplace_back(name, p.string());
  }
  if (manifest.entries.empty())
    throw DataError(path + ": manifest lists no datasets");
  return manifest;
}

inline std::map<std::string, std::vector<Window>> load_all_windows(
    const DatasetManifest& manifest, std::size_t t_h = 8, std::size_t t_pred = 12,
    std::size_t stride = 1) {
  std::map<std::string, std::vector<Window>> out;
  for (const auto& [name, path] : manifest.entries) {
    AnnotationFile file = load_annotations(path);
    file.name = name;
    auto windows = make_windows(file, t_h, t_pred, stride);
    auto& dst = out[name];
    dst.insert(dst.end(), std::make_move_iterator(windows.begin()),
               std::make_move_iterator(windows.end()));
  }
  return out;
}

// Leave-one-out split: the held-out dataset is the test set; the remaining
// datasets' windows are shuffled deterministically and partitioned into
// train/validation.
struct SplitPlan {
  std::string held_out;
  std::vector<Window> train;
  std::vector<Window> val;
  std::vector<Window> test;
};

inline SplitPlan leave_one_out(const std::map<std::string, std::vector<Window>>& all,
                               const std::string& held_out, double val_fraction,
                               RandomSource& rng) {
  if (!all.count(held_out))
    throw DataError("leave_one_out: unknown held-out dataset '" + held_out + "'");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ShapeError("leave_one_out: val_fraction must be in [0, 1)");
  SplitPlan plan;
  plan.held_out = held_out;
  plan.test = all.at(held_out);
  std::vector<Window> pool;
  for (const auto& [name, windows] : all) {
    if (name == held_out) continue;
    pool.insert(pool.end(), windows.begin(), windows.end());
  }
  rng.shuffle(pool);
  const std::size_t n_val =
      static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(pool.size())));
  plan.val.assign(pool.begin(), pool.begin() + static_cast<long>(n_val));
  plan.train.assign(pool.begin() + static_cast<long>(n_val), pool.end());
  return plan;
}

// ---------------------------------------------------------------------------
// Synthetic constant-velocity walkers with Gaussian jitter: the smoke-test
// dataset. Each window opens a fresh frame block so any stride recovers
// exactly the intended windows.

inline std::vector<Window> synthetic_walkers(std::size_t n_windows,
                                             std::size_t max_peds, double jitter_sigma,
                                             RandomSource& rng, std::size_t t_h = 8,
                                             std::size_t t_pred = 12) {
  if (n_windows == 0 || max_peds == 0)
    throw ShapeError("synthetic_walkers: need at least one window and pedestrian");
  const std::size_t span = t_h + t_pred;
  std::vector<Window> windows;
  windows.reserve(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) {
    const std::size_t m = 1 + rng.index(max_peds);
    std::vector<Trajectory> trajs;
    std::vector<long> ids;
    for (std::size_t p = 0; p < m; ++p) {
      const double dir = rng.uniform(0.0, 2.0 * M_PI);
      const double speed = rng.uniform(0.2, 0.5);  // meters per step
      State pos{rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)};
      std::vector<State> states;
      states.reserve(span);
      for (std::size_t t = 0; t < span; ++t) {
        states.push_back({pos.x + rng.normal(0.0, jitter_sigma),
                          pos.y + rng.normal(0.0, jitter_sigma)});
        pos.x += speed * std::cos(dir);
        pos.y += speed * std::sin(dir);
      }
      trajs.emplace_back(std::move(states));
      ids.push_back(static_cast<long>(p));
    }
    windows.push_back(Window{Scene(std::move(trajs), kFrameInterval), "synthetic",
                             static_cast<long>(w * (span + 1) * 10), std::move(ids)});
  }
  return windows;
}

// The same walkers as a four-column annotation file (for the CLI and for
// end-to-end tests of the text pipeline).
inline AnnotationFile synthetic_annotations(std::size_t n_windows,
                                            std::size_t max_peds,
                                            double jitter_sigma, RandomSource& rng,
                                            std::size_t t_h = 8,
                                            std::size_t t_pred = 12) {
  const long step = 10;
  auto windows = synthetic_walkers(n_windows, max_peds, jitter_sigma, rng, t_h, t_pred);
  AnnotationFile file;
  file.name = "synthetic";
  file.frame_step = step;
  long ped_base = 0;
  for (const auto& w : windows) {
    for (std::size_t m = 0; m < w.scene.size(); ++m)
      for (std::size_t t = 0; t < w.scene.length(); ++t)
        file.rows.push_back(AnnotationRow{w.start_frame + static_cast<long>(t) * step,
                                          ped_base + static_cast<long>(m),
                                          w.scene.at(m).at(t).x,
                                          w.scene.at(m).at(t).y});
    ped_base += static_cast<long>(w.scene.size());
  }
  std::sort(file.rows.begin(), file.rows.end(), [](const auto& a, const auto& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
  });
  return file;
}

}  // namespace socialpec
