#pragma once

#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "socialpec/dataio.hpp"
#include "socialpec/predictor.hpp"

namespace socialpec {

// Mean L2 displacement over all pedestrians and predicted steps, meters.
inline double ade(const PredictionRollout& pred, const Scene& truth, std::size_t t_h) {
  const std::size_t m_count = truth.size();
  if (pred.predicted.size() != m_count)
    throw ShapeError("ade: rollout covers " + std::to_string(pred.predicted.size()) +
                     " pedestrians, truth has " + std::to_string(m_count));
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto& track = pred.predicted[m];
    if (t_h + track.size() > truth.length())
      throw ShapeError("ade: rollout longer than the truth window");
    for (std::size_t t = 0; t < track.size(); ++t) {
      sum += distance(track[t], truth.at(m).at(t_h + t));
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

// Mean final-step displacement per pedestrian, meters.
inline double fde(const PredictionRollout& pred, const Scene& truth, std::size_t t_h) {
  const std::size_t m_count = truth.size();
  if (pred.predicted.size() != m_count)
    throw ShapeError("fde: rollout/truth pedestrian count mismatch");
  double sum = 0.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto& track = pred.predicted[m];
    sum += distance(track.back(), truth.at(m).at(t_h + track.size() - 1));
  }
  return sum / static_cast<double>(m_count);
}

// Best-of-N: the sample minimizing ADE is scored, and its FDE is reported.
// independent_min instead takes the minimum of each metric over samples.
inline std::pair<double, double> best_of_n(const std::vector<PredictionRollout>& samples,
                                           const Scene& truth, std::size_t t_h,
                                           bool independent_min = false) {
  if (samples.empty()) throw ShapeError("best_of_n: no samples");
  double best_ade = 1e300, fde_of_best = 1e300, best_fde = 1e300;
  for (const auto& s : samples) {
    const double a = ade(s, truth, t_h);
    const double f = fde(s, truth, t_h);
    if (a < best_ade) {
      best_ade = a;
      fde_of_best = f;
    }
    best_fde = std::min(best_fde, f);
  }
  return {best_ade, independent_min ? best_fde : fde_of_best};
}

// Constant-velocity extrapolation from the mean observed displacement.
inline PredictionRollout linear_baseline(const Scene& scene, std::size_t t_h,
                                         std::size_t t_pred) {
  if (scene.length() < t_h)
    throw ShapeError("linear_baseline: scene shorter than the observation window");
  PredictionRollout out;
  out.predicted.resize(scene.size());
  for (std::size_t m = 0; m < scene.size(); ++m) {
    const auto& traj = scene.at(m);
    const std::size_t last = t_h - 1;
    double vx = 0.0, vy = 0.0;
    if (t_h > 1) {
      vx = (traj.at(last).x - traj.at(0).x) / static_cast<double>(last);
      vy = (traj.at(last).y - traj.at(0).y) / static_cast<double>(last);
    }
    for (std::size_t k = 1; k <= t_pred; ++k)
      out.predicted[m].push_back({traj.at(last).x + static_cast<double>(k) * vx,
                                  traj.at(last).y + static_cast<double>(k) * vy});
  }
  return out;
}

struct MetricReport {
  struct Row {
    std::string dataset;
    double ade = 0.0;
    double fde = 0.0;
    std::size_t n_windows = 0;
    std::size_t n_pedestrians = 0;
  };
  std::vector<Row> rows;
  std::string protocol = "best-of-N";
  std::size_t samples = 1;

  double average_ade() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.ade;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }
  double average_fde() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.fde;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }
};

using WindowPredictor =
    std::function<std::vector<PredictionRollout>(const Window&, std::size_t index)>;

// Pools the best-of-N errors over a window set. Selection happens per window;
// pooling weights every pedestrian-step equally (ADE) and every pedestrian
// equally (FDE), matching the per-scene sum convention of the benchmarks.
inline MetricReport::Row evaluate_windows(const std::string& name,
                                          const std::vector<Window>& windows,
                                          const WindowPredictor& predictor,
                                          std::size_t t_h,
                                          bool independent_min = false,
                                          std::size_t threads = 1) {
  MetricReport::Row row;
  row.dataset = name;
  std::vector<double> ade_err(windows.size(), 0.0), fde_err(windows.size(), 0.0);
  std::vector<std::size_t> peds(windows.size(), 0), steps(windows.size(), 0);
  parallel_for(windows.size(), threads,
               [&](std::size_t begin, std::size_t end, std::size_t) {
                 for (std::size_t i = begin; i < end; ++i) {
                   const Window& w = windows[i];
                   auto samples = predictor(w, i);
                   auto [a, f] = best_of_n(samples, w.scene, t_h, independent_min);
                   const std::size_t m = w.scene.size();
                   const std::size_t t_pred = samples.front().predicted.front().size();
                   ade_err[i] = a * static_cast<double>(m * t_pred);
                   fde_err[i] = f * static_cast<double>(m);
                   peds[i] = m;
                   steps[i] = m * t_pred;
                 }
               });
  double ade_sum = 0.0, fde_sum = 0.0;
  std::size_t total_steps = 0, total_peds = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    ade_sum += ade_err[i];
    fde_sum += fde_err[i];
    total_steps += steps[i];
    total_peds += peds[i];
  }
  row.n_windows = windows.size();
  row.n_pedestrians = total_peds;
  if (total_peds > 0) {
    row.ade = ade_sum / static_cast<double>(total_steps);
    row.fde = fde_sum / static_cast<double>(total_peds);
  }
  return row;
}

inline MetricReport::Row evaluate_linear(const std::string& name,
                                         const std::vector<Window>& windows,
                                         std::size_t t_h, std::size_t t_pred,
                                         std::size_t threads = 1) {
  const WindowPredictor predictor = [t_h, t_pred](const Window& w, std::size_t) {
    return std::vector<PredictionRollout>{linear_baseline(w.scene, t_h, t_pred)};
  };
  return evaluate_windows(name, windows, predictor, t_h, false, threads);
}

// Model evaluation with per-window forked sample streams: results do not
// depend on the thread count.
inline MetricReport::Row evaluate_model(const std::string& name,
                                        const std::vector<Window>& windows,
                                        ParamStore& store, const ModelConfig& cfg,
                                        std::size_t n_samples, std::uint64_t seed,
                                        bool independent_min = false,
                                        std::size_t threads = 1) {
  const RandomSource base(seed);
  const WindowPredictor predictor = [&](const Window& w, std::size_t index) {
    RandomSource rng = base.fork(index);
    return traj_predict(w.scene.slice(0, cfg.t_h), store, cfg, rng, n_samples);
  };
  return evaluate_windows(name, windows, predictor, cfg.t_h, independent_min, threads);
}

inline void write_metric_csv(std::ostream& os, const MetricReport& report) {
  os << "dataset,ade,fde,n_windows,n_pedestrians,protocol,samples\n";
  os.precision(17);
  for (const auto& r : report.rows)
    os << r.dataset << ',' << r.ade << ',' << r.fde << ',' << r.n_windows << ','
       << r.n_pedestrians << ',' << report.protocol << ',' << report.samples << '\n';
}

namespace detail {

struct ReferenceRow {
  const char* model;
  double values[6];  // ETH Hotel Univ Zara1 Zara2 Avg
};

// Published ADE/FDE (meters) on the standard leave-one-out protocol.
inline const std::vector<ReferenceRow>& reference_ade() {
  static const std::vector<ReferenceRow> rows{
      {"Linear (reported)", {1.33, 0.39, 0.82, 0.62, 0.77, 0.79}},
      {"S-LSTM (reported)", {1.09, 0.79, 0.67, 0.47, 0.56, 0.72}},
      {"S-GAN 20VP20 (reported)", {0.87, 0.67, 0.76, 0.35, 0.42, 0.61}},
      {"STSGN (reported)", {0.75, 0.63, 0.48, 0.30, 0.26, 0.48}},
      {"S-BiGAT (reported)", {0.69, 0.49, 0.55, 0.30, 0.36, 0.48}},
      {"S-STGCNN (reported)", {0.64, 0.49, 0.44, 0.34, 0.30, 0.44}},
      {"Social-PEC (reported)", {0.61, 0.31, 0.47, 0.43, 0.35, 0.43}},
      {"Social-PEC-GMM (reported)", {0.63, 0.32, 0.42, 0.39, 0.28, 0.41}},
  };
  return rows;
}

inline const std::vector<ReferenceRow>& reference_fde() {
  static const std::vector<ReferenceRow> rows{
      {"Linear (reported)", {2.94, 0.72, 1.59, 1.21, 1.48, 1.59}},
      {"S-LSTM (reported)", {2.35, 1.76, 1.40, 1.00, 1.17, 1.54}},
      {"S-GAN 20VP20 (reported)", {1.62, 1.37, 1.52, 0.68, 0.84, 1.21}},
      {"STSGN (reported)", {1.63, 1.01, 1.08, 0.65, 0.57, 0.99}},
      {"S-BiGAT (reported)", {1.29, 1.11, 1.32, 0.62, 0.75, 1.00}},
      {"S-STGCNN (reported)", {1.11, 0.85, 0.79, 0.53, 0.48, 0.75}},
      {"Social-PEC (reported)", {1.11, 0.52, 0.82, 0.77, 0.60, 0.76}},
      {"Social-PEC-GMM (reported)", {1.33, 0.50, 0.75, 0.62, 0.55, 0.75}},
  };
  return rows;
}

}  // namespace detail

// Aligned plain-text table; optional footer quotes the published numbers of
// the standard baselines for side-by-side reading.
inline void render_metric_table(std::ostream& os, const MetricReport& report,
                                bool include_reference = false) {
  os << std::left << std::setw(28) << "Model/Dataset" << std::right;
  for (const auto& r : report.rows) os << std::setw(10) << r.dataset;
  os << std::setw(10) << "Avg" << "\n";

  const auto print_metric = [&](const char* label, double MetricReport::Row::*field,
                                double avg) {
    os << std::left << std::setw(28) << label << std::right << std::fixed
       << std::setprecision(2);
    for (const auto& r : report.rows) os << std::setw(10) << r.*field;
    os << std::setw(10) << avg << "\n";
    os.unsetf(std::ios::fixed);
  };
  print_metric(("ADE " + report.protocol).c_str(), &MetricReport::Row::ade,
               report.average_ade());
  print_metric(("FDE " + report.protocol).c_str(), &MetricReport::Row::fde,
               report.average_fde());

  if (include_reference) {
    const auto print_reference = [&os](const char* title,
                                       const std::vector<detail::ReferenceRow>& table) {
      os << '\n' << title << '\n';
      os << std::left << std::setw(28) << "Model" << std::right;
      for (const char* n : {"ETH", "Hotel", "Univ", "Zara1", "Zara2", "Avg"})
        os << std::setw(10) << n;
      os << "\n";
      for (const auto& row : table) {
        os << std::left << std::setw(28) << row.model << std::right << std::fixed
           << std::setprecision(2);
        for (double v : row.values) os << std::setw(10) << v;
        os << "\n";
        os.unsetf(std::ios::fixed);
      }
    };
    print_reference("Reference ADE (reported on the standard splits)",
                    detail::reference_ade());
    print_reference("Reference FDE (reported on the standard splits)",
                    detail::reference_fde());
  }
}

}  // namespace socialpec
