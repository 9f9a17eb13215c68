#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "socialpec/dataio.hpp"
#include "socialpec/predictor.hpp"

namespace socialpec {

struct TrainConfig {
  std::size_t batch_size = 64;  // target instances per Adam step
  std::size_t epochs = 150;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 = off
  bool all_future_steps = true;      // every future step as a one-step sample
  double clip_norm = 0.0;            // global gradient clip; 0 = off
  std::size_t threads = 1;           // 1 = strictly sequential (bit-reproducible)
  std::size_t start_epoch = 0;       // resume offset; epoch streams are seeded per epoch

  void validate() const {
    if (batch_size < 1) throw ShapeError("train: batch_size must be >= 1");
    if (epochs < 1) throw ShapeError("train: epochs must be >= 1");
    adam.validate();
  }
};

struct TrainReport {
  std::vector<double> train_nll;
  std::vector<double> val_nll;
  std::vector<double> seconds;
  std::size_t best_epoch = 0;  // 1-based; 0 = none recorded
  double best_val_nll = std::numeric_limits<double>::infinity();
};

inline void write_report_csv(std::ostream& os, const TrainReport& report) {
  os << "epoch,train_nll,val_nll,seconds\n";
  os.precision(17);
  for (std::size_t i = 0; i < report.train_nll.size(); ++i)
    os << i + 1 << ',' << report.train_nll[i] << ',' << report.val_nll[i] << ','
       << report.seconds[i] << '\n';
}

namespace detail {

// One teacher-forced sample: window w, future offset tau, target pedestrian m.
struct TrainInstance {
  std::uint32_t window = 0;
  std::uint16_t tau = 0;
  std::uint16_t ped = 0;
};

inline std::vector<TrainInstance> enumerate_instances(
    const std::vector<Window>& windows, std::size_t t_h, bool all_future_steps) {
  std::vector<TrainInstance> out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& scene = windows[w].scene;
    if (scene.length() < t_h + 1)
      throw ShapeError("train: window shorter than t_h + 1");
    const std::size_t n_tau = all_future_steps ? scene.length() - t_h : 1;
    for (std::size_t tau = 0; tau < n_tau; ++tau)
      for (std::size_t m = 0; m < scene.size(); ++m)
        out.push_back({static_cast<std::uint32_t>(w), static_cast<std::uint16_t>(tau),
                       static_cast<std::uint16_t>(m)});
  }
  return out;
}

// NLL of one instance. True history only (teacher forcing); the label is the
// true next location mapped into the target's ego frame. grad_scale != 0
// accumulates scaled gradients into the given store.
inline double instance_nll(const Window& window, std::size_t tau, std::size_t m,
                           ParamStore& store, const ModelConfig& cfg,
                           double grad_scale) {
  const Scene history = window.scene.slice(tau, cfg.t_h);
  const EgoFrame frame = ego_frame_of(history.at(m));
  const Scene ego_scene = to_ego(history, frame);
  const State truth = to_ego(window.scene.at(m).at(tau + cfg.t_h), frame);

  Tape tape;
  ModelVars vars = ModelVars::bind(tape, store, cfg);
  Var raw = loc_predict_raw(tape, vars, ego_scene, m, cfg);
  Var target = tape.leaf(Tensor(Shape{2, 1}, std::vector<double>{truth.x, truth.y}));
  Var nll = head_nll(raw, target, cfg.mixture_components);
  if (grad_scale != 0.0) tape.backward(scale(nll, grad_scale));
  return nll.value()[0];
}

}  // namespace detail

// Loss of one window: the sum of -log p(next | history) over every pedestrian
// (and over every future offset when all_steps is set). Gradients accumulate
// into the store when requested.
inline double step_loss(const Window& window, ParamStore& store,
                        const ModelConfig& cfg, bool all_steps = true,
                        bool accumulate_grads = false) {
  const std::size_t n_tau = all_steps ? window.scene.length() - cfg.t_h : 1;
  double total = 0.0;
  for (std::size_t tau = 0; tau < n_tau; ++tau)
    for (std::size_t m = 0; m < window.scene.size(); ++m)
      total += detail::instance_nll(window, tau, m, store, cfg,
                                    accumulate_grads ? 1.0 : 0.0);
  return total;
}

// Value-level window loss against any one-step predictor; the seam for
// stub-head tests and diagnostics.
inline double window_nll(const Window& window, const LocPredictFn& loc_fn,
                         std::size_t t_h, bool all_steps = true) {
  const std::size_t n_tau = all_steps ? window.scene.length() - t_h : 1;
  double total = 0.0;
  for (std::size_t tau = 0; tau < n_tau; ++tau) {
    const Scene history = window.scene.slice(tau, t_h);
    for (std::size_t m = 0; m < window.scene.size(); ++m) {
      const EgoFrame frame = ego_frame_of(history.at(m));
      const Scene ego_scene = to_ego(history, frame);
      const State truth = to_ego(window.scene.at(m).at(tau + t_h), frame);
      total -= loc_fn(ego_scene, m).log_density(truth);
    }
  }
  return total;
}

// Mean per-instance NLL over a window set, forward passes only.
inline double mean_nll(const std::vector<Window>& windows, ParamStore& store,
                       const ModelConfig& cfg, bool all_steps = true,
                       std::size_t threads = 1) {
  const auto instances = detail::enumerate_instances(windows, cfg.t_h, all_steps);
  if (instances.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n_chunks = threads <= 1 ? 1 : threads;
  std::vector<double> partial(n_chunks, 0.0);
  std::vector<ParamStore> workers;
  if (threads > 1) workers.assign(threads - 1, store);
  parallel_for(instances.size(), threads,
               [&](std::size_t begin, std::size_t end, std::size_t chunk) {
                 ParamStore& s = chunk == 0 ? store : workers[chunk - 1];
                 double sum = 0.0;
                 for (std::size_t i = begin; i < end; ++i) {
                   const auto& inst = instances[i];
                   sum += detail::instance_nll(windows[inst.window], inst.tau,
                                               inst.ped, s, cfg, 0.0);
                 }
                 partial[chunk] = sum;
               });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / static_cast<double>(instances.size());
}

struct TrainResult {
  ParamStore params;  // best-validation parameters
  TrainReport report;
};

// Teacher-forced one-step training: shuffled (window, offset, target)
// instances, mean NLL per batch, Adam updates, per-epoch validation, best
// checkpoint returned. Epoch shuffles draw from per-epoch forked streams, so
// a resumed run at start_epoch k replays exactly the epochs a continuous run
// would have seen.
inline TrainResult train(const std::vector<Window>& train_windows,
                         const std::vector<Window>& val_windows,
                         const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const std::string& checkpoint_dir = "",
                         PatternInit scheme = PatternInit::kRadial,
                         const std::string& resume_from = "",
                         std::ostream* progress = nullptr) {
  mcfg.validate();
  tcfg.validate();
  if (train_windows.empty()) throw DataError("train: empty training set");

  RandomSource base_rng(tcfg.seed);
  ParamStore store;
  init_model_params(store, mcfg, base_rng, scheme);
  if (!resume_from.empty()) load_checkpoint_into(store, resume_from);

  const auto instances =
      detail::enumerate_instances(train_windows, mcfg.t_h, tcfg.all_future_steps);
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<ParamStore> workers;  // per-thread gradient scratch
  if (tcfg.threads > 1) workers.assign(tcfg.threads - 1, store);

  TrainResult result;
  result.params = store;
  TrainReport& report = result.report;

  for (std::size_t epoch = tcfg.start_epoch; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // each epoch shuffles the identity with its own forked stream, so epoch
    // k's order does not depend on how many epochs ran before it
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RandomSource epoch_rng = base_rng.fork(0x5a5a0000ull + epoch);
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
      const std::size_t end = std::min(begin + tcfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      std::vector<double> losses(end - begin, 0.0);

      if (tcfg.threads <= 1) {
        for (std::size_t i = begin; i < end; ++i) {
          const auto& inst = instances[order[i]];
          losses[i - begin] = detail::instance_nll(
              train_windows[inst.window], inst.tau, inst.ped, store, mcfg, inv_batch);
        }
      } else {
        for (auto& w : workers) {
          for (const auto& name : store.names())
            w.value(name) = store.value(name);
          w.zero_grads();
        }
        parallel_for(end - begin, tcfg.threads,
                     [&](std::size_t b, std::size_t e, std::size_t chunk) {
                       ParamStore& s = chunk == 0 ? store : workers[chunk - 1];
                       for (std::size_t i = b; i < e; ++i) {
                         const auto& inst = instances[order[begin + i]];
                         losses[i] = detail::instance_nll(train_windows[inst.window],
                                                          inst.tau, inst.ped, s, mcfg,
                                                          inv_batch);
                       }
                     });
        for (auto& w : workers)
          for (const auto& name : store.names()) store.grad(name) += w.grad(name);
      }
      for (double l : losses) epoch_loss += l;

      if (tcfg.clip_norm > 0.0) {
        const double norm = store.grad_norm();
        if (norm > tcfg.clip_norm) store.scale_grads(tcfg.clip_norm / norm);
      }
      store.adam_step(tcfg.adam);
    }

    report.train_nll.push_back(epoch_loss / static_cast<double>(instances.size()));
    const double val = val_windows.empty()
                           ? report.train_nll.back()
                           : mean_nll(val_windows, store, mcfg,
                                      tcfg.all_future_steps, tcfg.threads);
    report.val_nll.push_back(val);
    report.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    if (val < report.best_val_nll) {
      report.best_val_nll = val;
      report.best_epoch = epoch + 1;
      result.params = store;
    }
    if (!checkpoint_dir.empty() && tcfg.checkpoint_every > 0 &&
        (epoch + 1) % tcfg.checkpoint_every == 0) {
      save_checkpoint(store,
                      (std::filesystem::path(checkpoint_dir) /
                       ("ckpt_epoch" + std::to_string(epoch + 1) + ".bin"))
                          .string(),
                      /*with_optimizer_state=*/true);
    }
    if (progress) {
      (*progress) << "epoch " << epoch + 1 << "/" << tcfg.epochs
                  << "  train_nll " << report.train_nll.back() << "  val_nll "
                  << val << "  (" << report.seconds.back() << " s)\n";
      progress->flush();
    }
  }

  if (!checkpoint_dir.empty()) {
    save_checkpoint(result.params,
                    (std::filesystem::path(checkpoint_dir) / "best.bin").string());
  }
  return result;
}

}  // namespace socialpec
