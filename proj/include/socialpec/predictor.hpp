#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "socialpec/encoder.hpp"
#include "socialpec/head.hpp"
#include "socialpec/trajectory.hpp"

namespace socialpec {

struct ModelConfig {
  EncoderConfig context = EncoderConfig::context_default();
  EncoderConfig target = EncoderConfig::target_default();
  MlpConfig mlp;
  std::size_t mixture_components = 1;  // K; 1 = plain bivariate Gaussian
  std::size_t t_h = 8;
  std::size_t t_pred = 12;

  std::size_t raw_dim() const { return MlpConfig::raw_dim(mixture_components); }

  std::size_t mlp_input_dim() const {
    const Shape tgt = embedding_shape(target, t_h);
    const Shape ctx = embedding_shape(context, t_h);
    return tgt[0] * tgt[1] + ctx[0] * ctx[1];
  }

  void validate() const {
    context.validate();
    target.validate();
    if (mixture_components < 1) throw ShapeError("model: K must be >= 1");
    if (t_h < 2) throw ShapeError("model: t_h must be >= 2");
    if (t_pred < 1) throw ShapeError("model: t_pred must be >= 1");
    shape_plan(context, t_h);
    shape_plan(target, t_h);
  }
};

inline void init_model_params(ParamStore& store, const ModelConfig& cfg,
                              RandomSource& rng,
                              PatternInit scheme = PatternInit::kRadial) {
  cfg.validate();
  init_encoder_params(store, "ctx", cfg.context, rng, scheme);
  init_encoder_params(store, "tgt", cfg.target, rng, scheme);
  init_mlp_params(store, "mlp", cfg.mlp_input_dim(), cfg.mlp, cfg.raw_dim(), rng);
}

struct ModelVars {
  EncoderParams ctx;
  EncoderParams tgt;
  MlpParams mlp;

  static ModelVars bind(Tape& tape, ParamStore& store, const ModelConfig& cfg) {
    return {EncoderParams::bind(tape, store, "ctx"),
            EncoderParams::bind(tape, store, "tgt"),
            MlpParams::bind(tape, store, "mlp", cfg.mlp.hidden.size() + 1)};
  }
};

// Elementwise max over the pedestrian axis: the pooled entry says how
// prominently each pattern is present anywhere in the context. An empty
// context pools to -1, the infimum of the tanh-bounded embedding range.
inline Var context_pool(Tape& tape, const std::vector<Var>& embeddings,
                        const Shape& embedding_shape) {
  if (embeddings.empty()) {
    return tape.leaf(Tensor(embedding_shape, -1.0));
  }
  const Shape s = embeddings.front().shape();
  for (const Var& e : embeddings)
    if (e.shape() != s)
      throw ShapeError("context_pool: mixed embedding shapes " + shape_str(s) +
                       " vs " + shape_str(e.shape()));
  if (embeddings.size() == 1) return embeddings.front();
  std::vector<Var> stacked;
  Shape row = s;
  row.insert(row.begin(), 1);
  for (const Var& e : embeddings) stacked.push_back(reshape(e, row));
  return max_axis(concat(stacked, 0), 0);
}

// (2, T) channel-major input tensor of one trajectory.
inline Tensor trajectory_input(const Trajectory& traj) {
  Tensor t(Shape{2, traj.length()});
  for (std::size_t i = 0; i < traj.length(); ++i) {
    t.at({0, i}) = traj.at(i).x;
    t.at({1, i}) = traj.at(i).y;
  }
  return t;
}

// Raw head output for one target pedestrian of an ego-converted scene.
// This single implementation serves both training and rollout.
inline Var loc_predict_raw(Tape& tape, const ModelVars& vars, const Scene& ego_scene,
                           std::size_t target, const ModelConfig& cfg) {
  if (target >= ego_scene.size())
    throw ShapeError("loc_predict: target index out of range");
  if (ego_scene.length() != cfg.t_h)
    throw ShapeError("loc_predict: scene length " + std::to_string(ego_scene.length()) +
                     " does not match t_h=" + std::to_string(cfg.t_h));

  Var tgt_omega = encode(tape.leaf(trajectory_input(ego_scene.at(target))), vars.tgt,
                         cfg.target);
  std::vector<Var> ctx_omegas;
  for (std::size_t m = 0; m < ego_scene.size(); ++m) {
    if (m == target) continue;
    ctx_omegas.push_back(
        encode(tape.leaf(trajectory_input(ego_scene.at(m))), vars.ctx, cfg.context));
  }
  Var pooled = context_pool(tape, ctx_omegas, embedding_shape(cfg.context, cfg.t_h));

  Var flat_tgt = reshape(tgt_omega, {shape_numel(tgt_omega.shape()), 1});
  Var flat_ctx = reshape(pooled, {shape_numel(pooled.shape()), 1});
  return mlp_forward(concat({flat_tgt, flat_ctx}, 0), vars.mlp, cfg.mlp.leaky_slope);
}

// One-step location distribution in the target's ego frame.
inline LocationDistribution loc_predict(const Scene& ego_scene, std::size_t target,
                                        ParamStore& store, const ModelConfig& cfg) {
  Tape tape;
  ModelVars vars = ModelVars::bind(tape, store, cfg);
  Var raw = loc_predict_raw(tape, vars, ego_scene, target, cfg);
  return build_gmm(raw.value().vec(), cfg.mixture_components);
}

// One sampled multi-step rollout for every pedestrian, world coordinates.
struct PredictionRollout {
  std::vector<std::vector<State>> predicted;  // [M][t_pred]
  std::vector<std::vector<LocationDistribution>> distributions;  // kept on request
};

using LocPredictFn = std::function<LocationDistribution(const Scene& ego_scene,
                                                        std::size_t target)>;

// Autoregressive rollout: per timestep, every pedestrian is predicted from
// the same pre-update window (snapshot semantics), then all sampled
// locations commit together and re-enter as observations.
inline std::vector<PredictionRollout> traj_predict(const Scene& scene,
                                                   const LocPredictFn& loc_fn,
                                                   RandomSource& rng,
                                                   std::size_t n_samples,
                                                   std::size_t t_h, std::size_t t_pred,
                                                   bool keep_distributions = false) {
  if (scene.length() < t_h)
    throw ShapeError("traj_predict: scene length " + std::to_string(scene.length()) +
                     " shorter than observation window " + std::to_string(t_h));
  const std::size_t m_count = scene.size();
  std::vector<PredictionRollout> rollouts;
  rollouts.reserve(n_samples);

  for (std::size_t s = 0; s < n_samples; ++s) {
    // observation window: the last t_h states of the given scene
    std::vector<std::vector<State>> window(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      const auto& t = scene.at(m);
      for (std::size_t i = scene.length() - t_h; i < scene.length(); ++i)
        window[m].push_back(t.at(i));
    }

    PredictionRollout rollout;
    rollout.predicted.resize(m_count);
    if (keep_distributions) rollout.distributions.resize(m_count);

    for (std::size_t step = 0; step < t_pred; ++step) {
      std::vector<Trajectory> trajs;
      trajs.reserve(m_count);
      for (std::size_t m = 0; m < m_count; ++m) trajs.emplace_back(window[m]);
      const Scene window_scene(std::move(trajs), scene.dt());

      std::vector<State> next(m_count);
      for (std::size_t m = 0; m < m_count; ++m) {
        const EgoFrame frame = ego_frame_of(window_scene.at(m));
        const Scene ego_scene = to_ego(window_scene, frame);
        LocationDistribution dist = loc_fn(ego_scene, m);
        next[m] = convert_back(dist.sample(rng), frame);
        if (keep_distributions) rollout.distributions[m].push_back(dist);
      }
      for (std::size_t m = 0; m < m_count; ++m) {
        window[m].erase(window[m].begin());
        window[m].push_back(next[m]);
        rollout.predicted[m].push_back(next[m]);
      }
    }
    rollouts.push_back(std::move(rollout));
  }
  return rollouts;
}

inline std::vector<PredictionRollout> traj_predict(const Scene& scene,
                                                   ParamStore& store,
                                                   const ModelConfig& cfg,
                                                   RandomSource& rng,
                                                   std::size_t n_samples,
                                                   bool keep_distributions = false) {
  const LocPredictFn fn = [&store, &cfg](const Scene& ego, std::size_t m) {
    return loc_predict(ego, m, store, cfg);
  };
  return traj_predict(scene, fn, rng, n_samples, cfg.t_h, cfg.t_pred,
                      keep_distributions);
}

// CSV rows: scene_id, sample_id, ped_id, t, x, y, is_observed. Observed
// states appear once with sample_id -1; each sample contributes its
// predicted steps.
inline void write_rollout_csv(std::ostream& os, int scene_id, const Scene& observed,
                              const std::vector<PredictionRollout>& rollouts,
                              std::size_t t_h) {
  os << "scene_id,sample_id,ped_id,t,x,y,is_observed\n";
  os.precision(17);
  const std::size_t obs_start = observed.length() - t_h;
  for (std::size_t m = 0; m < observed.size(); ++m)
    for (std::size_t t = obs_start; t < observed.length(); ++t)
      os << scene_id << ",-1," << m << ',' << t - obs_start << ','
         << observed.at(m).at(t).x << ',' << observed.at(m).at(t).y << ",1\n";
  for (std::size_t s = 0; s < rollouts.size(); ++s)
    for (std::size_t m = 0; m < rollouts[s].predicted.size(); ++m)
      for (std::size_t t = 0; t < rollouts[s].predicted[m].size(); ++t)
        os << scene_id << ',' << s << ',' << m << ',' << t_h + t << ','
           << rollouts[s].predicted[m][t].x << ',' << rollouts[s].predicted[m][t].y
           << ",0\n";
}

}  // namespace socialpec
