// socialpec: train, evaluate, and visualize pattern-based pedestrian
// trajectory prediction on ETH/UCY-format data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "socialpec/socialpec.hpp"

namespace fs = std::filesystem;
using namespace socialpec;

namespace {

struct ModelFlags {
  std::size_t ctx_patterns = 100, ctx_kernels = 160;
  std::size_t tgt_patterns = 50, tgt_kernels = 80;
  std::size_t pattern_len = 2, conv_len = 2, pool_stride = 2;
  std::vector<std::size_t> mlp_hidden{300, 120, 80};
  std::size_t mixture = 1;
  std::size_t obs_len = 8, pred_len = 12;
  std::string init_scheme = "radial";

  void attach(CLI::App* cmd) {
    cmd->add_option("--ctx-patterns", ctx_patterns, "context PEC kernels");
    cmd->add_option("--ctx-kernels", ctx_kernels, "context conv kernels");
    cmd->add_option("--tgt-patterns", tgt_patterns, "target PEC kernels");
    cmd->add_option("--tgt-kernels", tgt_kernels, "target conv kernels");
    cmd->add_option("--pattern-len", pattern_len, "PEC kernel length");
    cmd->add_option("--conv-len", conv_len, "conv kernel length");
    cmd->add_option("--pool-stride", pool_stride, "max-pool stride");
    cmd->add_option("--mlp", mlp_hidden, "hidden layer widths");
    cmd->add_option("--K", mixture, "mixture components (1 = single Gaussian)");
    cmd->add_option("--obs-len", obs_len, "observed timesteps");
    cmd->add_option("--pred-len", pred_len, "predicted timesteps");
    cmd->add_option("--init", init_scheme, "pattern init: radial | uniform-box");
  }

  ModelConfig to_config() const {
    ModelConfig cfg;
    cfg.context = EncoderConfig{ctx_patterns, pattern_len, ctx_kernels, conv_len,
                                pool_stride};
    cfg.target = EncoderConfig{tgt_patterns, pattern_len, tgt_kernels, conv_len,
                               pool_stride};
    cfg.mlp.hidden = mlp_hidden;
    cfg.mixture_components = mixture;
    cfg.t_h = obs_len;
    cfg.t_pred = pred_len;
    cfg.validate();
    return cfg;
  }

  nlohmann::json to_json() const {
    return {{"ctx_patterns", ctx_patterns}, {"ctx_kernels", ctx_kernels},
            {"tgt_patterns", tgt_patterns}, {"tgt_kernels", tgt_kernels},
            {"pattern_len", pattern_len},   {"conv_len", conv_len},
            {"pool_stride", pool_stride},   {"mlp", mlp_hidden},
            {"K", mixture},                 {"obs_len", obs_len},
            {"pred_len", pred_len},         {"init", init_scheme}};
  }
};

ParamStore load_model(const std::string& checkpoint, const ModelConfig& cfg,
                      PatternInit scheme) {
  ParamStore store;
  RandomSource rng(0);  // shapes only; values come from the checkpoint
  init_model_params(store, cfg, rng, scheme);
  load_checkpoint_into(store, checkpoint);
  return store;
}

std::vector<std::string> manifest_paths(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& [name, path] : m.entries) out.push_back(path);
  return out;
}

int run_train(const ModelFlags& model, const std::string& manifest_path,
              const std::string& held_out, const std::string& out_dir,
              TrainConfig tcfg, std::size_t stride, double val_fraction,
              const std::string& resume) {
  const ModelConfig cfg = model.to_config();
  const PatternInit scheme = pattern_init_from_string(model.init_scheme);

  const auto manifest = load_manifest(manifest_path);
  auto all = load_all_windows(manifest, cfg.t_h, cfg.t_pred, stride);
  RandomSource split_rng = RandomSource(tcfg.seed).fork(0xda7a);
  auto plan = leave_one_out(all, held_out, val_fraction, split_rng);
  std::cerr << "train " << plan.train.size() << " / val " << plan.val.size()
            << " / test " << plan.test.size() << " windows (held out: " << held_out
            << ")\n";

  fs::create_directories(out_dir);
  auto result = train(plan.train, plan.val, cfg, tcfg, out_dir, scheme, resume,
                      &std::cerr);

  {
    std::ofstream os(fs::path(out_dir) / "report.csv");
    write_report_csv(os, result.report);
  }
  RunManifest rm;
  rm.command = "train";
  rm.seed = tcfg.seed;
  rm.threads = tcfg.threads;
  rm.data_manifest = manifest_path;
  rm.inputs_hash = hash_files_hex(manifest_paths(manifest));
  rm.config = {{"model", model.to_json()},
               {"train",
                {{"epochs", tcfg.epochs},
                 {"batch_size", tcfg.batch_size},
                 {"learning_rate", tcfg.adam.learning_rate},
                 {"all_future_steps", tcfg.all_future_steps},
                 {"clip_norm", tcfg.clip_norm},
                 {"stride", stride},
                 {"val_fraction", val_fraction},
                 {"held_out", held_out}}}};
  rm.save((fs::path(out_dir) / "runmanifest.json").string());

  std::cout << "best epoch " << result.report.best_epoch << " (val NLL "
            << result.report.best_val_nll << "); checkpoint written to "
            << (fs::path(out_dir) / "best.bin").string() << "\n";
  return 0;
}

int run_eval(const ModelFlags& model, const std::string& manifest_path,
             std::string held_out, const std::string& checkpoint, bool linear,
             std::size_t samples, std::uint64_t seed, std::size_t threads,
             std::size_t stride, bool independent_min, bool reference,
             const std::string& out_dir) {
  const ModelConfig cfg = model.to_config();
  const auto manifest = load_manifest(manifest_path);
  auto all = load_all_windows(manifest, cfg.t_h, cfg.t_pred, stride);

  MetricReport report;
  report.samples = linear ? 1 : samples;
  report.protocol = linear ? "deterministic" : "best-of-" + std::to_string(samples);

  if (linear) {
    if (held_out == "all") {
      for (const auto& [name, windows] : all)
        report.rows.push_back(
            evaluate_linear(name, windows, cfg.t_h, cfg.t_pred, threads));
    } else {
      if (!all.count(held_out)) throw DataError("unknown dataset '" + held_out + "'");
      report.rows.push_back(
          evaluate_linear(held_out, all.at(held_out), cfg.t_h, cfg.t_pred, threads));
    }
  } else {
    if (checkpoint.empty())
      throw DataError("eval: --checkpoint is required unless --linear is set");
    if (held_out == "all")
      throw DataError("eval: model evaluation needs a single --held-out dataset");
    if (!all.count(held_out)) throw DataError("unknown dataset '" + held_out + "'");
    ParamStore store =
        load_model(checkpoint, cfg, pattern_init_from_string(model.init_scheme));
    report.rows.push_back(evaluate_model(held_out, all.at(held_out), store, cfg,
                                         samples, seed, independent_min, threads));
  }

  render_metric_table(std::cout, report, reference);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "metrics.csv");
    write_metric_csv(os, report);
    RunManifest rm;
    rm.command = "eval";
    rm.seed = seed;
    rm.threads = threads;
    rm.data_manifest = manifest_path;
    rm.inputs_hash = hash_files_hex(manifest_paths(manifest));
    rm.config = {{"model", model.to_json()},
                 {"eval",
                  {{"samples", samples},
                   {"linear", linear},
                   {"held_out", held_out},
                   {"stride", stride},
                   {"independent_min", independent_min},
                   {"checkpoint", checkpoint}}}};
    rm.save((fs::path(out_dir) / "runmanifest.json").string());
  }
  return 0;
}

int run_predict(const ModelFlags& model, const std::string& checkpoint,
                const std::string& scene_path, std::size_t window_index,
                std::size_t samples, std::uint64_t seed,
                const std::string& out_dir) {
  const ModelConfig cfg = model.to_config();
  ParamStore store =
      load_model(checkpoint, cfg, pattern_init_from_string(model.init_scheme));

  auto windows = make_windows(load_annotations(scene_path), cfg.t_h, cfg.t_pred, 1);
  if (windows.empty()) throw DataError("no complete windows in '" + scene_path + "'");
  if (window_index >= windows.size())
    throw DataError("window index " + std::to_string(window_index) +
                    " out of range; file has " + std::to_string(windows.size()) +
                    " windows");
  const Window& window = windows[window_index];
  const Scene observed = window.scene.slice(0, cfg.t_h);

  RandomSource rng(seed);
  auto rollouts = traj_predict(observed, store, cfg, rng, samples);
  std::size_t best = 0;
  double best_ade = 1e300;
  for (std::size_t s = 0; s < rollouts.size(); ++s) {
    const double a = ade(rollouts[s], window.scene, cfg.t_h);
    if (a < best_ade) {
      best_ade = a;
      best = s;
    }
  }

  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "rollout.csv");
    write_rollout_csv(os, static_cast<int>(window_index), observed, rollouts,
                      cfg.t_h);
  }
  {
    std::ofstream os(fs::path(out_dir) / "prediction.svg");
    render_prediction_svg(os, window.scene, rollouts, cfg.t_h, best);
  }
  RunManifest rm;
  rm.command = "predict";
  rm.seed = seed;
  rm.data_manifest = scene_path;
  rm.inputs_hash = hash_files_hex({scene_path});
  rm.config = {{"model", model.to_json()},
               {"predict",
                {{"samples", samples},
                 {"window", window_index},
                 {"checkpoint", checkpoint}}}};
  rm.save((fs::path(out_dir) / "runmanifest.json").string());

  std::cout << "window " << window_index << ": M=" << window.scene.size()
            << ", best sample " << best << " (ADE " << best_ade << " m); outputs in "
            << out_dir << "\n";
  return 0;
}

int run_patterns(const ModelFlags& model, const std::string& checkpoint,
                 const std::string& which, const std::string& match_path,
                 std::size_t window_index, std::size_t target,
                 const std::string& out_dir) {
  if (which != "ctx" && which != "tgt")
    throw DataError("patterns: --which must be ctx or tgt");
  const ModelConfig cfg = model.to_config();
  ParamStore store =
      load_model(checkpoint, cfg, pattern_init_from_string(model.init_scheme));
  const MotionPatternBank bank = bank_from_store(store, which + ".pec");

  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / ("patterns_" + which + ".csv"));
    write_pattern_csv(os, bank);
  }
  {
    std::ofstream os(fs::path(out_dir) / ("patterns_" + which + ".svg"));
    render_pattern_svg(os, bank);
  }

  if (!match_path.empty()) {
    auto windows = make_windows(load_annotations(match_path), cfg.t_h, cfg.t_pred, 1);
    if (windows.empty()) throw DataError("no complete windows in '" + match_path + "'");
    if (window_index >= windows.size())
      throw DataError("window index out of range for '" + match_path + "'");
    const Window& window = windows[window_index];
    if (target >= window.scene.size())
      throw DataError("target index out of range (M=" +
                      std::to_string(window.scene.size()) + ")");
    const Scene ego = convert(window.scene.slice(0, cfg.t_h), target);

    // per-pattern match strength: the strongest response over the matched
    // trajectories at each segment
    std::vector<Tensor> scores;
    for (std::size_t m = 0; m < ego.size(); ++m) {
      if (which == "ctx" && m == target) continue;
      if (which == "tgt" && m != target) continue;
      scores.push_back(pec_encode(trajectory_input(ego.at(m)).reshaped(
                                      {2, cfg.t_h}),
                                  bank));
    }
    if (scores.empty())
      throw DataError("match: no trajectories to match for --which " + which);
    const std::size_t n_segments = scores.front().dim(0);
    for (std::size_t t = 0; t < n_segments; ++t) {
      std::vector<double> heat(bank.n_patterns(), -1e300);
      for (const auto& psi : scores)
        for (std::size_t j = 0; j < bank.n_patterns(); ++j)
          heat[j] = std::max(heat[j], psi.at({t, j}));
      std::ofstream os(fs::path(out_dir) /
                       ("match_seg" + std::to_string(t) + ".svg"));
      render_match_svg(os, bank, ego, target, t, heat);
    }
    std::cout << "wrote " << n_segments << " segment match plots to " << out_dir
              << "\n";
  }

  RunManifest rm;
  rm.command = "patterns";
  rm.data_manifest = match_path;
  rm.inputs_hash = match_path.empty() ? hash_files_hex({checkpoint})
                                      : hash_files_hex({checkpoint, match_path});
  rm.config = {{"model", model.to_json()},
               {"patterns", {{"which", which}, {"checkpoint", checkpoint}}}};
  rm.save((fs::path(out_dir) / "runmanifest.json").string());
  return 0;
}

int run_synth(const std::string& out_dir, std::size_t windows, std::size_t max_peds,
              double jitter, std::uint64_t seed) {
  fs::create_directories(out_dir);
  RandomSource rng(seed);
  const std::vector<std::string> names{"SynthA", "SynthB", "SynthC", "SynthD",
                                       "SynthE"};
  std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
  for (const auto& name : names) {
    RandomSource file_rng = rng.fork(fnv1a64(name.data(), name.size()));
    auto file = synthetic_annotations(windows, max_peds, jitter, file_rng);
    std::ofstream os(fs::path(out_dir) / (name + ".txt"));
    write_annotations(os, file);
    manifest << name << ' ' << name << ".txt\n";
  }
  std::cout << "wrote 5 synthetic datasets and manifest.txt to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Social pattern extraction convolution for pedestrian trajectory "
               "prediction"};
  app.require_subcommand(1);

  ModelFlags model;
  std::string manifest_path, held_out = "ETH", out_dir = "run";
  std::string checkpoint, scene_path, resume, which = "ctx", match_path;
  std::size_t stride = 1, samples = 20, window_index = 0, target = 0;
  std::size_t synth_windows = 60, synth_peds = 3;
  double val_fraction = 0.1, jitter = 0.01;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool linear = false, independent_min = false, reference = false,
       first_step_only = false;
  TrainConfig tcfg;

  auto* train_cmd = app.add_subcommand("train", "train on a leave-one-out split");
  model.attach(train_cmd);
  train_cmd->set_config("--config", "", "config file with these options");
  train_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  train_cmd->add_option("--held-out", held_out, "dataset left out of training");
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--epochs", tcfg.epochs, "training epochs");
  train_cmd->add_option("--batch", tcfg.batch_size, "instances per Adam step");
  train_cmd->add_option("--lr", tcfg.adam.learning_rate, "Adam learning rate");
  train_cmd->add_option("--stride", stride, "window stride in frames");
  train_cmd->add_option("--val-frac", val_fraction, "validation fraction");
  train_cmd->add_option("--seed", seed, "random seed");
  train_cmd->add_option("--threads", threads, "worker threads (1 = sequential)");
  train_cmd->add_option("--clip-norm", tcfg.clip_norm, "gradient clip (0 = off)");
  train_cmd->add_option("--checkpoint-every", tcfg.checkpoint_every,
                        "epochs between checkpoints");
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  train_cmd->add_option("--start-epoch", tcfg.start_epoch,
                        "first epoch index when resuming");
  train_cmd->add_flag("--first-step-only", first_step_only,
                      "train on the first future step only");

  auto* eval_cmd = app.add_subcommand("eval", "ADE/FDE on a held-out dataset");
  model.attach(eval_cmd);
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  eval_cmd->add_option("--held-out", held_out, "dataset to test on, or 'all'");
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval_cmd->add_flag("--linear", linear, "evaluate the linear baseline instead");
  eval_cmd->add_option("--samples", samples, "rollouts per window");
  eval_cmd->add_option("--stride", stride, "window stride in frames");
  eval_cmd->add_option("--seed", seed, "random seed");
  eval_cmd->add_option("--threads", threads, "worker threads");
  eval_cmd->add_flag("--independent-min", independent_min,
                     "minimize ADE and FDE independently over samples");
  eval_cmd->add_flag("--reference", reference, "print published numbers alongside");
  eval_cmd->add_option("--out", out_dir, "directory for metrics.csv")
      ->default_val("");

  auto* predict_cmd = app.add_subcommand("predict", "roll out one scene window");
  model.attach(predict_cmd);
  predict_cmd->set_config("--config");
  predict_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  predict_cmd->add_option("--scene", scene_path, "annotation file")->required();
  predict_cmd->add_option("--window", window_index, "window index in the file");
  predict_cmd->add_option("--samples", samples, "rollouts to draw");
  predict_cmd->add_option("--seed", seed, "random seed");
  predict_cmd->add_option("--out", out_dir, "output directory");

  auto* patterns_cmd = app.add_subcommand("patterns", "export a learned pattern bank");
  model.attach(patterns_cmd);
  patterns_cmd->set_config("--config");
  patterns_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  patterns_cmd->add_option("--which", which, "ctx or tgt bank");
  patterns_cmd->add_option("--match", match_path,
                           "annotation file to color patterns by match strength");
  patterns_cmd->add_option("--window", window_index, "window index for --match");
  patterns_cmd->add_option("--target", target, "target pedestrian for --match");
  patterns_cmd->add_option("--out", out_dir, "output directory");

  auto* synth_cmd =
      app.add_subcommand("synth", "generate synthetic walker datasets + manifest");
  synth_cmd->add_option("--out", out_dir, "output directory");
  synth_cmd->add_option("--windows", synth_windows, "windows per dataset");
  synth_cmd->add_option("--max-peds", synth_peds, "max pedestrians per window");
  synth_cmd->add_option("--jitter", jitter, "per-step Gaussian jitter (m)");
  synth_cmd->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    tcfg.seed = seed;
    tcfg.threads = threads;
    tcfg.all_future_steps = !first_step_only;
    if (train_cmd->parsed())
      return run_train(model, manifest_path, held_out, out_dir, tcfg, stride,
                       val_fraction, resume);
    if (eval_cmd->parsed())
      return run_eval(model, manifest_path, held_out, checkpoint, linear, samples,
                      seed, threads, stride, independent_min, reference, out_dir);
    if (predict_cmd->parsed())
      return run_predict(model, checkpoint, scene_path, window_index, samples, seed,
                         out_dir);
    if (patterns_cmd->parsed())
      return run_patterns(model, checkpoint, which, match_path, window_index, target,
                          out_dir);
    if (synth_cmd->parsed())
      return run_synth(out_dir, synth_windows, synth_peds, jitter, seed);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
