// echopipe: command-line front end.
//   synth | preprocess | train | eval | explain | selfcheck
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "echopipe/checkpoint.hpp"
#include "echopipe/config.hpp"
#include "echopipe/error.hpp"
#include "echopipe/evaluate.hpp"
#include "echopipe/explain.hpp"
#include "echopipe/phantom.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/selfcheck.hpp"
#include "echopipe/train.hpp"

namespace fs = std::filesystem;
using namespace echopipe;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Global seed (falls back to ECHOPIPE_SEED, then the config)");
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

std::uint64_t parse_seed_env(const char* text) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 10);
    if (used != std::string(text).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("ECHOPIPE_SEED is not an unsigned integer: '") + text + "'");
  }
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) {
    cfg.seed = *c.seed;
  } else if (const char* env = std::getenv("ECHOPIPE_SEED"); env && *env) {
    cfg.seed = parse_seed_env(env);
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

// Applies overrides, validates, echoes and records the configuration.
void finalize(RunConfig& cfg, const std::string& command) {
  cfg.resolve();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const Json j = to_json(cfg);
  std::cout << "echopipe " << command << " seed=" << cfg.seed << " config=" << config_hash(j) << '\n'
            << j.dump(2) << '\n';
  fs::create_directories(cfg.output_dir);
  save_run_config(cfg, fs::path(cfg.output_dir) / ("run_config." + command + ".json"));
}

TaskMode parse_task(const std::string& text) {
  const auto m = parse_task_mode(text);
  if (!m) throw UsageError("unknown task '" + text + "' (expected severity or binary)");
  return *m;
}

ViewTag parse_view_arg(const std::string& text) {
  const auto v = parse_view(text);
  if (!v) throw UsageError("unknown view '" + text + "' (expected PLAX, A4C, PSAX_P, PSAX_S or PSAX_A)");
  return *v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echopipe: echocardiography video classification pipeline"};
  app.require_subcommand(1);

  // synth
  Common synth_c;
  std::optional<std::size_t> synth_patients, synth_frames, synth_size;
  auto* synth = app.add_subcommand("synth", "Generate a phantom dataset with ground truth");
  add_common(synth, synth_c, true);
  synth->add_option("--patients", synth_patients, "Number of phantom patients")->check(CLI::PositiveNumber);
  synth->add_option("--frames", synth_frames, "Frames per video")->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size, "Frame height and width in pixels")->check(CLI::PositiveNumber);

  // preprocess
  Common pre_c;
  std::string pre_manifest;
  std::optional<std::size_t> pre_bins, pre_size;
  auto* pre = app.add_subcommand("preprocess", "Write canonical (masked, cropped, resized, equalized) videos");
  add_common(pre, pre_c, true);
  pre->add_option("--manifest", pre_manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  pre->add_option("--bins", pre_bins, "Equalization bins")->check(CLI::Range(2, 65536));
  pre->add_option("--size", pre_size, "Canonical height and width")->check(CLI::PositiveNumber);

  // train
  Common train_c;
  std::string train_manifest, train_val_manifest, train_view, train_task;
  std::optional<std::size_t> train_epochs, train_size;
  std::optional<double> train_width;
  auto* tr = app.add_subcommand("train", "Train one single-view model");
  add_common(tr, train_c, true);
  tr->add_option("--manifest", train_manifest, "Training manifest")->required()->check(CLI::ExistingFile);
  tr->add_option("--val-manifest", train_val_manifest, "Validation manifest for checkpoint selection")
      ->check(CLI::ExistingFile);
  tr->add_option("--view", train_view, "View to train on")->required();
  tr->add_option("--task", train_task, "severity or binary");
  tr->add_option("--epochs", train_epochs, "Training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--width", train_width, "Width multiplier")->check(CLI::PositiveNumber);
  tr->add_option("--size", train_size, "Canonical height and width")->check(CLI::PositiveNumber);

  // eval
  Common eval_c;
  std::string eval_manifest, eval_task, eval_scheme;
  std::vector<std::string> eval_views;
  std::optional<std::size_t> eval_folds, eval_epochs, eval_size;
  std::optional<double> eval_width;
  bool eval_save = false;
  auto* ev = app.add_subcommand("eval", "Patient-level cross-validation with multi-view voting");
  add_common(ev, eval_c, true);
  ev->add_option("--manifest", eval_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--folds", eval_folds, "Number of folds")->check(CLI::PositiveNumber);
  ev->add_option("--scheme", eval_scheme, "shuffle_split or partition");
  ev->add_option("--task", eval_task, "severity or binary");
  ev->add_option("--views", eval_views, "Views to evaluate");
  ev->add_option("--epochs", eval_epochs, "Training epochs per model")->check(CLI::PositiveNumber);
  ev->add_option("--width", eval_width, "Width multiplier")->check(CLI::PositiveNumber);
  ev->add_option("--size", eval_size, "Canonical height and width")->check(CLI::PositiveNumber);
  ev->add_flag("--save-checkpoints", eval_save, "Save every selected model");

  // explain
  Common ex_c;
  std::string ex_checkpoint, ex_manifest, ex_class = "predicted", ex_layer;
  auto* ex = app.add_subcommand("explain", "Grad-CAM saliency overlays for every video of a manifest");
  add_common(ex, ex_c, true);
  ex->add_option("--checkpoint", ex_checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ex->add_option("--manifest", ex_manifest, "Videos to explain")->required()->check(CLI::ExistingFile);
  ex->add_option("--class", ex_class, "predicted, or a class index");
  ex->add_option("--layer", ex_layer, "Block to explain (default last_conv)");

  // selfcheck
  auto* self = app.add_subcommand("selfcheck", "Run the fast invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*self) {
      int failures = 0;
      for (const auto& r : run_selfcheck()) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        failures += r.pass ? 0 : 1;
      }
      std::cout << (failures == 0 ? "selfcheck passed\n" : "selfcheck FAILED\n");
      return failures == 0 ? 0 : kFailure;
    }

    if (*synth) {
      RunConfig cfg = resolve_config(synth_c);
      if (synth_patients) cfg.phantom.n_patients = *synth_patients;
      if (synth_frames) cfg.phantom.frames_per_video = *synth_frames;
      if (synth_size) cfg.phantom.frame_height = cfg.phantom.frame_width = *synth_size;
      finalize(cfg, "synth");
      const auto manifest = generate_phantom_dataset(cfg.phantom, cfg.output_dir);
      std::cout << "wrote " << manifest.records.size() << " videos and "
                << (fs::path(cfg.output_dir) / "manifest.tsv").string() << '\n';
      return 0;
    }

    if (*pre) {
      RunConfig cfg = resolve_config(pre_c);
      if (pre_bins) cfg.preprocess.equalization_bins = *pre_bins;
      if (pre_size) cfg.preprocess.target_height = cfg.preprocess.target_width = *pre_size;
      finalize(cfg, "preprocess");
      const DatasetManifest in = load_manifest(pre_manifest);
      PreprocessConfig pc = cfg.preprocess;
      pc.normalization = NormalizationMode::None;
      DatasetManifest out{fs::absolute(cfg.output_dir), {}, true};
      fs::create_directories(fs::path(cfg.output_dir) / "videos");
      for (const auto& r : in.records) {
        VideoFrames vf = read_video(in.resolve(r));
        const EchoVideo canonical = preprocess_video(EchoVideo{r.patient_id, r.view, r.label, vf.frames, vf.fps}, pc);
        const fs::path rel = fs::path("videos") / (r.patient_id + "_" + std::string(to_string(r.view)) + ".echo");
        write_float_volume(canonical.frames, canonical.fps, out.root / rel);
        out.records.push_back({r.patient_id, r.view, r.label, rel});
      }
      save_manifest(out, out.root / "manifest.tsv");
      std::cout << "wrote " << out.records.size() << " canonical videos and "
                << (out.root / "manifest.tsv").string() << '\n';
      return 0;
    }

    if (*tr) {
      RunConfig cfg = resolve_config(train_c);
      if (!train_task.empty()) cfg.eval.mode = parse_task(train_task);
      if (train_epochs) cfg.train.epochs = *train_epochs;
      if (train_width) cfg.model.width_multiplier = *train_width;
      if (train_size) cfg.preprocess.target_height = cfg.preprocess.target_width = *train_size;
      const ViewTag view = parse_view_arg(train_view);
      finalize(cfg, "train");
      cfg.train.verbose = true;
      const DatasetManifest manifest = load_manifest(train_manifest);
      std::optional<DatasetManifest> val;
      if (!train_val_manifest.empty()) val = load_manifest(train_val_manifest);
      TrainResult result = train(build_model<float>(cfg.model, cfg.seed), manifest, view, cfg.eval.mode,
                                 cfg.preprocess, cfg.train, cfg.clips, cfg.augment, val ? &*val : nullptr);
      const fs::path ckpt = fs::path(cfg.output_dir) / "model.ckpt";
      save_checkpoint(*result.model,
                      {cfg.seed, result.history.selected_epoch, std::string(to_string(cfg.eval.mode)),
                       std::string(to_string(view))},
                      ckpt);
      Json history;
      history["selected_epoch"] = result.history.selected_epoch;
      Json epochs = Json::array();
      for (const auto& e : result.history.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_balanced_accuracy", e.train_balanced_accuracy},
                          {"val_balanced_accuracy", e.val_balanced_accuracy},
                          {"seconds", e.seconds}});
      }
      history["epochs"] = epochs;
      history["batch_losses"] = result.history.batch_losses;
      write_text(fs::path(cfg.output_dir) / "history.json", history.dump(2) + "\n");
      std::cout << "wrote " << ckpt.string() << " (epoch " << result.history.selected_epoch << ")\n";
      return 0;
    }

    if (*ev) {
      RunConfig cfg = resolve_config(eval_c);
      if (eval_folds) cfg.eval.folds = *eval_folds;
      if (!eval_scheme.empty()) {
        const auto s = parse_split_scheme(eval_scheme);
        if (!s) throw UsageError("unknown scheme '" + eval_scheme + "'");
        cfg.eval.scheme = *s;
      }
      if (!eval_task.empty()) cfg.eval.mode = parse_task(eval_task);
      if (!eval_views.empty()) {
        cfg.eval.views.clear();
        for (const auto& v : eval_views) cfg.eval.views.push_back(parse_view_arg(v));
      }
      if (eval_epochs) cfg.train.epochs = *eval_epochs;
      if (eval_width) cfg.model.width_multiplier = *eval_width;
      if (eval_size) cfg.preprocess.target_height = cfg.preprocess.target_width = *eval_size;
      finalize(cfg, "eval");
      const DatasetManifest manifest = load_manifest(eval_manifest);
      const auto videos = load_videos(manifest, cfg.preprocess);
      CvHooks hooks;
      hooks.verbose = true;
      if (eval_save) hooks.checkpoint_dir = fs::path(cfg.output_dir) / "checkpoints";
      const CvReport report = cross_validate(videos, cfg.eval, cfg.model, cfg.train, cfg.clips, cfg.augment,
                                             cfg.seed, hooks, to_json(cfg).dump());
      write_text(fs::path(cfg.output_dir) / "report.json", report_to_json(report) + "\n");
      const std::string table = report_table(report);
      write_text(fs::path(cfg.output_dir) / "report.txt", table);
      std::cout << table;
      return 0;
    }

    if (*ex) {
      RunConfig cfg = resolve_config(ex_c);
      if (!ex_layer.empty()) cfg.explain.layer = ex_layer;
      if (ex_class != "predicted") {
        try {
          std::size_t used = 0;
          cfg.explain.target_class = std::stoi(ex_class, &used);
          if (used != ex_class.size()) throw std::invalid_argument(ex_class);
        } catch (const std::exception&) {
          throw UsageError("--class must be 'predicted' or a class index, got '" + ex_class + "'");
        }
      }
      LoadedCheckpoint loaded = load_checkpoint(ex_checkpoint);
      Model<float>& model = *loaded.model;
      const auto task = parse_task_mode(loaded.meta.task);
      if (task) cfg.eval.mode = *task;
      cfg.preprocess.target_height = model.config().input_height;
      cfg.preprocess.target_width = model.config().input_width;
      cfg.clips.clip_len = model.config().clip_len;
      cfg.model.width_multiplier = model.config().width_multiplier;
      cfg.model.stage_temporal_strides = model.config().stage_temporal_strides;
      if (cfg.explain.target_class &&
          (*cfg.explain.target_class < 0 || *cfg.explain.target_class >= model.config().num_classes)) {
        throw UsageError("--class " + ex_class + " is outside the model's " +
                         std::to_string(model.config().num_classes) + " classes");
      }
      finalize(cfg, "explain");
      const DatasetManifest manifest = load_manifest(ex_manifest);
      const auto videos = load_videos(manifest, cfg.preprocess);
      Json summary = Json::array();
      for (const auto& v : videos) {
        const auto clips = extract_eval_clips(v, cfg.clips, cfg.train.eval_seed, video_key(v));
        const std::size_t k = cfg.clips.clip_len, H = v.height(), W = v.width();
        Tensor<float> frames({clips.size() * k, H, W});
        SaliencyVolume all;
        all.values = Tensor<float>({clips.size() * k, H, W});
        Json per_clip = Json::array();
        for (std::size_t i = 0; i < clips.size(); ++i) {
          const SaliencyVolume s = grad_cam_3d(model, clips[i].frames, cfg.explain);
          std::copy_n(clips[i].frames.data(), k * H * W, frames.data() + i * k * H * W);
          std::copy_n(s.values.data(), k * H * W, all.values.data() + i * k * H * W);
          per_clip.push_back({{"start_frame", clips[i].start_frame}, {"target_class", s.target_class},
                              {"probs", s.probs}});
        }
        const std::string stem = v.patient_id + "_" + std::string(to_string(v.view));
        const OverlayFiles files = overlay_export(frames, all, fs::path(cfg.output_dir) / (stem + ".overlay.echo"), v.fps);
        summary.push_back({{"patient_id", v.patient_id},
                           {"view", std::string(to_string(v.view))},
                           {"overlay", files.overlay.filename().string()},
                           {"saliency", files.saliency.filename().string()},
                           {"layer", cfg.explain.layer},
                           {"clips", per_clip}});
      }
      write_text(fs::path(cfg.output_dir) / "explain.json", summary.dump(2) + "\n");
      std::cout << "wrote overlays for " << videos.size() << " videos to " << cfg.output_dir << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
