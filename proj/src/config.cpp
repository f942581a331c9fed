#include "echopipe/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "echopipe/error.hpp"

namespace echopipe {
namespace {

void reject_unknown(const Json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

template <typename E, typename Parse>
void read_enum(const Json& j, const char* key, E& out, const std::string& section, Parse parse) {
  if (!j.contains(key)) return;
  std::string text;
  read(j, key, text, section);
  const auto parsed = parse(text);
  if (!parsed) throw ConfigError("config key '" + section + "." + key + "' has invalid value '" + text + "'");
  out = *parsed;
}

void read_range(const Json& j, const char* key, Range& out, const std::string& section) {
  if (!j.contains(key)) return;
  std::array<double, 2> r{};
  read(j, key, r, section);
  out = {r[0], r[1]};
}

}  // namespace

void RunConfig::resolve() {
  phantom.seed = seed;
  train.seed = seed;
  model.num_classes = num_classes(eval.mode);
  model.clip_len = clips.clip_len;
  model.input_height = preprocess.target_height;
  model.input_width = preprocess.target_width;
}

void RunConfig::validate() const {
  phantom.validate();
  preprocess.validate();
  augment.validate();
  clips.validate();
  model.validate();
  train.validate();
  eval.validate();
}

Json to_json(const ModelConfig& c) {
  Json j;
  j["num_classes"] = c.num_classes;
  j["input_channels"] = c.input_channels;
  j["width_multiplier"] = c.width_multiplier;
  j["clip_len"] = c.clip_len;
  j["input_height"] = c.input_height;
  j["input_width"] = c.input_width;
  j["stage_temporal_strides"] = c.stage_temporal_strides;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  const std::string s = "model";
  reject_unknown(j, s, {"num_classes", "input_channels", "width_multiplier", "clip_len", "input_height",
                        "input_width", "stage_temporal_strides"});
  ModelConfig c;
  read(j, "num_classes", c.num_classes, s);
  read(j, "input_channels", c.input_channels, s);
  read(j, "width_multiplier", c.width_multiplier, s);
  read(j, "clip_len", c.clip_len, s);
  read(j, "input_height", c.input_height, s);
  read(j, "input_width", c.input_width, s);
  read(j, "stage_temporal_strides", c.stage_temporal_strides, s);
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["phantom"] = {{"patients", c.phantom.n_patients},
                  {"views_per_patient", c.phantom.views_per_patient},
                  {"class_priors", c.phantom.class_priors},
                  {"frames", c.phantom.frames_per_video},
                  {"fps", c.phantom.fps},
                  {"height", c.phantom.frame_height},
                  {"width", c.phantom.frame_width},
                  {"noise_level", c.phantom.noise_level}};
  j["preprocess"] = {{"target_height", c.preprocess.target_height},
                     {"target_width", c.preprocess.target_width},
                     {"equalization_bins", c.preprocess.equalization_bins},
                     {"sector_threshold", c.preprocess.sector_threshold},
                     {"normalization", std::string(to_string(c.preprocess.normalization))},
                     {"dataset_mean", c.preprocess.dataset_mean},
                     {"dataset_std", c.preprocess.dataset_std}};
  const auto& a = c.augment;
  j["augment"] = {{"apply_probability", a.apply_probability},
                  {"sharpness_range", {a.sharpness_range.first, a.sharpness_range.second}},
                  {"brightness_range", {a.brightness_range.first, a.brightness_range.second}},
                  {"gamma_range", {a.gamma_range.first, a.gamma_range.second}},
                  {"salt_pepper_amount", a.salt_pepper_amount},
                  {"gaussian_noise_sigma", a.gaussian_noise_sigma},
                  {"speckle_amount", a.speckle_amount},
                  {"max_rotation_deg", a.max_rotation_deg},
                  {"max_translation_frac", a.max_translation_frac},
                  {"min_scale", a.min_scale},
                  {"max_zoom", a.max_zoom}};
  j["clips"] = {{"n_clips", c.clips.n_clips}, {"clip_len", c.clips.clip_len}, {"pad_short", c.clips.pad_short}};
  j["model"] = {{"width_multiplier", c.model.width_multiplier},
                {"stage_temporal_strides", c.model.stage_temporal_strides}};
  j["train"] = {{"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size},
                {"clips_per_video", c.train.clips_per_video},
                {"selection", std::string(to_string(c.train.selection))},
                {"eval_seed", c.train.eval_seed}};
  Json views = Json::array();
  for (ViewTag v : c.eval.views) views.push_back(std::string(to_string(v)));
  j["eval"] = {{"folds", c.eval.folds},
               {"scheme", std::string(to_string(c.eval.scheme))},
               {"validation_fraction", c.eval.validation_fraction},
               {"mode", std::string(to_string(c.eval.mode))},
               {"views", views}};
  j["explain"] = {{"layer", c.explain.layer},
                  {"target_class", c.explain.target_class ? Json(*c.explain.target_class) : Json("predicted")},
                  {"pooling", std::string(to_string(c.explain.pooling))}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  reject_unknown(j, "<root>",
                 {"seed", "output_dir", "phantom", "preprocess", "augment", "clips", "model", "train", "eval", "explain"});
  RunConfig c;
  read(j, "seed", c.seed, "<root>");
  read(j, "output_dir", c.output_dir, "<root>");

  if (j.contains("phantom")) {
    const Json& p = j["phantom"];
    const std::string s = "phantom";
    reject_unknown(p, s, {"patients", "views_per_patient", "class_priors", "frames", "fps", "height", "width", "noise_level"});
    read(p, "patients", c.phantom.n_patients, s);
    read(p, "views_per_patient", c.phantom.views_per_patient, s);
    read(p, "class_priors", c.phantom.class_priors, s);
    read(p, "frames", c.phantom.frames_per_video, s);
    read(p, "fps", c.phantom.fps, s);
    read(p, "height", c.phantom.frame_height, s);
    read(p, "width", c.phantom.frame_width, s);
    read(p, "noise_level", c.phantom.noise_level, s);
  }
  if (j.contains("preprocess")) {
    const Json& p = j["preprocess"];
    const std::string s = "preprocess";
    reject_unknown(p, s, {"target_height", "target_width", "equalization_bins", "sector_threshold", "normalization",
                          "dataset_mean", "dataset_std"});
    read(p, "target_height", c.preprocess.target_height, s);
    read(p, "target_width", c.preprocess.target_width, s);
    read(p, "equalization_bins", c.preprocess.equalization_bins, s);
    read(p, "sector_threshold", c.preprocess.sector_threshold, s);
    read_enum(p, "normalization", c.preprocess.normalization, s, parse_normalization);
    read(p, "dataset_mean", c.preprocess.dataset_mean, s);
    read(p, "dataset_std", c.preprocess.dataset_std, s);
  }
  if (j.contains("augment")) {
    const Json& p = j["augment"];
    const std::string s = "augment";
    reject_unknown(p, s, {"apply_probability", "sharpness_range", "brightness_range", "gamma_range",
                          "salt_pepper_amount", "gaussian_noise_sigma", "speckle_amount", "max_rotation_deg",
                          "max_translation_frac", "min_scale", "max_zoom"});
    auto& a = c.augment;
    read(p, "apply_probability", a.apply_probability, s);
    read_range(p, "sharpness_range", a.sharpness_range, s);
    read_range(p, "brightness_range", a.brightness_range, s);
    read_range(p, "gamma_range", a.gamma_range, s);
    read(p, "salt_pepper_amount", a.salt_pepper_amount, s);
    read(p, "gaussian_noise_sigma", a.gaussian_noise_sigma, s);
    read(p, "speckle_amount", a.speckle_amount, s);
    read(p, "max_rotation_deg", a.max_rotation_deg, s);
    read(p, "max_translation_frac", a.max_translation_frac, s);
    read(p, "min_scale", a.min_scale, s);
    read(p, "max_zoom", a.max_zoom, s);
  }
  if (j.contains("clips")) {
    const Json& p = j["clips"];
    const std::string s = "clips";
    reject_unknown(p, s, {"n_clips", "clip_len", "pad_short"});
    read(p, "n_clips", c.clips.n_clips, s);
    read(p, "clip_len", c.clips.clip_len, s);
    read(p, "pad_short", c.clips.pad_short, s);
  }
  if (j.contains("model")) {
    const Json& p = j["model"];
    const std::string s = "model";
    reject_unknown(p, s, {"width_multiplier", "stage_temporal_strides"});
    read(p, "width_multiplier", c.model.width_multiplier, s);
    read(p, "stage_temporal_strides", c.model.stage_temporal_strides, s);
  }
  if (j.contains("train")) {
    const Json& p = j["train"];
    const std::string s = "train";
    reject_unknown(p, s, {"epochs", "learning_rate", "weight_decay", "batch_size", "clips_per_video", "selection",
                          "eval_seed"});
    read(p, "epochs", c.train.epochs, s);
    read(p, "learning_rate", c.train.learning_rate, s);
    read(p, "weight_decay", c.train.weight_decay, s);
    read(p, "batch_size", c.train.batch_size, s);
    read(p, "clips_per_video", c.train.clips_per_video, s);
    read_enum(p, "selection", c.train.selection, s, parse_selection);
    read(p, "eval_seed", c.train.eval_seed, s);
  }
  if (j.contains("eval")) {
    const Json& p = j["eval"];
    const std::string s = "eval";
    reject_unknown(p, s, {"folds", "scheme", "validation_fraction", "mode", "views"});
    read(p, "folds", c.eval.folds, s);
    read_enum(p, "scheme", c.eval.scheme, s, parse_split_scheme);
    read(p, "validation_fraction", c.eval.validation_fraction, s);
    read_enum(p, "mode", c.eval.mode, s, parse_task_mode);
    if (p.contains("views")) {
      std::vector<std::string> names;
      read(p, "views", names, s);
      c.eval.views.clear();
      for (const auto& n : names) {
        const auto v = parse_view(n);
        if (!v) throw ConfigError("config key 'eval.views' has unknown view '" + n + "'");
        c.eval.views.push_back(*v);
      }
    }
  }
  if (j.contains("explain")) {
    const Json& p = j["explain"];
    const std::string s = "explain";
    reject_unknown(p, s, {"layer", "target_class", "pooling"});
    read(p, "layer", c.explain.layer, s);
    if (p.contains("target_class")) {
      const Json& t = p["target_class"];
      if (t.is_string() && t.get<std::string>() == "predicted") {
        c.explain.target_class.reset();
      } else if (t.is_number_integer()) {
        c.explain.target_class = t.get<int>();
      } else {
        throw ConfigError("config key 'explain.target_class' must be \"predicted\" or a class index");
      }
    }
    read_enum(p, "pooling", c.explain.pooling, s, parse_alpha_pooling);
  }
  c.resolve();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(c).dump(2) << '\n';
}

std::string config_hash(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace echopipe
