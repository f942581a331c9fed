#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "echopipe/aggregate.hpp"
#include "echopipe/checkpoint.hpp"
#include "echopipe/error.hpp"
#include "echopipe/evaluate.hpp"
#include "echopipe/explain.hpp"
#include "echopipe/metrics.hpp"
#include "echopipe/phantom.hpp"
#include "echopipe/preprocess.hpp"
#include "echopipe/selfcheck.hpp"
#include "echopipe/train.hpp"
#include "echopipe/video.hpp"

namespace py = pybind11;
using namespace echopipe;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor<float> to_tensor(const FloatArray& a, std::size_t rank) {
  if (static_cast<std::size_t>(a.ndim()) != rank) {
    throw py::value_error("expected a " + std::to_string(rank) + "-d array, got " + std::to_string(a.ndim()) + "-d");
  }
  Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<std::size_t>(a.shape(i)));
  return Tensor<float>(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

ViewTag view_arg(const std::string& text) {
  const auto v = parse_view(text);
  if (!v) throw py::value_error("unknown view '" + text + "'");
  return *v;
}

py::dict view_dict(const ViewPrediction& v) {
  py::dict d;
  d["view"] = std::string(to_string(v.view));
  d["label"] = v.label;
  d["confidence"] = v.confidence;
  d["vote_count"] = v.vote_count;
  d["probs"] = v.representative_probs;
  return d;
}

// Thin holder so Python owns one model and its config.
struct PyModel {
  std::unique_ptr<Model<float>> model;
  CheckpointMeta meta;

  std::vector<double> predict(const FloatArray& clip) {
    const auto& c = model->config();
    const Tensor<float> x = to_tensor(clip, 3).reshaped({1, 1, c.clip_len, c.input_height, c.input_width});
    model->set_training(false);
    const auto p = softmax_rows(model->forward(x));
    return std::vector<double>(p.data(), p.data() + p.size());
  }

  py::tuple grad_cam(const FloatArray& clip, const std::string& layer, std::optional<int> target_class) {
    GradCamConfig cfg;
    cfg.layer = layer;
    cfg.target_class = target_class;
    const auto s = grad_cam_3d(*model, to_tensor(clip, 3), cfg);
    return py::make_tuple(to_array(s.values), s.target_class);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Echocardiography video classification pipeline (C++ core)";
  py::register_exception<Error>(m, "EchopipeError", PyExc_RuntimeError);

  m.def(
      "read_video",
      [](const std::filesystem::path& path) {
        const auto v = read_video(path);
        return py::make_tuple(to_array(v.frames), v.fps);
      },
      py::arg("path"), "Reads an ECHO1 file; returns (frames [T, H, W] float32 in [0, 1], fps).");
  m.def(
      "write_video",
      [](const FloatArray& frames, float fps, const std::filesystem::path& path) {
        write_frames(to_tensor(frames, 3), fps, path);
      },
      py::arg("frames"), py::arg("fps"), py::arg("path"), "Writes 8-bit grayscale ECHO1.");

  m.def(
      "preprocess",
      [](const FloatArray& frames, std::size_t size, std::size_t bins, bool normalize) {
        PreprocessConfig cfg;
        cfg.target_height = cfg.target_width = size;
        cfg.equalization_bins = bins;
        cfg.normalization = normalize ? NormalizationMode::PerVideo : NormalizationMode::None;
        EchoVideo v;
        v.frames = to_tensor(frames, 3);
        return to_array(preprocess_video(v, cfg).frames);
      },
      py::arg("frames"), py::arg("size") = 224, py::arg("bins") = 256, py::arg("normalize") = true);

  m.def(
      "view_vote",
      [](const std::vector<std::vector<double>>& probs, std::optional<std::vector<int>> labels) {
        return view_dict(labels ? view_vote(*labels, probs) : view_vote(probs));
      },
      py::arg("probs"), py::arg("labels") = std::nullopt);
  m.def(
      "patient_vote",
      [](const std::vector<py::dict>& views) {
        std::vector<ViewPrediction> preds;
        for (const auto& d : views) {
          ViewPrediction p;
          p.view = view_arg(d["view"].cast<std::string>());
          p.label = d["label"].cast<int>();
          p.confidence = d["confidence"].cast<double>();
          if (d.contains("probs")) p.representative_probs = d["probs"].cast<std::vector<double>>();
          preds.push_back(p);
        }
        const auto r = patient_vote(preds);
        py::dict out;
        out["label"] = r.label;
        out["tie_broken"] = r.tie_broken;
        out["winning_view"] = std::string(to_string(r.winning_view));
        out["confidence"] = r.confidence;
        return out;
      },
      py::arg("views"), "Each view is a dict with keys view, label, confidence and optionally probs.");

  m.def(
      "compute_metrics",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, const std::vector<std::vector<double>>& probs,
         int num_classes) {
        const auto f = compute_metrics(y_true, y_pred, probs, num_classes);
        py::dict d;
        d["auroc_ovo"] = f.auroc_ovo;
        d["f1_weighted"] = f.f1_weighted;
        d["precision_weighted"] = f.precision_weighted;
        d["recall_weighted"] = f.recall_weighted;
        d["balanced_accuracy"] = f.balanced_accuracy;
        d["warnings"] = f.warnings;
        return d;
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("probs"), py::arg("num_classes"));

  m.def(
      "stratified_folds",
      [](const std::map<std::string, std::string>& labels, std::size_t k, std::uint64_t seed, const std::string& scheme,
         const std::string& task) {
        std::map<std::string, SeverityLabel> parsed;
        for (const auto& [id, text] : labels) {
          const auto l = parse_severity(text);
          if (!l) throw py::value_error("unknown label '" + text + "'");
          parsed[id] = *l;
        }
        const auto sch = parse_split_scheme(scheme);
        if (!sch) throw py::value_error("unknown scheme '" + scheme + "'");
        const auto mode = parse_task_mode(task);
        if (!mode) throw py::value_error("unknown task '" + task + "'");
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
        for (const auto& f : stratified_patient_kfold(parsed, k, seed, *mode, *sch)) {
          out.emplace_back(f.train_patient_ids, f.validation_patient_ids);
        }
        return out;
      },
      py::arg("labels"), py::arg("k"), py::arg("seed"), py::arg("scheme") = "shuffle_split",
      py::arg("task") = "severity", "Returns [(train_ids, validation_ids), ...].");

  m.def(
      "generate_phantom",
      [](const std::filesystem::path& out_dir, std::size_t patients, std::size_t frames, std::size_t size,
         std::uint64_t seed) {
        PhantomConfig pc;
        pc.n_patients = patients;
        pc.frames_per_video = frames;
        pc.frame_height = pc.frame_width = size;
        pc.seed = seed;
        generate_phantom_dataset(pc, out_dir);
        return out_dir / "manifest.tsv";
      },
      py::arg("out_dir"), py::arg("patients") = 60, py::arg("frames") = 120, py::arg("size") = 128,
      py::arg("seed") = 1, "Writes a phantom dataset; returns the manifest path.");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("num_classes", [](const PyModel& p) { return p.model->config().num_classes; })
      .def_property_readonly("input_shape",
                             [](const PyModel& p) {
                               const auto& c = p.model->config();
                               return py::make_tuple(c.clip_len, c.input_height, c.input_width);
                             })
      .def_property_readonly("view", [](const PyModel& p) { return p.meta.view; })
      .def("predict", &PyModel::predict, py::arg("clip"), "Softmax probabilities of one [k, H, W] clip.")
      .def("grad_cam", &PyModel::grad_cam, py::arg("clip"), py::arg("layer") = "last_conv",
           py::arg("target_class") = std::nullopt, "Returns (saliency [k, H, W], explained class).");

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        auto loaded = load_checkpoint(path);
        return PyModel{std::move(loaded.model), loaded.meta};
      },
      py::arg("path"));

  m.def("selfcheck", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& r : run_selfcheck()) out.emplace_back(r.name, r.pass, r.detail);
    return out;
  });
}
