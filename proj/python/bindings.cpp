#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hargcnn/checkpoint.hpp"
#include "hargcnn/error.hpp"
#include "hargcnn/hash.hpp"
#include "hargcnn/trainer.hpp"

namespace py = pybind11;
using namespace hargcnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

DatasetSpec dataset_spec(int features, int classes, bool multilabel) {
  DatasetSpec spec{features, classes, multilabel};
  spec.validate();
  return spec;
}

ModelSpec model_spec(const std::string& kind, const DatasetSpec& d, int hidden, int kernel) {
  auto spec = default_spec(model_kind_from_string(kind), d.features, d.classes, d.multilabel);
  if (hidden > 0) {
    spec.hidden = hidden;
    spec.lstm_hidden = hidden;
  }
  if (kernel > 0) spec.kernel = kernel;
  spec.validate();
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Chronological activity graphs and graph-convolution label imputation";
  m.attr("__version__") = HARGCNN_VERSION;

  static py::handle error_type = py::exception<Error>(m, "HargcnnError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("param_count",
        [](const std::string& kind, int features, int classes, bool multilabel, int hidden, int kernel) {
          return param_count(model_spec(kind, dataset_spec(features, classes, multilabel), hidden, kernel));
        },
        py::arg("kind"), py::arg("features"), py::arg("classes"), py::arg("multilabel"), py::arg("hidden") = 0,
        py::arg("kernel") = 0);
  m.def("param_budget", &param_budget, py::arg("features"), py::arg("classes"));

  m.def("normalized_adjacency",
        [](int n, const std::string& variant) {
          return to_array(normalize_adjacency(n, adjacency_from_string(variant)).matrix);
        },
        py::arg("n"), py::arg("variant") = "as-written");

  m.def("max_hidden_nodes", &max_hidden_nodes, py::arg("n"), py::arg("max_hidden_frac") = 0.66);
  m.def("eval_hidden_count", &eval_hidden_count, py::arg("n"), py::arg("frac"));

  m.def("metrics",
        [](const Array& predictions, const Array& truths, std::vector<std::uint8_t> mask, bool multilabel,
           const std::string& averaging) {
          return to_py(compute_report(to_tensor(predictions), to_tensor(truths), mask, multilabel,
                                      averaging_from_string(averaging))
                           .to_json());
        },
        py::arg("predictions"), py::arg("truths"), py::arg("mask") = std::vector<std::uint8_t>{},
        py::arg("multilabel") = true, py::arg("averaging") = "macro");

  m.def("synth_csv",
        [](const std::string& path, int classes, int features, int steps, double self_prob, double feature_std,
           bool scripted, bool multilabel, std::uint64_t seed, std::size_t subjects) {
          SynthOptions o;
          o.classes = classes;
          o.features = features;
          o.steps = steps;
          o.self_prob = self_prob;
          o.feature_std = feature_std;
          o.scripted = scripted;
          o.multilabel = multilabel;
          o.seed = seed;
          const auto cfg = make_synth_config(o);
          write_records(path, synth_generate_subjects(cfg, subjects), cfg.dataset_spec());
          return to_py(cfg.dataset_spec().to_json());
        },
        py::arg("path"), py::arg("classes") = 12, py::arg("features") = 52, py::arg("steps") = 3000,
        py::arg("self_prob") = 0.8, py::arg("feature_std") = 1.0, py::arg("scripted") = false,
        py::arg("multilabel") = false, py::arg("seed") = 0, py::arg("subjects") = 1);

  m.def("gradcheck",
        [](const std::string& kind, int features, int classes, bool multilabel, std::size_t nodes, std::uint64_t seed) {
          const auto spec = default_spec(model_kind_from_string(kind), features, classes, multilabel);
          return gradcheck_model(spec, nodes, seed).max_rel_error;
        },
        py::arg("kind"), py::arg("features"), py::arg("classes"), py::arg("multilabel"), py::arg("nodes") = 3,
        py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& kind, int features, int classes, bool multilabel, std::uint64_t seed,
                       int hidden, int kernel) {
             return Model::create(model_spec(kind, dataset_spec(features, classes, multilabel), hidden, kernel), seed);
           }),
           py::arg("kind"), py::arg("features"), py::arg("classes"), py::arg("multilabel"), py::arg("seed") = 0,
           py::arg("hidden") = 0, py::arg("kernel") = 0)
      .def_static("load", [](const std::string& path) { return Checkpoint::load(path).restore(); }, py::arg("path"))
      .def("save", [](const Model& model, const std::string& path,
                      std::uint64_t seed) { Checkpoint::capture(model, seed).save(path); },
           py::arg("path"), py::arg("seed") = 0)
      .def_property_readonly("kind", [](const Model& model) { return to_string(model.spec().kind); })
      .def_property_readonly("param_count", [](const Model& model) { return param_count(model.spec()); })
      .def("predict", [](const Model& model, const Array& input) { return to_array(model.predict(to_tensor(input)).scores); },
           py::arg("input"));

  m.def("train_eval",
        [](const std::string& csv, int features, int classes, bool multilabel, const std::string& kind, int epochs,
           std::uint64_t seed, int nodes, double missing, std::uint64_t eval_seed, bool zero_all_labels) {
          const auto spec = dataset_spec(features, classes, multilabel);
          const auto streams = load_records(csv, spec);
          PipelineConfig pc;
          pc.nodes = nodes;
          const auto data = prepare_dataset(streams, spec, pc);
          auto model = Model::create(model_spec(kind, spec, 0, 0), seed);
          TrainConfig tc;
          tc.epochs = epochs;
          tc.seed = seed;
          tc.zero_all_labels = zero_all_labels;
          auto result = train(model, data.train, tc);
          EvalOptions eo;
          eo.zero_all_labels = zero_all_labels;
          const auto masks = make_eval_masks(data.test, missing, eval_seed);
          auto report = evaluate(model, data.test, masks, eo).to_json();
          report["history"] = result.history.to_json();
          report["train_graphs"] = data.train.size();
          report["test_graphs"] = data.test.size();
          report["mask_hash"] = hex64(masks.hash());
          return py::make_tuple(std::move(model), to_py(report));
        },
        py::arg("csv"), py::arg("features"), py::arg("classes"), py::arg("multilabel"), py::arg("kind") = "gcnn",
        py::arg("epochs") = 30, py::arg("seed") = 0, py::arg("nodes") = 3, py::arg("missing") = 0.33,
        py::arg("eval_seed") = 0, py::arg("zero_all_labels") = false);

  m.def("compare",
        [](const std::string& csv, int features, int classes, bool multilabel, std::vector<int> nodes,
           std::vector<double> missing, int epochs, int repeats, std::uint64_t seed) {
          const auto spec = dataset_spec(features, classes, multilabel);
          CompareConfig cfg;
          cfg.nodes = std::move(nodes);
          cfg.train.epochs = epochs;
          cfg.train.repeats = repeats;
          cfg.train.seed = seed;
          cfg.train.eval_missing_fracs = std::move(missing);
          const auto table = compare(load_records(csv, spec), spec, cfg);
          return py::make_tuple(to_py(table.to_json()), table.text());
        },
        py::arg("csv"), py::arg("features"), py::arg("classes"), py::arg("multilabel"),
        py::arg("nodes") = std::vector<int>{3}, py::arg("missing") = std::vector<double>{0.33, 0.66},
        py::arg("epochs") = 30, py::arg("repeats") = 3, py::arg("seed") = 0);
}
