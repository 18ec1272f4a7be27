#include "cdil/errors.hpp"
#include "cdil/io.hpp"
#include "cdil/learners.hpp"
#include "cdil/metrics.hpp"
#include "cdil/pipeline.hpp"
#include "cdil/rch.hpp"
#include "cdil/splitters.hpp"
#include "cdil/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace cdil;
using nlohmann::json;

namespace {

SynthSpec spec_of(const std::string& text) { return synth_spec_from_json(json::parse(text)); }

/// Learner settings from a learner JSON object, reusing the config parser.
ExperimentConfig learner_settings(const std::string& learner_json) {
  json j = {{"learner", json::parse(learner_json)}, {"sequence", {{"synthetic", json::object()}}}};
  return config_from_json(j);
}

py::dict session_to_dict(const SessionDataset& s, const LabelRegistry& registry) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd x(n, s.feature_dim());
  py::list ids, subjects, labels;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& sample = s.samples()[static_cast<std::size_t>(i)];
    x.row(i) = sample.features.transpose();
    ids.append(sample.sample_id);
    subjects.append(sample.subject_id);
    labels.append(registry.name_of(sample.label));
  }
  py::list label_set;
  for (ClassIndex c : s.label_set()) label_set.append(registry.name_of(c));
  py::dict d;
  d["index"] = s.session_index();
  d["name"] = s.name();
  d["sample_ids"] = ids;
  d["subject_ids"] = subjects;
  d["labels"] = labels;
  d["label_set"] = label_set;
  d["features"] = x;
  return d;
}

py::list sequence_to_list(const SessionSequence& seq) {
  py::list out;
  for (const auto& s : seq.sessions()) out.append(session_to_dict(s, seq.registry()));
  return out;
}

/// Python-facing learner over integer class indices and row-major feature matrices.
class PyLearner {
 public:
  PyLearner(const std::string& learner_json, Eigen::Index input_dim, std::uint64_t seed) {
    const auto cfg = learner_settings(learner_json);
    learner_ = make_learner(cfg.learner, input_dim, cfg.learner_config, seed);
  }

  void update(const Eigen::MatrixXd& x, const std::vector<ClassIndex>& y, const ClassSet& session_labels,
              const ClassSet& cumulative_labels) {
    if (x.rows() != static_cast<Eigen::Index>(y.size()))
      throw ShapeError("features and labels disagree in length");
    std::vector<Sample> train;
    train.reserve(y.size());
    const auto t = learner_->sessions_seen() + 1;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      train.push_back({"s" + std::to_string(t) + "-" + std::to_string(i), "p", y[static_cast<std::size_t>(i)],
                       x.row(i).transpose()});
    learner_->update(train, session_labels, cumulative_labels);
  }

  std::vector<ClassIndex> predict(const Eigen::MatrixXd& x) const {
    std::vector<ClassIndex> out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(learner_->predict(x.row(i).transpose()));
    return out;
  }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(learner_->known_classes().size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = learner_->predict_proba(x.row(i).transpose()).transpose();
    return out;
  }

  const RemappableHead& head() const { return learner_->head(); }
  std::string kind() const { return std::string(to_string(learner_->kind())); }

 private:
  std::unique_ptr<Learner> learner_;
};

}  // namespace

PYBIND11_MODULE(_cdil, m) {
  m.doc() = "Composite class-domain incremental learning benchmark core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);

  m.def("average_accuracy", [](const std::vector<double>& a) { return average_accuracy(a); });
  m.def("final_accuracy", [](const std::vector<double>& a) { return final_accuracy(a); });

  m.def("default_synth_spec", [] { return synth_spec_to_json(SynthSpec{}).dump(); });
  m.def("generate_stream", [](const std::string& spec) { return sequence_to_list(generate_stream(spec_of(spec))); },
        py::arg("spec_json"));
  m.def("write_stream",
        [](const std::string& spec, const std::string& dir) {
          return write_stream(generate_stream(spec_of(spec)), dir, "synthetic").string();
        },
        py::arg("spec_json"), py::arg("directory"));
  m.def("load_manifest",
        [](const std::string& path) { return sequence_to_list(load_sequence(load_manifest(path))); },
        py::arg("path"));

  m.def("partition",
        [](const std::string& config_json, const std::string& base_dir) {
          const auto cfg = config_from_json(json::parse(config_json), base_dir);
          const auto seq = load_sequence(cfg);
          py::list out;
          for (const auto& a : partition_sequence(seq, cfg.protocol, cfg.k, cfg.seed)) out.append(a.fold_of);
          return out;
        },
        py::arg("config_json"), py::arg("base_dir") = "");

  m.def("run_experiment",
        [](const std::string& config_json, const std::string& base_dir) {
          const auto cfg = config_from_json(json::parse(config_json), base_dir);
          ExperimentReport report;
          {
            py::gil_scoped_release release;
            report = run_experiment(cfg);
          }
          return report_to_json(report).dump();
        },
        py::arg("config_json"), py::arg("base_dir") = "");
  m.def("format_report",
        [](const std::string& report_json) {
          const auto r = report_from_json(nlohmann::ordered_json::parse(report_json));
          return format_report_table(r, method_label(r.config));
        },
        py::arg("report_json"));

  m.def("ridge_solve", [](const Eigen::MatrixXd& g, const Eigen::MatrixXd& c, double lambda) {
    return ridge_solve(g, c, lambda);
  });

  py::class_<RemappableHead>(m, "RemappableHead")
      .def(py::init<Eigen::Index>(), py::arg("feature_dim"))
      .def("add_session", [](RemappableHead& h, const ClassSet& labels) { return h.add_session(labels); })
      .def("set_row",
           [](RemappableHead& h, SessionIndex t, ClassIndex c, const Eigen::VectorXd& w) { h.set_row(t, c, w); })
      .def("row", [](const RemappableHead& h, SessionIndex t, ClassIndex c) { return Eigen::VectorXd(h.row(t, c)); })
      .def("remap", [](const RemappableHead& h) { return Eigen::MatrixXd(h.remap()); })
      .def("class_order", &RemappableHead::class_order)
      .def("predict_proba", [](const RemappableHead& h, const Eigen::VectorXd& x) { return h.predict_proba(x); })
      .def("predict", [](const RemappableHead& h, const Eigen::VectorXd& x) { return h.predict(x); })
      .def_property_readonly("session_count", &RemappableHead::session_count)
      .def_property_readonly("feature_dim", &RemappableHead::feature_dim);

  py::class_<PyLearner>(m, "Learner")
      .def(py::init<const std::string&, Eigen::Index, std::uint64_t>(), py::arg("learner_json"),
           py::arg("input_dim"), py::arg("seed"))
      .def("update", &PyLearner::update, py::arg("features"), py::arg("labels"), py::arg("session_labels"),
           py::arg("cumulative_labels"))
      .def("predict", &PyLearner::predict)
      .def("predict_proba", &PyLearner::predict_proba)
      .def_property_readonly("head", &PyLearner::head, py::return_value_policy::reference_internal)
      .def_property_readonly("kind", &PyLearner::kind);
}
