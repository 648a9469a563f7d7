#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fedguard/cnn.hpp"
#include "fedguard/config.hpp"
#include "fedguard/dataset.hpp"
#include "fedguard/errors.hpp"
#include "fedguard/federation.hpp"
#include "fedguard/metrics.hpp"
#include "fedguard/signal_model.hpp"
#include "fedguard/wire.hpp"

namespace py = pybind11;
using namespace fedguard;

namespace {

py::array_t<float> image_array(const ScatterImage& im) {
  py::array_t<float> out({im.height, im.width});
  std::copy(im.pixels.begin(), im.pixels.end(), out.mutable_data());
  return out;
}

py::bytes to_py(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

IQFrame frame_from(const std::vector<Complex>& samples) { return IQFrame{samples, 0.0, 0.0}; }

}  // namespace

PYBIND11_MODULE(_fedguard, m) {
  m.doc() = "Injection-attack detection with scatter-image CNNs and federated averaging";
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<InvalidDictionary>(m, "InvalidDictionary", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<CorruptDataset>(m, "CorruptDataset", base.ptr());
  py::register_exception<CorruptWeights>(m, "CorruptWeights", base.ptr());
  auto proto = py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<CorruptionError>(m, "CorruptionError", proto.ptr());
  py::register_exception<TruncationError>(m, "TruncationError", proto.ptr());
  py::register_exception<AggregationError>(m, "AggregationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<FrameLabel>(m, "FrameLabel")
      .value("legitimate", FrameLabel::legitimate)
      .value("adversary", FrameLabel::adversary);

  py::class_<EnergyDictionary>(m, "EnergyDictionary")
      .def(py::init<std::vector<double>>())
      .def_static("testbed", &EnergyDictionary::testbed)
      .def_property_readonly("levels", [](const EnergyDictionary& d) {
        return std::vector<double>(d.levels().begin(), d.levels().end());
      })
      .def("mean", &EnergyDictionary::mean)
      .def("__len__", &EnergyDictionary::size);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init<>())
      .def_readwrite("n", &SimulationConfig::n)
      .def_readwrite("dictionary", &SimulationConfig::dictionary)
      .def_readwrite("snr_db", &SimulationConfig::snr_db)
      .def_readwrite("seed", &SimulationConfig::seed);

  py::class_<RasterConfig>(m, "RasterConfig")
      .def(py::init<>())
      .def_readwrite("height", &RasterConfig::height)
      .def_readwrite("width", &RasterConfig::width)
      .def_readwrite("axis_range", &RasterConfig::axis_range);

  m.def("derive_level_indices", [](std::uint64_t key, std::uint64_t frame, std::size_t n, std::size_t levels) {
        return derive_level_indices(SecretKey::from_u64(key, frame), n, levels);
      }, py::arg("key"), py::arg("frame_index"), py::arg("n"), py::arg("levels"));
  m.def("derive_energy_sequence", [](std::uint64_t key, std::uint64_t frame, std::size_t n, const EnergyDictionary& d) {
        return derive_energy_sequence(SecretKey::from_u64(key, frame), n, d).energies;
      }, py::arg("key"), py::arg("frame_index"), py::arg("n"), py::arg("dictionary"));
  m.def("noise_power_for_snr", &noise_power_for_snr, py::arg("dictionary"), py::arg("snr_db"));
  m.def("key_match_probability", &key_match_probability, py::arg("l"), py::arg("n"));
  m.def("synthesize_frame", [](FrameLabel label, std::uint64_t key, std::uint64_t frame, const SimulationConfig& cfg,
                               std::uint64_t seed) {
        Rng rng(seed);
        return synthesize_frame(label, SecretKey::from_u64(key, frame), cfg, rng).frame.samples;
      }, py::arg("label"), py::arg("key"), py::arg("frame_index"), py::arg("config"), py::arg("seed"));
  m.def("key_decode", [](const std::vector<Complex>& y, const std::vector<double>& s) {
        return key_decode(frame_from(y), {s, SequenceOrigin::keyed}).samples;
      });
  m.def("energy_detector_baseline", &energy_detector_baseline, py::arg("count"), py::arg("attack_active"),
        py::arg("config"), py::arg("seed"));

  py::class_<ScatterImage>(m, "ScatterImage")
      .def_property_readonly("pixels", &image_array)
      .def_readonly("label", &ScatterImage::label)
      .def_readonly("source_id", &ScatterImage::source_id);

  m.def("rasterize", [](const std::vector<Complex>& samples, const RasterConfig& cfg) {
        return image_array(rasterize(frame_from(samples), cfg));
      }, py::arg("samples"), py::arg("config") = RasterConfig{});

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def_readonly("simulation", &LabeledDataset::simulation)
      .def_readonly("raster", &LabeledDataset::raster)
      .def_readonly("images", &LabeledDataset::images)
      .def("__len__", &LabeledDataset::size)
      .def("count", &LabeledDataset::count)
      .def("labels", [](const LabeledDataset& ds) {
        py::array_t<std::uint8_t> out(std::vector<py::ssize_t>{py::ssize_t(ds.size())});
        for (std::size_t i = 0; i < ds.size(); ++i) out.mutable_data()[i] = std::uint8_t(ds.images[i].label);
        return out;
      })
      .def("pixels", [](const LabeledDataset& ds) {
        py::array_t<float> out({ds.size(), ds.raster.height, ds.raster.width});
        float* dst = out.mutable_data();
        for (const auto& im : ds.images) dst = std::copy(im.pixels.begin(), im.pixels.end(), dst);
        return out;
      })
      .def("__eq__", [](const LabeledDataset& a, const LabeledDataset& b) { return a == b; });

  m.def("generate_dataset", &generate_dataset, py::arg("simulation"), py::arg("raster"), py::arg("per_class"),
        py::arg("seed"));
  m.def("save_dataset", &save_dataset);
  m.def("load_dataset", &load_dataset);
  m.def("encode_dataset", [](const LabeledDataset& ds) { return to_py(encode_dataset(ds)); });
  m.def("decode_dataset", [](const py::bytes& b) { return decode_dataset(from_py(b)); });

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("height", &ModelSpec::height)
      .def_readwrite("width", &ModelSpec::width)
      .def_readwrite("filters", &ModelSpec::filters)
      .def_static("desk", &ModelSpec::desk)
      .def_static("literal", &ModelSpec::literal);

  py::class_<ModelWeights>(m, "ModelWeights")
      .def("param_count", &ModelWeights::param_count)
      .def_property_readonly("shapes", [](const ModelWeights& w) {
        std::vector<std::vector<std::uint32_t>> out;
        for (const auto& t : w.tensors) out.push_back(t.shape);
        return out;
      })
      .def("flat", [](const ModelWeights& w) {
        std::vector<double> out;
        for (const auto& t : w.tensors) out.insert(out.end(), t.values.begin(), t.values.end());
        return out;
      })
      .def("__eq__", [](const ModelWeights& a, const ModelWeights& b) { return a == b; });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("shuffle_seed", &TrainConfig::shuffle_seed);

  py::class_<EpochStats>(m, "EpochStats")
      .def_readonly("loss", &EpochStats::loss)
      .def_readonly("accuracy", &EpochStats::accuracy);

  m.def("param_count", py::overload_cast<const ModelSpec&>(&param_count));
  m.def("build_model", &build_model, py::arg("spec"), py::arg("seed"));
  m.def("forward", [](const ModelWeights& w, py::array_t<float, py::array::c_style | py::array::forcecast> image) {
        if (image.ndim() != 2) throw DimensionError("image must be 2-D");
        const auto p = forward(w, std::span<const float>(image.data(), std::size_t(image.size())),
                               std::size_t(image.shape(0)), std::size_t(image.shape(1)));
        return std::make_pair(p[0], p[1]);
      });
  m.def("train", [](const ModelWeights& w, const LabeledDataset& ds, const TrainConfig& cfg) {
        TrainResult r = train(w, {}, ds.images, cfg);
        return std::make_pair(std::move(r.weights), std::move(r.history));
      }, py::arg("weights"), py::arg("dataset"), py::arg("config"));
  m.def("serialize_weights", [](const ModelWeights& w) { return to_py(serialize_weights(w)); });
  m.def("deserialize_weights", [](const py::bytes& b) { return deserialize_weights(from_py(b)); });

  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init<>())
      .def(py::init([](std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
             return ConfusionMatrix{tp, tn, fp, fn};
           }), py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"))
      .def_readwrite("tp", &ConfusionMatrix::tp)
      .def_readwrite("tn", &ConfusionMatrix::tn)
      .def_readwrite("fp", &ConfusionMatrix::fp)
      .def_readwrite("fn", &ConfusionMatrix::fn);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("sensitivity", &MetricsReport::sensitivity)
      .def_readonly("specificity", &MetricsReport::specificity)
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("accuracy", &MetricsReport::accuracy)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("sensitivity_undefined", &MetricsReport::sensitivity_undefined)
      .def_readonly("precision_undefined", &MetricsReport::precision_undefined);

  m.def("evaluate", [](const ModelWeights& w, const LabeledDataset& ds) { return evaluate(w, ds.images); });
  m.def("derive_metrics", &derive_metrics);

  m.def("fedavg", [](const std::vector<std::pair<std::uint64_t, ModelWeights>>& updates) {
        std::vector<ClientUpdate> list;
        for (const auto& [n, w] : updates) list.push_back({n, w});
        return fedavg(list);
      });

  m.def("encode_message", [](std::uint8_t type, std::uint32_t round, std::uint16_t client, const py::bytes& payload) {
        return to_py(encode_message({MessageType(type), round, client, from_py(payload)}));
      }, py::arg("type"), py::arg("round"), py::arg("client_id"), py::arg("payload"));
  m.def("decode_message", [](const py::bytes& b) {
        const WireMessage msg = decode_message(from_py(b));
        return py::make_tuple(std::uint8_t(msg.type), msg.round, msg.client_id, to_py(msg.payload));
      });

  m.def("parse_config", [](const std::string& text) {
        const ExperimentConfig cfg = parse_config(text);
        py::dict d;
        d["n"] = cfg.simulation.n;
        d["dictionary"] = std::vector<double>(cfg.simulation.dictionary.levels().begin(),
                                              cfg.simulation.dictionary.levels().end());
        d["snr_db"] = cfg.simulation.snr_db;
        d["lr"] = cfg.train.learning_rate;
        d["batch"] = cfg.train.batch_size;
        d["rounds"] = cfg.federation.rounds;
        d["clients"] = cfg.federation.clients;
        d["preset"] = cfg.preset;
        return d;
      });
}
