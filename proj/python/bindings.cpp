#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "clothsense/classifier.hpp"
#include "clothsense/clothsim.hpp"
#include "clothsense/dataset.hpp"
#include "clothsense/error.hpp"
#include "clothsense/formats.hpp"
#include "clothsense/labels.hpp"
#include "clothsense/tactile.hpp"

namespace py = pybind11;
using namespace clothsense;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const RasterD& r) {
  Array out({r.height(), r.width()});
  std::copy(r.values().begin(), r.values().end(), out.mutable_data());
  return out;
}

RasterD from_numpy(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  RasterD r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), r.values().begin());
  return r;
}

Array vector_to_numpy(const FeatureVector& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FeatureVector vector_from_numpy(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return FeatureVector(a.data(), a.data() + a.size());
}

py::dict labels_to_dict(const PropertyLabels& l) {
  py::dict d;
  for (std::size_t k = 0; k < kNumProperties; ++k) d[py::str(std::string(kPropertyTable[k].name))] = l.value[k];
  return d;
}

TactileSequence sequence_from(const std::vector<Array>& frames) {
  TactileSequence seq;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    seq.frames.push_back({from_numpy(frames[i]), 0.0, static_cast<int>(i)});
  }
  return seq;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tactile cloth property sensing: formats, features and trained models.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<TrainingError>(m, "TrainingError", base);
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base);

  m.def("properties", [] {
    py::list out;
    for (const PropertyInfo& p : kPropertyTable) out.append(py::make_tuple(std::string(p.name), p.classes, p.chance));
    return out;
  }, "(name, classes, chance) for every property head, in head order.");

  py::class_<ClothItem>(m, "ClothItem")
      .def_readonly("item_id", &ClothItem::item_id)
      .def_readonly("item_seed", &ClothItem::item_seed)
      .def_readonly("layout_seed", &ClothItem::layout_seed)
      .def_property_readonly("labels", [](const ClothItem& it) { return labels_to_dict(it.labels); });

  m.def("generate_corpus", &generate_corpus, py::arg("n_items"), py::arg("seed"));

  m.def("simulate_grip", [](const ClothItem& item, int iteration, std::uint64_t seed) {
    CollectConfig config;
    config.seed = seed;
    const Collected c = collect_grip(item, iteration, config);
    py::list frames;
    for (const TactileFrame& f : c.sequence.frames) frames.append(to_numpy(f.deformation));
    py::dict out;
    out["frames"] = frames;
    out["crop"] = to_numpy(c.crop);
    out["valid"] = c.record.valid();
    return out;
  }, py::arg("item"), py::arg("iteration"), py::arg("seed"),
     "One simulated grip: deformation frames (mm), depth crop (m) and validity.");

  m.def("read_hmap", [](const std::filesystem::path& p) {
    const HeightRaster r = read_hmap(p);
    return py::make_tuple(to_numpy(r.values), r.meters_per_pixel, static_cast<int>(r.tag));
  }, py::arg("path"), "Returns (values, meters_per_pixel, tag).");
  m.def("write_hmap", [](const std::filesystem::path& p, const Array& values, double mpp, int tag) {
    if (tag < 0 || tag > 2) throw FormatError("frame tag must be 0, 1 or 2");
    write_hmap(p, {from_numpy(values), mpp, static_cast<FrameTag>(tag)});
  }, py::arg("path"), py::arg("values"), py::arg("meters_per_pixel"), py::arg("tag") = 1);

  m.def("read_tseq", [](const std::filesystem::path& p) {
    py::list out;
    for (const TactileFrame& f : read_tseq(p)) out.append(py::make_tuple(to_numpy(f.deformation), f.force_proxy));
    return out;
  }, py::arg("path"), "Returns a list of (deformation, force_proxy).");

  m.def("detect_contact", [](const std::vector<Array>& frames) { return detect_contact(sequence_from(frames)); },
        py::arg("frames"));
  m.def("extract_features", [](const Array& frame) { return vector_to_numpy(extract_features(from_numpy(frame))); },
        py::arg("frame"));
  m.def("sequence_features", [](const std::vector<Array>& frames, int n) {
    return vector_to_numpy(sequence_features(sequence_from(frames), n));
  }, py::arg("frames"), py::arg("n") = 9);
  m.def("feature_dims", [] { return FilterBankConfig{}.dims(); });
  m.def("filter_bank_hash", [] { return FilterBankConfig{}.hash(); });

  py::class_<MultiHeadModel>(m, "PropertyModel")
      .def_static("load", [](const std::filesystem::path& p) { return MultiHeadModel::load(p, FilterBankConfig{}.hash()); },
                  py::arg("path"))
      .def_property_readonly("input_dims", &MultiHeadModel::input_dims)
      .def_property_readonly("hidden", &MultiHeadModel::hidden)
      .def("predict", [](const MultiHeadModel& model, const Array& features) {
        const PropertyPrediction pred = model.predict(vector_from_numpy(features));
        py::dict out;
        for (std::size_t k = 0; k < kNumProperties; ++k) {
          out[py::str(std::string(kPropertyTable[k].name))] = vector_to_numpy(pred.probabilities[k]);
        }
        return out;
      }, py::arg("features"), "Class distribution per property head.");

  py::class_<GripModel>(m, "GripModel")
      .def_static("load", &GripModel::load, py::arg("path"))
      .def("score", [](const GripModel& model, const Array& crop) { return model.score(from_numpy(crop)); },
           py::arg("crop"));
}
