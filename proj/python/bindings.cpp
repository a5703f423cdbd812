#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "segfuse/components.hpp"
#include "segfuse/ensemble.hpp"
#include "segfuse/error.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/nifti_io.hpp"
#include "segfuse/postprocess.hpp"
#include "segfuse/splits.hpp"

namespace py = pybind11;
using namespace segfuse;

namespace {

// Arrays are (nx, ny, nz), Fortran order.
template <typename T>
using FArray = py::array_t<T, py::array::f_style | py::array::forcecast>;

Dims dims_of(const py::array& a) {
  if (a.ndim() != 3) throw ValidationError("expected a 3D array, got " + std::to_string(a.ndim()) + "D");
  return {a.shape(0), a.shape(1), a.shape(2)};
}

template <typename T>
std::vector<T> values_of(const FArray<T>& a) {
  return {a.data(), a.data() + a.size()};
}

template <typename T>
FArray<T> to_array(const Volume<T>& v) {
  const auto& d = v.grid().dims();
  FArray<T> out({d[0], d[1], d[2]});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

ProbabilityMap prob_map(const FArray<float>& a, const Spacing& spacing) {
  return ProbabilityMap(Grid(dims_of(a), spacing), values_of(a));
}

BinaryMask mask(const FArray<std::uint8_t>& a, const Spacing& spacing) {
  return BinaryMask(Grid(dims_of(a), spacing), values_of(a));
}

HausdorffVariant variant_from(const std::string& s) {
  if (s == "pooled") return HausdorffVariant::kPooled;
  if (s == "max_of_directed") return HausdorffVariant::kMaxOfDirected;
  throw ValidationError("hd95_variant must be 'pooled' or 'max_of_directed', got '" + s + "'");
}

VolumeUnit unit_from(const std::string& s) {
  if (s == "voxels") return VolumeUnit::kVoxels;
  if (s == "mm3") return VolumeUnit::kCubicMillimetres;
  throw ValidationError("vd_units must be 'voxels' or 'mm3', got '" + s + "'");
}

py::dict report_dict(const PostprocessReport& r) {
  py::list removed;
  for (const auto& c : r.removed_components) {
    py::dict d;
    d["id"] = c.id;
    d["size"] = c.size;
    d["peak"] = c.peak;
    removed.append(d);
  }
  py::dict d;
  d["branch"] = to_string(r.branch);
  d["components_before"] = r.components_before;
  d["components_after"] = r.components_after;
  d["removed_components"] = removed;
  d["foreground_before"] = r.foreground_before;
  d["foreground_after"] = r.foreground_after;
  return d;
}

py::dict metrics_dict(const MetricReport& m) {
  py::dict d;
  d["dice"] = m.dice;
  d["lesion_f1"] = m.lesion_f1;
  d["slc"] = m.slc;
  d["vd"] = m.vd;
  d["hd95"] = m.hd95 ? py::cast(*m.hd95) : py::none();
  d["pred_components"] = m.pred_components;
  d["gt_components"] = m.gt_components;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ensemble fusion, post-processing and evaluation of 3D lesion segmentations";

  py::register_exception<nifti::NiftiError>(m, "NiftiError", PyExc_ValueError);
  py::register_exception<GridMismatchError>(m, "GridMismatchError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  const Spacing unit{1.0, 1.0, 1.0};

  m.def(
      "threshold",
      [](const FArray<float>& p, double t) { return to_array(threshold(prob_map(p, {1, 1, 1}), t)); },
      py::arg("probabilities"), py::arg("t"), "Binary mask of voxels with probability >= t.");

  m.def(
      "label_components",
      [](const FArray<std::uint8_t>& a, int connectivity) {
        const auto cs = label_components(mask(a, {1, 1, 1}), connectivity_from_int(connectivity));
        return py::make_tuple(to_array(cs.labels), cs.count);
      },
      py::arg("mask"), py::arg("connectivity") = 26,
      "Returns (labels, count); labels follow first appearance in x-fastest scan order.");

  m.def(
      "average_maps",
      [](const std::vector<FArray<float>>& arrays, std::optional<std::vector<double>> weights) {
        std::vector<ProbabilityMap> maps;
        for (const auto& a : arrays) maps.push_back(prob_map(a, {1, 1, 1}));
        const auto w = weights.value_or(std::vector<double>{});
        return to_array(average_maps(maps, w));
      },
      py::arg("maps"), py::arg("weights") = py::none());

  m.def(
      "postprocess",
      [](const FArray<float>& p, double base_threshold, double high_threshold,
         double min_peak_probability, std::size_t small_case_cutoff, int connectivity) {
        PostprocessParams params;
        params.base_threshold = base_threshold;
        params.high_threshold = high_threshold;
        params.min_peak_probability = min_peak_probability;
        params.small_case_cutoff = small_case_cutoff;
        params.connectivity = connectivity_from_int(connectivity);
        const auto r = postprocess(prob_map(p, {1, 1, 1}), params);
        return py::make_tuple(to_array(r.mask), report_dict(r.report));
      },
      py::arg("probabilities"), py::arg("base_threshold") = 0.5, py::arg("high_threshold") = 0.55,
      py::arg("min_peak_probability") = 0.7, py::arg("small_case_cutoff") = 5000,
      py::arg("connectivity") = 26, "Returns (mask, report).");

  m.def(
      "dice",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g) {
        return dice(mask(p, {1, 1, 1}), mask(g, {1, 1, 1}));
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "lesion_f1",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g, int c) {
        return lesion_f1(mask(p, {1, 1, 1}), mask(g, {1, 1, 1}), connectivity_from_int(c));
      },
      py::arg("pred"), py::arg("gt"), py::arg("connectivity") = 26);
  m.def(
      "simple_lesion_count",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g, int c) {
        return simple_lesion_count(mask(p, {1, 1, 1}), mask(g, {1, 1, 1}), connectivity_from_int(c));
      },
      py::arg("pred"), py::arg("gt"), py::arg("connectivity") = 26);
  m.def(
      "volume_difference",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g) {
        return volume_difference(mask(p, {1, 1, 1}), mask(g, {1, 1, 1}));
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "hausdorff95",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g, Spacing spacing,
         const std::string& variant) {
        return hausdorff95(mask(p, spacing), mask(g, spacing), variant_from(variant));
      },
      py::arg("pred"), py::arg("gt"), py::arg("spacing") = unit, py::arg("variant") = "pooled",
      "95th percentile surface distance in mm, or None when either mask is empty.");

  m.def(
      "evaluate_case",
      [](const FArray<std::uint8_t>& p, const FArray<std::uint8_t>& g, Spacing spacing,
         int connectivity, const std::string& hd95_variant, const std::string& vd_units) {
        EvaluationOptions opts;
        opts.connectivity = connectivity_from_int(connectivity);
        opts.hd_variant = variant_from(hd95_variant);
        opts.vd_unit = unit_from(vd_units);
        return metrics_dict(evaluate_case(mask(p, spacing), mask(g, spacing), opts));
      },
      py::arg("pred"), py::arg("gt"), py::arg("spacing") = unit, py::arg("connectivity") = 26,
      py::arg("hd95_variant") = "pooled", py::arg("vd_units") = "voxels");

  m.def(
      "size_balanced_split",
      [](const std::vector<std::pair<std::string, std::uint64_t>>& cohort, std::size_t k,
         std::uint64_t seed) {
        std::vector<SubjectRecord> records;
        for (const auto& [id, v] : cohort) records.push_back({id, v});
        return size_balanced_split(records, k, seed).fold_of;
      },
      py::arg("cohort"), py::arg("k") = 5, py::arg("seed") = 0,
      "cohort: sequence of (subject_id, lesion_volume). Returns {subject_id: fold}.");

  m.def(
      "read_volume",
      [](const std::filesystem::path& path) {
        const ScalarVolume v = nifti::read_volume(path);
        const auto& a = v.grid().affine();
        py::array_t<double> affine({4, 4});
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) affine.mutable_at(r, c) = a[r][c];
        const auto& s = v.grid().spacing();
        return py::make_tuple(to_array(v), py::make_tuple(s[0], s[1], s[2]), affine);
      },
      py::arg("path"), "Returns (data float32 (nx, ny, nz), spacing, 4x4 affine).");

  m.def(
      "write_volume",
      [](const std::filesystem::path& path, const FArray<float>& data, Spacing spacing,
         const std::string& datatype, std::optional<bool> compress) {
        const ScalarVolume v(Grid(dims_of(data), spacing), values_of(data));
        nifti::write_volume(v, path, nifti::parse_datatype(datatype),
                            compress.value_or(nifti::has_gzip_suffix(path)));
      },
      py::arg("path"), py::arg("data"), py::arg("spacing") = unit, py::arg("datatype") = "float32",
      py::arg("compress") = py::none(),
      "Gzip compression defaults to on for paths ending in .gz.");
}
