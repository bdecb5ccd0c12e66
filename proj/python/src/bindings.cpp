#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gradbal/batching.hpp"
#include "gradbal/errors.hpp"
#include "gradbal/gradcheck.hpp"
#include "gradbal/harness.hpp"
#include "gradbal/losses.hpp"
#include "gradbal/metrics.hpp"
#include "gradbal/nn.hpp"
#include "gradbal/reweight.hpp"
#include "gradbal/synthdata.hpp"

namespace py = pybind11;
using namespace gradbal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2D array");
  Image im(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), im.pixels.begin());
  return im;
}

Array from_image(const Image& im) {
  Array out({im.height, im.width});
  std::copy(im.pixels.begin(), im.pixels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_gradbal, m) {
  m.doc() = "Gradient-balanced severity classification on synthetic scans.";

  py::register_exception<Error>(m, "GradbalError", PyExc_ValueError);

  m.def("compute_alpha",
        [](std::array<double, 3> phi, std::optional<std::array<bool, 3>> present) {
          const AlphaWeights a = compute_alpha(GradNorms{phi, present.value_or(std::array<bool, 3>{true, true, true})});
          std::vector<std::optional<double>> out;
          for (std::size_t c = 0; c < 3; ++c)
            out.push_back(a.present[c] ? std::optional<double>(a.alpha[c]) : std::nullopt);
          return out;
        },
        py::arg("phi"), py::arg("present") = py::none(),
        "Per-class weights min(phi) / phi_c; absent classes map to None.");

  m.def("weighted_ce_weights", &weighted_ce_weights, py::arg("counts"));
  m.def("mean_of_15", &mean_of_15, py::arg("values"));
  m.def("_report_json",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
          return metrics_to_json(report(y_true, y_pred)).dump();
        },
        py::arg("y_true"), py::arg("y_pred"));

  m.def("rotating_epoch",
        [](const std::array<std::vector<std::size_t>, 3>& sets, std::uint64_t seed, std::uint64_t epoch) {
          ClassIndexSets s;
          s.indices = sets;
          return rotating_epoch(s, seed, epoch).batches;
        },
        py::arg("class_indices"), py::arg("seed"), py::arg("epoch"));
  m.def("rotating_offset", &rotating_offset, py::arg("epoch"), py::arg("draw"),
        py::arg("draws_per_epoch"), py::arg("n0"));

  m.def("artifact_types", [] {
    std::vector<std::string> out;
    for (ArtifactType a : kAllArtifacts) out.emplace_back(to_string(a));
    return out;
  });
  m.def("base_pattern",
        [](std::size_t size, int axis, std::uint64_t seed, std::size_t subject, double grain) {
          return from_image(base_pattern(size, axis, seed, subject, grain));
        },
        py::arg("size"), py::arg("axis"), py::arg("seed"), py::arg("subject"),
        py::arg("grain") = kDefaultGrain);
  m.def("apply_artifact",
        [](const Array& image, const std::string& artifact, int severity, std::uint64_t seed) {
          return from_image(apply_artifact(to_image(image), parse_artifact(artifact), severity, seed));
        },
        py::arg("image"), py::arg("artifact"), py::arg("severity"), py::arg("seed"));

  m.def("generate_dataset",
        [](const std::string& artifact, std::optional<std::array<std::size_t, 3>> counts,
           std::size_t size, std::uint64_t seed, double grain, const std::string& out) {
          DatasetSpec spec = DatasetSpec::defaults(parse_artifact(artifact));
          if (counts) spec.counts = *counts;
          spec.size = size;
          spec.seed = seed;
          spec.grain = grain;
          save_dataset(generate_dataset(spec), out);
        },
        py::arg("artifact"), py::arg("counts") = py::none(), py::arg("size") = 32,
        py::arg("seed") = 0, py::arg("grain") = kDefaultGrain, py::arg("out"),
        "Generate a dataset and write it to `out`.");
  m.def("load_dataset",
        [](const std::string& dir) {
          const Dataset d = load_dataset(dir);
          const std::size_t n = d.samples.size(), s = d.spec.size;
          Array images({n, s, s});
          py::array_t<int> severity(n), axis(n);
          py::array_t<std::size_t> subject(n);
          for (std::size_t i = 0; i < n; ++i) {
            const auto& x = d.samples[i];
            std::copy(x.image.pixels.begin(), x.image.pixels.end(), images.mutable_data() + i * s * s);
            severity.mutable_at(i) = x.severity;
            axis.mutable_at(i) = x.axis;
            subject.mutable_at(i) = x.subject_id;
          }
          py::dict out;
          out["images"] = images;
          out["severity"] = severity;
          out["axis"] = axis;
          out["subject"] = subject;
          return out;
        },
        py::arg("dir"));

  m.def("dft2",
        [](const Array& image) {
          const Image im = to_image(image);
          const auto f = dft2(im.pixels, im.height, im.width);
          py::array_t<std::complex<double>> out({im.height, im.width});
          std::copy(f.begin(), f.end(), out.mutable_data());
          return out;
        },
        py::arg("image"));

  m.def("_train_json",
        [](const std::string& config_json, const std::string& data) {
          ExperimentConfig c = config_from_json(nlohmann::json::parse(config_json));
          if (!data.empty()) c.data = data;
          RunResult r;
          {
            py::gil_scoped_release release;
            r = train(c);
          }
          return result_to_json(r).dump();
        },
        py::arg("config_json"), py::arg("data") = "");

  m.def("gradcheck",
        [](std::uint64_t seed, const std::string& loss, double eps) {
          const GradCheckResult r = finite_diff_check(tiny_model_config(true), LossVariant::parse(loss), seed, eps);
          py::dict out;
          out["max_rel_error"] = r.max_rel_error;
          out["checked"] = r.checked;
          out["skipped"] = r.skipped;
          out["worst_param"] = r.worst_param;
          out["worst_index"] = r.worst_index;
          return out;
        },
        py::arg("seed"), py::arg("loss") = "ce", py::arg("eps") = 1e-3);
}
