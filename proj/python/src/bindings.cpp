#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "srrn/cli.hpp"
#include "srrn/core_data.hpp"
#include "srrn/datagen.hpp"
#include "srrn/error.hpp"
#include "srrn/manifest.hpp"
#include "srrn/metrics.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// numpy images are H x W x C; the library stores C x H x W.
srrn::Planes to_planes(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an H x W or H x W x C array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  srrn::Planes p(c, h, w);
  const double* src = a.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) p.at(k, y, x) = src[(static_cast<std::size_t>(y) * w + x) * c + k];
    }
  }
  return p;
}

srrn::ImageTensor to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an H x W x 3 RGB array");
  return srrn::ImageTensor(to_planes(a));
}

Array from_planes(const srrn::Planes& p, bool squeeze) {
  const int c = p.channels(), h = p.height(), w = p.width();
  std::vector<py::ssize_t> shape{h, w};
  if (!squeeze || c != 1) shape.push_back(c);
  Array out(shape);
  double* dst = out.mutable_data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) dst[(static_cast<std::size_t>(y) * w + x) * c + k] = p.at(k, y, x);
    }
  }
  return out;
}

srrn::SemanticMap to_labels(const LabelArray& a, int classes) {
  if (a.ndim() != 2) throw py::value_error("expected an H x W label array");
  const auto* src = a.data();
  return srrn::SemanticMap(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                           std::vector<std::uint8_t>(src, src + a.size()), classes);
}

LabelArray from_labels(const srrn::SemanticMap& m) {
  LabelArray out({m.height(), m.width()});
  std::copy(m.labels().begin(), m.labels().end(), out.mutable_data());
  return out;
}

py::dict quadruple_dict(const srrn::Quadruple& q) {
  py::dict d;
  d["id"] = q.id;
  d["mixed"] = from_planes(q.mixed.planes(), false);
  d["background"] = from_planes(q.background.planes(), false);
  d["reflection"] = from_planes(q.reflection.planes(), false);
  d["semantic"] = from_labels(q.semantic);
  d["alpha"] = q.alpha;
  d["source"] = std::string(srrn::to_string(q.source));
  return d;
}

}  // namespace

PYBIND11_MODULE(_srrn, m) {
  m.doc() = "Native core of the srrn package";

  // Owned by the module for the life of the interpreter.
  static PyObject* error = PyErr_NewException("srrn._srrn.SrrnError", PyExc_RuntimeError, nullptr);
  m.attr("SrrnError") = py::handle(error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const srrn::Error& e) {
      PyErr_SetString(error, (std::string(srrn::to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.attr("IGNORE_LABEL") = srrn::kIgnoreLabel;
  m.attr("CLASS_COUNT") = srrn::kClassCount;

  m.def(
      "psnr", [](const Array& a, const Array& b, double data_range) { return srrn::psnr(to_planes(a), to_planes(b), data_range); },
      py::arg("a"), py::arg("b"), py::arg("data_range") = 1.0);

  m.def(
      "ssim",
      [](const Array& a, const Array& b, int window_size, double sigma, double k1, double k2, double data_range) {
        srrn::SsimParams p{window_size, sigma, k1, k2, data_range};
        return srrn::ssim(to_planes(a), to_planes(b), p);
      },
      py::arg("a"), py::arg("b"), py::arg("window_size") = 11, py::arg("sigma") = 1.5, py::arg("k1") = 0.01,
      py::arg("k2") = 0.03, py::arg("data_range") = 1.0);

  m.def(
      "miou",
      [](const LabelArray& pred, const LabelArray& gt, int classes) {
        // Predictions may carry any label; only ground truth is range-checked.
        return srrn::miou(to_labels(pred, 256), to_labels(gt, classes), classes);
      },
      py::arg("pred"), py::arg("gt"), py::arg("classes") = srrn::kClassCount);

  m.def(
      "blend",
      [](const Array& b, const Array& r, double alpha) {
        return from_planes(srrn::blend(to_image(b), to_image(r), alpha).planes(), false);
      },
      py::arg("background"), py::arg("reflection"), py::arg("alpha"));

  m.def(
      "canny", [](const Array& img) { return from_planes(srrn::canny(to_image(img)), true); }, py::arg("image"));

  m.def(
      "soft_edges", [](const Array& img, double sigma) { return from_planes(srrn::soft_edges(to_planes(img), {sigma}), false); },
      py::arg("image"), py::arg("sigma") = 1.0);

  m.def(
      "confidence_interval",
      [](const std::vector<double>& samples, double level) {
        const srrn::Interval i = srrn::confidence_interval(samples, level);
        return py::make_tuple(i.mean, i.half_width);
      },
      py::arg("samples"), py::arg("level") = 0.95);

  m.def(
      "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return srrn::spearman_correlation(x, y); },
      py::arg("x"), py::arg("y"));

  m.def("parse_alpha_grid", &srrn::parse_alpha_grid, py::arg("spec"));

  m.def(
      "manifest_json", [](const std::filesystem::path& path) { return srrn::manifest_to_json(srrn::load_manifest(path)); },
      py::arg("path"));

  m.def(
      "load_record",
      [](const std::filesystem::path& path, std::size_t index) {
        const srrn::DatasetManifest man = srrn::load_manifest(path);
        if (index >= man.records.size()) throw py::index_error("record index out of range");
        return quadruple_dict(srrn::load_quadruple(man, man.records[index]));
      },
      py::arg("manifest"), py::arg("index"));

  m.def(
      "validate_manifest",
      [](const std::filesystem::path& path) {
        std::vector<std::string> messages;
        for (const auto& issue : srrn::validate_manifest(srrn::load_manifest(path))) messages.push_back(issue.message);
        return messages;
      },
      py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = srrn::cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
