// pybind11 bindings for a small slice of the C++ core: tokenization, the
// numeric kernels used by tests, RSA utilities, the SVM, and the CLI.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "affectlab/classify.hpp"
#include "affectlab/cli.hpp"
#include "affectlab/errors.hpp"
#include "affectlab/numkernel.hpp"
#include "affectlab/rsa.hpp"
#include "affectlab/textproc.hpp"

namespace py = pybind11;
using namespace affectlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ArgumentError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

TauVariant parse_variant(const std::string& v) {
  if (v == "a") return TauVariant::kTauA;
  if (v == "b") return TauVariant::kTauB;
  throw ArgumentError("tau variant must be 'a' or 'b'");
}

}  // namespace

PYBIND11_MODULE(_affectlab, m) {
  m.doc() = "affectlab C++ core";
  m.attr("__version__") = "0.1.0";
  py::register_exception<DataError>(m, "DataError");

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"),
        "Lowercased word tokens of `text`.");

  m.def("softmax", [](const std::vector<double>& logits) { return softmax(logits); }, py::arg("logits"));

  m.def(
      "kendall_tau",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::string& variant) {
        return kendall_tau(std::span<const double>(x), std::span<const double>(y), parse_variant(variant));
      },
      py::arg("x"), py::arg("y"), py::arg("variant") = "a");

  m.def(
      "emotion_centroids",
      [](const Array& features, const std::vector<int>& labels, std::size_t n_classes) {
        return to_array(emotion_centroids(to_matrix(features), labels, n_classes));
      },
      py::arg("features"), py::arg("labels"), py::arg("n_classes"));

  m.def(
      "compute_rdm",
      [](const Array& centroids, std::vector<std::string> labels) {
        return to_array(compute_rdm(to_matrix(centroids), std::move(labels)).matrix);
      },
      py::arg("centroids"), py::arg("labels"), "Euclidean RDM of the centroid rows.");

  py::class_<SvmModel>(m, "SvmModel")
      .def_property_readonly("n_classes", &SvmModel::n_classes)
      .def_property_readonly("dim", &SvmModel::dim)
      .def_readonly("c", &SvmModel::c);

  m.def(
      "svm_train",
      [](const Array& features, const std::vector<int>& labels, double c, std::size_t iterations) {
        return svm_train(to_matrix(features), labels, c, SvmOptions{iterations});
      },
      py::arg("features"), py::arg("labels"), py::arg("c") = 0.03, py::arg("iterations") = 300);

  m.def(
      "svm_predict",
      [](const SvmModel& model, const Array& features) { return svm_predict(model, to_matrix(features)); },
      py::arg("model"), py::arg("features"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");
}
