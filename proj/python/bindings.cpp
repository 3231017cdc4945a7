// Python bindings. Tensors cross the boundary as Fortran-ordered numpy
// arrays, which matches the first-mode-fastest layout of DenseTensor.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tsketch/error.hpp"
#include "tsketch/eval.hpp"
#include "tsketch/io.hpp"
#include "tsketch/recovery.hpp"
#include "tsketch/sketch.hpp"

namespace py = pybind11;
using namespace tsketch;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;

DenseTensor to_tensor(const FArray& a) {
  require(a.ndim() >= 1, ErrorCategory::shape, "tensors need at least one dimension");
  Shape shape(a.shape(), a.shape() + a.ndim());
  return DenseTensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const DenseTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  std::vector<py::ssize_t> strides(shape.size());
  py::ssize_t stride = sizeof(double);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    strides[k] = stride;
    stride *= shape[k];
  }
  py::array_t<double> out(shape, strides);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

TuckerFactorization tucker_from(const FArray& core, std::vector<Matrix> factors) {
  return {to_tensor(core), std::move(factors)};
}

}  // namespace

PYBIND11_MODULE(_tsketch, m) {
  m.doc() = "One-pass Tucker sketching and recovery for dense tensors.";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (category, message)
      py::tuple args = py::make_tuple(std::string(to_string(e.category())), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  py::enum_<Family>(m, "Family")
      .value("gaussian", Family::gaussian)
      .value("sparse_sign", Family::sparse_sign)
      .value("srtt", Family::srtt)
      .value("identity", Family::identity);
  py::enum_<LooKind>(m, "LooKind")
      .value("kronecker", LooKind::kronecker)
      .value("khatri_rao", LooKind::khatri_rao)
      .value("unstructured", LooKind::unstructured);

  // tensor algebra
  m.def("unfold", [](const FArray& x, Index mode) { return unfold(to_tensor(x), mode); },
        py::arg("x"), py::arg("mode"));
  m.def("fold", [](const Matrix& a, const Shape& shape, Index mode) { return to_array(fold(a, shape, mode)); },
        py::arg("a"), py::arg("shape"), py::arg("mode"));
  m.def("mode_product",
        [](const FArray& x, const Matrix& a, Index mode) { return to_array(mode_product(to_tensor(x), a, mode)); },
        py::arg("x"), py::arg("a"), py::arg("mode"));

  m.def("materialize",
        [](Family family, Index rows, Index cols, std::uint64_t seed) {
          return materialize({family, rows, cols, seed});
        },
        py::arg("family"), py::arg("rows"), py::arg("cols"), py::arg("seed"));

  py::class_<SketchPlan>(m, "SketchPlan")
      .def(py::init(&SketchPlan::uniform), py::arg("shape"), py::arg("kind"), py::arg("m"), py::arg("m_c"),
           py::arg("seed"), py::arg("loo") = Family::gaussian, py::arg("core") = Family::gaussian,
           py::arg("diag") = Family::identity)
      .def_readwrite("shape", &SketchPlan::shape)
      .def_readwrite("loo_kind", &SketchPlan::loo_kind)
      .def_readwrite("m", &SketchPlan::m)
      .def_readwrite("m_c", &SketchPlan::m_c)
      .def_readwrite("loo_families", &SketchPlan::loo_families)
      .def_readwrite("diag_family", &SketchPlan::diag_family)
      .def_readwrite("core_families", &SketchPlan::core_families)
      .def_readwrite("seed", &SketchPlan::seed)
      .def("validate", &SketchPlan::validate)
      .def("loo_cols", &SketchPlan::loo_cols)
      .def("storage_entries", &SketchPlan::storage_entries)
      .def(py::self == py::self);

  py::class_<SketchBundle>(m, "SketchBundle")
      .def_readonly("plan", &SketchBundle::plan)
      .def_readonly("loo", &SketchBundle::loo)
      .def_property_readonly("core", [](const SketchBundle& b) { return to_array(b.core); })
      .def_readonly("partial", &SketchBundle::partial)
      .def("entry_count", &SketchBundle::entry_count);

  m.def("sketch", [](const FArray& x, const SketchPlan& plan) { return sketch(to_tensor(x), plan); },
        py::arg("x"), py::arg("plan"));

  py::class_<SketchAccumulator>(m, "SketchAccumulator")
      .def(py::init<SketchPlan>(), py::arg("plan"))
      .def("update",
           [](SketchAccumulator& acc, Index start, const FArray& slab) {
             DenseTensor payload = to_tensor(slab);
             const Index count = payload.dim(payload.order() - 1);
             acc.update(SlabChunk{start, count, std::move(payload)});
           },
           py::arg("start"), py::arg("slab"), "Adds the last-mode slab [start, start + slab.shape[-1]).")
      .def("merge", &SketchAccumulator::merge, py::arg("other"))
      .def("covered", &SketchAccumulator::covered)
      .def("complete", &SketchAccumulator::complete)
      .def("finalize", &SketchAccumulator::finalize);

  py::class_<TuckerFactorization>(m, "TuckerFactorization")
      .def(py::init(&tucker_from), py::arg("core"), py::arg("factors"))
      .def_property_readonly("core", [](const TuckerFactorization& t) { return to_array(t.core); })
      .def_readonly("factors", &TuckerFactorization::factors)
      .def_property_readonly("rank", &TuckerFactorization::rank)
      .def_property_readonly("shape", &TuckerFactorization::shape);

  m.def("one_pass", &one_pass, py::arg("bundle"), py::arg("r"));
  m.def("one_pass_recycled", &one_pass_recycled, py::arg("bundle"), py::arg("r"), py::arg("j") = 0);
  m.def("two_pass",
        [](const SketchBundle& b, const FArray& x, Index r) { return two_pass(b, to_tensor(x), r); },
        py::arg("bundle"), py::arg("x"), py::arg("r"));
  m.def("reconstruct", [](const TuckerFactorization& t) { return to_array(reconstruct(t)); }, py::arg("t"));

  // evaluation
  m.def("relative_error",
        [](const FArray& x_hat, const FArray& x, std::optional<FArray> x0) {
          const DenseTensor observed = to_tensor(x);
          return relative_error(to_tensor(x_hat), observed, x0 ? to_tensor(*x0) : observed);
        },
        py::arg("x_hat"), py::arg("x"), py::arg("x0") = py::none());
  m.def("snr_db", [](const FArray& x, const FArray& x0) { return snr_db(to_tensor(x), to_tensor(x0)); },
        py::arg("x"), py::arg("x0"));
  m.def("add_noise_snr",
        [](const FArray& x0, double target, std::uint64_t seed) {
          return to_array(add_noise_snr(to_tensor(x0), target, seed));
        },
        py::arg("x0"), py::arg("target_db"), py::arg("seed"));
  m.def("max_principal_angle",
        [](const Matrix& q, const Matrix& u) { return max_principal_angle(q, u); }, py::arg("q"), py::arg("u"));
  m.def("tail_energies", [](const FArray& x, Index r) { return tail_energies(to_tensor(x), r); },
        py::arg("x"), py::arg("r"));
  m.def("hosvd_truncate", [](const FArray& x, Index r) { return hosvd_truncate(to_tensor(x), r); },
        py::arg("x"), py::arg("r"));
  m.def("bound_rhs", &bound_rhs, py::arg("eps"), py::arg("deltas"));
  m.def("gen_lowrank",
        [](Index n, Index d, Index r, std::uint64_t seed) {
          auto inst = gen_lowrank(n, d, r, seed);
          return py::make_tuple(to_array(inst.tensor), to_array(inst.core), inst.factors);
        },
        py::arg("n"), py::arg("d"), py::arg("r"), py::arg("seed"),
        "Returns (tensor, core, factors).");
  m.def("gen_superdiag_exp", [](Index n, Index d, Index r) { return to_array(gen_superdiag_exp(n, d, r)); },
        py::arg("n"), py::arg("d"), py::arg("r"));
  m.def("gen_superdiag_poly", [](Index n, Index d, Index r) { return to_array(gen_superdiag_poly(n, d, r)); },
        py::arg("n"), py::arg("d"), py::arg("r"));

  // files
  m.def("save_tensor", [](const std::filesystem::path& p, const FArray& x) { io::save_tensor(p, to_tensor(x)); },
        py::arg("path"), py::arg("x"));
  m.def("load_tensor", [](const std::filesystem::path& p) { return to_array(io::load_tensor(p)); },
        py::arg("path"));
  m.def("save_bundle", &io::save_bundle, py::arg("path"), py::arg("bundle"));
  m.def("load_bundle", &io::load_bundle, py::arg("path"));
  m.def("save_tucker", &io::save_tucker, py::arg("path"), py::arg("t"));
  m.def("load_tucker", &io::load_tucker, py::arg("path"));
}
