#include <pybind11/pybind11.h>

#include "lcp/weights.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  m.doc() = "numerical laboratory for the lateral Cauchy problem";
  m.def("temporal_weight", &lcp::weights::temporal_weight, py::arg("t"),
        py::arg("T"));
  m.def("phi", &lcp::weights::phi, py::arg("psi_value"), py::arg("lambda_"));
  m.def("c1_lambda", &lcp::weights::c1_lambda, py::arg("psi_min"),
        py::arg("psi_max"), py::arg("lambda_"));
  m.def("m_inf", &lcp::weights::m_inf, py::arg("t1"), py::arg("t2"),
        py::arg("T"));
}
