#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ibs/errors.hpp"
#include "ibs/estimators.hpp"
#include "ibs/harness.hpp"
#include "ibs/ibs_builder.hpp"
#include "ibs/permutation.hpp"
#include "ibs/scenarios.hpp"
#include "ibs/transform.hpp"

namespace py = pybind11;
using namespace ibs;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

CVec to_cvec(const CArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return CVec(a.data(), a.data() + a.size());
}

CArray to_array(const CVec& v) {
  CArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

RArray to_array(const RVec& v) {
  RArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// nlohmann <-> Python through the json module keeps the binding free of a
// hand-written converter.
py::object to_py(const nlohmann::ordered_json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::string from_py(const py::object& o) {
  if (py::isinstance<py::str>(o)) return o.cast<std::string>();
  return py::module_::import("json").attr("dumps")(o).cast<std::string>();
}

py::list summary_rows(const std::vector<SummaryRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["scheme"] = r.scheme;
    d["base"] = r.base;
    d["n_s"] = r.n_s;
    d["snr_db"] = r.snr_db;
    d["trials"] = r.trials;
    d["mean"] = r.mean;
    d["ci95_half_width"] = r.half_width;
    d["mean_iters"] = r.mean_iters;
    d["per_trial"] = r.per_trial;
    out.append(d);
  }
  return out;
}

py::dict run_experiment(const py::object& config, const std::string& out_dir) {
  ExperimentConfig cfg = parse_config(from_py(config));
  cfg.validate();
  py::dict res;
  res["experiment"] = cfg.experiment;
  res["config_hash"] = config_hash(cfg);
  py::gil_scoped_release release;
  if (cfg.experiment == "cs-mse") {
    const CsMseResult r = run_cs_mse(cfg, out_dir);
    py::gil_scoped_acquire acquire;
    res["summary"] = summary_rows(r.summary);
  } else if (cfg.experiment == "ifdm-ber") {
    const IfdmBerResult r = run_ifdm_ber(cfg, out_dir);
    py::gil_scoped_acquire acquire;
    res["summary"] = summary_rows(r.summary);
  } else if (cfg.experiment == "complexity-table") {
    const auto rows = run_complexity_table(cfg, out_dir);
    py::gil_scoped_acquire acquire;
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["n_s"] = r.n_s;
      d["theta_pct"] = r.theta_pct;
      d["overall_pct"] = r.overall_pct;
      out.append(d);
    }
    res["summary"] = out;
  } else {
    py::gil_scoped_acquire acquire;
    throw py::value_error("run_experiment: use selftest() for '" + cfg.experiment + "'");
  }
  return res;
}

}  // namespace

PYBIND11_MODULE(_ibsmamp, m) {
  m.doc() = "Interleaved block-sparse transforms and cross-domain memory AMP";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DegenerateError> degenerate_error(m, "DegenerateError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const DegenerateError& e) {
      degenerate_error(e.what());
    }
  });

  m.def("fft", [](const CArray& x) { return to_array(fft_forward(to_cvec(x))); }, py::arg("x"),
        "Unitary DFT of a power-of-two length vector.");
  m.def("ifft", [](const CArray& x) { return to_array(fft_inverse(to_cvec(x))); }, py::arg("x"));
  m.def("fwht", [](const CArray& x) { return to_array(fwht_forward(to_cvec(x))); }, py::arg("x"),
        "Unitary Walsh-Hadamard transform, natural order.");
  m.def("permutation", [](std::size_t n, std::uint64_t seed) {
    const Permutation perm = make_permutation(n, seed);
    const auto& map = perm.mapping();
    return std::vector<std::size_t>(map.begin(), map.end());
  }, py::arg("n"), py::arg("seed"));

  py::class_<LinearOperator>(m, "Transform")
      .def_property_readonly("rows", &LinearOperator::rows)
      .def_property_readonly("cols", &LinearOperator::cols)
      .def_property_readonly("shape", [](const LinearOperator& op) { return py::make_tuple(op.rows(), op.cols()); })
      .def("apply", [](const LinearOperator& op, const CArray& x) { return to_array(op.apply(to_cvec(x))); })
      .def("adjoint", [](const LinearOperator& op, const CArray& x) { return to_array(op.apply_adjoint(to_cvec(x))); })
      .def("dense", [](const LinearOperator& op) {
        const Eigen::MatrixXcd d = materialize_dense(op);
        py::array_t<cplx> out({d.rows(), d.cols()});
        auto w = out.mutable_unchecked<2>();
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
          for (Eigen::Index j = 0; j < d.cols(); ++j) w(i, j) = d(i, j);
        }
        return out;
      })
      .def("__repr__", [](const LinearOperator& op) {
        return "<Transform " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) + " " + op.describe() + ">";
      });

  m.def("ibs_transform",
        [](std::size_t n, std::size_t n_s, std::size_t m_rows, const std::string& variant, const std::string& base,
           const std::string& direction, std::uint64_t block_seed, std::uint64_t whole_seed) {
          const IbsSpec spec{n,           n_s, m_rows, parse_variant(variant), parse_base(base), parse_direction(direction),
                             block_seed, whole_seed};
          return build_ibs_transform(spec);
        },
        py::arg("n"), py::arg("n_s"), py::arg("m"), py::arg("variant") = "BW_IBS", py::arg("base") = "FFT",
        py::arg("direction") = "kernel", py::arg("block_seed") = 0, py::arg("whole_seed") = 0);
  m.def("full_transform",
        [](std::size_t n, std::size_t m_rows, const std::string& base, const std::string& direction,
           std::uint64_t seed) { return build_full_transform(n, m_rows, parse_base(base), parse_direction(direction), seed); },
        py::arg("n"), py::arg("m"), py::arg("base") = "FFT", py::arg("direction") = "kernel", py::arg("seed") = 0);

  m.def("relative_complexity", [](std::size_t n, std::size_t n_s, double p) {
    const RelativeComplexity rc = relative_complexity(n, n_s, p);
    return py::dict(py::arg("theta") = rc.theta_ibs, py::arg("overall") = rc.overall);
  }, py::arg("n"), py::arg("n_s"), py::arg("p") = 8.0);

  m.def("sensing_diagonal", [](std::size_t m_rows, std::size_t n, double kappa) {
    return to_array(gen_sensing_diagonal(m_rows, n, kappa).singulars);
  }, py::arg("m"), py::arg("n"), py::arg("kappa"));

  m.def("damping_weights", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
    if (v.ndim() != 2 || v.shape(0) != v.shape(1)) throw py::value_error("expected a square matrix");
    const auto k = static_cast<Eigen::Index>(v.shape(0));
    const Eigen::MatrixXd mat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), k, k);
    const DampingWeights w = damping_weights(mat);
    return py::make_tuple(to_array(RVec(w.zeta.begin(), w.zeta.end())), w.predicted_var);
  }, py::arg("v"), "Returns (zeta, zeta^T V zeta).");

  m.def("denoise_bernoulli_gaussian", [](const CArray& r, double v, double rho, double sigma_s2) {
    const DenoiserResult d = denoise_bernoulli_gaussian(to_cvec(r), v, rho, sigma_s2);
    return py::make_tuple(to_array(d.posterior_mean), d.posterior_var, d.divergence);
  }, py::arg("r"), py::arg("v"), py::arg("rho") = 0.1, py::arg("sigma_s2") = 10.0);
  m.def("denoise_qpsk", [](const CArray& r, double v) {
    const DenoiserResult d = denoise_qpsk(to_cvec(r), v);
    return py::make_tuple(to_array(d.posterior_mean), d.posterior_var, d.divergence);
  }, py::arg("r"), py::arg("v"));

  m.def("default_config", [](const std::string& e) { return to_py(nlohmann::ordered_json(default_config(e))); },
        py::arg("experiment"));
  m.def("config_hash", [](const py::object& c) { return config_hash(parse_config(from_py(c))); }, py::arg("config"));
  m.def("run_experiment", &run_experiment, py::arg("config"), py::arg("out_dir") = "",
        "Runs a cs-mse, ifdm-ber or complexity-table config (dict or JSON text). "
        "Files are written only when out_dir is non-empty.");
  m.def("selftest", [](bool inject_nle_sign_error, std::uint64_t seed) {
    std::ostringstream os;
    bool ok = false;
    {
      py::gil_scoped_release release;
      ok = run_selftest(os, {inject_nle_sign_error, seed});
    }
    return py::make_tuple(ok, os.str());
  }, py::arg("inject_nle_sign_error") = false, py::arg("seed") = 7);
}
