#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "concurrence/baselines.hpp"
#include "concurrence/bernoulli.hpp"
#include "concurrence/dataio.hpp"
#include "concurrence/error.hpp"
#include "concurrence/generators.hpp"
#include "concurrence/pipeline.hpp"
#include "concurrence/significance.hpp"
#include "concurrence/trainer.hpp"

namespace py = pybind11;
using namespace concurrence;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_array(const std::vector<double>& v) {
    Array a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

// Python objects travel through JSON text; nlohmann has no pybind11 caster here.
py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::object& o) {
    if (o.is_none()) return Json::object();
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

// (N, K, T) arrays <-> Dataset
Dataset to_dataset(const Array& x, const Array& y) {
    if (x.ndim() != 3 || y.ndim() != 3) throw config_error("x and y must be (N, K, T) arrays");
    const auto n = static_cast<std::size_t>(x.shape(0));
    const auto t = static_cast<std::size_t>(x.shape(2));
    if (static_cast<std::size_t>(y.shape(0)) != n || static_cast<std::size_t>(y.shape(2)) != t) {
        throw config_error("x and y disagree in N or T");
    }
    const auto kx = static_cast<std::size_t>(x.shape(1));
    const auto ky = static_cast<std::size_t>(y.shape(1));
    Dataset d;
    d.pairs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = d.pairs[i];
        p.id = i;
        p.kx = kx;
        p.ky = ky;
        p.length = t;
        p.x.assign(x.data() + i * kx * t, x.data() + (i + 1) * kx * t);
        p.y.assign(y.data() + i * ky * t, y.data() + (i + 1) * ky * t);
    }
    d.validate();
    return d;
}

py::dict from_dataset(const Dataset& d) {
    const std::size_t n = d.size(), t = d.length(), kx = d.kx(), ky = d.ky();
    Array x({n, kx, t}), y({n, ky, t});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(d.pairs[i].x.begin(), d.pairs[i].x.end(), x.mutable_data() + i * kx * t);
        std::copy(d.pairs[i].y.begin(), d.pairs[i].y.end(), y.mutable_data() + i * ky * t);
    }
    py::dict out;
    out["x"] = x;
    out["y"] = y;
    out["manifest"] = to_py(d.manifest);
    return out;
}

py::dict fit_dict(const NullFit& f) { return to_py(to_json(f)); }

// Owned by the module for the interpreter's lifetime.
PyObject* error_type = nullptr;

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Concurrence coefficient: contrastive dependence detection between paired signals.";
    m.attr("__version__") = CONCURRENCE_VERSION;

    error_type = PyErr_NewException("concurrence.ConcurrenceError", PyExc_RuntimeError, nullptr);
    m.add_object("ConcurrenceError", py::handle(error_type));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            // kind matches the CLI exit code; code is the short reason, e.g. "bad_magic"
            py::object exc = py::handle(error_type)(e.what());
            exc.attr("kind") = static_cast<int>(e.kind());
            exc.attr("code") = e.code();
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    // coefficients
    m.def("ucc", &ucc, py::arg("accuracy"));
    m.def("concurrence_coefficient", &concurrence_coefficient, py::arg("accuracy"));
    m.def("classification_accuracy",
          [](const Array& scores, const std::vector<int>& labels) {
              return classification_accuracy(to_vec(scores), labels);
          },
          py::arg("scores"), py::arg("labels"));

    // significance
    m.def("permutation_null",
          [](const Array& scores, const std::vector<int>& labels, std::size_t n_perms, std::uint64_t seed) {
              return to_array(permutation_null(to_vec(scores), labels, n_perms, Rng(seed)));
          },
          py::arg("scores"), py::arg("labels"), py::arg("n_perms") = 1000, py::arg("seed") = 0);
    m.def("fit_pearson3", [](const Array& samples) { return fit_dict(fit_pearson3(to_vec(samples))); },
          py::arg("samples"));
    m.def("permutation_test",
          [](const Array& scores, const std::vector<int>& labels, std::size_t n_perms, std::uint64_t seed) {
              return to_py(to_json(permutation_test(to_vec(scores), labels, n_perms, Rng(seed))));
          },
          py::arg("scores"), py::arg("labels"), py::arg("n_perms") = 1000, py::arg("seed") = 0);
    m.def("empirical_p", [](double observed, const Array& null) { return empirical_p(observed, to_vec(null)); },
          py::arg("observed"), py::arg("null"));

    // baselines
    m.def("pearson_r", [](const Array& x, const Array& y) { return pearson_r(to_vec(x), to_vec(y)); });
    m.def("wcc",
          [](const Array& x, const Array& y, std::size_t window, std::size_t max_lag) {
              return wcc(to_vec(x), to_vec(y), window, max_lag);
          },
          py::arg("x"), py::arg("y"), py::arg("window"), py::arg("max_lag"));
    m.def("distance_correlation",
          [](const Array& x, const Array& y) { return distance_correlation(to_vec(x), to_vec(y)).value; });
    m.def("hsic_gaussian", [](const Array& x, const Array& y) { return hsic_gaussian(to_vec(x), to_vec(y)); });
    m.def("mutual_information",
          [](const Array& x, const Array& y, std::size_t bins) {
              return mutual_information_binned(to_vec(x), to_vec(y), bins);
          },
          py::arg("x"), py::arg("y"), py::arg("bins"));
    m.def("conditional_mutual_information",
          [](const Array& x, const Array& y, std::size_t bins) {
              return conditional_mi_binned(to_vec(x), to_vec(y), bins);
          },
          py::arg("x"), py::arg("y"), py::arg("bins"));
    m.def("baseline_test",
          [](const Array& x, const Array& y, const std::string& method, std::size_t n_perms, std::uint64_t seed) {
              BaselineConfig c;
              c.method = parse_method(method);
              c.n_permutations = n_perms;
              return to_py(to_json(baseline_test(to_dataset(x, y), c, Rng(seed))));
          },
          py::arg("x"), py::arg("y"), py::arg("method"), py::arg("n_perms") = 1000, py::arg("seed") = 0);

    // simulation
    m.def("analytic_pc",
          [](double p, double p_alpha, double p_beta, double p_eps_x, double p_eps_y) {
              const PcResult r = analytic_pc(p, p_alpha, p_beta, p_eps_x, p_eps_y);
              py::dict d;
              d["p_plus"] = r.p_plus;
              d["p_minus"] = r.p_minus;
              d["gap"] = r.gap;
              d["theta"] = r.theta;
              return d;
          },
          py::arg("p"), py::arg("p_alpha") = 1.0, py::arg("p_beta") = 1.0, py::arg("p_eps_x") = 0.0,
          py::arg("p_eps_y") = 0.0);
    m.def("simulate_scenario",
          [](const std::string& id, std::size_t w, std::size_t trials, std::uint64_t seed) {
              if (id.size() != 1) throw config_error("scenario expects one of a..e");
              const ZSimResult r = simulate_z(scenario(id[0], w), trials, Rng(seed));
              py::dict d;
              d["z_plus"] = to_array(r.z_plus);
              d["z_minus"] = to_array(r.z_minus);
              d["theta"] = r.theta;
              d["error_rate"] = classify_by_theta(r.z_plus, r.z_minus, r.theta);
              return d;
          },
          py::arg("scenario"), py::arg("w"), py::arg("trials") = 10000, py::arg("seed") = 0);

    // data
    m.def("generate_xi",
          [](double xi, std::size_t n_pairs, std::size_t length, double snr, std::uint64_t seed) {
              XiDatasetConfig c;
              c.xi = xi;
              c.n_pairs = n_pairs;
              c.length = length;
              c.snr = snr;
              c.seed = seed;
              return from_dataset(gen_xi_dataset(c));
          },
          py::arg("xi") = 1.0, py::arg("n_pairs") = 200, py::arg("length") = 1000, py::arg("snr") = kNoNoise,
          py::arg("seed") = 0);
    m.def("generate_wavelet",
          [](std::size_t n_pairs, std::size_t length, std::uint64_t seed) {
              WaveletDatasetConfig c;
              c.n_pairs = n_pairs;
              c.length = length;
              c.seed = seed;
              return from_dataset(gen_wavelet_dataset(c));
          },
          py::arg("n_pairs") = 500, py::arg("length") = 1000, py::arg("seed") = 0);
    m.def("read_dataset", [](const std::string& path) { return from_dataset(read_dataset(path)); }, py::arg("path"));
    m.def("write_dataset",
          [](const std::string& path, const Array& x, const Array& y, const py::object& manifest) {
              Dataset d = to_dataset(x, y);
              d.manifest = from_py(manifest);
              return to_py(write_dataset(d, path));
          },
          py::arg("path"), py::arg("x"), py::arg("y"), py::arg("manifest") = py::none());

    // end to end
    m.def("run_concurrence",
          [](const Array& x, const Array& y, const py::object& model, const py::object& train, std::size_t n_perms,
             std::uint64_t seed) {
              const Dataset d = to_dataset(x, y);
              EncoderConfig enc;
              TrainConfig tc;
              update_from_json(enc, from_py(model));
              update_from_json(tc, from_py(train));
              ConcurrenceOutcome out;
              {
                  py::gil_scoped_release release;
                  out = run_concurrence(d, enc, tc, n_perms, Rng(seed));
              }
              py::dict r;
              r["accuracy"] = out.evaluation.accuracy;
              r["coefficient"] = out.evaluation.coefficient;
              r["test"] = to_py(to_json(out.test));
              r["loss_history"] = to_array(out.training.loss_history);
              r["scores"] = to_array(out.evaluation.scores());
              r["labels"] = out.evaluation.labels();
              r["train_ids"] = out.train_ids;
              r["test_ids"] = out.test_ids;
              return r;
          },
          py::arg("x"), py::arg("y"), py::arg("model") = py::none(), py::arg("train") = py::none(),
          py::arg("n_perms") = 1000, py::arg("seed") = 0);
}
