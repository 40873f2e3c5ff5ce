#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fastssm/pipeline.hpp"
#include "fastssm/synth.hpp"

namespace py = pybind11;
using namespace fastssm;

namespace {

Trajectory make_trajectory(const Eigen::VectorXd& times, const Eigen::MatrixXd& samples) {
    Trajectory t{times, samples};
    validate_trajectory(t, "trajectory");
    return t;
}

TrajectorySet to_set(const std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>>& data) {
    TrajectorySet out;
    for (const auto& [t, y] : data) out.push_back(make_trajectory(t, y));
    return out;
}

py::tuple as_tuple(const Trajectory& t) { return py::make_tuple(t.times, t.samples); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Data-driven reduction onto spectral submanifolds";
    m.attr("__version__") = kVersion;
    m.attr("monomial_ordering") = kMonomialOrdering;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<RankError>(m, "RankError", numerical.ptr());
    py::register_exception<ConditioningError>(m, "ConditioningError", numerical.ptr());
    py::register_exception<ResonanceError>(m, "ResonanceError", numerical.ptr());
    py::register_exception<CalibrationError>(m, "CalibrationError", numerical.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", numerical.ptr());
    py::register_exception<InstabilityError>(m, "InstabilityError", numerical.ptr());

    m.def("monomials", [](int d, int lo, int hi) { return MonomialBasis(d, lo, hi).exponents(); },
          py::arg("d"), py::arg("order_lo"), py::arg("order_hi"),
          "Exponent vectors of the monomial basis in library order.");
    m.def("suggest_timelag", &suggest_timelag, py::arg("omega"), py::arg("dt"));
    m.def(
        "delay_embed",
        [](const Eigen::VectorXd& times, const Eigen::MatrixXd& samples, int p, int k) {
            const Trajectory t = make_trajectory(times, samples);
            const auto emb = delay_embed(t, {p, k, t.times(1) - t.times(0)});
            return py::make_tuple(emb.times, emb.data);
        },
        py::arg("times"), py::arg("samples"), py::arg("p"), py::arg("k"));
    m.def("nmte", py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(&nmte), py::arg("reference"),
          py::arg("prediction"));

    py::class_<SyntheticSystem>(m, "SyntheticSystem")
        .def_property_readonly("kind", [](const SyntheticSystem& s) { return to_string(s.kind); })
        .def_property_readonly("eigenvalues", [](const SyntheticSystem& s) { return s.eigenvalues; })
        .def_property_readonly("n_obs", &SyntheticSystem::n_obs)
        .def_property_readonly("state_dim", &SyntheticSystem::state_dim)
        .def(
            "normal_form_coefficient",
            [](const SyntheticSystem& s, int row, const MultiIndex& k) {
                const auto nf = ground_truth_normal_form(s);
                const long i = nf.normal_form.basis().index_of(k);
                return i < 0 ? Complex(0.0) : nf.normal_form.coefficients()(row, i);
            },
            py::arg("row"), py::arg("exponent"), "Ground-truth coefficient in observable-normalized coordinates.")
        .def(
            "simulate",
            [](const SyntheticSystem& s, int count, double radius, double horizon, double dt, double noise,
               std::uint64_t seed) {
                SimulateOptions opts;
                opts.noise = noise;
                py::list out;
                int i = 0;
                for (const auto& s0 : random_initial_states(s, count, radius, seed)) {
                    opts.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i++);
                    out.append(as_tuple(simulate(s, s0, horizon, dt, opts)));
                }
                return out;
            },
            py::arg("count"), py::arg("radius"), py::arg("horizon"), py::arg("dt"), py::arg("noise") = 0.0,
            py::arg("seed") = 0, "List of (times, samples) pairs.");

    m.def(
        "stuart_landau",
        [](Complex lambda, Complex gamma, int n_obs, std::uint64_t seed) {
            return make_stuart_landau(lambda, gamma, {n_obs, 0.0, seed});
        },
        py::arg("lam"), py::arg("gamma"), py::arg("n_obs") = 5, py::arg("seed") = 1);
    m.def(
        "resonant_pair", [](int n_obs, std::uint64_t seed) { return make_resonant_pair({}, {n_obs, 0.0, seed}); },
        py::arg("n_obs") = 8, py::arg("seed") = 1);

    py::class_<FullModel>(m, "Model")
        .def_property_readonly("dim", &FullModel::dim)
        .def_property_readonly("eigenvalues", [](const FullModel& f) { return f.normal_form.eigenvalues; })
        .def_property_readonly("training_nmte", [](const FullModel& f) { return f.training_nmte; })
        .def(
            "normal_form_coefficient",
            [](const FullModel& f, int row, const MultiIndex& k) {
                const long i = f.normal_form.normal_form.basis().index_of(k);
                return i < 0 ? Complex(0.0) : f.normal_form.normal_form.coefficients()(row, i);
            },
            py::arg("row"), py::arg("exponent"))
        .def_property_readonly("resonance_phases", [](const FullModel& f) { return f.polar.resonance_phases; })
        .def("polar_text", [](const FullModel& f) { return format_polar(f.polar); })
        .def(
            "predict",
            [](const FullModel& f, const Eigen::VectorXd& y0, double horizon) {
                return as_tuple(predict_decay(f, y0, horizon).trajectory);
            },
            py::arg("y0"), py::arg("horizon"), "Free decay from an embedded initial observable vector.")
        .def(
            "backbone",
            [](const FullModel& f, double rho_max, int points, const std::string& alpha) {
                const Backbone b = backbone(f, rho_max, points, AmplitudeFunctional::parse(alpha));
                return py::make_tuple(b.rho, b.omega, b.amplitude);
            },
            py::arg("rho_max") = 1.0, py::arg("points") = 101, py::arg("alpha") = "coord:0")
        .def(
            "save", [](const FullModel& f, const std::string& config_hash) {
                return save_archive(f, Provenance{config_hash, kVersion, "unset"});
            },
            py::arg("config_hash") = "");
    m.def("load", [](const std::string& text) { return load_archive(text); }, py::arg("text"));

    m.def("canonical_config", [](const std::string& text) { return to_text(parse_config(text)); }, py::arg("text"));
    m.def(
        "fit",
        [](const std::string& config, const std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>>& data) {
            FitOutput out = fit(parse_config(config), to_set(data));
            return py::make_tuple(std::move(out.model), out.report.to_text());
        },
        py::arg("config"), py::arg("data"), "Returns (model, report text).");
}
