// SPDX-License-Identifier: Apache-2.0
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "riskit/channel.hpp"
#include "riskit/cli.hpp"
#include "riskit/errors.hpp"
#include "riskit/estimation.hpp"
#include "riskit/localize.hpp"
#include "riskit/optimize.hpp"
#include "riskit/sparse.hpp"

namespace py = pybind11;
using namespace riskit;

namespace {

estimation::TrainingKind training_kind(const std::string& s)
{
    if (s == "onoff")
        return estimation::TrainingKind::onoff;
    if (s == "dft")
        return estimation::TrainingKind::dft;
    if (s == "hadamard")
        return estimation::TrainingKind::hadamard;
    throw DomainError("unknown training kind '" + s + "' (onoff, dft, hadamard)");
}

estimation::TrainingMatrix as_training(const CMat& phi)
{
    estimation::TrainingMatrix t;
    t.phi = phi;
    return t;
}

optimize::DownlinkInstance make_instance(const std::vector<CMat>& g, const std::vector<CVec>& hd, const RVec& sigma2,
                                         const CMat& w)
{
    optimize::DownlinkInstance inst;
    inst.g = g;
    inst.hd = hd;
    inst.sigma2 = sigma2;
    inst.w = w;
    inst.validate();
    return inst;
}

optimize::OptimizerReport run_optimizer(const std::string& method, const optimize::SmoothObjective& obj,
                                        const CVec& theta0, int iters, std::uint64_t seed)
{
    using namespace optimize;
    if (method == "mm") {
        MmOptions o;
        o.iters = iters;
        return optimize_mm(obj, theta0, o);
    }
    if (method == "ccm") {
        CcmOptions o;
        o.iters = iters;
        return optimize_ccm(obj, theta0, o);
    }
    if (method == "gd") {
        GdOptions o;
        o.iters = iters;
        return optimize_gd(obj, theta0, o);
    }
    if (method == "apg") {
        ApgOptions o;
        o.iters = iters;
        return optimize_apg(obj, theta0, o);
    }
    if (method == "bcd") {
        BcdOptions o;
        o.sweeps = std::max(1, iters / 10);
        return optimize_bcd(obj, theta0, o);
    }
    if (method == "admm") {
        AdmmOptions o;
        o.iters = iters;
        return optimize_admm(obj, theta0, o);
    }
    if (method == "barrier") {
        BarrierOptions o;
        o.iters = iters;
        return optimize_barrier(obj, theta0, o);
    }
    if (method == "ga") {
        GaOptions o;
        o.generations = iters;
        o.seed = seed;
        return optimize_ga([&obj](const CVec& x) { return obj.value(x); }, static_cast<int>(theta0.size()), o,
                           theta0);
    }
    if (method == "nsp") {
        NspOptions o;
        o.iters = iters;
        return optimize_nsp(obj, theta0, o);
    }
    throw DomainError("unknown optimizer '" + method + "'");
}

py::dict tables_to_python(const cli::ScenarioOutput& out)
{
    py::dict tables;
    for (const auto& t : out.tables) {
        py::dict cols;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            py::list col;
            for (const auto& row : t.rows) {
                if (const double* v = std::get_if<double>(&row[c]))
                    col.append(*v);
                else
                    col.append(std::get<std::string>(row[c]));
            }
            cols[py::str(t.columns[c])] = col;
        }
        tables[py::str(t.name)] = cols;
    }
    return tables;
}

} // namespace

PYBIND11_MODULE(_riskit, m)
{
    m.doc() = "RIS link-level simulation core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<SingularError>(m, "SingularError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    // channel
    m.def("exp_correlation_matrix", &channel::exp_correlation_matrix, py::arg("n"), py::arg("rho"));
    m.def("ula_steering", &channel::ula_steering, py::arg("omega"), py::arg("n"));
    m.def("upa_steering", &channel::upa_steering, py::arg("omega_x"), py::arg("omega_z"), py::arg("m_x"),
          py::arg("m_z"));
    m.def("cascaded_channel", &channel::cascaded_channel, py::arg("h"), py::arg("hr"));
    m.def(
        "rayleigh_channels",
        [](int n_bs, int m_ris, int k_users, std::uint64_t seed) {
            channel::SystemDims d;
            d.n_bs = n_bs;
            d.m_ris = m_ris;
            d.k_users = k_users;
            const auto ch = channel::gen_unstructured(d, channel::RicianConfig{}, seed);
            return py::make_tuple(ch.h, ch.hr, ch.hd);
        },
        py::arg("n_bs"), py::arg("m_ris"), py::arg("k_users"), py::arg("seed"),
        "Draw (H, [h_r], [h_d]) with i.i.d. unit-variance Rayleigh entries.");
    m.def("fraunhofer_distance", &channel::fraunhofer_distance, py::arg("aperture"), py::arg("wavelength"));
    m.def(
        "pathloss_db",
        [](const std::string& kind, const std::vector<double>& d, double fc, double exponent, double shadow) {
            if (kind != "direct" && kind != "reflected")
                throw DomainError("link kind must be 'direct' or 'reflected'");
            return channel::pathloss_db(kind == "direct" ? channel::LinkKind::direct : channel::LinkKind::reflected,
                                        d, fc, exponent, shadow);
        },
        py::arg("kind"), py::arg("distances"), py::arg("fc_hz"), py::arg("exponent"), py::arg("shadow_db") = 0.0);

    // estimation
    m.def(
        "training_matrix", [](const std::string& kind, int m_ris, int t) { return estimation::build_training(training_kind(kind), m_ris, t).phi; },
        py::arg("kind"), py::arg("m"), py::arg("t") = 0);
    m.def(
        "observe",
        [](const CVec& c, const CMat& phi, double p, double sigma2, std::uint64_t seed) {
            Rng rng(seed);
            return estimation::observe(c, as_training(phi), p, sigma2, rng).y;
        },
        py::arg("c"), py::arg("phi"), py::arg("p"), py::arg("sigma2"), py::arg("seed"),
        "Stacked received pilots for c = [h_d; vec(G)], unit pilot symbols.");
    m.def(
        "ls_estimate",
        [](const CVec& y, const CMat& phi, double p) {
            estimation::StackedObservation obs;
            obs.y = y;
            obs.x = CVec::Ones(phi.rows());
            obs.p = p;
            return estimation::ls_estimate(obs, as_training(phi), false).c_hat;
        },
        py::arg("y"), py::arg("phi"), py::arg("p") = 1.0);
    m.def(
        "lmmse_estimate",
        [](const CVec& y, const CMat& phi, const CMat& ccc, double p, double sigma2) {
            estimation::StackedObservation obs;
            obs.y = y;
            obs.x = CVec::Ones(phi.rows());
            obs.p = p;
            obs.sigma2 = sigma2;
            return estimation::LmmseFilter(as_training(phi), ccc, p, sigma2).apply(obs);
        },
        py::arg("y"), py::arg("phi"), py::arg("ccc"), py::arg("p"), py::arg("sigma2"));

    // sparse
    m.def(
        "omp",
        [](const CVec& y, const CMat& a, int max_atoms, double tol) {
            const auto s = sparse::omp_solve(y, a, max_atoms, tol);
            return py::make_tuple(s.support, s.gains, s.residual_norm);
        },
        py::arg("y"), py::arg("a"), py::arg("max_atoms"), py::arg("tol") = 0.0,
        "Orthogonal matching pursuit; returns (support, gains, residual_norm).");

    // optimize
    m.def(
        "sum_rate",
        [](const std::vector<CMat>& g, const std::vector<CVec>& hd, const RVec& sigma2, const CMat& w,
           const CVec& theta) { return optimize::sinr_and_rate(make_instance(g, hd, sigma2, w), theta).sum_rate; },
        py::arg("g"), py::arg("hd"), py::arg("sigma2"), py::arg("w"), py::arg("theta"));
    m.def(
        "optimize_phases",
        [](const std::string& method, const std::vector<CMat>& g, const std::vector<CVec>& hd, const RVec& sigma2,
           const CMat& w, const CVec& theta0, int iters, std::uint64_t seed) {
            const optimize::SumRateObjective obj(make_instance(g, hd, sigma2, w));
            const auto rep = run_optimizer(method, obj, theta0, iters, seed);
            return py::make_tuple(rep.theta, rep.trace);
        },
        py::arg("method"), py::arg("g"), py::arg("hd"), py::arg("sigma2"), py::arg("w"), py::arg("theta0"),
        py::arg("iters") = 100, py::arg("seed") = 1,
        "Maximise the sum rate over unit-modulus phases with fixed beams; returns (theta, trace).");
    m.def("project_unit_modulus", &optimize::project_unit_modulus, py::arg("z"));
    m.def("discrete_set", &optimize::discrete_set, py::arg("bits"), py::arg("rotated") = false);
    m.def("discretize_round", &optimize::discretize_round, py::arg("theta"), py::arg("bits"),
          py::arg("rotated") = false);

    // localize
    m.def(
        "chan_solve",
        [](const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref) {
            return localize::chan_solve(tdoa, anchors, ref);
        },
        py::arg("tdoa"), py::arg("anchors"), py::arg("ref"));
    m.def(
        "taylor_solve",
        [](const std::vector<double>& tdoa, const std::vector<Vec3>& anchors, const Vec3& ref,
           const Eigen::Vector2d& init, int max_iters) {
            localize::TaylorOptions o;
            o.max_iters = max_iters;
            return localize::taylor_solve(tdoa, anchors, ref, init, o).position;
        },
        py::arg("tdoa"), py::arg("anchors"), py::arg("ref"), py::arg("init"), py::arg("max_iters") = 50);

    // scenarios
    m.def("scenario_names", &cli::scenario_names);
    m.def("scenario_defaults", [](const std::string& name) { return cli::scenario_defaults(name).dump(); },
          py::arg("name"), "Default parameters as a JSON string.");
    m.def(
        "run_scenario",
        [](const std::string& scenario, std::uint64_t seed, int trials, const std::string& params_json) {
            cli::ExperimentConfig c;
            c.scenario = scenario;
            c.seed = seed;
            c.trials = trials;
            try {
                c.params = cli::Json::parse(params_json);
            } catch (const cli::Json::exception& e) {
                throw ConfigError(std::string("params: ") + e.what());
            }
            cli::ScenarioOutput out;
            {
                py::gil_scoped_release release;
                out = cli::run_scenario(c);
            }
            return tables_to_python(out);
        },
        py::arg("scenario"), py::arg("seed") = 1, py::arg("trials") = 0, py::arg("params_json") = "{}");
}
