// Python bindings for the main operations: closed forms, classification,
// operator residuals, bankruptcy values, and the Monte Carlo engines.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "merton/dual.hpp"
#include "merton/hjb.hpp"

namespace py = pybind11;
using namespace merton;

namespace {

Policy policy_from_arg(const py::object& arg) {
    if (py::isinstance<PolicyConstant>(arg)) {
        return arg.cast<PolicyConstant>();
    }
    if (py::isinstance<py::str>(arg)) {
        const auto name = arg.cast<std::string>();
        if (name == "wild") {
            return PolicyWildInvestment{};
        }
        if (name == "fast") {
            return PolicyFastConsumption{};
        }
        throw std::invalid_argument("unknown policy name '" + name + "'");
    }
    throw std::invalid_argument("policy must be a ConstantPolicy or 'wild'/'fast'");
}

py::dict estimate_dict(const McEstimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["std_error"] = e.std_error;
    d["ci95_lo"] = e.ci95_lo;
    d["ci95_hi"] = e.ci95_hi;
    d["n_effective"] = e.n_effective;
    d["tail_bound"] = e.tail_bound ? py::cast(*e.tail_bound) : py::none();
    d["divergent"] = e.divergent;
    d["horizon_warning"] = e.horizon_warning;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Closed-form solution and numerical verification toolkit for the "
                "infinite-horizon investment-consumption problem";

    py::register_exception<IllPosedError>(mod, "IllPosedError", PyExc_ValueError);

    py::class_<MarketParams>(mod, "MarketParams")
        .def(py::init<double, double, double>(), py::arg("r"), py::arg("mu"), py::arg("sigma"))
        .def_readonly("r", &MarketParams::r)
        .def_readonly("mu", &MarketParams::mu)
        .def_readonly("sigma", &MarketParams::sigma)
        .def("sharpe", &MarketParams::sharpe)
        .def("__repr__", [](const MarketParams& m) {
            return "MarketParams(r=" + std::to_string(m.r) + ", mu=" + std::to_string(m.mu)
                 + ", sigma=" + std::to_string(m.sigma) + ")";
        });

    py::class_<AgentParams>(mod, "AgentParams")
        .def(py::init<double, double>(), py::arg("R"), py::arg("delta"))
        .def_readonly("R", &AgentParams::R)
        .def_readonly("delta", &AgentParams::delta)
        .def("log_utility", &AgentParams::log_utility)
        .def("__repr__", [](const AgentParams& a) {
            return "AgentParams(R=" + std::to_string(a.R) + ", delta="
                 + std::to_string(a.delta) + ")";
        });

    py::class_<WellPosedness>(mod, "WellPosedness")
        .def_property_readonly("tag",
                               [](const WellPosedness& w) { return std::string(to_string(w.tag)); })
        .def_readonly("rate", &WellPosedness::rate)
        .def_readonly("margin", &WellPosedness::margin)
        .def("well_posed", &WellPosedness::well_posed);

    py::class_<ClosedFormSolution>(mod, "ClosedFormSolution")
        .def_readonly("pi_hat", &ClosedFormSolution::pi_hat)
        .def_readonly("xi_hat", &ClosedFormSolution::xi_hat)
        .def_readonly("log_utility", &ClosedFormSolution::log_utility)
        .def("value", &ClosedFormSolution::value, py::arg("x"))
        .def("value_dx", &ClosedFormSolution::value_dx, py::arg("x"))
        .def("value_dxx", &ClosedFormSolution::value_dxx, py::arg("x"));

    py::class_<BankruptcyValue>(mod, "BankruptcyValue")
        .def_readonly("P", &BankruptcyValue::P)
        .def_readonly("nu", &BankruptcyValue::nu)
        .def("value", &BankruptcyValue::value, py::arg("x"))
        .def("consumption", &BankruptcyValue::consumption, py::arg("x"))
        .def("forward", &BankruptcyValue::forward, py::arg("c"));

    py::class_<PolicyConstant>(mod, "ConstantPolicy")
        .def(py::init<double, double>(), py::arg("pi"), py::arg("xi"))
        .def_readonly("pi", &PolicyConstant::pi)
        .def_readonly("xi", &PolicyConstant::xi);

    py::class_<SimConfig>(mod, "SimConfig")
        .def(py::init([](std::uint64_t seed, std::int64_t n_paths, double dt, double horizon,
                         bool antithetic) {
                 SimConfig cfg{seed, n_paths, dt, horizon, antithetic};
                 cfg.validate();
                 return cfg;
             }),
             py::arg("seed") = 12345, py::arg("n_paths") = 10000, py::arg("dt") = 0.01,
             py::arg("horizon") = 1.0, py::arg("antithetic") = true)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("horizon", &SimConfig::horizon)
        .def_readwrite("antithetic", &SimConfig::antithetic);

    mod.def("sharpe_ratio", &sharpe_ratio, py::arg("market"));
    mod.def("eta", &eta, py::arg("market"), py::arg("agent"));
    mod.def("classify", &classify, py::arg("market"), py::arg("agent"));
    mod.def("numeraire_shift", &numeraire_shift, py::arg("market"), py::arg("agent"),
            py::arg("gamma"));
    mod.def("impatience_rate", &impatience_rate, py::arg("market"), py::arg("agent"));

    mod.def("F", &F, py::arg("pi"), py::arg("xi"), py::arg("market"), py::arg("agent"));
    mod.def("constant_policy_value", &constant_policy_value, py::arg("pi"), py::arg("xi"),
            py::arg("x"), py::arg("market"), py::arg("agent"));
    mod.def("merton_solution", &merton_solution, py::arg("market"), py::arg("agent"));
    mod.def("perturbed_value", &perturbed_value, py::arg("eps"), py::arg("x"), py::arg("market"),
            py::arg("agent"));
    mod.def("klss_nu", &klss_nu, py::arg("market"), py::arg("agent"));
    mod.def("klss_solution", &klss_solution, py::arg("P"), py::arg("market"), py::arg("agent"));
    mod.def("klss_value", &klss_value, py::arg("P"), py::arg("x"), py::arg("market"),
            py::arg("agent"));

    mod.def(
        "hjb_residual",
        [](const ClosedFormSolution& sol, const std::vector<double>& grid,
           const MarketParams& m, const AgentParams& a) {
            return hjb_residual(sol, grid, m, a);
        },
        py::arg("solution"), py::arg("x_grid"), py::arg("market"), py::arg("agent"));
    mod.def(
        "maximize_L",
        [](double x, double v, double v_x, double v_xx, const MarketParams& m,
           const AgentParams& a) {
            const Maximizer mx = maximize_L(x, ValueBundle{v, v_x, v_xx}, m, a);
            return py::make_tuple(mx.pi_star, mx.c_star, mx.L_star);
        },
        py::arg("x"), py::arg("v"), py::arg("v_x"), py::arg("v_xx"), py::arg("market"),
        py::arg("agent"));
    mod.def(
        "L",
        [](double pi, double c, double x, double v, double v_x, double v_xx,
           const MarketParams& m, const AgentParams& a) {
            return L(pi, c, x, ValueBundle{v, v_x, v_xx}, m, a);
        },
        py::arg("pi"), py::arg("c"), py::arg("x"), py::arg("v"), py::arg("v_x"),
        py::arg("v_xx"), py::arg("market"), py::arg("agent"));
    mod.def("davis_norman_residual", &davis_norman_residual, py::arg("zeta"), py::arg("x"),
            py::arg("market"), py::arg("agent"));

    mod.def(
        "mc_value",
        [](double x, const py::object& policy, const SimConfig& cfg, const MarketParams& m,
           const AgentParams& a) {
            McEstimate e;
            {
                py::gil_scoped_release release;
                e = mc_value(x, policy_from_arg(policy), cfg, m, a);
            }
            return estimate_dict(e);
        },
        py::arg("x"), py::arg("policy"), py::arg("config"), py::arg("market"), py::arg("agent"));
    mod.def(
        "transversality_probe",
        [](double x, const py::object& policy, const std::vector<double>& times,
           const SimConfig& cfg, const MarketParams& m, const AgentParams& a) {
            std::vector<McEstimate> es;
            {
                py::gil_scoped_release release;
                es = transversality_probe(x, policy_from_arg(policy), times, cfg, m, a);
            }
            py::list out;
            for (const auto& e : es) {
                out.append(estimate_dict(e));
            }
            return out;
        },
        py::arg("x"), py::arg("policy"), py::arg("times"), py::arg("config"), py::arg("market"),
        py::arg("agent"));
    mod.def(
        "counterexample",
        [](const std::string& which, double x, const SimConfig& cfg, const MarketParams& m,
           const AgentParams& a) {
            CounterexampleResult res;
            {
                py::gil_scoped_release release;
                res = which == "wild" ? counterexample_wild(x, cfg, m, a, 0)
                       : which == "fast"
                           ? counterexample_fast_consumption(x, cfg, m, a, 0)
                           : throw std::invalid_argument("which must be 'wild' or 'fast'");
            }
            py::dict d;
            d["fraction_hit"] = res.stats.fraction_hit;
            d["threshold"] = res.stats.threshold;
            d["n_at_hit"] = estimate_dict(res.stats.n_probe);
            d["min_wealth"] = res.stats.min_wealth;
            d["max_abs_investment"] = res.stats.max_abs_investment;
            return d;
        },
        py::arg("which"), py::arg("x"), py::arg("config"), py::arg("market"), py::arg("agent"));
    mod.def(
        "mc_perturbed_value",
        [](double x, double eps, const SimConfig& cfg, const MarketParams& m,
           const AgentParams& a) {
            McEstimate e;
            {
                py::gil_scoped_release release;
                e = mc_perturbed_value(x, eps, cfg, m, a);
            }
            return estimate_dict(e);
        },
        py::arg("x"), py::arg("eps"), py::arg("config"), py::arg("market"), py::arg("agent"));
}
