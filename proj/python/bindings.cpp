#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <set>

#include "safepomcp/harness.hpp"

namespace py = pybind11;
using namespace safepomcp;

namespace {

using ModelPtr = std::shared_ptr<Pomdp>;

BeliefSupport to_support(const Pomdp& m, const std::set<std::string>& names) {
    BeliefSupport u = m.empty_support();
    for (const auto& n : names) {
        auto s = m.find_state(n);
        if (!s) throw py::key_error("unknown state " + n);
        u.insert(*s);
    }
    return u;
}

std::set<std::string> to_names(const Pomdp& m, const BeliefSupport& u) {
    std::set<std::string> out;
    u.for_each([&](StateId s) { out.insert(m.state_name(s)); });
    return out;
}

ShieldMode to_mode(const std::string& name) {
    auto mode = parse_shield_mode(name);
    if (!mode) throw py::value_error("unknown shield mode " + name);
    return *mode;
}

PlannerConfig planner(std::size_t simulations, std::size_t particles, int depth, std::optional<double> ucb_c) {
    PlannerConfig cfg;
    cfg.simulations = simulations;
    cfg.particles = particles;
    cfg.depth = depth;
    cfg.ucb_c = ucb_c;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Shielded POMCP planning with almost-sure reach-avoid winning regions";

    py::register_exception<ModelError>(mod, "ModelError", PyExc_ValueError);
    py::register_exception<SafetyViolation>(mod, "SafetyViolation");
    py::register_exception<RegionTimeout>(mod, "RegionTimeout");
    py::register_exception<GraphCapExceeded>(mod, "GraphCapExceeded");

    py::class_<Pomdp, ModelPtr>(mod, "Model")
        .def_property_readonly("num_states", &Pomdp::num_states)
        .def_property_readonly("num_actions", &Pomdp::num_actions)
        .def_property_readonly("num_observations", &Pomdp::num_observations)
        .def_property_readonly("states",
                               [](const Pomdp& m) {
                                   std::vector<std::string> out;
                                   for (StateId s = 0; s < m.num_states(); ++s) out.push_back(m.state_name(s));
                                   return out;
                               })
        .def_property_readonly("actions",
                               [](const Pomdp& m) {
                                   std::vector<std::string> out;
                                   for (ActionId a = 0; a < m.num_actions(); ++a) out.push_back(m.action_name(a));
                                   return out;
                               })
        .def_property_readonly("reach", [](const Pomdp& m) { return to_names(m, m.reach()); })
        .def_property_readonly("avoid", [](const Pomdp& m) { return to_names(m, m.avoid()); })
        .def_property_readonly("initial_support", [](const Pomdp& m) { return to_names(m, m.initial_support()); })
        .def("serialize", &serialize_model)
        .def("save", [](const Pomdp& m, const std::string& path) { save_model(m, path); })
        .def("post",
             [](const Pomdp& m, const std::set<std::string>& u, const std::string& action,
                const std::string& observation) {
                 auto a = m.find_action(action);
                 auto o = m.find_observation(observation);
                 if (!a) throw py::key_error("unknown action " + action);
                 if (!o) throw py::key_error("unknown observation " + observation);
                 return to_names(m, support_post(m, to_support(m, u), *a, *o));
             },
             py::arg("support"), py::arg("action"), py::arg("observation"))
        .def("__repr__", [](const Pomdp& m) {
            return "<Model " + std::to_string(m.num_states()) + " states, " + std::to_string(m.num_actions()) +
                   " actions>";
        });

    mod.def("parse_model", [](const std::string& text) { return std::make_shared<Pomdp>(parse_model(text)); });
    mod.def("load_model", [](const std::string& path) { return std::make_shared<Pomdp>(load_model(path)); });
    mod.def("generate",
            [](const std::string& spec_json) {
                return std::make_shared<Pomdp>(generate(grid_spec_from_json(spec_json)));
            },
            py::arg("spec_json"), "Model from a grid spec JSON document, e.g. '{\"preset\": \"fig1\"}'.");
    mod.def("layout_preview", [](const std::string& spec_json) { return layout_preview(grid_spec_from_json(spec_json)); });

    py::class_<WinningRegion, std::shared_ptr<WinningRegion>>(mod, "WinningRegion")
        .def("__contains__",
             [](const WinningRegion& w, const std::set<std::string>& u) { return w.contains(to_support(w.model(), u)); })
        .def_property_readonly("antichain",
                               [](const WinningRegion& w) {
                                   std::vector<std::set<std::string>> out;
                                   for (const auto& e : w.antichain()) out.push_back(to_names(w.model(), e));
                                   return out;
                               })
        .def("allowed_actions",
             [](const WinningRegion& w, const std::set<std::string>& u) {
                 std::vector<std::string> out;
                 for (auto a : allowed_actions(w, w.model(), to_support(w.model(), u)))
                     out.push_back(w.model().action_name(a));
                 return out;
             })
        .def("verify", &verify_region)
        .def("save", [](const WinningRegion& w, const std::string& path) { save_region(w, path); });

    mod.def("winning_region",
            [](ModelPtr m, std::size_t max_vertices) {
                RegionOptions opts;
                opts.max_vertices = max_vertices;
                py::gil_scoped_release release;
                return std::make_shared<WinningRegion>(compute_winning_region(std::move(m), opts));
            },
            py::arg("model"), py::arg("max_vertices") = RegionOptions{}.max_vertices);

    py::class_<FactoredRegion, std::shared_ptr<FactoredRegion>>(mod, "FactoredRegion")
        .def("__contains__",
             [](const FactoredRegion& f, const std::set<std::string>& u) {
                 return f.union_contains(to_support(f.model(), u));
             })
        .def_property_readonly("labels",
                               [](const FactoredRegion& f) {
                                   std::vector<std::string> out;
                                   for (const auto& s : f.submodels()) out.push_back(s.label);
                                   return out;
                               })
        .def("save", [](const FactoredRegion& f, const std::string& path) { save_factored_region(f, path); });

    mod.def("factored_region",
            [](ModelPtr m) {
                py::gil_scoped_release release;
                return std::make_shared<FactoredRegion>(compute_factored_region(std::move(m)));
            },
            py::arg("model"));

    mod.def("shield_modes", [] {
        std::vector<std::string> out;
        for (auto mode : kAllModes) out.emplace_back(to_string(mode));
        return out;
    });

    mod.def("run_episode",
            [](ModelPtr m, const std::string& mode, std::uint64_t seed, std::shared_ptr<WinningRegion> central,
               std::shared_ptr<FactoredRegion> factored, std::size_t simulations, std::size_t particles, int depth,
               std::optional<double> ucb_c, std::size_t step_cap) {
                EpisodeOptions opts;
                opts.step_cap = step_cap;
                const auto cfg = planner(simulations, particles, depth, ucb_c);
                const auto shield_mode = to_mode(mode);
                EpisodeMetrics r;
                {
                    py::gil_scoped_release release;
                    r = run_episode(std::move(m), RegionHandle{central, factored}, shield_mode, cfg, seed, opts);
                }
                py::dict out;
                out["steps"] = r.steps;
                out["return"] = r.ret;
                out["unsafe"] = r.unsafe;
                out["reached"] = r.reached;
                out["step_time_mean_s"] = r.step_time_mean_s;
                out["step_time_median_s"] = r.step_time_median_s;
                out["root_pruned"] = r.shield.root_pruned;
                out["branches_pruned"] = r.shield.branches_pruned;
                out["membership_queries"] = r.shield.membership_queries;
                return out;
            },
            py::arg("model"), py::arg("mode") = "none", py::arg("seed") = 0, py::arg("central") = nullptr,
            py::arg("factored") = nullptr, py::arg("simulations") = 2000, py::arg("particles") = 1000,
            py::arg("depth") = 100, py::arg("ucb_c") = std::nullopt, py::arg("step_cap") = 200);
}
