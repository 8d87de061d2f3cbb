#include "crda/adversary.hpp"
#include "crda/error.hpp"
#include "crda/grid_model.hpp"
#include "crda/milp.hpp"
#include "crda/oracle_sim.hpp"
#include "crda/planning.hpp"
#include "crda/sampling.hpp"
#include "crda/spectral.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace crda;

namespace {

// Plans and manifests cross the boundary as JSON text; the Python side parses them.
std::string plan_json(const RecoveryPlan& plan, const GridCase& grid) {
  nlohmann::json j = plan_to_json(plan, grid);
  const PlanReport r = plan_report(plan, grid.planner);
  j["summary"] = {{"gain_total", r.gain_total},
                  {"droop_cost", r.droop_cost},
                  {"gain_reset_step", r.gain_reset_step},
                  {"full_repair_step", r.full_repair_step},
                  {"solve_seconds", plan.solve_seconds}};
  return j.dump();
}

SolveOptions options_for(const GridCase& grid, std::optional<double> time_limit, const std::string& backend) {
  SolveOptions o = default_solve_options(grid);
  if (time_limit) o.limits.time_limit = *time_limit;
  o.backend = backend;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Recovery planning core: grid model, spectral tools, MILP planner and oracles";

  auto base = py::register_exception<std::runtime_error>(m, "CrdaError", PyExc_RuntimeError);
  py::register_exception<CaseError>(m, "CaseError", base.ptr());
  py::register_exception<ModelError>(m, "ModelError", base.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());

  py::class_<GridCase>(m, "GridCase")
      .def_readonly("name", &GridCase::name)
      .def_property_readonly("num_compromised", &GridCase::num_compromised)
      .def_property_readonly("num_scenarios", &GridCase::num_scenarios)
      .def_property_readonly("horizon", [](const GridCase& g) { return g.planner.horizon; })
      .def_property_readonly("samples", [](const GridCase& g) { return g.planner.samples; })
      .def_property_readonly("attack_buses",
                             [](const GridCase& g) {
                               std::vector<BusId> out;
                               for (const auto& b : g.attack.buses) out.push_back(b.bus);
                               return out;
                             })
      .def_property_readonly("hash", [](const GridCase& g) { return case_hash(g); })
      .def("__repr__", [](const GridCase& g) {
        return "<GridCase " + g.name + ": " + std::to_string(g.num_compromised()) + " compromised buses>";
      });

  m.def("load_case", [](const std::filesystem::path& p) { return load_case(p); }, py::arg("path"));
  m.def("parse_case", [](const std::string& text) { return parse_case(nlohmann::json::parse(text)); },
        py::arg("json_text"));

  m.def("attack_gain_bounds", &attack_gain_bound_vector, py::arg("grid"));
  m.def(
      "system_matrix",
      [](const GridCase& g, const std::vector<double>& attack, const std::vector<double>& droop) {
        return assemble_system_matrix(g, attack, droop).state;
      },
      py::arg("grid"), py::arg("attack_gains"), py::arg("droop_gains"));
  m.def(
      "spectral_abscissa",
      [](const GridCase& g, const std::vector<double>& attack, const std::vector<double>& droop) {
        return spectral_abscissa(assemble_system_matrix(g, attack, droop).state);
      },
      py::arg("grid"), py::arg("attack_gains"), py::arg("droop_gains"));

  m.def("scenario_index", &scenario_index, py::arg("availability"));
  m.def("index_to_availability", &index_to_availability, py::arg("m"), py::arg("buses"));
  m.def(
      "order_matrix", [](int n, int d) -> Eigen::MatrixXi { return order_matrix(n, d); }, py::arg("samples"),
      py::arg("dims"));
  m.def(
      "worst_case_gains",
      [](const GridCase& g, int scenario) {
        const WorstCaseGains w = worst_case_gains(g, scenario);
        return py::make_tuple(w.gains, w.abscissa);
      },
      py::arg("grid"), py::arg("scenario"));

  py::class_<PlanningInputs>(m, "PlanningInputs")
      .def_property_readonly("samples", [](const PlanningInputs& in) { return in.table.samples; })
      .def_property_readonly("threshold", [](const PlanningInputs& in) { return in.table.threshold; })
      .def_property_readonly("records", [](const PlanningInputs& in) { return in.table.total_records(); })
      .def_property_readonly("max_error", [](const PlanningInputs& in) { return max_sample_error(in.table); })
      .def_property_readonly("attack_gains", &PlanningInputs::attack_gains);

  m.def(
      "compute_inputs",
      [](const GridCase& g, std::optional<int> samples, std::optional<double> threshold) {
        py::gil_scoped_release release;
        return compute_inputs(g, samples.value_or(g.planner.samples),
                              threshold.value_or(g.planner.estimation_threshold));
      },
      py::arg("grid"), py::arg("samples") = py::none(), py::arg("threshold") = py::none());

  m.def(
      "solve_joint",
      [](const GridCase& g, const PlanningInputs& in, std::optional<double> time_limit, const std::string& backend) {
        RecoveryPlan p;
        {
          py::gil_scoped_release release;
          p = solve_joint(g, in, options_for(g, time_limit, backend));
        }
        return plan_json(p, g);
      },
      py::arg("grid"), py::arg("inputs"), py::arg("time_limit") = py::none(), py::arg("backend") = "");
  m.def(
      "solve_decoupled",
      [](const GridCase& g, const PlanningInputs& in, std::optional<double> time_limit, const std::string& backend) {
        RecoveryPlan p;
        {
          py::gil_scoped_release release;
          p = solve_decoupled(g, in, options_for(g, time_limit, backend));
        }
        return plan_json(p, g);
      },
      py::arg("grid"), py::arg("inputs"), py::arg("time_limit") = py::none(), py::arg("backend") = "");

  m.def(
      "oracle_optimum",
      [](const GridCase& g, const PlanningInputs& in, bool exact) {
        OracleResult r;
        {
          py::gil_scoped_release release;
          r = oracle_optimum(g, in.table, in.attack_gains(), exact ? StabilityModel::Exact : StabilityModel::Linearized);
        }
        py::dict d;
        d["feasible"] = r.feasible;
        d["objective"] = r.objective;
        d["gain_total"] = r.gain_total;
        d["plans"] = r.plans;
        d["feasible_plans"] = r.feasible_plans;
        d["routes"] = r.plan.routes;
        return d;
      },
      py::arg("grid"), py::arg("inputs"), py::arg("exact") = false);

  m.def(
      "export_lp",
      [](const GridCase& g, const PlanningInputs& in, const std::string& stage) {
        const SolveOptions o = default_solve_options(g);
        if (stage == "joint") return milp::export_lp(build_joint_model(g, in, o));
        if (stage == "routing") return milp::export_lp(build_routing_model(g, o));
        throw ModelError("unknown stage " + stage + " (joint or routing)");
      },
      py::arg("grid"), py::arg("inputs"), py::arg("stage") = "joint");

  m.def(
      "simulate",
      [](const GridCase& g, const std::vector<double>& attack, const std::vector<double>& droop, double horizon,
         double step, double perturbation, std::optional<BusId> generator) {
        const SystemMatrix sys = assemble_system_matrix(g, attack, droop);
        const BusId gen = generator.value_or(g.generators.front().bus);
        SimulationOptions o;
        o.omega_max = g.attack.omega_max;
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = simulate(sys, perturbed_equilibrium(g, sys, gen, perturbation), horizon, step, o);
        }
        py::dict d;
        d["time"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(t.time.data(), static_cast<Eigen::Index>(t.time.size())));
        d["states"] = t.states;
        d["diverged"] = t.diverged;
        d["divergence_time"] = t.divergence_time;
        d["max_abs_omega"] = t.max_abs_omega;
        return d;
      },
      py::arg("grid"), py::arg("attack_gains"), py::arg("droop_gains"), py::arg("horizon") = 30.0,
      py::arg("step") = 0.01, py::arg("perturbation") = 0.01, py::arg("generator") = py::none());

  m.def("available_backends", &milp::available_backends);
}
