#include "crda/adversary.hpp"
#include "crda/cache.hpp"
#include "crda/error.hpp"
#include "crda/oracle_sim.hpp"
#include "crda/planning.hpp"
#include "crda/spectral.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kParse = 2, kInfeasible = 3, kBudget = 4, kBackend = 5 };

struct Common {
  std::string case_path;
  std::string out_dir = "out";
  std::string cache_dir = ".crda-cache";
  bool rebuild = false;
  int samples = 0;          // 0: planner default
  double threshold = -1.0;  // < 0: planner default
  double time_limit = -1.0;
  std::string backend;
  bool verbose = false;
};

class Clock {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Everything a run produced; solver-dependent numbers live here, not in plan files.
class Manifest {
 public:
  Manifest(const std::string& command, const crda::GridCase& grid, const Common& c) {
    doc_["command"] = command;
    doc_["case"] = c.case_path;
    doc_["case_hash"] = crda::case_hash(grid);
    doc_["parameters"] = {{"samples", grid.planner.samples},
                          {"threshold", grid.planner.estimation_threshold},
                          {"big_m", grid.planner.big_m},
                          {"epsilon", grid.planner.epsilon},
                          {"stability_margin", grid.planner.stability_margin},
                          {"time_limit", grid.planner.time_limit},
                          {"mip_gap", grid.planner.mip_gap},
                          {"horizon", grid.planner.horizon}};
    doc_["artifacts"] = json::array();
    doc_["timings"] = json::object();
    dir_ = c.out_dir;
    name_ = command + ".manifest.json";
  }

  void artifact(const fs::path& path, const std::string& kind, bool reused = false) {
    doc_["artifacts"].push_back({{"path", path.string()}, {"kind", kind}, {"reused", reused}});
  }
  void timing(const std::string& key, double seconds) { doc_["timings"][key] = seconds; }
  json& operator[](const std::string& key) { return doc_[key]; }

  void cache(const crda::ArtifactCache& cache) {
    for (const auto& [path, reused] : cache.touched()) artifact(path, "cache", reused);
  }

  void write() {
    fs::create_directories(dir_);
    const fs::path path = dir_ / name_;
    artifact(path, "manifest");
    std::ofstream(path) << doc_.dump(2) << "\n";
  }

 private:
  json doc_;
  fs::path dir_;
  std::string name_;
};

crda::GridCase load(Common& c) {
  crda::GridCase grid = crda::load_case(c.case_path);
  if (c.samples > 0) grid.planner.samples = c.samples;
  if (c.threshold >= 0.0) grid.planner.estimation_threshold = c.threshold;
  if (c.time_limit > 0.0) grid.planner.time_limit = c.time_limit;
  return grid;
}

crda::SolveOptions solve_options(const crda::GridCase& grid, const Common& c) {
  crda::SolveOptions o = crda::default_solve_options(grid);
  o.backend = c.backend;
  o.limits.verbose = c.verbose;
  return o;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw crda::ModelError("cannot write " + path.string());
  out << text;
}

void record_solve(Manifest& m, const std::string& key, const crda::RecoveryPlan& plan) {
  m[key] = {{"status", crda::milp::to_string(plan.status)},
            {"backend", plan.backend},
            {"solve_seconds", plan.solve_seconds},
            {"nodes", plan.nodes},
            {"variables", plan.variables},
            {"constraints", plan.constraints},
            {"stability_rows", plan.stability_rows}};
}

void print_plan(const crda::RecoveryPlan& plan, const crda::GridCase& grid) {
  const crda::PlanReport r = crda::plan_report(plan, grid.planner);
  std::printf("%s: %s, objective %.6f\n", plan.method.c_str(), crda::milp::to_string(plan.status), plan.objective);
  for (const auto& route : plan.routes) {
    std::printf("  %s: %s", route.crew.c_str(), grid.crews.start_depot.c_str());
    for (std::size_t i = 0; i < route.buses.size(); ++i) std::printf(" -> %d (t=%.2f)", route.buses[i], route.arrival[i]);
    std::printf(" -> %s\n", grid.crews.end_depot.c_str());
  }
  std::printf("  gain total %.4f, droop cost %.1f, gains reset at step %d, all buses up at step %d, audit %s\n",
              r.gain_total, r.droop_cost, r.gain_reset_step, r.full_repair_step, plan.audit_passed ? "passed" : "FAILED");
}

int cmd_plan(Common& c) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("plan", grid, c);
  crda::ArtifactCache cache(c.cache_dir, c.rebuild);
  const crda::PlanningInputs in = cache.inputs(grid, grid.planner.samples, grid.planner.estimation_threshold);
  m.timing("precompute", clock.lap());
  const crda::RecoveryPlan plan = crda::solve_joint(grid, in, solve_options(grid, c));
  m.timing("solve", clock.lap());
  const fs::path json_path = fs::path(c.out_dir) / "plan.json";
  const fs::path csv_path = fs::path(c.out_dir) / "plan.csv";
  write_text(json_path, crda::plan_to_json(plan, grid).dump(2) + "\n");
  crda::write_plan_csv(plan, grid, csv_path.string());
  m.cache(cache);
  m.artifact(json_path, "plan");
  m.artifact(csv_path, "plan-csv");
  record_solve(m, "joint", plan);
  m.write();
  print_plan(plan, grid);
  return plan.audit_passed ? kOk : kFailure;
}

int cmd_benchmark(Common& c) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("benchmark", grid, c);
  crda::ArtifactCache cache(c.cache_dir, c.rebuild);
  const crda::PlanningInputs in = cache.inputs(grid, grid.planner.samples, grid.planner.estimation_threshold);
  m.timing("precompute", clock.lap());
  const crda::SolveOptions opts = solve_options(grid, c);
  const crda::RecoveryPlan joint = crda::solve_joint(grid, in, opts);
  m.timing("joint", clock.lap());
  const crda::RecoveryPlan decoupled = crda::solve_decoupled(grid, in, opts);
  m.timing("decoupled", clock.lap());

  const crda::PlanReport rj = crda::plan_report(joint, grid.planner);
  const crda::PlanReport rd = crda::plan_report(decoupled, grid.planner);
  const fs::path out(c.out_dir);
  write_text(out / "plan.json", crda::plan_to_json(joint, grid).dump(2) + "\n");
  write_text(out / "decoupled.json", crda::plan_to_json(decoupled, grid).dump(2) + "\n");
  crda::write_plan_csv(joint, grid, (out / "plan.csv").string());
  crda::write_plan_csv(decoupled, grid, (out / "decoupled.csv").string());
  json report = {{"joint", {{"objective", joint.objective}, {"droop_cost", rj.droop_cost},
                            {"gain_reset_step", rj.gain_reset_step}, {"full_repair_step", rj.full_repair_step}}},
                 {"decoupled", {{"objective", decoupled.objective}, {"droop_cost", rd.droop_cost},
                                {"gain_reset_step", rd.gain_reset_step}, {"full_repair_step", rd.full_repair_step}}},
                 {"savings", crda::savings(rj, rd)},
                 {"rate", grid.planner.droop_cost_rate}};
  write_text(out / "benchmark.json", report.dump(2) + "\n");
  m.cache(cache);
  for (const char* f : {"plan.json", "decoupled.json", "plan.csv", "decoupled.csv", "benchmark.json"}) m.artifact(out / f, "benchmark");
  record_solve(m, "joint", joint);
  record_solve(m, "decoupled", decoupled);
  m.write();
  print_plan(joint, grid);
  print_plan(decoupled, grid);
  std::printf("savings: %.1f (rate %.0f per unit gain per step)\n", crda::savings(rj, rd), grid.planner.droop_cost_rate);
  return joint.audit_passed && decoupled.audit_passed ? kOk : kFailure;
}

int cmd_attack_gains(Common& c, int scenario, bool all) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("attack-gains", grid, c);
  std::map<int, crda::WorstCaseGains> worst;
  if (all || scenario < 0) {
    crda::ArtifactCache cache(c.cache_dir, c.rebuild);
    worst = cache.worst_gains(grid);
    m.cache(cache);
  } else {
    if (scenario >= static_cast<int>(grid.num_scenarios())) throw crda::ModelError("scenario out of range");
    worst.emplace(scenario, crda::worst_case_gains(grid, scenario));
  }
  m.timing("attack_gains", clock.lap());
  for (const auto& [s, w] : worst) {
    std::printf("m=%-3d abscissa %+.6f  gains", s, w.abscissa);
    for (double g : w.gains) std::printf(" %.4f", g);
    std::printf("%s\n", w.converged ? "" : "  (not converged)");
  }
  m.write();
  return kOk;
}

int cmd_tables(Common& c) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("tables", grid, c);
  crda::ArtifactCache cache(c.cache_dir, c.rebuild);
  const crda::PlanningInputs in = cache.inputs(grid, grid.planner.samples, grid.planner.estimation_threshold);
  m.timing("tables", clock.lap());
  m.cache(cache);
  int max_refreshed = 0;
  for (const auto& [s, t] : in.table.scenarios) max_refreshed = std::max(max_refreshed, t.refreshed_combos());
  const double err = crda::max_sample_error(in.table);
  m["summary"] = {{"scenarios", in.table.scenarios.size()},
                  {"combos", in.table.combos()},
                  {"records", in.table.total_records()},
                  {"max_refreshed_combos", max_refreshed},
                  {"max_estimation_error", err}};
  m.write();
  std::printf("%zu scenarios x %zu combos (N=%d), %zu records, at most %d refreshed combos per scenario\n",
              in.table.scenarios.size(), in.table.combos(), in.table.samples, in.table.total_records(), max_refreshed);
  std::printf("max estimation error %.6f <= %.3g: %s\n", err, in.table.threshold, err <= in.table.threshold ? "yes" : "NO");
  return err <= in.table.threshold ? kOk : kFailure;
}

// Gains file: either {"attack_gains": [...], "droop_gains": [...]} or a plan
// file, in which case step `at` supplies the droop gains and its scenario's
// worst-case attack gains are used.
std::pair<std::vector<double>, std::vector<double>> read_gains(const std::string& path, int at, const crda::GridCase& grid,
                                                               Common& c) {
  std::ifstream in(path);
  if (!in) throw crda::CaseError(path, "cannot open gains file");
  const json doc = json::parse(in);
  if (doc.contains("steps")) {
    const json& step = doc.at("steps").at(static_cast<std::size_t>(at));
    crda::ArtifactCache cache(c.cache_dir, c.rebuild);
    const auto worst = cache.worst_gains(grid);
    return {worst.at(step.at("scenario").get<int>()).gains, step.at("gains").get<std::vector<double>>()};
  }
  std::vector<double> attack = doc.value("attack_gains", crda::attack_gain_bound_vector(grid));
  std::vector<double> droop = doc.value("droop_gains", std::vector<double>(grid.num_ibr(), 0.0));
  return {attack, droop};
}

int cmd_simulate(Common& c, const std::string& gains_file, double horizon, double step, int at, double perturbation,
                 int generator) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("simulate", grid, c);
  const auto [attack, droop] = read_gains(gains_file, at, grid, c);
  const crda::SystemMatrix sys = crda::assemble_system_matrix(grid, attack, droop);
  const int gen = generator > 0 ? generator : grid.generators.front().bus;
  const Eigen::VectorXd x0 = crda::perturbed_equilibrium(grid, sys, gen, perturbation);
  crda::SimulationOptions opts;
  opts.omega_max = grid.attack.omega_max;
  const crda::Trajectory traj = crda::simulate(sys, x0, horizon, step, opts);
  m.timing("simulate", clock.lap());
  const fs::path path = fs::path(c.out_dir) / "trajectory.csv";
  fs::create_directories(path.parent_path());
  crda::write_trajectory_csv(traj, grid, path.string());
  m.artifact(path, "trajectory");
  m["simulation"] = {{"horizon", horizon}, {"step", step}, {"substeps", traj.substeps},
                     {"abscissa", crda::spectral_abscissa(sys.state)}, {"diverged", traj.diverged},
                     {"divergence_time", traj.divergence_time}, {"max_abs_omega", traj.max_abs_omega}};
  m.write();
  std::printf("abscissa %+.6f, %s, max |omega| %.6g\n", crda::spectral_abscissa(sys.state),
              traj.diverged ? ("diverged at t=" + std::to_string(traj.divergence_time) + " s").c_str() : "bounded",
              traj.max_abs_omega);
  return kOk;
}

int cmd_oracle_check(Common& c, double tol) {
  Clock clock;
  crda::GridCase grid = load(c);
  Manifest m("oracle-check", grid, c);
  crda::ArtifactCache cache(c.cache_dir, c.rebuild);
  const crda::PlanningInputs in = cache.inputs(grid, grid.planner.samples, grid.planner.estimation_threshold);
  m.timing("precompute", clock.lap());
  const crda::RecoveryPlan plan = crda::solve_joint(grid, in, solve_options(grid, c));
  m.timing("solve", clock.lap());
  const crda::OracleResult lin =
      crda::oracle_optimum(grid, in.table, in.attack_gains(), crda::StabilityModel::Linearized);
  m.timing("oracle_linearized", clock.lap());
  const crda::OracleResult exact = crda::oracle_optimum(grid, in.table, in.attack_gains(), crda::StabilityModel::Exact);
  m.timing("oracle_exact", clock.lap());
  const double diff = std::abs(plan.objective - lin.objective);
  const bool match = lin.feasible && diff <= tol;
  m.cache(cache);
  m["oracle"] = {{"milp_objective", plan.objective},
                 {"oracle_objective", lin.objective},
                 {"difference", diff},
                 {"plans", lin.plans},
                 {"exact_objective", exact.feasible ? json(exact.objective) : json(nullptr)},
                 {"match", match}};
  m.write();
  std::printf("milp %.9f  oracle %.9f  |diff| %.3g over %zu plans\n", plan.objective, lin.objective, diff, lin.plans);
  if (exact.feasible) std::printf("exact-eigen oracle %.6f (linearisation gap %.6f)\n", exact.objective, plan.objective - exact.objective);
  std::printf("%s\n", match ? "MATCH" : "MISMATCH");
  return match ? kOk : kFailure;
}

int cmd_export_lp(Common& c, const std::string& stage, const std::string& output) {
  crda::GridCase grid = load(c);
  Manifest m("export-lp", grid, c);
  const crda::SolveOptions opts = solve_options(grid, c);
  crda::milp::Model model;
  crda::ArtifactCache cache(c.cache_dir, c.rebuild);
  if (stage == "joint") {
    model = crda::build_joint_model(grid, cache.inputs(grid, grid.planner.samples, grid.planner.estimation_threshold), opts);
  } else {
    model = crda::build_routing_model(grid, opts);
  }
  const std::string text = crda::milp::export_lp(model);
  m.cache(cache);
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_text(output, text);
    m.artifact(output, "lp");
  }
  m["model"] = {{"stage", stage}, {"variables", model.variables().size()}, {"constraints", model.constraints().size()},
                {"binaries", model.num_binaries()}};
  m.write();
  return kOk;
}

void add_common(CLI::App* app, Common& c, bool planning) {
  app->add_option("case", c.case_path, "case file (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out_dir, "output directory");
  app->add_option("--cache", c.cache_dir, "cache directory");
  app->add_flag("--rebuild", c.rebuild, "ignore cached attack gains and tables");
  app->add_flag("-v,--verbose", c.verbose, "verbose solver and progress output");
  if (planning) {
    app->add_option("-n,--samples", c.samples, "sampling points per droop gain")->check(CLI::Range(2, 64));
    app->add_option("--threshold", c.threshold, "estimation error threshold")->check(CLI::NonNegativeNumber);
    app->add_option("--time-limit", c.time_limit, "solver time limit in seconds")->check(CLI::PositiveNumber);
    app->add_option("--backend", c.backend, "MILP backend (default: $CRDA_MILP_BACKEND or highs)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyber-resilient recovery planning: crew routing with droop-gain scheduling"};
  app.require_subcommand(1);
  Common c;

  auto* plan = app.add_subcommand("plan", "solve the joint routing and droop-gain plan");
  add_common(plan, c, true);

  auto* bench = app.add_subcommand("benchmark", "solve joint and decoupled plans and report savings");
  add_common(bench, c, true);

  int scenario = -1;
  bool all = false;
  auto* attack = app.add_subcommand("attack-gains", "worst-case attack gains");
  add_common(attack, c, false);
  auto* scen_opt = attack->add_option("--scenario", scenario, "single scenario index")->check(CLI::NonNegativeNumber);
  attack->add_flag("--all", all, "every scenario (default)")->excludes(scen_opt);

  auto* tables = app.add_subcommand("tables", "build or load sensitivity tables");
  add_common(tables, c, true);

  std::string gains_file;
  double horizon = 30.0, step = 0.01, perturbation = 0.01;
  int at = 0, generator = 0;
  auto* sim = app.add_subcommand("simulate", "time-domain simulation of the frequency dynamics");
  add_common(sim, c, false);
  sim->add_option("--gains", gains_file, "gains JSON or plan file")->required()->check(CLI::ExistingFile);
  sim->add_option("--horizon", horizon, "seconds")->check(CLI::PositiveNumber);
  sim->add_option("--step", step, "output step in seconds")->check(CLI::PositiveNumber);
  sim->add_option("--at", at, "plan step supplying the gains")->check(CLI::NonNegativeNumber);
  sim->add_option("--perturbation", perturbation, "initial frequency offset (p.u.)");
  sim->add_option("--generator", generator, "bus of the perturbed generator");

  double tol = 1e-6;
  auto* oracle = app.add_subcommand("oracle-check", "compare the MILP optimum with brute-force enumeration");
  add_common(oracle, c, true);
  oracle->add_option("--tolerance", tol, "allowed objective difference");

  std::string stage = "joint", output;
  auto* lp = app.add_subcommand("export-lp", "write the MILP in CPLEX LP format");
  add_common(lp, c, true);
  lp->add_option("--stage", stage, "joint or benchmark (routing stage)")->check(CLI::IsMember({"joint", "benchmark"}));
  lp->add_option("--output", output, "LP file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }
  spdlog::set_level(c.verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (plan->parsed()) return cmd_plan(c);
    if (bench->parsed()) return cmd_benchmark(c);
    if (attack->parsed()) return cmd_attack_gains(c, scenario, all);
    if (tables->parsed()) return cmd_tables(c);
    if (sim->parsed()) return cmd_simulate(c, gains_file, horizon, step, at, perturbation, generator);
    if (oracle->parsed()) return cmd_oracle_check(c, tol);
    if (lp->parsed()) return cmd_export_lp(c, stage, output);
  } catch (const crda::CaseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kParse;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kParse;
  } catch (const crda::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s (first failing step %d)\n", e.what(), e.first_failing_step());
    return kInfeasible;
  } catch (const crda::BudgetError& e) {
    std::fprintf(stderr, "budget exceeded: %s\n", e.what());
    return kBudget;
  } catch (const crda::BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return kBackend;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
