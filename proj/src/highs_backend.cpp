#include "crda/error.hpp"
#include "crda/milp.hpp"

#include <Highs.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>

namespace crda::milp {

namespace {

HighsLp to_highs(const Model& model) {
  HighsLp lp;
  const auto& vars = model.variables();
  const auto& rows = model.constraints();
  lp.num_col_ = static_cast<HighsInt>(vars.size());
  lp.num_row_ = static_cast<HighsInt>(rows.size());
  lp.sense_ = ObjSense::kMinimize;
  lp.offset_ = model.objective_constant();
  lp.col_cost_.assign(vars.size(), 0.0);
  for (const auto& [i, c] : model.objective_terms()) lp.col_cost_[static_cast<std::size_t>(i)] = c;
  bool integer = false;
  for (const auto& v : vars) {
    lp.col_lower_.push_back(v.lower);
    lp.col_upper_.push_back(v.upper);
    lp.integrality_.push_back(v.kind == VarKind::Binary ? HighsVarType::kInteger : HighsVarType::kContinuous);
    integer = integer || v.kind == VarKind::Binary;
  }
  if (!integer) lp.integrality_.clear();
  lp.a_matrix_.format_ = MatrixFormat::kRowwise;
  lp.a_matrix_.num_col_ = lp.num_col_;
  lp.a_matrix_.num_row_ = lp.num_row_;
  lp.a_matrix_.start_.assign(1, 0);
  for (const auto& r : rows) {
    for (const auto& [i, c] : r.terms) {
      lp.a_matrix_.index_.push_back(static_cast<HighsInt>(i));
      lp.a_matrix_.value_.push_back(c);
    }
    lp.a_matrix_.start_.push_back(static_cast<HighsInt>(lp.a_matrix_.index_.size()));
    switch (r.sense) {
      case Sense::LessEqual:
        lp.row_lower_.push_back(-kHighsInf);
        lp.row_upper_.push_back(r.rhs);
        break;
      case Sense::GreaterEqual:
        lp.row_lower_.push_back(r.rhs);
        lp.row_upper_.push_back(kHighsInf);
        break;
      case Sense::Equal:
        lp.row_lower_.push_back(r.rhs);
        lp.row_upper_.push_back(r.rhs);
        break;
    }
  }
  return lp;
}

void configure(Highs& h, const SolveLimits& limits) {
  h.setOptionValue("output_flag", limits.verbose);
  h.setOptionValue("random_seed", 0);
  h.setOptionValue("threads", 1);
  if (std::isfinite(limits.time_limit)) h.setOptionValue("time_limit", limits.time_limit);
  h.setOptionValue("mip_rel_gap", limits.mip_gap);
  h.setOptionValue("mip_abs_gap", 1e-9);
  h.setOptionValue("primal_feasibility_tolerance", limits.feasibility_tol);
  h.setOptionValue("dual_feasibility_tolerance", limits.feasibility_tol);
  h.setOptionValue("mip_feasibility_tolerance", limits.feasibility_tol);
}

Status map_status(HighsModelStatus s, bool has_solution) {
  switch (s) {
    case HighsModelStatus::kOptimal:
    case HighsModelStatus::kModelEmpty:
      return Status::Optimal;
    case HighsModelStatus::kInfeasible:
      return Status::Infeasible;
    case HighsModelStatus::kUnbounded:
    case HighsModelStatus::kUnboundedOrInfeasible:
      return Status::Unbounded;
    case HighsModelStatus::kTimeLimit:
    case HighsModelStatus::kIterationLimit:
    case HighsModelStatus::kSolutionLimit:
    case HighsModelStatus::kInterrupt:
    case HighsModelStatus::kHighsInterrupt:
    case HighsModelStatus::kMemoryLimit:
    case HighsModelStatus::kObjectiveBound:
    case HighsModelStatus::kObjectiveTarget:
      return Status::Limit;
    default:
      return has_solution ? Status::Feasible : Status::Error;
  }
}

class HighsBackend final : public Backend {
 public:
  std::string name() const override { return "highs"; }

  Solution solve(const Model& model, const SolveLimits& limits) override {
    const auto start = std::chrono::steady_clock::now();
    Solution sol;
    if (model.variables().empty()) {
      sol.status = Status::Optimal;
      sol.objective = model.objective_constant();
      return sol;
    }
    Highs h;
    configure(h, limits);
    HighsLp lp = to_highs(model);
    if (h.passModel(lp) == HighsStatus::kError) throw BackendError("HiGHS rejected the model");
    if (h.run() == HighsStatus::kError) throw BackendError("HiGHS failed while solving");

    const HighsInfo& info = h.getInfo();
    const bool has_solution = info.primal_solution_status == kSolutionStatusFeasible;
    sol.status = map_status(h.getModelStatus(), has_solution);
    sol.nodes = static_cast<long long>(info.mip_node_count);
    sol.bound = model.num_binaries() > 0 ? info.mip_dual_bound : info.objective_function_value;
    if (has_solution) {
      sol.values = h.getSolution().col_value;
      if (limits.polish && model.num_binaries() > 0) polish(model, lp, sol, limits);
      sol.objective = model.objective_value(sol.values);
    }
    sol.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
  }

 private:
  // Fix binaries at their rounded values and re-solve the continuous part,
  // removing the integrality slack that lets Big-M rows leak.
  static void polish(const Model& model, HighsLp lp, Solution& sol, const SolveLimits& limits) {
    for (std::size_t i = 0; i < model.variables().size(); ++i) {
      if (model.variables()[i].kind != VarKind::Binary) continue;
      const double v = std::round(sol.values[i]);
      lp.col_lower_[i] = v;
      lp.col_upper_[i] = v;
    }
    lp.integrality_.clear();
    Highs h;
    configure(h, limits);
    h.setOptionValue("time_limit", 60.0);
    if (h.passModel(lp) == HighsStatus::kError || h.run() == HighsStatus::kError) return;
    if (h.getModelStatus() != HighsModelStatus::kOptimal) {
      spdlog::debug("polish LP ended with status {}", h.modelStatusToString(h.getModelStatus()));
      return;
    }
    std::vector<double> values = h.getSolution().col_value;
    for (std::size_t i = 0; i < model.variables().size(); ++i) {
      if (model.variables()[i].kind == VarKind::Binary) values[i] = std::round(values[i]);
    }
    if (model.objective_value(values) <= model.objective_value(sol.values) + 1e-7) sol.values = std::move(values);
  }
};

}  // namespace

std::unique_ptr<Backend> make_highs_backend() { return std::make_unique<HighsBackend>(); }

}  // namespace crda::milp
