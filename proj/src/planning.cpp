#include "crda/planning.hpp"

#include "crda/error.hpp"
#include "crda/oracle_sim.hpp"
#include "crda/spectral.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

namespace crda {

using milp::LinearExpr;
using milp::Sense;
using milp::VarId;

namespace {

std::string tag(const std::string& prefix, std::initializer_list<long long> idx) {
  std::string s = prefix;
  for (long long i : idx) s += "_" + std::to_string(i);
  return s;
}

}  // namespace

PlanningInputs compute_inputs(const GridCase& grid, int samples, double threshold) {
  PlanningInputs in;
  in.worst = all_worst_case_gains(grid);
  TableOptions opts;
  opts.spectral = {grid.planner.residual_tol, grid.planner.degeneracy_tol};
  in.table = generate_sensitivity_tables(grid, gain_vectors(in.worst), samples, threshold, opts);
  return in;
}

SolveOptions default_solve_options(const GridCase& grid) {
  SolveOptions o;
  o.limits.time_limit = grid.planner.time_limit;
  o.limits.mip_gap = grid.planner.mip_gap;
  return o;
}

RcrHandles emit_rcr(milp::Model& model, const GridCase& grid) {
  const int nc = static_cast<int>(grid.num_compromised());
  const int st = nc, en = nc + 1, nodes = nc + 2;
  const int horizon = grid.planner.horizon;
  const double big_m = grid.planner.big_m;
  const double eps = grid.planner.epsilon;
  const auto& crews = grid.crews.crews;
  RcrHandles h;
  h.flag.assign(static_cast<std::size_t>(nc), {});
  h.availability.assign(static_cast<std::size_t>(nc), std::vector<LinearExpr>(static_cast<std::size_t>(horizon)));
  if (nc == 0) return h;

  for (std::size_t c = 0; c < crews.size(); ++c) {
    const Crew& crew = crews[c];
    auto& x = h.x.emplace_back(static_cast<std::size_t>(nodes), std::vector<VarId>(static_cast<std::size_t>(nodes)));
    // Arcs never leave en, never enter st, never loop. st -> en only for idle crews.
    for (int i = 0; i < nodes; ++i) {
      if (i == en) continue;
      for (int j = 0; j < nodes; ++j) {
        if (j == st || j == i) continue;
        if (i == st && j == en && !grid.crews.allow_idle_crews) continue;
        x[i][j] = model.add_binary(tag("x", {static_cast<long long>(c), i, j}));
      }
    }
    auto arcs_from = [&](int i) {
      LinearExpr e;
      for (int j = 0; j < nodes; ++j) {
        if (x[i][j].valid()) e.add(x[i][j], 1.0);
      }
      return e;
    };
    auto arcs_into = [&](int j) {
      LinearExpr e;
      for (int i = 0; i < nodes; ++i) {
        if (x[i][j].valid()) e.add(x[i][j], 1.0);
      }
      return e;
    };
    model.add_constraint(tag("leave_start", {static_cast<long long>(c)}), arcs_from(st), Sense::Equal, 1.0);
    model.add_constraint(tag("reach_end", {static_cast<long long>(c)}), arcs_into(en), Sense::Equal, 1.0);
    for (int i = 0; i < nc; ++i) {
      model.add_constraint(tag("flow", {static_cast<long long>(c), i}), arcs_into(i) - arcs_from(i), Sense::Equal, 0.0);
      model.add_constraint(tag("out_once", {static_cast<long long>(c), i}), arcs_from(i), Sense::LessEqual, 1.0);
      for (int j = i + 1; j < nc; ++j) {
        model.add_constraint(tag("no_2cycle", {static_cast<long long>(c), i, j}),
                             LinearExpr(x[i][j]) + LinearExpr(x[j][i]), Sense::LessEqual, 1.0);
      }
    }
    auto& y = h.y.emplace_back();
    auto& at = h.arrival.emplace_back();
    for (int i = 0; i < nc; ++i) {
      y.push_back(model.add_binary(tag("y", {static_cast<long long>(c), i})));
      model.add_constraint(tag("visit", {static_cast<long long>(c), i}), LinearExpr(y[i]) - arcs_from(i), Sense::Equal, 0.0);
      at.push_back(model.add_continuous(tag("at", {static_cast<long long>(c), i}), 0.0, big_m));
      model.add_constraint(tag("at_unvisited", {static_cast<long long>(c), i}),
                           LinearExpr(at[i]) - big_m * LinearExpr(y[i]), Sense::LessEqual, 0.0);
    }
    // Arrival chain: AT_j = AT_i + R_i + T_ij whenever arc i -> j is used.
    for (int i = 0; i <= nc; ++i) {
      for (int j = 0; j < nc; ++j) {
        if (!x[i][j].valid()) continue;
        const double travel = crew.travel_times(i, j);
        const double repair = i == st ? 0.0 : crew.repair_times[static_cast<std::size_t>(i)];
        LinearExpr gap(repair + travel);
        if (i != st) gap.add(at[i], 1.0);
        gap.add(at[j], -1.0);
        model.add_constraint(tag("arrive_lo", {static_cast<long long>(c), i, j}),
                             gap - big_m * LinearExpr(x[i][j]), Sense::GreaterEqual, -big_m);
        model.add_constraint(tag("arrive_hi", {static_cast<long long>(c), i, j}),
                             gap + big_m * LinearExpr(x[i][j]), Sense::LessEqual, big_m);
      }
    }
  }

  for (int i = 0; i < nc; ++i) {
    LinearExpr visits;
    for (std::size_t c = 0; c < crews.size(); ++c) visits.add(h.y[c][static_cast<std::size_t>(i)], 1.0);
    model.add_constraint(tag("visit_once", {i}), visits, Sense::Equal, 1.0);

    auto& f = h.flag[static_cast<std::size_t>(i)];
    LinearExpr one, when;
    for (int t = 0; t < horizon; ++t) {
      f.push_back(model.add_binary(tag("f", {i, t})));
      one.add(f.back(), 1.0);
      when.add(f.back(), static_cast<double>(t));
    }
    model.add_constraint(tag("repair_once", {i}), one, Sense::Equal, 1.0);
    LinearExpr done;  // completion time sum_c AT + R Y
    for (std::size_t c = 0; c < crews.size(); ++c) {
      done.add(h.arrival[c][static_cast<std::size_t>(i)], 1.0);
      done.add(h.y[c][static_cast<std::size_t>(i)], crews[c].repair_times[static_cast<std::size_t>(i)]);
    }
    model.add_constraint(tag("repair_after", {i}), when - done, Sense::GreaterEqual, 0.0);
    model.add_constraint(tag("repair_ceiling", {i}), when - done, Sense::LessEqual, 1.0 - eps);

    auto& z = h.availability[static_cast<std::size_t>(i)];
    LinearExpr prefix;
    for (int t = 0; t < horizon; ++t) {
      z[static_cast<std::size_t>(t)] = prefix;
      prefix.add(f[static_cast<std::size_t>(t)], 1.0);
    }
  }
  return h;
}

namespace {

struct RowKey {
  std::vector<long long> coef;
  long long constant;
  std::vector<int> combos;
  bool operator<(const RowKey& o) const { return std::tie(coef, constant, combos) < std::tie(o.coef, o.constant, o.combos); }
};

long long quantize(double v) { return std::llround(v * 1e10); }

struct StabilityRow {
  std::vector<double> coef;  // per IBR
  double constant = 0.0;     // Re(lambda0) - Re(g)'k0
  std::vector<int> combos;
  double big_m = 0.0;
};

// Rows for one scenario, shared across steps.
std::vector<StabilityRow> scenario_rows(const GridCase& grid, const SensitivityTable& table, int m,
                                        double limit, std::size_t& pruned, double& largest_m) {
  const ScenarioTable& st = table.scenarios.at(m);
  const std::size_t d = table.grid.dims();
  const auto combos = static_cast<int>(table.order.cols());
  std::map<RowKey, std::size_t> seen;
  std::vector<StabilityRow> rows;
  for (int n = 0; n < st.modes; ++n) {
    std::map<int, std::vector<int>> by_record;
    for (int j = 0; j < combos; ++j) by_record[st.record_of(n, j)].push_back(j);
    for (const auto& [r, js] : by_record) {
      const SensitivityRecord& rec = st.records[static_cast<std::size_t>(r)];
      StabilityRow row;
      row.constant = rec.lambda0.real();
      for (std::size_t i = 0; i < d; ++i) {
        row.coef.push_back(rec.gradient[i].real());
        row.constant -= rec.gradient[i].real() * rec.k0[i];
      }
      // Largest left-hand side inside any of the combos' boxes.
      double active_max = -milp::kInf;
      for (int j : js) {
        double v = row.constant;
        for (std::size_t i = 0; i < d; ++i) {
          const GainRange box = table.grid.milp_box(i, table.order(static_cast<Eigen::Index>(i), j));
          v += std::max(row.coef[i] * box.lower, row.coef[i] * box.upper);
        }
        active_max = std::max(active_max, v);
      }
      if (active_max <= limit) {
        ++pruned;
        continue;
      }
      double full_max = row.constant;
      for (std::size_t i = 0; i < d; ++i) {
        const GainRange range = table.grid.ranges[i];
        full_max += std::max(row.coef[i] * range.lower, row.coef[i] * range.upper);
      }
      row.big_m = grid.planner.tighten_big_m ? std::max(full_max - limit, 0.0) + 1e-6 : grid.planner.big_m;
      if (row.big_m > grid.planner.big_m) {
        spdlog::warn("stability row for scenario {} mode {} needs Big-M {:.3g} > configured {:.3g}", m, n, row.big_m,
                     grid.planner.big_m);
      }
      largest_m = std::max(largest_m, row.big_m);
      row.combos = js;
      RowKey key;
      for (double c : row.coef) key.coef.push_back(quantize(c));
      key.constant = quantize(row.constant);
      key.combos = js;
      if (seen.count(key)) {
        ++pruned;
        continue;
      }
      seen.emplace(std::move(key), rows.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

DgasHandles emit_dgas(milp::Model& model, const GridCase& grid, const SensitivityTable& table,
                      const std::vector<std::vector<LinearExpr>>& availability) {
  const int nc = static_cast<int>(grid.num_compromised());
  const int scenarios = 1 << nc;
  const int horizon = grid.planner.horizon;
  const std::size_t d = grid.num_ibr();
  const int samples = table.samples;
  const int combos = static_cast<int>(table.order.cols());
  const double eps = grid.planner.epsilon;
  const double limit = -(grid.planner.epsilon + grid.planner.stability_margin);
  const bool tight = grid.planner.tighten_big_m;
  const double big_m = grid.planner.big_m;
  if (table.grid.dims() != d) throw ModelError("sensitivity table does not match the IBR count");
  for (int m = 0; m < scenarios; ++m) {
    if (!table.scenarios.count(m)) throw ModelError("sensitivity table has no entry for scenario " + std::to_string(m));
  }

  DgasHandles h;
  std::vector<std::vector<StabilityRow>> rows(static_cast<std::size_t>(scenarios));
  for (int m = 0; m < scenarios; ++m) {
    rows[static_cast<std::size_t>(m)] = scenario_rows(grid, table, m, limit, h.pruned_rows, h.largest_big_m);
    h.stability_rows += rows[static_cast<std::size_t>(m)].size();
  }

  for (int t = 0; t < horizon; ++t) {
    const long long tt = t;
    auto& k = h.gains.emplace_back();
    for (std::size_t i = 0; i < d; ++i) {
      k.push_back(model.add_continuous(tag("k", {tt, static_cast<long long>(i)}), table.grid.ranges[i].lower,
                                       table.grid.ranges[i].upper));
    }

    // Scenario selector.
    auto& s = h.scenario.emplace_back();
    LinearExpr one, index(static_cast<double>(scenarios - 1));
    for (int i = 0; i < nc; ++i) index -= std::ldexp(1.0, i) * availability[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    const double ms = tight ? static_cast<double>(scenarios - 1) : big_m;
    for (int m = 0; m < scenarios; ++m) {
      s.push_back(model.add_binary(tag("s", {tt, m})));
      one.add(s.back(), 1.0);
      model.add_constraint(tag("scen_lo", {tt, m}), index - ms * LinearExpr(s.back()), Sense::GreaterEqual, m - ms);
      model.add_constraint(tag("scen_hi", {tt, m}), index + ms * LinearExpr(s.back()), Sense::LessEqual, m + ms);
    }
    model.add_constraint(tag("scen_one", {tt}), one, Sense::Equal, 1.0);
    // Per-bit linking, implied by the pair above for binary S; tightens the relaxation.
    for (int i = 0; i < nc; ++i) {
      LinearExpr bit = availability[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
      for (int m = 0; m < scenarios; ++m) {
        if ((m >> i) & 1) bit.add(s[static_cast<std::size_t>(m)], 1.0);
      }
      model.add_constraint(tag("scen_bit", {tt, i}), bit, Sense::Equal, 1.0);
    }

    // Segment indicators: T1 <=> k >= L, T2 <=> k below U, T = T1 + T2 - 1.
    auto& seg = h.segment.emplace_back();
    for (std::size_t i = 0; i < d; ++i) {
      const long long ii = static_cast<long long>(i);
      const GainRange range = table.grid.ranges[i];
      auto& seg_i = seg.emplace_back();
      LinearExpr pick;
      for (int l = 1; l <= samples; ++l) {
        const double lo = table.grid.lower(i, l);
        const double up = table.grid.upper(i, l);
        const bool last = l == samples;
        const VarId t1 = model.add_binary(tag("t1", {tt, ii, l}));
        const VarId t2 = model.add_binary(tag("t2", {tt, ii, l}));
        const VarId tl = model.add_binary(tag("t", {tt, ii, l}));
        const double m1 = tight ? std::max(lo - range.lower, range.upper - lo + eps) + eps : big_m;
        const double m2 = tight ? std::max(range.upper - up + eps, up - range.lower) + eps : big_m;
        const LinearExpr kk(k[i]);
        model.add_constraint(tag("seg_l_on", {tt, ii, l}), kk - m1 * LinearExpr(t1), Sense::GreaterEqual, lo - m1);
        model.add_constraint(tag("seg_l_off", {tt, ii, l}), kk - m1 * LinearExpr(t1), Sense::LessEqual, lo - eps);
        const double below = last ? up : up - eps;   // largest gain with T2 = 1
        const double above = last ? up + eps : up;   // smallest gain with T2 = 0
        model.add_constraint(tag("seg_u_on", {tt, ii, l}), kk + m2 * LinearExpr(t2), Sense::LessEqual, below + m2);
        model.add_constraint(tag("seg_u_off", {tt, ii, l}), kk + m2 * LinearExpr(t2), Sense::GreaterEqual, above);
        model.add_constraint(tag("seg_and", {tt, ii, l}), LinearExpr(tl) - LinearExpr(t1) - LinearExpr(t2),
                             Sense::Equal, -1.0);
        seg_i.push_back(tl);
        pick.add(tl, 1.0);
      }
      model.add_constraint(tag("seg_one", {tt, ii}), pick, Sense::Equal, 1.0);
    }

    // Combo match: psi_j = AND_i T(i, O(i,j)).
    auto& psi = h.combo.emplace_back();
    LinearExpr psi_one;
    for (int j = 0; j < combos; ++j) {
      psi.push_back(model.add_binary(tag("psi", {tt, j})));
      LinearExpr all(-(static_cast<double>(d) - 1.0));
      for (std::size_t i = 0; i < d; ++i) {
        const VarId tl = seg[i][static_cast<std::size_t>(table.order(static_cast<Eigen::Index>(i), j) - 1)];
        all.add(tl, 1.0);
        model.add_constraint(tag("psi_le", {tt, j, static_cast<long long>(i)}), LinearExpr(psi.back()) - LinearExpr(tl),
                             Sense::LessEqual, 0.0);
      }
      model.add_constraint(tag("psi_ge", {tt, j}), LinearExpr(psi.back()) - all, Sense::GreaterEqual, 0.0);
      psi_one.add(psi.back(), 1.0);
    }
    model.add_constraint(tag("psi_one", {tt}), psi_one, Sense::Equal, 1.0);

    // Stability: Re(lambda_hat) <= limit whenever the row's combo and scenario are selected.
    for (int m = 0; m < scenarios; ++m) {
      const auto& list = rows[static_cast<std::size_t>(m)];
      for (std::size_t r = 0; r < list.size(); ++r) {
        const StabilityRow& row = list[r];
        LinearExpr lhs;
        for (std::size_t i = 0; i < d; ++i) lhs.add(k[i], row.coef[i]);
        for (int j : row.combos) lhs.add(psi[static_cast<std::size_t>(j)], row.big_m);
        lhs.add(s[static_cast<std::size_t>(m)], row.big_m);
        model.add_constraint(tag("stab", {tt, m, static_cast<long long>(r)}), lhs, Sense::LessEqual,
                             limit - row.constant + 2.0 * row.big_m);
      }
    }
  }
  return h;
}

namespace {

std::vector<double> weights_of(const GridCase& grid, const SolveOptions& options) {
  const auto& w = options.weights ? *options.weights : grid.planner.weights;
  if (w.size() != grid.num_compromised()) throw ModelError("weight vector length does not match the compromised buses");
  return w;
}

LinearExpr reward_expr(const GridCase& grid, const RcrHandles& rcr, const std::vector<double>& w) {
  LinearExpr e;
  for (std::size_t i = 0; i < grid.num_compromised(); ++i) {
    for (const auto& z : rcr.availability[i]) e += w[i] * z;
  }
  return e;
}

}  // namespace

milp::Model build_joint_model(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options,
                              RcrHandles* rcr_out, DgasHandles* dgas_out) {
  milp::Model model(grid.name + "_joint");
  RcrHandles rcr = emit_rcr(model, grid);
  DgasHandles dgas = emit_dgas(model, grid, inputs.table, rcr.availability);
  LinearExpr obj;
  for (const auto& step : dgas.gains) {
    for (VarId k : step) obj.add(k, 1.0);
  }
  obj -= reward_expr(grid, rcr, weights_of(grid, options));
  model.set_objective(obj);
  if (rcr_out) *rcr_out = std::move(rcr);
  if (dgas_out) *dgas_out = std::move(dgas);
  return model;
}

milp::Model build_routing_model(const GridCase& grid, const SolveOptions& options, RcrHandles* rcr_out) {
  milp::Model model(grid.name + "_routing");
  RcrHandles rcr = emit_rcr(model, grid);
  model.set_objective(-1.0 * reward_expr(grid, rcr, weights_of(grid, options)));
  if (rcr_out) *rcr_out = std::move(rcr);
  return model;
}

namespace {

struct Timeline {
  std::vector<CrewRoute> routes;
  std::vector<int> repair_step;
  Eigen::MatrixXi flags, availability;
};

Timeline extract_timeline(const GridCase& grid, const RcrHandles& rcr, const milp::Solution& sol) {
  const int nc = static_cast<int>(grid.num_compromised());
  const int horizon = grid.planner.horizon;
  Timeline tl;
  tl.flags = Eigen::MatrixXi::Zero(nc, horizon);
  tl.availability = Eigen::MatrixXi::Zero(nc, horizon);
  tl.repair_step.assign(static_cast<std::size_t>(nc), -1);
  for (std::size_t c = 0; c < rcr.x.size(); ++c) {
    CrewRoute route;
    route.crew = grid.crews.crews[c].name;
    int at = nc;  // start depot
    for (int hop = 0; hop <= nc; ++hop) {
      int next = -1;
      for (int j = 0; j < nc + 2; ++j) {
        if (rcr.x[c][at][j].valid() && sol.value(rcr.x[c][at][j]) > 0.5) next = j;
      }
      if (next < 0 || next == nc + 1) break;
      route.buses.push_back(grid.attack.buses[static_cast<std::size_t>(next)].bus);
      route.arrival.push_back(sol.value(rcr.arrival[c][static_cast<std::size_t>(next)]));
      at = next;
    }
    tl.routes.push_back(std::move(route));
  }
  for (int i = 0; i < nc; ++i) {
    for (int t = 0; t < horizon; ++t) {
      if (sol.value(rcr.flag[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]) > 0.5) {
        tl.flags(i, t) = 1;
        tl.repair_step[static_cast<std::size_t>(i)] = t;
      }
      tl.availability(i, t) = static_cast<int>(std::lround(rcr.availability[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)].evaluate(sol.values)));
    }
  }
  return tl;
}

void fill_steps(const GridCase& grid, const PlanningInputs& inputs, const DgasHandles& dgas, const milp::Solution& sol,
                RecoveryPlan& plan) {
  const int horizon = grid.planner.horizon;
  const auto& table = inputs.table;
  plan.gain_total = 0.0;
  plan.audit_passed = true;
  for (int t = 0; t < horizon; ++t) {
    PlanStep step;
    step.t = t;
    for (VarId k : dgas.gains[static_cast<std::size_t>(t)]) {
      double v = sol.value(k);
      if (std::abs(v) < 1e-9) v = 0.0;
      step.gains.push_back(v);
      plan.gain_total += v;
    }
    const auto& s = dgas.scenario[static_cast<std::size_t>(t)];
    for (std::size_t m = 0; m < s.size(); ++m) {
      if (sol.value(s[m]) > 0.5) step.scenario = static_cast<int>(m);
    }
    const auto& psi = dgas.combo[static_cast<std::size_t>(t)];
    for (std::size_t j = 0; j < psi.size(); ++j) {
      if (sol.value(psi[j]) > 0.5) step.combo = static_cast<int>(j);
    }
    std::vector<int> z(grid.num_compromised());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = plan.availability(static_cast<Eigen::Index>(i), t);
    if (scenario_index(z) != step.scenario) {
      throw BackendError("selected scenario " + std::to_string(step.scenario) + " at step " + std::to_string(t) +
                         " disagrees with bus availability");
    }
    const ScenarioTable& st = table.scenarios.at(step.scenario);
    step.estimated_abscissa = -milp::kInf;
    for (int n = 0; n < st.modes; ++n) {
      step.estimated_abscissa =
          std::max(step.estimated_abscissa, first_order_estimate(st.record(n, step.combo), step.gains).real());
    }
    step.exact_abscissa =
        spectral_abscissa(assemble_system_matrix(grid, inputs.worst.at(step.scenario).gains, step.gains).state);
    if (!(step.exact_abscissa < 0.0)) {
      plan.audit_passed = false;
      spdlog::error("audit: exact abscissa {:.6f} >= 0 at step {}", step.exact_abscissa, t);
    }
    plan.steps.push_back(std::move(step));
  }
}

double reward_of(const GridCase& grid, const Eigen::MatrixXi& z, const std::vector<double>& w) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) r += w[static_cast<std::size_t>(i)] * z.row(i).sum();
  (void)grid;
  return r;
}

// Explain an infeasible model: first step whose scenario cannot be stabilised.
[[noreturn]] void diagnose_infeasible(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options,
                                      const std::string& method) {
  const double limit = -(grid.planner.epsilon + grid.planner.stability_margin);
  const int full = static_cast<int>(grid.num_scenarios()) - 1;
  if (!minimal_linearized_gains(inputs.table, full, limit).feasible) {
    throw InfeasibleError(method + ": no droop gains stabilise the fully compromised grid", 0);
  }
  RcrHandles rcr;
  milp::Model routing = build_routing_model(grid, options, &rcr);
  auto backend = milp::make_backend(options.backend);
  const milp::Solution sol = milp::solve(routing, *backend, options.limits);
  if (!sol.has_values()) {
    throw InfeasibleError(method + ": crews cannot repair every bus within the horizon", grid.planner.horizon);
  }
  const Timeline tl = extract_timeline(grid, rcr, sol);
  for (int t = 0; t < grid.planner.horizon; ++t) {
    std::vector<int> z(grid.num_compromised());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = tl.availability(static_cast<Eigen::Index>(i), t);
    if (!minimal_linearized_gains(inputs.table, scenario_index(z), limit).feasible) {
      throw InfeasibleError(method + ": scenario " + std::to_string(scenario_index(z)) + " cannot be stabilised", t);
    }
  }
  throw InfeasibleError(method + ": model infeasible", -1);
}

void check_solution(const milp::Solution& sol, const GridCase& grid, const PlanningInputs& inputs,
                    const SolveOptions& options, const std::string& method) {
  if (sol.status == milp::Status::Infeasible) diagnose_infeasible(grid, inputs, options, method);
  if (!sol.has_values()) {
    throw BackendError(method + ": backend returned status " + milp::to_string(sol.status) + " without a solution");
  }
  if (sol.status == milp::Status::Limit) {
    spdlog::warn("{}: limit reached, returning the best incumbent", method);
  }
}

}  // namespace

RecoveryPlan solve_joint(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options) {
  RcrHandles rcr;
  DgasHandles dgas;
  const milp::Model model = build_joint_model(grid, inputs, options, &rcr, &dgas);
  auto backend = milp::make_backend(options.backend);
  const milp::Solution sol = milp::solve(model, *backend, options.limits);
  check_solution(sol, grid, inputs, options, "joint");

  RecoveryPlan plan;
  plan.method = "joint";
  plan.status = sol.status;
  plan.backend = sol.backend;
  plan.solve_seconds = sol.wall_seconds;
  plan.nodes = sol.nodes;
  plan.variables = model.variables().size();
  plan.constraints = model.constraints().size();
  plan.stability_rows = dgas.stability_rows;
  for (const auto& a : grid.attack.buses) plan.buses.push_back(a.bus);
  Timeline tl = extract_timeline(grid, rcr, sol);
  plan.routes = std::move(tl.routes);
  plan.repair_step = std::move(tl.repair_step);
  plan.flags = std::move(tl.flags);
  plan.availability = std::move(tl.availability);
  fill_steps(grid, inputs, dgas, sol, plan);
  plan.availability_reward = reward_of(grid, plan.availability, weights_of(grid, options));
  plan.objective = plan.gain_total - plan.availability_reward;
  return plan;
}

RecoveryPlan solve_decoupled(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options) {
  auto backend = milp::make_backend(options.backend);

  // Stage 1: routing only, maximise weighted availability.
  RcrHandles rcr;
  const milp::Model routing = build_routing_model(grid, options, &rcr);
  const milp::Solution first = milp::solve(routing, *backend, options.limits);
  if (first.status == milp::Status::Infeasible) {
    throw InfeasibleError("decoupled: crews cannot repair every bus within the horizon", grid.planner.horizon);
  }
  if (!first.has_values()) throw BackendError(std::string("decoupled routing stage ended with status ") + milp::to_string(first.status));
  Timeline tl = extract_timeline(grid, rcr, first);

  // Stage 2: gains only, availability fixed.
  milp::Model gains(grid.name + "_gains");
  std::vector<std::vector<LinearExpr>> fixed(grid.num_compromised());
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    for (int t = 0; t < grid.planner.horizon; ++t) fixed[i].emplace_back(static_cast<double>(tl.availability(static_cast<Eigen::Index>(i), t)));
  }
  DgasHandles dgas = emit_dgas(gains, grid, inputs.table, fixed);
  LinearExpr obj;
  for (const auto& step : dgas.gains) {
    for (VarId k : step) obj.add(k, 1.0);
  }
  gains.set_objective(obj);
  const milp::Solution second = milp::solve(gains, *backend, options.limits);
  if (second.status == milp::Status::Infeasible) {
    for (int t = 0; t < grid.planner.horizon; ++t) {
      std::vector<int> z(grid.num_compromised());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = tl.availability(static_cast<Eigen::Index>(i), t);
      const double limit = -(grid.planner.epsilon + grid.planner.stability_margin);
      if (!minimal_linearized_gains(inputs.table, scenario_index(z), limit).feasible) {
        throw InfeasibleError("decoupled: scenario " + std::to_string(scenario_index(z)) + " cannot be stabilised", t);
      }
    }
    throw InfeasibleError("decoupled: gain stage infeasible", -1);
  }
  if (!second.has_values()) throw BackendError(std::string("decoupled gain stage ended with status ") + milp::to_string(second.status));

  RecoveryPlan plan;
  plan.method = "decoupled";
  plan.status = (first.status == milp::Status::Optimal && second.status == milp::Status::Optimal) ? milp::Status::Optimal
                                                                                                   : milp::Status::Feasible;
  plan.backend = second.backend;
  plan.solve_seconds = first.wall_seconds + second.wall_seconds;
  plan.nodes = std::max(first.nodes, 0LL) + std::max(second.nodes, 0LL);
  plan.variables = routing.variables().size() + gains.variables().size();
  plan.constraints = routing.constraints().size() + gains.constraints().size();
  plan.stability_rows = dgas.stability_rows;
  for (const auto& a : grid.attack.buses) plan.buses.push_back(a.bus);
  plan.routes = std::move(tl.routes);
  plan.repair_step = std::move(tl.repair_step);
  plan.flags = std::move(tl.flags);
  plan.availability = std::move(tl.availability);
  fill_steps(grid, inputs, dgas, second, plan);
  plan.availability_reward = reward_of(grid, plan.availability, weights_of(grid, options));
  plan.objective = plan.gain_total - plan.availability_reward;
  return plan;
}

PlanReport plan_report(const RecoveryPlan& plan, const PlannerConfig& planner) {
  PlanReport r;
  for (const auto& s : plan.steps) r.gain_total += std::accumulate(s.gains.begin(), s.gains.end(), 0.0);
  r.droop_cost = planner.droop_cost_rate * r.gain_total;
  r.gain_reset_step = static_cast<int>(plan.steps.size());
  for (int t = static_cast<int>(plan.steps.size()) - 1; t >= 0; --t) {
    const auto& g = plan.steps[static_cast<std::size_t>(t)].gains;
    if (std::any_of(g.begin(), g.end(), [](double v) { return std::abs(v) > 1e-6; })) break;
    r.gain_reset_step = t;
  }
  for (Eigen::Index t = 0; t < plan.availability.cols(); ++t) {
    if ((plan.availability.col(t).array() == 1).all()) {
      r.full_repair_step = static_cast<int>(t);
      break;
    }
  }
  if (plan.availability.rows() == 0) r.full_repair_step = 0;
  return r;
}

double savings(const PlanReport& joint, const PlanReport& decoupled) { return decoupled.droop_cost - joint.droop_cost; }

nlohmann::json plan_to_json(const RecoveryPlan& plan, const GridCase& grid) {
  using nlohmann::json;
  const PlanReport report = plan_report(plan, grid.planner);
  json doc;
  doc["method"] = plan.method;
  doc["case"] = grid.name;
  doc["status"] = milp::to_string(plan.status);
  doc["objective"] = plan.objective;
  doc["gain_total"] = plan.gain_total;
  doc["availability_reward"] = plan.availability_reward;
  doc["audit_passed"] = plan.audit_passed;
  json routes = json::array();
  for (const auto& r : plan.routes) {
    json stops = json::array();
    stops.push_back(grid.crews.start_depot);
    for (BusId b : r.buses) stops.push_back(b);
    stops.push_back(grid.crews.end_depot);
    routes.push_back({{"crew", r.crew}, {"route", stops}, {"arrival", r.arrival}});
  }
  doc["routes"] = routes;
  json buses = json::array();
  for (std::size_t i = 0; i < plan.buses.size(); ++i) {
    std::vector<int> f, z;
    for (Eigen::Index t = 0; t < plan.flags.cols(); ++t) {
      f.push_back(plan.flags(static_cast<Eigen::Index>(i), t));
      z.push_back(plan.availability(static_cast<Eigen::Index>(i), t));
    }
    buses.push_back({{"bus", plan.buses[i]}, {"repair_step", plan.repair_step[i]}, {"F", f}, {"Z", z}});
  }
  doc["buses"] = buses;
  json steps = json::array();
  for (const auto& s : plan.steps) {
    steps.push_back({{"t", s.t},
                     {"scenario", s.scenario},
                     {"combo", s.combo},
                     {"gains", s.gains},
                     {"estimated_abscissa", s.estimated_abscissa},
                     {"exact_abscissa", s.exact_abscissa}});
  }
  doc["steps"] = steps;
  doc["report"] = {{"gain_total", report.gain_total},
                   {"droop_cost", report.droop_cost},
                   {"gain_reset_step", report.gain_reset_step},
                   {"full_repair_step", report.full_repair_step}};
  return doc;
}

void write_plan_csv(const RecoveryPlan& plan, const GridCase& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path);
  out << "t,scenario";
  for (const auto& u : grid.ibr.units) out << ",gain_" << u.bus;
  for (BusId b : plan.buses) out << ",Z_" << b;
  out << ",estimated_abscissa,exact_abscissa\n";
  out.precision(10);
  for (const auto& s : plan.steps) {
    out << s.t << "," << s.scenario;
    for (double g : s.gains) out << "," << g;
    for (std::size_t i = 0; i < plan.buses.size(); ++i) out << "," << plan.availability(static_cast<Eigen::Index>(i), s.t);
    out << "," << s.estimated_abscissa << "," << s.exact_abscissa << "\n";
  }
}

}  // namespace crda
