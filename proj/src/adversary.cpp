#include "crda/adversary.hpp"

#include "crda/error.hpp"
#include "crda/parallel.hpp"
#include "crda/spectral.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace crda {

int scenario_index(const std::vector<int>& availability) {
  int m = 0;
  for (std::size_t i = 0; i < availability.size(); ++i) {
    if (availability[i] != 0 && availability[i] != 1) throw ModelError("availability entries must be 0 or 1");
    if (availability[i] == 0) m |= 1 << i;
  }
  return m;
}

std::vector<int> index_to_availability(int scenario, std::size_t buses) {
  if (scenario < 0 || scenario >= (1 << buses)) throw ModelError("scenario index out of range");
  std::vector<int> z(buses);
  for (std::size_t i = 0; i < buses; ++i) z[i] = (scenario >> i) & 1 ? 0 : 1;
  return z;
}

std::vector<double> mask_gains(const std::vector<double>& gains, int scenario) {
  std::vector<double> out(gains.size(), 0.0);
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if ((scenario >> i) & 1) out[i] = gains[i];
  }
  return out;
}

namespace {

std::vector<std::size_t> unrepaired(const GridCase& grid, int scenario) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < grid.num_compromised(); ++i) {
    if ((scenario >> i) & 1) idx.push_back(i);
  }
  return idx;
}

double abscissa_at(const GridCase& grid, const std::vector<double>& gains) {
  const std::vector<double> zero(grid.num_ibr(), 0.0);
  return spectral_abscissa(assemble_system_matrix(grid, gains, zero).state);
}

struct Scored {
  double value;
  std::vector<double> gains;
};

std::vector<Scored> lattice(const GridCase& grid, int scenario, const AdversaryOptions& options) {
  const auto free = unrepaired(grid, scenario);
  if (static_cast<int>(free.size()) > options.oracle_budget) {
    throw BudgetError("corner oracle limited to " + std::to_string(options.oracle_budget) + " unrepaired buses");
  }
  const std::vector<double> bounds = attack_gain_bound_vector(grid);
  const std::size_t k = free.size();
  long long points = 1;
  for (std::size_t i = 0; i < k; ++i) points *= 3;
  const bool full = points <= 100000;

  std::vector<std::vector<double>> candidates;
  std::vector<double> g(grid.num_compromised(), 0.0);
  if (full) {
    for (long long code = 0; code < points; ++code) {
      long long c = code;
      for (std::size_t i = 0; i < k; ++i) {
        g[free[i]] = 0.5 * static_cast<double>(c % 3) * bounds[free[i]];
        c /= 3;
      }
      candidates.push_back(g);
    }
  } else {
    for (long long code = 0; code < (1LL << k); ++code) {
      for (std::size_t i = 0; i < k; ++i) g[free[i]] = ((code >> i) & 1) ? bounds[free[i]] : 0.0;
      candidates.push_back(g);
    }
    for (std::size_t i = 0; i < k; ++i) g[free[i]] = 0.5 * bounds[free[i]];
    candidates.push_back(g);
  }
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (auto& c : candidates) scored.push_back({abscissa_at(grid, c), std::move(c)});
  // Stable: ties keep enumeration order.
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.value > b.value; });
  return scored;
}

// Gradient of the spectral abscissa with respect to the attack gains, from
// the eigenvalue attaining it (either member of a conjugate pair gives the
// same real part derivative).
std::vector<double> abscissa_gradient(const GridCase& grid, const std::vector<double>& gains) {
  const std::vector<double> zero(grid.num_ibr(), 0.0);
  const Eigen::MatrixXd b = assemble_system_matrix(grid, gains, zero).state;
  const auto pairs = eigen_pairs(b, {grid.planner.residual_tol, grid.planner.degeneracy_tol});
  const EigenPair& top = pairs.front();
  std::vector<double> grad(grid.num_compromised(), 0.0);
  for (std::size_t i = 0; i < grid.num_compromised(); ++i) {
    const GainEntry e = attack_gain_entry(grid, i);
    grad[i] = robust_sensitivity(b, top, e.row, e.col, e.derivative).real();
  }
  return grad;
}

WorstCaseGains ascend(const GridCase& grid, int scenario, std::vector<double> start, double start_value,
                      const AdversaryOptions& options) {
  const auto free = unrepaired(grid, scenario);
  const std::vector<double> bounds = attack_gain_bound_vector(grid);
  WorstCaseGains best{scenario, std::move(start), start_value, 0, false};
  for (int it = 0; it < options.max_iterations; ++it) {
    best.iterations = it + 1;
    const std::vector<double> grad = abscissa_gradient(grid, best.gains);
    // Search direction scaled by the box width, projected onto active bounds.
    std::vector<double> dir(grid.num_compromised(), 0.0);
    double scale = 0.0;
    for (std::size_t i : free) {
      double d = bounds[i] * grad[i];
      if ((best.gains[i] >= bounds[i] && d > 0.0) || (best.gains[i] <= 0.0 && d < 0.0)) d = 0.0;
      dir[i] = d;
      scale = std::max(scale, std::abs(d) / std::max(bounds[i], 1e-12));
    }
    if (scale == 0.0) {
      best.converged = true;
      break;
    }
    bool improved = false;
    for (double step = 1.0 / scale; step * scale >= options.min_step; step *= 0.5) {
      std::vector<double> trial = best.gains;
      for (std::size_t i : free) trial[i] = std::clamp(trial[i] + step * dir[i], 0.0, bounds[i]);
      const double value = abscissa_at(grid, trial);
      if (value > best.abscissa + 1e-12) {
        best.gains = std::move(trial);
        best.abscissa = value;
        improved = true;
        break;
      }
    }
    if (!improved) {
      best.converged = true;
      break;
    }
  }
  return best;
}

}  // namespace

WorstCaseGains corner_oracle(const GridCase& grid, int scenario, const AdversaryOptions& options) {
  if (scenario < 0 || scenario >= static_cast<int>(grid.num_scenarios())) throw ModelError("scenario index out of range");
  auto scored = lattice(grid, scenario, options);
  return {scenario, std::move(scored.front().gains), scored.front().value, 0, true};
}

WorstCaseGains worst_case_gains(const GridCase& grid, int scenario, const AdversaryOptions& options) {
  if (scenario < 0 || scenario >= static_cast<int>(grid.num_scenarios())) throw ModelError("scenario index out of range");
  if (scenario == 0) {
    const std::vector<double> zero(grid.num_compromised(), 0.0);
    return {0, zero, abscissa_at(grid, zero), 0, true};
  }
  const auto scored = lattice(grid, scenario, options);
  std::vector<std::vector<double>> starts;
  std::vector<double> values;
  const auto free = unrepaired(grid, scenario);
  const std::vector<double> bounds = attack_gain_bound_vector(grid);
  std::vector<double> mid(grid.num_compromised(), 0.0);
  for (std::size_t i : free) mid[i] = 0.5 * bounds[i];
  starts.push_back(mid);
  values.push_back(abscissa_at(grid, mid));
  for (int s = 0; s < options.extra_starts && s < static_cast<int>(scored.size()); ++s) {
    starts.push_back(scored[static_cast<std::size_t>(s)].gains);
    values.push_back(scored[static_cast<std::size_t>(s)].value);
  }
  WorstCaseGains best;
  bool have = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    WorstCaseGains r = ascend(grid, scenario, starts[s], values[s], options);
    if (!have || r.abscissa > best.abscissa) {
      best = std::move(r);
      have = true;
    }
  }
  if (!best.converged) {
    spdlog::warn("worst-case gains for scenario {} hit the iteration cap; returning best iterate", scenario);
  }
  return best;
}

std::map<int, WorstCaseGains> all_worst_case_gains(const GridCase& grid, const AdversaryOptions& options) {
  const std::size_t count = grid.num_scenarios();
  std::vector<WorstCaseGains> results(count);
  parallel_for(count, [&](std::size_t m) { results[m] = worst_case_gains(grid, static_cast<int>(m), options); });
  std::map<int, WorstCaseGains> out;
  for (std::size_t m = 0; m < count; ++m) out.emplace(static_cast<int>(m), std::move(results[m]));
  return out;
}

std::map<int, std::vector<double>> gain_vectors(const std::map<int, WorstCaseGains>& worst) {
  std::map<int, std::vector<double>> out;
  for (const auto& [m, w] : worst) out.emplace(m, w.gains);
  return out;
}

nlohmann::json worst_gains_to_json(const std::map<int, WorstCaseGains>& worst, const std::string& case_hash) {
  nlohmann::json doc;
  doc["format"] = "crda-worst-case-gains";
  doc["version"] = 1;
  doc["case_hash"] = case_hash;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [m, w] : worst) {
    list.push_back({{"scenario", m},
                    {"gains", w.gains},
                    {"abscissa", w.abscissa},
                    {"iterations", w.iterations},
                    {"converged", w.converged}});
  }
  doc["scenarios"] = list;
  return doc;
}

std::map<int, WorstCaseGains> worst_gains_from_json(const nlohmann::json& doc, const std::string& expected_hash) {
  if (doc.value("format", std::string{}) != "crda-worst-case-gains" || doc.value("version", 0) != 1) {
    throw ModelError("not a version-1 worst-case gain cache");
  }
  if (!expected_hash.empty() && doc.at("case_hash").get<std::string>() != expected_hash) {
    throw ModelError("worst-case gain cache was built for a different case");
  }
  std::map<int, WorstCaseGains> out;
  for (const auto& s : doc.at("scenarios")) {
    WorstCaseGains w;
    w.scenario = s.at("scenario").get<int>();
    w.gains = s.at("gains").get<std::vector<double>>();
    w.abscissa = s.at("abscissa").get<double>();
    w.iterations = s.value("iterations", 0);
    w.converged = s.value("converged", true);
    out.emplace(w.scenario, std::move(w));
  }
  return out;
}

}  // namespace crda
