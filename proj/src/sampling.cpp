#include "crda/sampling.hpp"

#include "crda/error.hpp"
#include "crda/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace crda {

OrderMatrix order_matrix(int samples, int dims) {
  if (samples < 2) throw ModelError("order matrix needs at least two samples");
  if (dims < 1) throw ModelError("order matrix needs at least one dimension");
  long long total = 1;
  for (int i = 0; i < dims; ++i) {
    total *= samples;
    if (total > 50'000'000LL) throw BudgetError("N^d sampling combinations overflow the budget");
  }
  const auto cols = static_cast<Eigen::Index>(total);
  OrderMatrix order(dims, cols);

  auto pow = [&](int e) {
    long long p = 1;
    for (int i = 0; i < e; ++i) p *= samples;
    return p;
  };

  // Palindrome [1..N, N..1] with each entry repeated N^(i-1) times, tiled;
  // a trailing ascending run when 2N^i does not divide N^d.
  for (int i = 1; i <= dims - 1; ++i) {
    const long long repeat = pow(i - 1);
    const long long period = 2 * pow(i);
    const long long tiles = total / period;
    const long long filled = tiles * period;
    for (long long c = 0; c < filled; ++c) {
      const long long pos = (c % period) / repeat;  // 0 .. 2N-1
      const long long value = pos < samples ? pos + 1 : 2 * samples - pos;
      order(i - 1, static_cast<Eigen::Index>(c)) = static_cast<int>(value);
    }
    for (long long c = filled; c < total; ++c) {
      order(i - 1, static_cast<Eigen::Index>(c)) = static_cast<int>((c - filled) / repeat + 1);
    }
  }
  const long long repeat = pow(dims - 1);
  for (long long c = 0; c < total; ++c) {
    order(dims - 1, static_cast<Eigen::Index>(c)) = static_cast<int>(c / repeat + 1);
  }
  return order;
}

double SegmentGrid::sample(std::size_t unit, int index) const {
  return ranges[unit].lower + (index - 1) * spacing[unit];
}

double SegmentGrid::lower(std::size_t unit, int index) const {
  if (index == 1) return ranges[unit].lower;
  return sample(unit, index) - 0.5 * spacing[unit];
}

double SegmentGrid::upper(std::size_t unit, int index) const {
  if (index == samples) return ranges[unit].upper;
  return sample(unit, index) + 0.5 * spacing[unit];
}

GainRange SegmentGrid::milp_box(std::size_t unit, int index) const {
  const double lo = lower(unit, index);
  const double hi = index == samples ? upper(unit, index) : upper(unit, index) - epsilon;
  return {lo, std::max(lo, hi)};
}

int SegmentGrid::segment_of(std::size_t unit, double gain) const {
  if (spacing[unit] <= 0.0) return 1;
  for (int l = 1; l < samples; ++l) {
    if (gain < upper(unit, l)) return l;
  }
  return samples;
}

SegmentGrid make_segment_grid(const std::vector<GainRange>& ranges, int samples, double epsilon) {
  if (samples < 2) throw ModelError("segment grid needs at least two samples");
  SegmentGrid grid;
  grid.samples = samples;
  grid.ranges = ranges;
  grid.epsilon = epsilon;
  for (const auto& r : ranges) {
    if (r.upper < r.lower) throw ModelError("inverted droop gain range");
    grid.spacing.push_back((r.upper - r.lower) / (samples - 1));
  }
  return grid;
}

SegmentBounds segment_bounds(const SegmentGrid& grid) {
  SegmentBounds out;
  for (std::size_t i = 0; i < grid.dims(); ++i) {
    std::vector<double> lo, hi;
    for (int l = 1; l <= grid.samples; ++l) {
      lo.push_back(grid.lower(i, l));
      hi.push_back(grid.upper(i, l));
    }
    out.lower.push_back(std::move(lo));
    out.upper.push_back(std::move(hi));
  }
  return out;
}

std::vector<double> index_to_gains(const Eigen::Ref<const Eigen::VectorXi>& column, const SegmentGrid& grid) {
  if (static_cast<std::size_t>(column.size()) != grid.dims()) throw ModelError("index column has wrong length");
  std::vector<double> gains;
  for (std::size_t i = 0; i < grid.dims(); ++i) {
    const int idx = column(static_cast<Eigen::Index>(i));
    if (idx < 1 || idx > grid.samples) throw ModelError("sampling index out of range");
    gains.push_back(grid.sample(i, idx));
  }
  return gains;
}

int combo_of(const OrderMatrix& order, const std::vector<int>& indices) {
  for (Eigen::Index c = 0; c < order.cols(); ++c) {
    bool same = true;
    for (Eigen::Index r = 0; r < order.rows() && same; ++r) {
      same = order(r, c) == indices[static_cast<std::size_t>(r)];
    }
    if (same) return static_cast<int>(c);
  }
  throw ModelError("index combination not present in the order matrix");
}

int ScenarioTable::refresh_count(int mode) const {
  std::set<int> distinct;
  for (Eigen::Index j = 0; j < record_of.cols(); ++j) distinct.insert(record_of(mode, j));
  return static_cast<int>(distinct.size());
}

int ScenarioTable::refreshed_combos() const {
  int count = record_of.cols() > 0 ? 1 : 0;
  for (Eigen::Index j = 1; j < record_of.cols(); ++j) {
    for (Eigen::Index n = 0; n < record_of.rows(); ++n) {
      if (record_of(n, j) != record_of(n, j - 1)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

std::size_t SensitivityTable::total_records() const {
  std::size_t total = 0;
  for (const auto& [m, t] : scenarios) total += t.records.size();
  return total;
}

int SensitivityTable::combo_for_gains(const std::vector<double>& gains) const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < grid.dims(); ++i) idx.push_back(grid.segment_of(i, gains[i]));
  return combo_of(order, idx);
}

Complex SensitivityTable::estimate(int scenario, int mode, const std::vector<double>& gains) const {
  const ScenarioTable& t = scenarios.at(scenario);
  return first_order_estimate(t.record(mode, combo_for_gains(gains)), gains);
}

namespace {

SensitivityRecord make_record(const GridCase& grid, const Eigen::MatrixXd& matrix, const EigenPair& pair,
                              const std::vector<double>& gains, const TableOptions& options) {
  SensitivityRecord rec;
  rec.lambda0 = pair.value;
  rec.k0 = gains;
  for (std::size_t i = 0; i < grid.num_ibr(); ++i) {
    const GainEntry e = droop_gain_entry(grid, i);
    rec.gradient.push_back(robust_sensitivity(matrix, pair, e.row, e.col, e.derivative, options.fd_step));
  }
  return rec;
}

}  // namespace

ScenarioTable generate_scenario_table(const GridCase& grid, int scenario,
                                      const std::vector<double>& attack_gains, const OrderMatrix& order,
                                      const SegmentGrid& segments, double threshold,
                                      const TableOptions& options) {
  ScenarioTable table;
  table.scenario = scenario;
  table.attack_gains = attack_gains;
  const auto combos = order.cols();
  const int modes = static_cast<int>(grid.state_dim());
  table.modes = modes;
  table.record_of.resize(modes, combos);
  table.exact.resize(modes, combos);

  std::vector<EigenPair> current;
  std::vector<int> active(static_cast<std::size_t>(modes));
  for (Eigen::Index j = 0; j < combos; ++j) {
    const std::vector<double> gains = index_to_gains(order.col(j), segments);
    const Eigen::MatrixXd matrix = assemble_system_matrix(grid, attack_gains, gains).state;
    std::vector<EigenPair> pairs;
    try {
      pairs = eigen_pairs(matrix, options.spectral);
    } catch (const EigenError& e) {
      throw EigenError("scenario " + std::to_string(scenario) + ", combo " + std::to_string(j) + ": " + e.what());
    }
    if (j == 0) {
      current = std::move(pairs);
      for (int n = 0; n < modes; ++n) {
        table.records.push_back(make_record(grid, matrix, current[static_cast<std::size_t>(n)], gains, options));
        active[static_cast<std::size_t>(n)] = static_cast<int>(table.records.size()) - 1;
        table.record_of(n, 0) = active[static_cast<std::size_t>(n)];
        table.exact(n, 0) = current[static_cast<std::size_t>(n)].value;
      }
      continue;
    }
    const std::vector<int> perm = match_eigenvalues(current, pairs);
    std::vector<EigenPair> next;
    next.reserve(pairs.size());
    for (int n = 0; n < modes; ++n) next.push_back(pairs[static_cast<std::size_t>(perm[static_cast<std::size_t>(n)])]);
    current = std::move(next);

    for (int n = 0; n < modes; ++n) {
      const EigenPair& pair = current[static_cast<std::size_t>(n)];
      const SensitivityRecord& carried = table.records[static_cast<std::size_t>(active[static_cast<std::size_t>(n)])];
      const Complex estimate = first_order_estimate(carried, gains);
      if (!(std::abs(estimate - pair.value) <= threshold)) {
        table.records.push_back(make_record(grid, matrix, pair, gains, options));
        active[static_cast<std::size_t>(n)] = static_cast<int>(table.records.size()) - 1;
      }
      table.record_of(n, j) = active[static_cast<std::size_t>(n)];
      table.exact(n, j) = pair.value;
    }
  }
  return table;
}

SensitivityTable generate_sensitivity_tables(const GridCase& grid,
                                             const std::map<int, std::vector<double>>& worst_gains,
                                             int samples, double threshold, const TableOptions& options) {
  SensitivityTable table;
  table.samples = samples;
  table.threshold = threshold;
  table.order = order_matrix(samples, static_cast<int>(grid.num_ibr()));
  table.grid = make_segment_grid(droop_gain_range_vector(grid), samples, grid.planner.epsilon);

  std::vector<std::pair<int, std::vector<double>>> jobs(worst_gains.begin(), worst_gains.end());
  std::vector<ScenarioTable> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    results[k] = generate_scenario_table(grid, jobs[k].first, jobs[k].second, table.order, table.grid,
                                         threshold, options);
  });
  for (std::size_t k = 0; k < jobs.size(); ++k) table.scenarios.emplace(jobs[k].first, std::move(results[k]));
  return table;
}

double max_sample_error(const SensitivityTable& table) {
  double worst = 0.0;
  for (const auto& [m, st] : table.scenarios) {
    for (Eigen::Index j = 0; j < table.order.cols(); ++j) {
      const std::vector<double> gains = index_to_gains(table.order.col(j), table.grid);
      for (int n = 0; n < st.modes; ++n) {
        worst = std::max(worst, std::abs(first_order_estimate(st.record(n, static_cast<int>(j)), gains) - st.exact(n, j)));
      }
    }
  }
  return worst;
}

EstimationSweep estimation_sweep(const GridCase& grid, const SensitivityTable& table, int scenario, int resolution,
                                 const TableOptions& options) {
  const ScenarioTable& st = table.scenarios.at(scenario);
  const OrderMatrix walk = order_matrix(resolution, static_cast<int>(table.grid.dims()));
  const SegmentGrid eval = make_segment_grid(table.grid.ranges, resolution, table.grid.epsilon);
  EstimationSweep out;
  out.scenario = scenario;
  out.points = static_cast<int>(walk.cols());
  out.max_error.assign(static_cast<std::size_t>(st.modes), 0.0);
  out.within.assign(static_cast<std::size_t>(st.modes), 0);
  out.single_start_max.assign(static_cast<std::size_t>(st.modes), 0.0);

  std::vector<EigenPair> current;
  for (Eigen::Index j = 0; j < walk.cols(); ++j) {
    const std::vector<double> gains = index_to_gains(walk.col(j), eval);
    std::vector<EigenPair> pairs =
        eigen_pairs(assemble_system_matrix(grid, st.attack_gains, gains).state, options.spectral);
    if (j == 0) {
      current = std::move(pairs);
    } else {
      const std::vector<int> perm = match_eigenvalues(current, pairs);
      std::vector<EigenPair> next;
      for (int p : perm) next.push_back(pairs[static_cast<std::size_t>(p)]);
      current = std::move(next);
    }
    const int combo = table.combo_for_gains(gains);
    for (int n = 0; n < st.modes; ++n) {
      const auto nn = static_cast<std::size_t>(n);
      const Complex exact = current[nn].value;
      const double err = std::abs(first_order_estimate(st.record(n, combo), gains) - exact);
      out.max_error[nn] = std::max(out.max_error[nn], err);
      if (err <= table.threshold) ++out.within[nn];
      const double single = std::abs(first_order_estimate(st.record(n, 0), gains) - exact);
      out.single_start_max[nn] = std::max(out.single_start_max[nn], single);
    }
  }
  for (int n = 1; n < st.modes; ++n) {
    if (st.exact(n, 0).real() > st.exact(out.critical_mode, 0).real()) out.critical_mode = n;
  }
  return out;
}

nlohmann::json table_to_json(const SensitivityTable& table, const std::string& case_hash) {
  using nlohmann::json;
  json doc;
  doc["format"] = "crda-sensitivity-table";
  doc["version"] = 1;
  doc["case_hash"] = case_hash;
  doc["samples"] = table.samples;
  doc["threshold"] = table.threshold;
  doc["epsilon"] = table.grid.epsilon;
  json ranges = json::array();
  for (const auto& r : table.grid.ranges) ranges.push_back({r.lower, r.upper});
  doc["ranges"] = ranges;
  json scenarios = json::array();
  for (const auto& [m, t] : table.scenarios) {
    json s;
    s["scenario"] = m;
    s["attack_gains"] = t.attack_gains;
    s["modes"] = t.modes;
    json records = json::array();
    for (const auto& r : t.records) {
      json g_re = json::array(), g_im = json::array();
      for (const auto& g : r.gradient) {
        g_re.push_back(g.real());
        g_im.push_back(g.imag());
      }
      records.push_back({{"lambda0", {r.lambda0.real(), r.lambda0.imag()}},
                         {"k0", r.k0},
                         {"gradient_re", g_re},
                         {"gradient_im", g_im}});
    }
    s["records"] = records;
    json record_of = json::array(), exact_re = json::array(), exact_im = json::array();
    for (Eigen::Index n = 0; n < t.record_of.rows(); ++n) {
      std::vector<int> row;
      std::vector<double> re, im;
      for (Eigen::Index j = 0; j < t.record_of.cols(); ++j) {
        row.push_back(t.record_of(n, j));
        re.push_back(t.exact(n, j).real());
        im.push_back(t.exact(n, j).imag());
      }
      record_of.push_back(row);
      exact_re.push_back(re);
      exact_im.push_back(im);
    }
    s["record_of"] = record_of;
    s["exact_re"] = exact_re;
    s["exact_im"] = exact_im;
    scenarios.push_back(s);
  }
  doc["scenarios"] = scenarios;
  return doc;
}

SensitivityTable table_from_json(const nlohmann::json& doc, const std::string& expected_hash) {
  if (doc.value("format", std::string{}) != "crda-sensitivity-table" || doc.value("version", 0) != 1) {
    throw ModelError("not a version-1 sensitivity table");
  }
  if (!expected_hash.empty() && doc.at("case_hash").get<std::string>() != expected_hash) {
    throw ModelError("sensitivity table was built for a different case");
  }
  SensitivityTable table;
  table.samples = doc.at("samples").get<int>();
  table.threshold = doc.at("threshold").get<double>();
  std::vector<GainRange> ranges;
  for (const auto& r : doc.at("ranges")) ranges.push_back({r[0].get<double>(), r[1].get<double>()});
  table.grid = make_segment_grid(ranges, table.samples, doc.at("epsilon").get<double>());
  table.order = order_matrix(table.samples, static_cast<int>(ranges.size()));
  for (const auto& s : doc.at("scenarios")) {
    ScenarioTable t;
    t.scenario = s.at("scenario").get<int>();
    t.attack_gains = s.at("attack_gains").get<std::vector<double>>();
    t.modes = s.at("modes").get<int>();
    for (const auto& r : s.at("records")) {
      SensitivityRecord rec;
      rec.lambda0 = {r.at("lambda0")[0].get<double>(), r.at("lambda0")[1].get<double>()};
      rec.k0 = r.at("k0").get<std::vector<double>>();
      const auto re = r.at("gradient_re").get<std::vector<double>>();
      const auto im = r.at("gradient_im").get<std::vector<double>>();
      for (std::size_t i = 0; i < re.size(); ++i) rec.gradient.emplace_back(re[i], im[i]);
      t.records.push_back(std::move(rec));
    }
    const auto& ro = s.at("record_of");
    const auto& ere = s.at("exact_re");
    const auto& eim = s.at("exact_im");
    t.record_of.resize(t.modes, table.order.cols());
    t.exact.resize(t.modes, table.order.cols());
    for (int n = 0; n < t.modes; ++n) {
      for (Eigen::Index j = 0; j < table.order.cols(); ++j) {
        t.record_of(n, j) = ro[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)].get<int>();
        t.exact(n, j) = {ere[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)].get<double>(),
                         eim[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)].get<double>()};
      }
    }
    table.scenarios.emplace(t.scenario, std::move(t));
  }
  return table;
}

}  // namespace crda
