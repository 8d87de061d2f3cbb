#include "crda/grid_model.hpp"

#include "crda/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace crda {

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw CaseError(path + "/" + key, "missing required field");
  }
  return obj.at(key);
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw CaseError(path + "/" + key, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw CaseError(path + "/" + key, "must be finite");
  return x;
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, path);
}

std::optional<double> optional_number(const json& obj, const std::string& key,
                                      const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return number(obj, key, path);
}

int integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw CaseError(path + "/" + key, "expected an integer");
  return v.get<int>();
}

const json& array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw CaseError(path + "/" + key, "expected an array");
  return v;
}

std::string at(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

void parse_planner(const json& doc, GridCase& grid) {
  PlannerConfig& p = grid.planner;
  if (!doc.contains("planner")) return;
  const json& j = doc.at("planner");
  const std::string path = "/planner";
  if (j.contains("horizon")) p.horizon = integer(j, "horizon", path);
  p.step_minutes = number_or(j, "step_minutes", p.step_minutes, path);
  if (j.contains("samples")) p.samples = integer(j, "samples", path);
  p.big_m = number_or(j, "big_m", p.big_m, path);
  p.epsilon = number_or(j, "epsilon", p.epsilon, path);
  p.stability_margin = number_or(j, "stability_margin", p.stability_margin, path);
  p.estimation_threshold = number_or(j, "estimation_threshold", p.estimation_threshold, path);
  p.droop_cost_rate = number_or(j, "droop_cost_rate", p.droop_cost_rate, path);
  p.residual_tol = number_or(j, "residual_tol", p.residual_tol, path);
  p.degeneracy_tol = number_or(j, "degeneracy_tol", p.degeneracy_tol, path);
  p.time_limit = number_or(j, "time_limit", p.time_limit, path);
  p.mip_gap = number_or(j, "mip_gap", p.mip_gap, path);
  if (j.contains("tighten_big_m")) p.tighten_big_m = j.at("tighten_big_m").get<bool>();
  if (j.contains("weights")) {
    const json& w = array(j, "weights", path);
    p.weights.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].is_number()) throw CaseError(at(path + "/weights", i), "expected a number");
      p.weights.push_back(w[i].get<double>());
    }
  }
}

void validate(GridCase& grid) {
  std::set<BusId> gens, loads;
  for (const auto& g : grid.generators) gens.insert(g.bus);
  for (const auto& l : grid.loads) loads.insert(l.bus);

  for (std::size_t i = 0; i < grid.generators.size(); ++i) {
    const auto& g = grid.generators[i];
    if (loads.count(g.bus)) {
      throw CaseError(at("/generators", i), "bus " + std::to_string(g.bus) + " is also a load bus");
    }
    if (!(g.inertia > 0.0)) throw CaseError(at("/generators", i) + "/inertia", "inertia must be positive");
  }
  for (std::size_t i = 0; i < grid.loads.size(); ++i) {
    if (!(grid.loads[i].damping > 0.0)) {
      throw CaseError(at("/loads", i) + "/damping", "damping must be positive");
    }
  }
  if (gens.size() != grid.generators.size()) throw CaseError("/generators", "duplicate generator bus");
  if (loads.size() != grid.loads.size()) throw CaseError("/loads", "duplicate load bus");
  if (grid.generators.empty()) throw CaseError("/generators", "at least one generator required");

  auto declared = [&](BusId b) { return gens.count(b) || loads.count(b); };
  for (std::size_t i = 0; i < grid.lines.size(); ++i) {
    const auto& ln = grid.lines[i];
    if (!declared(ln.from)) throw CaseError(at("/lines", i) + "/from", "unknown bus " + std::to_string(ln.from));
    if (!declared(ln.to)) throw CaseError(at("/lines", i) + "/to", "unknown bus " + std::to_string(ln.to));
    if (ln.from == ln.to) throw CaseError(at("/lines", i), "line connects a bus to itself");
    if (ln.reactance == 0.0) throw CaseError(at("/lines", i) + "/reactance", "zero reactance");
  }

  const auto& atk = grid.attack;
  if (!(atk.omega_max > 0.0)) throw CaseError("/attack/omega_max", "must be positive");
  std::set<BusId> seen;
  for (std::size_t i = 0; i < atk.buses.size(); ++i) {
    const auto& a = atk.buses[i];
    const std::string p = at("/attack/buses", i);
    if (!loads.count(a.bus)) throw CaseError(p + "/bus", "compromised bus " + std::to_string(a.bus) + " is not a load bus");
    if (!gens.count(a.sensor)) throw CaseError(p + "/sensor", "sensor bus " + std::to_string(a.sensor) + " is not a generator bus");
    if (a.gain_bound && *a.gain_bound < 0.0) throw CaseError(p + "/gain_bound", "must be non-negative");
    if (!seen.insert(a.bus).second) throw CaseError(p + "/bus", "duplicate compromised bus");
  }
  if (atk.buses.size() > 20) throw CaseError("/attack/buses", "too many compromised buses");

  seen.clear();
  for (std::size_t i = 0; i < grid.ibr.units.size(); ++i) {
    const auto& u = grid.ibr.units[i];
    const std::string p = at("/ibr/units", i);
    if (!loads.count(u.bus)) throw CaseError(p + "/bus", "IBR bus " + std::to_string(u.bus) + " is not a load bus");
    if (!gens.count(u.sensor)) throw CaseError(p + "/sensor", "sensor bus " + std::to_string(u.sensor) + " is not a generator bus");
    if (!seen.insert(u.bus).second) throw CaseError(p + "/bus", "duplicate IBR bus");
    if (u.gain_min.has_value() != u.gain_max.has_value()) {
      throw CaseError(p, "gain_min and gain_max must be given together");
    }
    if (u.gain_min) {
      if (*u.gain_min < 0.0) throw CaseError(p + "/gain_min", "must be non-negative");
      if (*u.gain_min > *u.gain_max) throw CaseError(p, "inverted droop gain range");
    } else if (!(u.p_max >= u.p_ref && u.p_ref > 0.0)) {
      throw CaseError(p, "need p_max >= p_ref > 0 to derive the droop gain range");
    }
  }

  const std::size_t nc = atk.buses.size();
  auto& cc = grid.crews;
  if (cc.start_depot == cc.end_depot) throw CaseError("/crews", "start and end depot must differ");
  for (std::size_t c = 0; c < cc.crews.size(); ++c) {
    const auto& crew = cc.crews[c];
    const std::string p = at("/crews/crews", c);
    if (crew.repair_times.size() != nc) throw CaseError(p + "/repair_times", "need one repair time per compromised bus");
    for (std::size_t i = 0; i < nc; ++i) {
      if (!(crew.repair_times[i] > 0.0)) throw CaseError(at(p + "/repair_times", i), "repair time must be positive");
    }
    if (crew.travel_times.rows() != static_cast<Eigen::Index>(nc + 2) ||
        crew.travel_times.cols() != static_cast<Eigen::Index>(nc + 2)) {
      throw CaseError(p + "/travel_times", "travel matrix must be square over compromised buses plus both depots");
    }
    if ((crew.travel_times.array() < 0.0).any()) throw CaseError(p + "/travel_times", "travel times must be non-negative");
  }

  auto& pl = grid.planner;
  if (pl.horizon < 1) throw CaseError("/planner/horizon", "must be positive");
  if (pl.samples < 2) throw CaseError("/planner/samples", "need at least two samples");
  if (!(pl.epsilon > 0.0)) throw CaseError("/planner/epsilon", "must be positive");
  if (!(pl.big_m > 0.0)) throw CaseError("/planner/big_m", "must be positive");
  if (pl.weights.empty()) {
    for (const auto& a : atk.buses) {
      const Load& l = grid.loads[grid.load_index(a.bus)];
      pl.weights.push_back(0.01 * l.max_vulnerable_load);
    }
  }
  if (pl.weights.size() != nc) throw CaseError("/planner/weights", "need one weight per compromised bus");
  double total = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    if (!(pl.weights[i] > 0.0)) throw CaseError(at("/planner/weights", i), "weights must be positive");
    total += pl.weights[i];
  }
  if (total * pl.horizon >= 1.0) {
    throw CaseError("/planner/weights", "sum of weights times horizon must stay below 1");
  }
  if (pl.stability_margin < pl.estimation_threshold) {
    throw CaseError("/planner/stability_margin", "margin must be at least the estimation threshold");
  }
}

}  // namespace

int GridCase::generator_index(BusId bus) const {
  auto it = std::lower_bound(generators.begin(), generators.end(), bus,
                             [](const Generator& g, BusId b) { return g.bus < b; });
  return (it != generators.end() && it->bus == bus) ? static_cast<int>(it - generators.begin()) : -1;
}

int GridCase::load_index(BusId bus) const {
  auto it = std::lower_bound(loads.begin(), loads.end(), bus,
                             [](const Load& l, BusId b) { return l.bus < b; });
  return (it != loads.end() && it->bus == bus) ? static_cast<int>(it - loads.begin()) : -1;
}

int GridCase::delta_row(BusId gen) const { return generator_index(gen); }

int GridCase::theta_row(BusId load) const {
  return static_cast<int>(generators.size()) + load_index(load);
}

int GridCase::omega_row(BusId gen) const {
  return static_cast<int>(generators.size() + loads.size()) + generator_index(gen);
}

GridCase parse_case(const json& doc) {
  if (!doc.is_object()) throw CaseError("", "case document must be an object");
  GridCase grid;
  grid.source = doc;
  grid.name = doc.value("name", std::string{"case"});

  std::set<BusId> buses;
  const json& jb = array(doc, "buses", "");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    if (!jb[i].is_number_integer()) throw CaseError(at("/buses", i), "bus id must be an integer");
    if (!buses.insert(jb[i].get<int>()).second) throw CaseError(at("/buses", i), "duplicate bus id");
  }
  auto check_declared = [&](BusId b, const std::string& path) {
    if (!buses.count(b)) throw CaseError(path, "unknown bus " + std::to_string(b));
  };

  const json& jg = array(doc, "generators", "");
  for (std::size_t i = 0; i < jg.size(); ++i) {
    const std::string p = at("/generators", i);
    Generator g;
    g.bus = integer(jg[i], "bus", p);
    check_declared(g.bus, p + "/bus");
    g.inertia = number(jg[i], "inertia", p);
    g.damping = number(jg[i], "damping", p);
    g.kp = number(jg[i], "kp", p);
    g.ki = number(jg[i], "ki", p);
    grid.generators.push_back(g);
  }
  const json& jl = array(doc, "loads", "");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string p = at("/loads", i);
    Load l;
    l.bus = integer(jl[i], "bus", p);
    check_declared(l.bus, p + "/bus");
    l.damping = number(jl[i], "damping", p);
    l.secure_load = number_or(jl[i], "secure_load", 0.0, p);
    l.max_vulnerable_load = number_or(jl[i], "max_vulnerable_load", 0.0, p);
    grid.loads.push_back(l);
  }
  std::sort(grid.generators.begin(), grid.generators.end(),
            [](const Generator& a, const Generator& b) { return a.bus < b.bus; });
  std::sort(grid.loads.begin(), grid.loads.end(),
            [](const Load& a, const Load& b) { return a.bus < b.bus; });
  if (grid.generators.size() + grid.loads.size() != buses.size()) {
    throw CaseError("/buses", "every bus must be exactly one of generator or load");
  }

  const json& jli = array(doc, "lines", "");
  for (std::size_t i = 0; i < jli.size(); ++i) {
    const std::string p = at("/lines", i);
    Line ln;
    ln.from = integer(jli[i], "from", p);
    ln.to = integer(jli[i], "to", p);
    check_declared(ln.from, p + "/from");
    check_declared(ln.to, p + "/to");
    ln.reactance = number(jli[i], "reactance", p);
    grid.lines.push_back(ln);
  }

  if (doc.contains("attack")) {
    const json& ja = doc.at("attack");
    grid.attack.omega_max = number(ja, "omega_max", "/attack");
    grid.attack.alpha_max = number_or(ja, "alpha_max", grid.attack.omega_max, "/attack");
    const json& jab = array(ja, "buses", "/attack");
    for (std::size_t i = 0; i < jab.size(); ++i) {
      const std::string p = at("/attack/buses", i);
      AttackedBus a;
      a.bus = integer(jab[i], "bus", p);
      a.sensor = integer(jab[i], "sensor", p);
      a.gain_bound = optional_number(jab[i], "gain_bound", p);
      grid.attack.buses.push_back(a);
    }
  }

  if (doc.contains("ibr")) {
    const json& ji = doc.at("ibr");
    grid.ibr.power_margin = number_or(ji, "power_margin", 0.0, "/ibr");
    const json& ju = array(ji, "units", "/ibr");
    for (std::size_t i = 0; i < ju.size(); ++i) {
      const std::string p = at("/ibr/units", i);
      IbrUnit u;
      u.bus = integer(ju[i], "bus", p);
      u.sensor = integer(ju[i], "sensor", p);
      u.gain_min = optional_number(ju[i], "gain_min", p);
      u.gain_max = optional_number(ju[i], "gain_max", p);
      u.p_ref = number_or(ju[i], "p_ref", 0.0, p);
      u.p_max = number_or(ju[i], "p_max", 0.0, p);
      grid.ibr.units.push_back(u);
    }
  }

  if (doc.contains("crews")) {
    const json& jc = doc.at("crews");
    grid.crews.start_depot = jc.value("start_depot", std::string{"st"});
    grid.crews.end_depot = jc.value("end_depot", std::string{"en"});
    grid.crews.allow_idle_crews = jc.value("allow_idle", false);
    const json& jcc = array(jc, "crews", "/crews");
    for (std::size_t c = 0; c < jcc.size(); ++c) {
      const std::string p = at("/crews/crews", c);
      Crew crew;
      crew.name = jcc[c].value("name", "crew-" + std::to_string(c + 1));
      const json& rt = array(jcc[c], "repair_times", p);
      for (std::size_t i = 0; i < rt.size(); ++i) {
        if (!rt[i].is_number()) throw CaseError(at(p + "/repair_times", i), "expected a number");
        crew.repair_times.push_back(rt[i].get<double>());
      }
      const json& tt = array(jcc[c], "travel_times", p);
      const auto n = static_cast<Eigen::Index>(tt.size());
      crew.travel_times = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const std::string pr = at(p + "/travel_times", static_cast<std::size_t>(r));
        if (!tt[r].is_array() || static_cast<Eigen::Index>(tt[r].size()) != n) {
          throw CaseError(pr, "travel matrix rows must have equal length");
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          if (!tt[r][k].is_number()) throw CaseError(at(pr, static_cast<std::size_t>(k)), "expected a number");
          crew.travel_times(r, k) = tt[r][k].get<double>();
        }
      }
      grid.crews.crews.push_back(std::move(crew));
    }
  }

  parse_planner(doc, grid);
  validate(grid);
  try {
    (void)build_admittance_blocks(grid);
  } catch (const ModelError& e) {
    throw CaseError("/lines", e.what());
  }
  return grid;
}

GridCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaseError(path.string(), "cannot open case file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CaseError(path.string(), std::string{"invalid JSON: "} + e.what());
  }
  return parse_case(doc);
}

std::string case_hash(const GridCase& grid) {
  const std::string canonical = grid.source.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

AdmittanceBlocks build_admittance_blocks(const GridCase& grid) {
  const auto ng = static_cast<Eigen::Index>(grid.num_generators());
  const auto nl = static_cast<Eigen::Index>(grid.num_loads());
  const Eigen::Index n = ng + nl;
  auto position = [&](BusId b) -> Eigen::Index {
    int g = grid.generator_index(b);
    if (g >= 0) return g;
    int l = grid.load_index(b);
    if (l >= 0) return ng + l;
    throw ModelError("line references undeclared bus " + std::to_string(b));
  };

  AdmittanceBlocks blocks;
  blocks.full = Eigen::MatrixXd::Zero(n, n);
  for (const Line& ln : grid.lines) {
    if (ln.reactance == 0.0) {
      throw ModelError("zero reactance on line " + std::to_string(ln.from) + "-" + std::to_string(ln.to));
    }
    const double b = 1.0 / ln.reactance;
    const Eigen::Index i = position(ln.from), j = position(ln.to);
    blocks.full(i, i) += b;
    blocks.full(j, j) += b;
    blocks.full(i, j) -= b;
    blocks.full(j, i) -= b;
  }

  // Connectivity by breadth-first search over the line list.
  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(n));
  for (const Line& ln : grid.lines) {
    const auto i = position(ln.from), j = position(ln.to);
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> queue{0};
  seen[0] = 1;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    for (auto k : adj[static_cast<std::size_t>(queue[q])]) {
      if (!seen[static_cast<std::size_t>(k)]) {
        seen[static_cast<std::size_t>(k)] = 1;
        queue.push_back(k);
      }
    }
  }
  if (static_cast<Eigen::Index>(queue.size()) != n) throw ModelError("line graph is disconnected");

  blocks.gg = blocks.full.topLeftCorner(ng, ng);
  blocks.gl = blocks.full.topRightCorner(ng, nl);
  blocks.lg = blocks.full.bottomLeftCorner(nl, ng);
  blocks.ll = blocks.full.bottomRightCorner(nl, nl);
  return blocks;
}

GainMap attack_gain_bounds(const GridCase& grid) {
  GainMap out;
  for (const auto& a : grid.attack.buses) {
    if (a.gain_bound) {
      out[a.bus] = *a.gain_bound;
    } else {
      const Load& l = grid.loads[static_cast<std::size_t>(grid.load_index(a.bus))];
      out[a.bus] = 0.5 * l.max_vulnerable_load / grid.attack.omega_max;
    }
  }
  return out;
}

std::vector<double> attack_gain_bound_vector(const GridCase& grid) {
  const GainMap bounds = attack_gain_bounds(grid);
  std::vector<double> out;
  for (const auto& a : grid.attack.buses) out.push_back(bounds.at(a.bus));
  return out;
}

std::map<BusId, GainRange> droop_gain_bounds(const GridCase& grid) {
  std::map<BusId, GainRange> out;
  const double w = grid.attack.omega_max;
  for (const auto& u : grid.ibr.units) {
    if (u.gain_min) {
      out[u.bus] = {*u.gain_min, *u.gain_max};
    } else {
      const double up = std::min((u.p_max - u.p_ref) / w, (u.p_ref - grid.ibr.power_margin) / w);
      out[u.bus] = {0.0, std::max(0.0, up)};
    }
  }
  return out;
}

std::vector<GainRange> droop_gain_range_vector(const GridCase& grid) {
  const auto ranges = droop_gain_bounds(grid);
  std::vector<GainRange> out;
  for (const auto& u : grid.ibr.units) out.push_back(ranges.at(u.bus));
  return out;
}

GainEntry attack_gain_entry(const GridCase& grid, std::size_t attacked_index) {
  const AttackedBus& a = grid.attack.buses.at(attacked_index);
  const Load& l = grid.loads[static_cast<std::size_t>(grid.load_index(a.bus))];
  return {grid.theta_row(a.bus), grid.omega_row(a.sensor), 1.0 / l.damping};
}

GainEntry droop_gain_entry(const GridCase& grid, std::size_t ibr_index) {
  const IbrUnit& u = grid.ibr.units.at(ibr_index);
  const Load& l = grid.loads[static_cast<std::size_t>(grid.load_index(u.bus))];
  return {grid.theta_row(u.bus), grid.omega_row(u.sensor), -1.0 / l.damping};
}

namespace {

constexpr double kGainSlack = 1e-9;

}  // namespace

SystemMatrix assemble_system_matrix(const GridCase& grid, const GainMap& attack_gains,
                                    const GainMap& droop_gains) {
  const auto ng = static_cast<Eigen::Index>(grid.num_generators());
  const auto nl = static_cast<Eigen::Index>(grid.num_loads());
  const Eigen::Index n = 2 * ng + nl;

  SystemMatrix sys;
  sys.attack_gains = Eigen::MatrixXd::Zero(nl, ng);
  sys.droop_gains = Eigen::MatrixXd::Zero(nl, ng);

  const GainMap bounds = attack_gain_bounds(grid);
  for (const auto& [bus, k] : attack_gains) {
    auto it = std::find_if(grid.attack.buses.begin(), grid.attack.buses.end(),
                           [&](const AttackedBus& a) { return a.bus == bus; });
    if (it == grid.attack.buses.end()) {
      throw ModelError("attack gain on non-compromised bus " + std::to_string(bus));
    }
    if (!std::isfinite(k) || k < -kGainSlack || k > bounds.at(bus) + kGainSlack) {
      throw ModelError("attack gain " + std::to_string(k) + " out of range on bus " + std::to_string(bus));
    }
    sys.attack_gains(grid.load_index(bus), grid.generator_index(it->sensor)) += k;
  }
  const auto ranges = droop_gain_bounds(grid);
  for (const auto& [bus, k] : droop_gains) {
    auto it = std::find_if(grid.ibr.units.begin(), grid.ibr.units.end(),
                           [&](const IbrUnit& u) { return u.bus == bus; });
    if (it == grid.ibr.units.end()) {
      throw ModelError("droop gain on bus " + std::to_string(bus) + " without IBR");
    }
    const GainRange r = ranges.at(bus);
    if (!std::isfinite(k) || k < r.lower - kGainSlack || k > r.upper + kGainSlack) {
      throw ModelError("droop gain " + std::to_string(k) + " out of range on bus " + std::to_string(bus));
    }
    sys.droop_gains(grid.load_index(bus), grid.generator_index(it->sensor)) += k;
  }

  const AdmittanceBlocks h = build_admittance_blocks(grid);
  Eigen::MatrixXd bracket = Eigen::MatrixXd::Zero(n, n);
  bracket.block(0, ng + nl, ng, ng).setIdentity();
  bracket.block(ng, 0, nl, ng) = h.lg;
  bracket.block(ng, ng, nl, nl) = h.ll;
  bracket.block(ng, ng + nl, nl, ng) = -sys.attack_gains + sys.droop_gains;
  for (Eigen::Index g = 0; g < ng; ++g) {
    const Generator& gen = grid.generators[static_cast<std::size_t>(g)];
    bracket(ng + nl + g, g) += gen.ki;
    bracket(ng + nl + g, ng + nl + g) = gen.kp + gen.damping;
  }
  bracket.block(ng + nl, 0, ng, ng) += h.gg;
  bracket.block(ng + nl, ng, ng, nl) = h.gl;

  // Row scaling diag(I, -D_L^{-1}, -M^{-1}).
  Eigen::VectorXd scale(n);
  scale.head(ng).setOnes();
  for (Eigen::Index l = 0; l < nl; ++l) scale(ng + l) = -1.0 / grid.loads[static_cast<std::size_t>(l)].damping;
  for (Eigen::Index g = 0; g < ng; ++g) scale(ng + nl + g) = -1.0 / grid.generators[static_cast<std::size_t>(g)].inertia;
  sys.state = scale.asDiagonal() * bracket;

  sys.forcing = Eigen::VectorXd::Zero(n);
  for (Eigen::Index l = 0; l < nl; ++l) {
    const Load& ld = grid.loads[static_cast<std::size_t>(l)];
    double p_ref = 0.0;
    for (const auto& u : grid.ibr.units) {
      if (u.bus == ld.bus) p_ref += u.p_ref;
    }
    sys.forcing(ng + l) = (p_ref - ld.secure_load) / ld.damping;
  }
  return sys;
}

SystemMatrix assemble_system_matrix(const GridCase& grid, const std::vector<double>& attack_gains,
                                    const std::vector<double>& droop_gains) {
  if (attack_gains.size() != grid.num_compromised()) {
    throw ModelError("attack gain vector length mismatch");
  }
  if (droop_gains.size() != grid.num_ibr()) throw ModelError("droop gain vector length mismatch");
  GainMap attack, droop;
  for (std::size_t i = 0; i < attack_gains.size(); ++i) attack[grid.attack.buses[i].bus] = attack_gains[i];
  for (std::size_t i = 0; i < droop_gains.size(); ++i) droop[grid.ibr.units[i].bus] = droop_gains[i];
  return assemble_system_matrix(grid, attack, droop);
}

}  // namespace crda
