#include "crda/milp.hpp"

#include "crda/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace crda::milp {

std::unique_ptr<Backend> make_highs_backend();

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
  for (const auto& [i, c] : o.terms_) terms_.emplace_back(i, -c);
  constant_ -= o.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator*=(double s) {
  for (auto& t : terms_) t.second *= s;
  constant_ *= s;
  return *this;
}

std::vector<std::pair<int, double>> LinearExpr::merged() const {
  std::map<int, double> acc;
  for (const auto& [i, c] : terms_) acc[i] += c;
  std::vector<std::pair<int, double>> out;
  for (const auto& [i, c] : acc) {
    if (c != 0.0) out.emplace_back(i, c);
  }
  return out;
}

double LinearExpr::evaluate(const std::vector<double>& values) const {
  double v = constant_;
  for (const auto& [i, c] : terms_) v += c * values.at(static_cast<std::size_t>(i));
  return v;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator*(double s, LinearExpr a) { return a *= s; }
LinearExpr operator*(LinearExpr a, double s) { return a *= s; }

VarId Model::add_variable(const std::string& name, VarKind kind, double lower, double upper) {
  if (name.empty()) throw ModelError("variable name must not be empty");
  if (std::isnan(lower) || std::isnan(upper)) throw ModelError("NaN bound on variable " + name);
  if (lower > upper) throw ModelError("inverted bounds on variable " + name);
  if (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0)) throw ModelError("binary " + name + " needs bounds within [0,1]");
  const int id = static_cast<int>(variables_.size());
  if (!var_names_.emplace(name, id).second) throw ModelError("duplicate variable name " + name);
  variables_.push_back({name, kind, lower, upper});
  return VarId{id};
}

void Model::set_bounds(VarId v, double lower, double upper) {
  auto& var = variables_.at(static_cast<std::size_t>(v.index));
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) throw ModelError("invalid bounds for " + var.name);
  var.lower = lower;
  var.upper = upper;
}

int Model::add_constraint(const std::string& name, const LinearExpr& lhs, Sense sense, double rhs) {
  if (name.empty()) throw ModelError("constraint name must not be empty");
  if (!std::isfinite(rhs) || !std::isfinite(lhs.constant())) throw ModelError("non-finite right-hand side in " + name);
  Constraint c;
  c.name = name;
  c.sense = sense;
  c.rhs = rhs - lhs.constant();
  c.terms = lhs.merged();
  for (const auto& [i, coef] : c.terms) {
    if (i < 0 || i >= static_cast<int>(variables_.size())) throw ModelError("constraint " + name + " references an undeclared variable");
    if (!std::isfinite(coef)) throw ModelError("non-finite coefficient in " + name);
  }
  const int id = static_cast<int>(constraints_.size());
  if (!con_names_.emplace(name, id).second) throw ModelError("duplicate constraint name " + name);
  constraints_.push_back(std::move(c));
  return id;
}

void Model::set_objective(const LinearExpr& objective, ObjectiveSense sense) {
  LinearExpr obj = objective;
  objective_scale_ = 1.0;
  if (sense == ObjectiveSense::Maximize) {
    obj *= -1.0;
    objective_scale_ = -1.0;
  }
  objective_ = obj.merged();
  for (const auto& [i, coef] : objective_) {
    if (i < 0 || i >= static_cast<int>(variables_.size())) throw ModelError("objective references an undeclared variable");
    if (!std::isfinite(coef)) throw ModelError("non-finite objective coefficient");
  }
  if (!std::isfinite(obj.constant())) throw ModelError("non-finite objective constant");
  objective_constant_ = obj.constant();
}

std::size_t Model::num_binaries() const {
  return static_cast<std::size_t>(std::count_if(variables_.begin(), variables_.end(),
                                                [](const Variable& v) { return v.kind == VarKind::Binary; }));
}

VarId Model::find_variable(const std::string& name) const {
  auto it = var_names_.find(name);
  return it == var_names_.end() ? VarId{} : VarId{it->second};
}

double Model::objective_value(const std::vector<double>& values) const {
  double v = objective_constant_;
  for (const auto& [i, c] : objective_) v += c * values.at(static_cast<std::size_t>(i));
  return v;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Feasible: return "feasible";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::Limit: return "limit";
    case Status::Error: return "error";
  }
  return "error";
}

std::vector<Violation> verify_solution(const Model& model, const std::vector<double>& values, double tol) {
  std::vector<Violation> out;
  const auto& vars = model.variables();
  if (values.size() != vars.size()) {
    out.push_back({"assignment has " + std::to_string(values.size()) + " values for " +
                       std::to_string(vars.size()) + " variables",
                   kInf});
    return out;
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const double x = values[i];
    if (!std::isfinite(x)) {
      out.push_back({vars[i].name + " is not finite", kInf});
      continue;
    }
    if (x < vars[i].lower - tol) out.push_back({vars[i].name + " below lower bound", vars[i].lower - x});
    if (x > vars[i].upper + tol) out.push_back({vars[i].name + " above upper bound", x - vars[i].upper});
    if (vars[i].kind == VarKind::Binary) {
      const double frac = std::abs(x - std::round(x));
      if (frac > tol) out.push_back({vars[i].name + " not integral", frac});
    }
  }
  for (const auto& c : model.constraints()) {
    double lhs = 0.0;
    for (const auto& [i, coef] : c.terms) lhs += coef * values[static_cast<std::size_t>(i)];
    double excess = 0.0;
    switch (c.sense) {
      case Sense::LessEqual: excess = lhs - c.rhs; break;
      case Sense::GreaterEqual: excess = c.rhs - lhs; break;
      case Sense::Equal: excess = std::abs(lhs - c.rhs); break;
    }
    if (excess > tol) out.push_back({c.name, excess});
  }
  return out;
}

std::vector<std::string> available_backends() { return {"highs"}; }

std::unique_ptr<Backend> make_backend(const std::string& name) {
  std::string chosen = name;
  if (chosen.empty()) {
    const char* env = std::getenv("CRDA_MILP_BACKEND");
    chosen = (env && *env) ? env : "highs";
  }
  std::transform(chosen.begin(), chosen.end(), chosen.begin(), [](unsigned char c) { return std::tolower(c); });
  if (chosen == "highs") return make_highs_backend();
  throw BackendError("unknown MILP backend '" + chosen + "'");
}

Solution solve(const Model& model, Backend& backend, const SolveLimits& limits) {
  Solution sol = backend.solve(model, limits);
  sol.backend = backend.name();
  if (sol.has_values()) {
    const auto bad = verify_solution(model, sol.values, 1e-6);
    if (!bad.empty()) {
      auto worst = std::max_element(bad.begin(), bad.end(),
                                    [](const Violation& a, const Violation& b) { return a.amount < b.amount; });
      throw BackendError("backend " + backend.name() + " returned a " + to_string(sol.status) +
                         " solution violating " + std::to_string(bad.size()) + " checks (worst: " + worst->what +
                         " by " + std::to_string(worst->amount) + ")");
    }
    sol.objective = model.objective_value(sol.values);
  } else if (sol.status == Status::Optimal && model.variables().empty()) {
    sol.objective = model.objective_constant();
  }
  return sol;
}

// LP text ------------------------------------------------------------------

std::string sanitize_name(const std::string& name) {
  std::string out;
  out.reserve(name.size() + 2);
  for (char ch : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' || ch == '(' ||
                    ch == ')' || ch == ',' || ch == '#' || ch == '@' || ch == '{' || ch == '}' || ch == '~';
    out.push_back(ok ? ch : '_');
  }
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0])) || out[0] == '.') out.insert(0, "_");
  // 'e'/'E' followed only by digits could be read as an exponent.
  if ((out[0] == 'e' || out[0] == 'E') && out.size() > 1 &&
      std::all_of(out.begin() + 1, out.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    out.insert(0, "_");
  }
  if (out.size() > 255) out.resize(255);
  return out;
}

namespace {

std::string number(double x) {
  if (x == kInf) return "+inf";
  if (x == -kInf) return "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

class UniqueNames {
 public:
  std::string operator()(const std::string& raw) {
    std::string base = sanitize_name(raw);
    std::string name = base;
    for (int k = 2; !used_.insert(name).second; ++k) name = base + "~" + std::to_string(k);
    return name;
  }

 private:
  std::set<std::string> used_;
};

void write_terms(std::ostringstream& out, const std::vector<std::pair<int, double>>& terms,
                 const std::vector<std::string>& names) {
  int on_line = 0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& [i, c] = terms[k];
    if (on_line == 8) {
      out << "\n   ";
      on_line = 0;
    }
    const double mag = std::abs(c);
    out << (c < 0 ? " - " : (k == 0 ? " " : " + "));
    if (mag != 1.0) out << number(mag) << " ";
    out << names[static_cast<std::size_t>(i)];
    ++on_line;
  }
}

}  // namespace

std::string export_lp(const Model& model) {
  UniqueNames unique;
  std::vector<std::string> vnames;
  vnames.reserve(model.variables().size());
  for (const auto& v : model.variables()) vnames.push_back(unique(v.name));
  const std::string obj_name = unique("obj");
  std::vector<std::string> cnames;
  for (const auto& c : model.constraints()) cnames.push_back(unique(c.name));

  std::ostringstream out;
  out << "\\ Model " << sanitize_name(model.name()) << "\n";
  if (model.objective_scale() < 0) out << "\\ Original objective was maximised; stored negated\n";
  out << "Minimize\n " << obj_name << ":";
  write_terms(out, model.objective_terms(), vnames);
  const double k = model.objective_constant();
  if (k != 0.0) out << (k < 0 ? " - " : (model.objective_terms().empty() ? " " : " + ")) << number(std::abs(k));
  if (model.objective_terms().empty() && k == 0.0) out << " 0";
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < model.constraints().size(); ++r) {
    const auto& c = model.constraints()[r];
    out << " " << cnames[r] << ":";
    if (c.terms.empty()) {
      // Keep empty rows parseable: 0 times the first variable, if any.
      if (!vnames.empty()) out << " 0 " << vnames[0];
    } else {
      write_terms(out, c.terms, vnames);
    }
    out << (c.sense == Sense::LessEqual ? " <= " : c.sense == Sense::GreaterEqual ? " >= " : " = ") << number(c.rhs)
        << "\n";
  }
  out << "Bounds\n";
  for (std::size_t i = 0; i < model.variables().size(); ++i) {
    const auto& v = model.variables()[i];
    if (v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0) continue;
    if (v.lower == v.upper) {
      out << " " << vnames[i] << " = " << number(v.lower) << "\n";
    } else if (v.lower == -kInf && v.upper == kInf) {
      out << " " << vnames[i] << " free\n";
    } else if (v.lower == 0.0 && v.upper == kInf) {
      continue;
    } else {
      out << " " << number(v.lower) << " <= " << vnames[i] << " <= " << number(v.upper) << "\n";
    }
  }
  bool header = false;
  for (std::size_t i = 0; i < model.variables().size(); ++i) {
    if (model.variables()[i].kind != VarKind::Binary) continue;
    if (!header) {
      out << "Binaries\n";
      header = true;
    }
    out << " " << vnames[i] << "\n";
  }
  out << "End\n";
  return out.str();
}

}  // namespace crda::milp
