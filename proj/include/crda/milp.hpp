#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace crda::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct VarId {
  int index = -1;
  friend bool operator==(VarId a, VarId b) { return a.index == b.index; }
  bool valid() const { return index >= 0; }
};

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };
enum class ObjectiveSense { Minimize, Maximize };

/// Affine expression sum_k c_k x_k + constant. Terms may repeat until the
/// expression is handed to the model, which merges them.
class LinearExpr {
 public:
  LinearExpr() = default;
  LinearExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
  LinearExpr(VarId v, double coef = 1.0) { add(v, coef); }  // NOLINT(google-explicit-constructor)

  LinearExpr& add(VarId v, double coef) {
    terms_.emplace_back(v.index, coef);
    return *this;
  }
  LinearExpr& add(double c) {
    constant_ += c;
    return *this;
  }
  LinearExpr& operator+=(const LinearExpr& o);
  LinearExpr& operator-=(const LinearExpr& o);
  LinearExpr& operator*=(double s);

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }

  /// Merged, index-sorted terms with zero coefficients removed.
  std::vector<std::pair<int, double>> merged() const;
  double evaluate(const std::vector<double>& values) const;

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator*(double s, LinearExpr a);
LinearExpr operator*(LinearExpr a, double s);

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = kInf;
};

struct Constraint {
  std::string name;
  std::vector<std::pair<int, double>> terms;  // merged, sorted by index
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

class Model {
 public:
  explicit Model(std::string name = "crda") : name_(std::move(name)) {}

  VarId add_variable(const std::string& name, VarKind kind, double lower, double upper);
  VarId add_continuous(const std::string& name, double lower = 0.0, double upper = kInf) {
    return add_variable(name, VarKind::Continuous, lower, upper);
  }
  VarId add_binary(const std::string& name) { return add_variable(name, VarKind::Binary, 0.0, 1.0); }

  /// lhs (sense) rhs; the constant of lhs moves to the right-hand side.
  int add_constraint(const std::string& name, const LinearExpr& lhs, Sense sense, double rhs);

  /// Stored as minimisation; a maximisation objective is negated and
  /// objective_scale() reports -1 so callers can recover the original value.
  void set_objective(const LinearExpr& objective, ObjectiveSense sense = ObjectiveSense::Minimize);

  /// Tightens bounds of an existing variable (used to fix variables).
  void set_bounds(VarId v, double lower, double upper);

  const std::string& name() const { return name_; }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<std::pair<int, double>>& objective_terms() const { return objective_; }
  double objective_constant() const { return objective_constant_; }
  double objective_scale() const { return objective_scale_; }
  std::size_t num_binaries() const;

  VarId find_variable(const std::string& name) const;
  const Variable& variable(VarId v) const { return variables_.at(static_cast<std::size_t>(v.index)); }

  /// Minimisation objective value of an assignment.
  double objective_value(const std::vector<double>& values) const;

 private:
  std::string name_;
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  std::unordered_map<std::string, int> var_names_;
  std::unordered_map<std::string, int> con_names_;
  std::vector<std::pair<int, double>> objective_;
  double objective_constant_ = 0.0;
  double objective_scale_ = 1.0;
};

enum class Status { Optimal, Feasible, Infeasible, Unbounded, Limit, Error };
const char* to_string(Status s);

struct SolveLimits {
  double time_limit = kInf;  // seconds
  double mip_gap = 1e-9;     // relative
  double feasibility_tol = 1e-9;
  bool polish = true;        // re-solve the LP with binaries fixed
  bool verbose = false;
};

struct Solution {
  Status status = Status::Error;
  std::vector<double> values;
  double objective = 0.0;  // minimisation value, objective constant included
  double bound = 0.0;
  double wall_seconds = 0.0;
  long long nodes = -1;
  std::string backend;

  bool has_values() const { return !values.empty(); }
  double value(VarId v) const { return values.at(static_cast<std::size_t>(v.index)); }
};

struct Violation {
  std::string what;
  double amount = 0.0;
};

/// Independent feasibility check: bounds, integrality and every row.
std::vector<Violation> verify_solution(const Model& model, const std::vector<double>& values, double tol = 1e-6);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual Solution solve(const Model& model, const SolveLimits& limits) = 0;
};

/// Backend by name; an empty name reads CRDA_MILP_BACKEND and falls back to
/// "highs". Unknown names raise BackendError.
std::unique_ptr<Backend> make_backend(const std::string& name = "");
std::vector<std::string> available_backends();

/// Runs the backend and re-checks any solution it returns. A solution that
/// fails the check raises BackendError.
Solution solve(const Model& model, Backend& backend, const SolveLimits& limits = {});

/// CPLEX LP text. Names are sanitised deterministically.
std::string export_lp(const Model& model);
std::string sanitize_name(const std::string& name);

}  // namespace crda::milp
