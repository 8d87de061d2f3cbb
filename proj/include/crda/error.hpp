#pragma once

#include <stdexcept>
#include <string>

namespace crda {

/// Malformed or inconsistent case document. `path` is a JSON-pointer-like
/// location of the offending field.
class CaseError : public std::runtime_error {
 public:
  CaseError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EigenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumeration or combinatorial budget exceeded.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, int first_failing_step = -1)
      : std::runtime_error(what), step_(first_failing_step) {}
  int first_failing_step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace crda
