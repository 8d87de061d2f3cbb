#pragma once

#include "crda/grid_model.hpp"
#include "crda/spectral.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <map>
#include <vector>

namespace crda {

/// d x N^d matrix of 1-based sampling indices. Consecutive columns differ in
/// exactly one row by exactly one.
using OrderMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

OrderMatrix order_matrix(int samples, int dims);

/// Evenly spaced droop-gain samples per IBR and the range segment owned by
/// each sample. Segment l covers [lower(l), upper(l)) except the last one,
/// which is closed.
struct SegmentGrid {
  int samples = 0;
  std::vector<GainRange> ranges;
  std::vector<double> spacing;  // xi_i
  double epsilon = 1e-4;

  std::size_t dims() const { return ranges.size(); }
  double sample(std::size_t unit, int index) const;  // index is 1-based
  double lower(std::size_t unit, int index) const;
  double upper(std::size_t unit, int index) const;
  /// Bounds a MILP may place a gain in while selecting segment `index`:
  /// [lower, upper - epsilon] except for the last segment.
  GainRange milp_box(std::size_t unit, int index) const;
  /// 1-based segment containing `gain`.
  int segment_of(std::size_t unit, double gain) const;
};

SegmentGrid make_segment_grid(const std::vector<GainRange>& ranges, int samples, double epsilon);

struct SegmentBounds {
  std::vector<std::vector<double>> lower;  // [unit][l-1]
  std::vector<std::vector<double>> upper;
};
SegmentBounds segment_bounds(const SegmentGrid& grid);

std::vector<double> index_to_gains(const Eigen::Ref<const Eigen::VectorXi>& column, const SegmentGrid& grid);

/// Column of `order` whose indices equal `indices` (0-based column number).
int combo_of(const OrderMatrix& order, const std::vector<int>& indices);

/// Per-scenario sensitivity records along the snake walk.
struct ScenarioTable {
  int scenario = 0;
  std::vector<double> attack_gains;
  int modes = 0;
  std::vector<SensitivityRecord> records;
  Eigen::MatrixXi record_of;   // modes x combos, index into records
  Eigen::MatrixXcd exact;      // modes x combos, tracked exact eigenvalues

  const SensitivityRecord& record(int mode, int combo) const {
    return records[static_cast<std::size_t>(record_of(mode, combo))];
  }
  /// Number of distinct records held for one mode.
  int refresh_count(int mode) const;
  /// Number of combos at which at least one mode refreshed (incl. the first).
  int refreshed_combos() const;
};

struct SensitivityTable {
  int samples = 0;
  double threshold = 0.1;
  OrderMatrix order;
  SegmentGrid grid;
  std::map<int, ScenarioTable> scenarios;

  std::size_t combos() const { return static_cast<std::size_t>(order.cols()); }
  std::size_t total_records() const;
  /// Table-based estimate of tracked mode `mode` at arbitrary gains.
  Complex estimate(int scenario, int mode, const std::vector<double>& gains) const;
  int combo_for_gains(const std::vector<double>& gains) const;
};

struct TableOptions {
  SpectralOptions spectral;
  double fd_step = 1e-5;
};

ScenarioTable generate_scenario_table(const GridCase& grid, int scenario,
                                      const std::vector<double>& attack_gains, const OrderMatrix& order,
                                      const SegmentGrid& segments, double threshold,
                                      const TableOptions& options = {});

/// Walk every scenario in `worst_gains` (scenario index -> attack gains).
SensitivityTable generate_sensitivity_tables(const GridCase& grid,
                                             const std::map<int, std::vector<double>>& worst_gains,
                                             int samples, double threshold, const TableOptions& options = {});

/// Largest |estimate - exact| over every (scenario, mode, combo) sample.
double max_sample_error(const SensitivityTable& table);

/// Dense check of one scenario's table between the samples. Modes are tracked
/// along a snake walk of a resolution^d evaluation lattice starting at the
/// lower range corner, so mode n matches the table's mode n.
struct EstimationSweep {
  int scenario = 0;
  int points = 0;
  std::vector<double> max_error;         // per mode, table estimate
  std::vector<int> within;               // per mode, points with error <= threshold
  std::vector<double> single_start_max;  // per mode, first record only
  int critical_mode = 0;                 // largest real part at the walk start
};
EstimationSweep estimation_sweep(const GridCase& grid, const SensitivityTable& table, int scenario, int resolution,
                                 const TableOptions& options = {});

nlohmann::json table_to_json(const SensitivityTable& table, const std::string& case_hash);
SensitivityTable table_from_json(const nlohmann::json& doc, const std::string& expected_hash);

}  // namespace crda
