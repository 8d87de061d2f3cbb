#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace crda {

using Complex = std::complex<double>;

struct EigenPair {
  int index = 0;  // position in the canonical order
  Complex value;
  Eigen::VectorXcd right;  // unit 2-norm
  Eigen::VectorXcd left;   // scaled so that left^T right == 1
  /// |l^T r| / (|l| |r|), the reciprocal eigenvalue condition number.
  double overlap = 1.0;
  bool degenerate = false;
};

struct SpectralOptions {
  double residual_tol = 1e-8;
  double degeneracy_tol = 1e-12;
};

/// All eigenpairs of a real square matrix in canonical order: descending real
/// part, then descending imaginary part, then solver index.
std::vector<EigenPair> eigen_pairs(const Eigen::MatrixXd& matrix, const SpectralOptions& options = {});

/// Eigenvalues only, canonical order.
std::vector<Complex> eigenvalues(const Eigen::MatrixXd& matrix);

double spectral_abscissa(const Eigen::MatrixXd& matrix);

/// First-order eigenvalue derivative l^T dB r / l^T r. Empty when the pair is
/// flagged degenerate; callers then use finite_difference_sensitivity.
std::optional<Complex> eigen_sensitivity(const EigenPair& pair, const Eigen::MatrixXd& d_matrix);

/// Same for a derivative with a single nonzero entry.
std::optional<Complex> eigen_sensitivity(const EigenPair& pair, int row, int col, double value);

/// Central difference of the eigenvalue nearest to `lambda` along
/// matrix + h * d_matrix.
Complex finite_difference_sensitivity(const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& d_matrix,
                                      Complex lambda, double h = 1e-5);

/// Sensitivity with the finite-difference fallback for degenerate pairs.
Complex robust_sensitivity(const Eigen::MatrixXd& matrix, const EigenPair& pair, int row, int col,
                           double value, double h = 1e-5);

struct SensitivityRecord {
  Complex lambda0;
  std::vector<double> k0;
  std::vector<Complex> gradient;
};

/// lambda0 + gradient^T (k - k0).
Complex first_order_estimate(const SensitivityRecord& record, std::span<const double> gains);

/// perm[i] is the index in `next` assigned to prev[i]. Greedy on eigenvalue
/// distance, eigenvector overlap breaks ties.
std::vector<int> match_eigenvalues(const std::vector<EigenPair>& prev, const std::vector<EigenPair>& next);

}  // namespace crda
