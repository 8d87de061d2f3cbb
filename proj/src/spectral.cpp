#include "crda/spectral.hpp"

#include "crda/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace crda {

namespace {

std::vector<int> canonical_order(const Eigen::VectorXcd& values) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const Complex x = values(a), y = values(b);
    if (x.real() != y.real()) return x.real() > y.real();
    if (x.imag() != y.imag()) return x.imag() > y.imag();
    return a < b;
  });
  return order;
}

Eigen::EigenSolver<Eigen::MatrixXd> solve(const Eigen::MatrixXd& matrix, bool vectors) {
  if (matrix.rows() != matrix.cols()) throw EigenError("eigen decomposition needs a square matrix");
  if (!matrix.allFinite()) throw EigenError("matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(matrix, vectors);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigensolver did not converge (dim " << matrix.rows() << ", |B|_F "
        << matrix.norm() << ", max |b_ij| " << matrix.cwiseAbs().maxCoeff() << ")";
    throw EigenError(msg.str());
  }
  return es;
}

}  // namespace

std::vector<EigenPair> eigen_pairs(const Eigen::MatrixXd& matrix, const SpectralOptions& options) {
  const auto es = solve(matrix, true);
  const Eigen::VectorXcd values = es.eigenvalues();
  const Eigen::MatrixXcd right = es.eigenvectors();
  const auto n = right.cols();

  // Rows of R^{-1} are left eigenvectors normalised so that l^T r = 1.
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(right);
  const bool invertible = lu.isInvertible();
  Eigen::MatrixXcd left_rows;
  if (invertible) left_rows = lu.inverse();

  const Eigen::MatrixXcd cmatrix = matrix.cast<Complex>();
  const double scale = std::max(matrix.norm(), 1.0);

  std::vector<EigenPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  const auto order = canonical_order(values);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const int k = order[pos];
    EigenPair p;
    p.index = static_cast<int>(pos);
    p.value = values(k);
    p.right = right.col(k);
    p.right.normalize();
    if (invertible) {
      p.left = left_rows.row(k).transpose();
      const Complex s = p.left.transpose() * p.right;
      const double lnorm = p.left.norm();
      p.overlap = (lnorm > 0.0 && std::isfinite(lnorm)) ? std::abs(s) / lnorm : 0.0;
      if (std::abs(s) > 0.0) p.left /= s;
      const double res = (p.left.transpose() * cmatrix - p.value * p.left.transpose()).norm();
      const bool left_ok = std::isfinite(res) && res <= options.residual_tol * scale * p.left.norm();
      p.degenerate = !left_ok || p.overlap < options.degeneracy_tol;
    } else {
      p.left = Eigen::VectorXcd::Zero(n);
      p.overlap = 0.0;
      p.degenerate = true;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<Complex> eigenvalues(const Eigen::MatrixXd& matrix) {
  const auto es = solve(matrix, false);
  const Eigen::VectorXcd values = es.eigenvalues();
  std::vector<Complex> out;
  for (int k : canonical_order(values)) out.push_back(values(k));
  return out;
}

double spectral_abscissa(const Eigen::MatrixXd& matrix) {
  const auto es = solve(matrix, false);
  return es.eigenvalues().real().maxCoeff();
}

std::optional<Complex> eigen_sensitivity(const EigenPair& pair, const Eigen::MatrixXd& d_matrix) {
  if (pair.degenerate) return std::nullopt;
  const Complex num = pair.left.transpose() * d_matrix.cast<Complex>() * pair.right;
  const Complex den = pair.left.transpose() * pair.right;
  return num / den;
}

std::optional<Complex> eigen_sensitivity(const EigenPair& pair, int row, int col, double value) {
  if (pair.degenerate) return std::nullopt;
  const Complex den = pair.left.transpose() * pair.right;
  return pair.left(row) * value * pair.right(col) / den;
}

Complex finite_difference_sensitivity(const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& d_matrix,
                                      Complex lambda, double h) {
  auto nearest = [&](const Eigen::MatrixXd& m) {
    const auto vals = eigenvalues(m);
    return *std::min_element(vals.begin(), vals.end(), [&](Complex a, Complex b) {
      return std::abs(a - lambda) < std::abs(b - lambda);
    });
  };
  const Complex plus = nearest(matrix + h * d_matrix);
  const Complex minus = nearest(matrix - h * d_matrix);
  return (plus - minus) / (2.0 * h);
}

Complex robust_sensitivity(const Eigen::MatrixXd& matrix, const EigenPair& pair, int row, int col,
                           double value, double h) {
  if (auto s = eigen_sensitivity(pair, row, col, value)) return *s;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
  d(row, col) = value;
  return finite_difference_sensitivity(matrix, d, pair.value, h);
}

Complex first_order_estimate(const SensitivityRecord& record, std::span<const double> gains) {
  if (gains.size() != record.k0.size() || gains.size() != record.gradient.size()) {
    throw ModelError("gain vector length does not match the sensitivity record");
  }
  Complex out = record.lambda0;
  for (std::size_t i = 0; i < gains.size(); ++i) out += record.gradient[i] * (gains[i] - record.k0[i]);
  return out;
}

std::vector<int> match_eigenvalues(const std::vector<EigenPair>& prev, const std::vector<EigenPair>& next) {
  if (prev.size() != next.size()) throw EigenError("cannot match spectra of different dimension");
  const std::size_t n = prev.size();

  struct Candidate {
    double distance;
    double overlap;
    int i, j;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double overlap = 0.0;
      if (prev[i].right.size() == next[j].right.size() && prev[i].right.size() > 0) {
        overlap = std::abs(prev[i].right.dot(next[j].right));
      }
      candidates.push_back({std::abs(prev[i].value - next[j].value), overlap, static_cast<int>(i),
                            static_cast<int>(j)});
    }
  }
  constexpr double kTie = 1e-12;
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  std::vector<int> perm(n, -1);
  std::vector<char> used(n, 0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < candidates.size() && assigned < n; ++c) {
    const auto& cand = candidates[c];
    if (perm[static_cast<std::size_t>(cand.i)] >= 0 || used[static_cast<std::size_t>(cand.j)]) continue;
    // Ambiguity: an unassigned competitor at (numerically) the same distance.
    if (c + 1 < candidates.size()) {
      const auto& other = candidates[c + 1];
      if (std::abs(other.distance - cand.distance) <= kTie * std::max(1.0, cand.distance) &&
          other.i == cand.i && !used[static_cast<std::size_t>(other.j)] && other.overlap == cand.overlap) {
        spdlog::debug("ambiguous eigenvalue match for index {} (distance {:.3e})", cand.i, cand.distance);
      }
    }
    perm[static_cast<std::size_t>(cand.i)] = cand.j;
    used[static_cast<std::size_t>(cand.j)] = 1;
    ++assigned;
  }
  return perm;
}

}  // namespace crda
