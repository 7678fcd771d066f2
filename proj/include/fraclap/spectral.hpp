#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace fraclap {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class TransformKind { AnalyticDst, DenseEigenbasis };
enum class Direction { Forward, Inverse };

namespace detail {
class DstPlan;
}

/// Spectrum of a univariate operator on the unit interval together with the
/// orthonormal transform that diagonalizes it: A = F^T diag(lambda) F.
///
/// For the Dirichlet Laplacian F is the orthonormal DST-I (F = F^T = F^-1)
/// applied through FFTW. For a general stiffness matrix F is the transposed
/// eigenvector matrix, stored densely.
///
/// Instances are immutable and cheap to copy; the plan or basis is shared.
class Mode1D {
 public:
  Index size() const noexcept { return eigenvalues_.size(); }
  double mesh() const noexcept { return 1.0 / static_cast<double>(size() + 1); }
  const VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  TransformKind transform() const noexcept { return kind_; }

  /// True when the eigenvalues are the analytic Dirichlet Laplacian ones.
  /// Grid-transfer schemes (multigrid Tucker) rely on this.
  bool is_laplacian() const noexcept { return laplacian_; }

  /// Forward maps grid values to spectral coefficients.
  VectorXd apply(const VectorXd& x, Direction direction) const;

  /// Transforms every column of `columns` in place.
  void apply_columns(MatrixXd& columns, Direction direction) const;

  /// Dense orthonormal forward transform F (n x n). O(n^2) memory.
  MatrixXd dense_transform() const;

  /// Same transform, replaced eigenvalues. Used for synthetic spectra and
  /// for operators F(-Delta_1) built from the same basis.
  Mode1D with_eigenvalues(VectorXd eigenvalues) const;

 private:
  friend Mode1D laplacian_mode(Index n);
  friend Mode1D generalized_mode(const MatrixXd& stiffness);

  VectorXd eigenvalues_;
  TransformKind kind_ = TransformKind::AnalyticDst;
  bool laplacian_ = false;
  std::shared_ptr<const detail::DstPlan> plan_;
  std::shared_ptr<const MatrixXd> basis_;  // columns are eigenvectors
};

/// Dirichlet Laplacian (1/h^2) tridiag(-1, 2, -1) with h = 1/(n+1).
/// Eigenvalues (4/h^2) sin^2(pi k h / 2), k = 1..n, ascending.
Mode1D laplacian_mode(Index n);

/// Dense symmetric eigendecomposition of an SPD stiffness matrix. Eigenvalues
/// ascending; order among equal eigenvalues is unspecified.
Mode1D generalized_mode(const MatrixXd& stiffness);

/// (1/h^2) tridiag(-1, 2, -1). Reference operator for tests.
MatrixXd dense_laplacian_1d(Index n);

/// Orthonormal sine transform, or the dense eigenbasis transform.
VectorXd dst_apply(const Mode1D& mode, const VectorXd& x, Direction direction);

/// Per-mode spectra of a d-dimensional separable operator, d in {2, 3}.
class EigenSpectrum {
 public:
  explicit EigenSpectrum(std::vector<Mode1D> modes);

  /// Same Laplacian mode in every direction.
  static EigenSpectrum laplacian(int d, Index n);

  int order() const noexcept { return static_cast<int>(modes_.size()); }
  const Mode1D& mode(int l) const { return modes_.at(static_cast<std::size_t>(l)); }
  const std::vector<Mode1D>& modes() const noexcept { return modes_; }
  std::vector<Index> dims() const;

 private:
  std::vector<Mode1D> modes_;
};

}  // namespace fraclap
