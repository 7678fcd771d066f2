#include "fraclap/spectral.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "fraclap/errors.hpp"

namespace fraclap {

namespace detail {

// FFTW planning is not thread-safe; execution with new-array execute is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class DstPlan {
 public:
  explicit DstPlan(Index n) : n_(n), scale_(1.0 / std::sqrt(2.0 * static_cast<double>(n + 1))) {
    std::lock_guard lock(fftw_planner_mutex());
    double* in = fftw_alloc_real(static_cast<std::size_t>(n));
    double* out = fftw_alloc_real(static_cast<std::size_t>(n));
    plan_ = fftw_plan_r2r_1d(static_cast<int>(n), in, out, FFTW_RODFT00,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan_ == nullptr) throw std::runtime_error("FFTW failed to plan DST-I of size " + std::to_string(n));
  }
  ~DstPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  DstPlan(const DstPlan&) = delete;
  DstPlan& operator=(const DstPlan&) = delete;

  // RODFT00 computes 2 sum_j x_j sin(pi (j+1)(k+1) / (n+1)); rescale to the
  // orthonormal sqrt(2/(n+1)) convention.
  void execute(const double* in, double* out) const {
    fftw_execute_r2r(plan_, const_cast<double*>(in), out);
    for (Index k = 0; k < n_; ++k) out[k] *= scale_;
  }

 private:
  Index n_;
  double scale_;
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

VectorXd Mode1D::apply(const VectorXd& x, Direction direction) const {
  if (x.size() != size()) {
    throw InvalidArgument("dst_apply: vector length " + std::to_string(x.size()) +
                          " does not match mode size " + std::to_string(size()));
  }
  if (kind_ == TransformKind::DenseEigenbasis) {
    return direction == Direction::Forward ? VectorXd(basis_->transpose() * x) : VectorXd(*basis_ * x);
  }
  VectorXd out(size());
  plan_->execute(x.data(), out.data());
  return out;
}

void Mode1D::apply_columns(MatrixXd& columns, Direction direction) const {
  if (columns.rows() != size()) {
    throw InvalidArgument("dst_apply: column length does not match mode size");
  }
  if (columns.cols() == 0) return;
  if (kind_ == TransformKind::DenseEigenbasis) {
    if (direction == Direction::Forward) {
      columns = basis_->transpose() * columns;
    } else {
      columns = *basis_ * columns;
    }
    return;
  }
  VectorXd scratch(size());
  for (Index j = 0; j < columns.cols(); ++j) {
    plan_->execute(columns.col(j).data(), scratch.data());
    columns.col(j) = scratch;
  }
}

MatrixXd Mode1D::dense_transform() const {
  if (kind_ == TransformKind::DenseEigenbasis) return basis_->transpose();
  const Index n = size();
  const double c = std::sqrt(2.0 / static_cast<double>(n + 1));
  MatrixXd f(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      f(i, j) = c * std::sin(std::numbers::pi * static_cast<double>((i + 1) * (j + 1)) /
                             static_cast<double>(n + 1));
    }
  }
  return f;
}

Mode1D Mode1D::with_eigenvalues(VectorXd eigenvalues) const {
  if (eigenvalues.size() != size()) {
    throw InvalidArgument("with_eigenvalues: expected " + std::to_string(size()) + " values");
  }
  Mode1D m = *this;
  m.eigenvalues_ = std::move(eigenvalues);
  m.laplacian_ = false;
  return m;
}

Mode1D laplacian_mode(Index n) {
  if (n < 1) throw InvalidArgument("laplacian_mode: n must be >= 1");
  Mode1D m;
  const double h = 1.0 / static_cast<double>(n + 1);
  m.eigenvalues_.resize(n);
  for (Index k = 1; k <= n; ++k) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) * h / 2.0);
    m.eigenvalues_(k - 1) = 4.0 / (h * h) * s * s;
  }
  m.kind_ = TransformKind::AnalyticDst;
  m.laplacian_ = true;
  m.plan_ = std::make_shared<const detail::DstPlan>(n);
  return m;
}

Mode1D generalized_mode(const MatrixXd& stiffness) {
  const Index n = stiffness.rows();
  if (n < 1 || stiffness.cols() != n) throw InvalidArgument("generalized_mode: expected a square matrix");
  if (!stiffness.allFinite()) throw InvalidArgument("generalized_mode: non-finite entries");
  const double scale = std::max(stiffness.cwiseAbs().maxCoeff(), 1e-300);
  if ((stiffness - stiffness.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("generalized_mode: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(stiffness);
  if (eig.info() != Eigen::Success) throw InvalidArgument("generalized_mode: eigensolver failed");
  if (eig.eigenvalues()(0) <= 0.0) throw InvalidArgument("generalized_mode: matrix is not positive definite");

  MatrixXd basis = eig.eigenvectors();
  // first nonzero component positive, for reproducible bases
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (std::abs(basis(i, j)) > 1e-12) {
        if (basis(i, j) < 0) basis.col(j) *= -1.0;
        break;
      }
    }
  }
  Mode1D m;
  m.eigenvalues_ = eig.eigenvalues();
  m.kind_ = TransformKind::DenseEigenbasis;
  m.basis_ = std::make_shared<const MatrixXd>(std::move(basis));
  return m;
}

MatrixXd dense_laplacian_1d(Index n) {
  if (n < 1) throw InvalidArgument("dense_laplacian_1d: n must be >= 1");
  const double inv_h2 = static_cast<double>((n + 1) * (n + 1));
  MatrixXd a = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = 2.0 * inv_h2;
    if (i > 0) a(i, i - 1) = -inv_h2;
    if (i + 1 < n) a(i, i + 1) = -inv_h2;
  }
  return a;
}

VectorXd dst_apply(const Mode1D& mode, const VectorXd& x, Direction direction) {
  return mode.apply(x, direction);
}

EigenSpectrum::EigenSpectrum(std::vector<Mode1D> modes) : modes_(std::move(modes)) {
  if (modes_.size() != 2 && modes_.size() != 3) {
    throw InvalidArgument("EigenSpectrum: dimension must be 2 or 3, got " + std::to_string(modes_.size()));
  }
}

EigenSpectrum EigenSpectrum::laplacian(int d, Index n) {
  if (d != 2 && d != 3) throw InvalidArgument("EigenSpectrum: dimension must be 2 or 3");
  return EigenSpectrum(std::vector<Mode1D>(static_cast<std::size_t>(d), laplacian_mode(n)));
}

std::vector<Index> EigenSpectrum::dims() const {
  std::vector<Index> out;
  out.reserve(modes_.size());
  for (const auto& m : modes_) out.push_back(m.size());
  return out;
}

}  // namespace fraclap
