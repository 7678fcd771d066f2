#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fraclap/spectral.hpp"

namespace fraclap {

using Dims = std::vector<Index>;

/// Default entry cap for dense reconstructions (2^24 values).
inline constexpr std::int64_t kDefaultDenseCap = std::int64_t{1} << 24;

/// Full d-way array, column-major (first index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Dims dims, std::int64_t cap = kDefaultDenseCap);
  DenseTensor(Dims dims, VectorXd data);

  const Dims& dims() const noexcept { return dims_; }
  int order() const noexcept { return static_cast<int>(dims_.size()); }
  Index numel() const noexcept { return data_.size(); }
  const VectorXd& data() const noexcept { return data_; }
  VectorXd& data() noexcept { return data_; }

  Index linear_index(std::span<const Index> idx) const;
  double operator()(std::span<const Index> idx) const { return data_(linear_index(idx)); }
  double& operator()(std::span<const Index> idx) { return data_(linear_index(idx)); }
  double operator()(Index i, Index j) const { return data_(i + dims_[0] * j); }
  double operator()(Index i, Index j, Index k) const { return data_(i + dims_[0] * (j + dims_[1] * k)); }

  double norm() const { return data_.norm(); }

  /// Mode-l unfolding: n_l rows, remaining indices in column-major order.
  MatrixXd unfold(int mode) const;

 private:
  Dims dims_;
  VectorXd data_;
};

/// Canonical (CP) tensor: sum_k xi_k u_k^(1) x ... x u_k^(d).
///
/// The rank-0 tensor is the zero element and is accepted everywhere.
class CpTensor {
 public:
  CpTensor() = default;
  /// Zero tensor (rank 0) with the given mode sizes.
  explicit CpTensor(Dims dims);
  CpTensor(VectorXd weights, std::vector<MatrixXd> factors);

  static CpTensor rank_one(const std::vector<VectorXd>& vectors, double weight = 1.0);

  const Dims& dims() const noexcept { return dims_; }
  int order() const noexcept { return static_cast<int>(dims_.size()); }
  Index rank() const noexcept { return weights_.size(); }
  const VectorXd& weights() const noexcept { return weights_; }
  const std::vector<MatrixXd>& factors() const noexcept { return factors_; }
  const MatrixXd& factor(int l) const { return factors_.at(static_cast<std::size_t>(l)); }

  /// Number of stored reals: sum_l n_l R + R.
  Index storage_size() const noexcept;

 private:
  Dims dims_;
  VectorXd weights_;
  std::vector<MatrixXd> factors_;
};

/// Orthogonal Tucker tensor: core x_1 V^(1) x_2 ... x_d V^(d).
class TuckerTensor {
 public:
  TuckerTensor() = default;
  TuckerTensor(DenseTensor core, std::vector<MatrixXd> sides);

  const Dims& dims() const noexcept { return dims_; }
  Dims ranks() const { return core_.dims(); }
  int order() const noexcept { return static_cast<int>(dims_.size()); }
  const DenseTensor& core() const noexcept { return core_; }
  const std::vector<MatrixXd>& sides() const noexcept { return sides_; }
  const MatrixXd& side(int l) const { return sides_.at(static_cast<std::size_t>(l)); }

  Index storage_size() const noexcept;

 private:
  Dims dims_;
  DenseTensor core_;
  std::vector<MatrixXd> sides_;
};

CpTensor cp_add(const CpTensor& a, const CpTensor& b);
CpTensor cp_scale(const CpTensor& a, double s);
/// a + s * b, exact (rank R_a + R_b).
CpTensor cp_axpy(const CpTensor& a, double s, const CpTensor& b);
double cp_inner(const CpTensor& a, const CpTensor& b);
double cp_norm(const CpTensor& a);
CpTensor cp_normalize(const CpTensor& a);

/// Entrywise product; rank R_a * R_b, column (j + R_b * k) pairs a_k with b_j.
CpTensor cp_hadamard(const CpTensor& a, const CpTensor& b);

DenseTensor cp_to_dense(const CpTensor& a, std::int64_t cap = kDefaultDenseCap);
DenseTensor tucker_to_dense(const TuckerTensor& t, std::int64_t cap = kDefaultDenseCap);

/// Contracts a dense tensor with transposed matrices along every mode:
/// t x_1 M_1^T x_2 ... x_d M_d^T.
DenseTensor multilinear_transpose_product(const DenseTensor& t, const std::vector<MatrixXd>& mats);

/// Product of all mode sizes; throws ResourceLimit when above the cap.
Index checked_numel(std::span<const Index> dims, std::int64_t cap);

}  // namespace fraclap
