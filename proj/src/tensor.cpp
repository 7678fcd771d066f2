#include "fraclap/tensor.hpp"

#include <cmath>
#include <string>

#include "fraclap/errors.hpp"

namespace fraclap {

namespace {

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + ": mode sizes differ");
}

// Mode-l product with M^T for a column-major tensor.
DenseTensor mode_product_transpose(const DenseTensor& t, int mode, const MatrixXd& m) {
  const Dims& dims = t.dims();
  Index left = 1;
  for (int l = 0; l < mode; ++l) left *= dims[static_cast<std::size_t>(l)];
  const Index n = dims[static_cast<std::size_t>(mode)];
  Index right = 1;
  for (std::size_t l = static_cast<std::size_t>(mode) + 1; l < dims.size(); ++l) right *= dims[l];
  const Index r = m.cols();

  Dims out_dims = dims;
  out_dims[static_cast<std::size_t>(mode)] = r;
  VectorXd out(left * r * right);
  for (Index k = 0; k < right; ++k) {
    Eigen::Map<const MatrixXd> block(t.data().data() + k * left * n, left, n);
    Eigen::Map<MatrixXd> dst(out.data() + k * left * r, left, r);
    dst.noalias() = block * m;
  }
  return DenseTensor(std::move(out_dims), std::move(out));
}

}  // namespace

Index checked_numel(std::span<const Index> dims, std::int64_t cap) {
  std::int64_t total = 1;
  for (Index n : dims) {
    if (n < 0) throw InvalidArgument("negative mode size");
    total *= n;
    if (total > cap) {
      throw ResourceLimit("dense tensor would need more than " + std::to_string(cap) + " entries");
    }
  }
  return static_cast<Index>(total);
}

DenseTensor::DenseTensor(Dims dims, std::int64_t cap) : dims_(std::move(dims)) {
  data_ = VectorXd::Zero(checked_numel(dims_, cap));
}

DenseTensor::DenseTensor(Dims dims, VectorXd data) : dims_(std::move(dims)), data_(std::move(data)) {
  Index total = 1;
  for (Index n : dims_) total *= n;
  if (total != data_.size()) throw InvalidArgument("DenseTensor: data size does not match dims");
}

Index DenseTensor::linear_index(std::span<const Index> idx) const {
  if (idx.size() != dims_.size()) throw InvalidArgument("DenseTensor: index has wrong order");
  Index lin = 0;
  for (std::size_t l = dims_.size(); l-- > 0;) {
    if (idx[l] < 0 || idx[l] >= dims_[l]) throw InvalidArgument("DenseTensor: index out of range");
    lin = lin * dims_[l] + idx[l];
  }
  return lin;
}

MatrixXd DenseTensor::unfold(int mode) const {
  const Index n = dims_.at(static_cast<std::size_t>(mode));
  Index left = 1;
  for (int l = 0; l < mode; ++l) left *= dims_[static_cast<std::size_t>(l)];
  const Index right = n == 0 ? 0 : numel() / (left * n);
  MatrixXd out(n, left * right);
  for (Index k = 0; k < right; ++k) {
    Eigen::Map<const MatrixXd> block(data_.data() + k * left * n, left, n);
    out.middleCols(k * left, left) = block.transpose();
  }
  return out;
}

CpTensor::CpTensor(Dims dims) : dims_(std::move(dims)) {
  for (Index n : dims_) factors_.emplace_back(n, 0);
}

CpTensor::CpTensor(VectorXd weights, std::vector<MatrixXd> factors)
    : weights_(std::move(weights)), factors_(std::move(factors)) {
  if (factors_.empty()) throw InvalidArgument("CpTensor: at least one mode required");
  for (const auto& f : factors_) {
    if (f.cols() != weights_.size()) {
      throw InvalidArgument("CpTensor: factor column count must equal the number of weights");
    }
    dims_.push_back(f.rows());
  }
}

CpTensor CpTensor::rank_one(const std::vector<VectorXd>& vectors, double weight) {
  std::vector<MatrixXd> factors;
  for (const auto& v : vectors) factors.emplace_back(v);
  return CpTensor(VectorXd::Constant(1, weight), std::move(factors));
}

Index CpTensor::storage_size() const noexcept {
  Index total = rank();
  for (Index n : dims_) total += n * rank();
  return total;
}

TuckerTensor::TuckerTensor(DenseTensor core, std::vector<MatrixXd> sides)
    : core_(std::move(core)), sides_(std::move(sides)) {
  if (static_cast<int>(sides_.size()) != core_.order()) {
    throw InvalidArgument("TuckerTensor: one side matrix per mode required");
  }
  for (std::size_t l = 0; l < sides_.size(); ++l) {
    if (sides_[l].cols() != core_.dims()[l]) {
      throw InvalidArgument("TuckerTensor: side matrix columns must equal the core rank");
    }
    if (sides_[l].cols() > sides_[l].rows()) throw InvalidArgument("TuckerTensor: rank exceeds mode size");
    dims_.push_back(sides_[l].rows());
  }
}

Index TuckerTensor::storage_size() const noexcept {
  Index total = core_.numel();
  for (const auto& s : sides_) total += s.size();
  return total;
}

CpTensor cp_add(const CpTensor& a, const CpTensor& b) {
  require_same_dims(a.dims(), b.dims(), "cp_add");
  const Index ra = a.rank();
  const Index rb = b.rank();
  VectorXd w(ra + rb);
  w << a.weights(), b.weights();
  std::vector<MatrixXd> factors;
  for (int l = 0; l < a.order(); ++l) {
    MatrixXd f(a.dims()[static_cast<std::size_t>(l)], ra + rb);
    f << a.factor(l), b.factor(l);
    factors.push_back(std::move(f));
  }
  return CpTensor(std::move(w), std::move(factors));
}

CpTensor cp_scale(const CpTensor& a, double s) {
  if (a.rank() == 0) return a;
  return CpTensor(a.weights() * s, a.factors());
}

CpTensor cp_axpy(const CpTensor& a, double s, const CpTensor& b) { return cp_add(a, cp_scale(b, s)); }

double cp_inner(const CpTensor& a, const CpTensor& b) {
  require_same_dims(a.dims(), b.dims(), "cp_inner");
  if (a.rank() == 0 || b.rank() == 0) return 0.0;
  MatrixXd prod = MatrixXd::Ones(a.rank(), b.rank());
  for (int l = 0; l < a.order(); ++l) prod.array() *= (a.factor(l).transpose() * b.factor(l)).array();
  return a.weights().dot(prod * b.weights());
}

double cp_norm(const CpTensor& a) { return std::sqrt(std::max(cp_inner(a, a), 0.0)); }

CpTensor cp_normalize(const CpTensor& a) {
  if (a.rank() == 0) return a;
  VectorXd w = a.weights();
  std::vector<MatrixXd> factors = a.factors();
  for (Index k = 0; k < a.rank(); ++k) {
    for (auto& f : factors) {
      const double nrm = f.col(k).norm();
      if (nrm > 0.0) {
        f.col(k) /= nrm;
        w(k) *= nrm;
      } else {
        f.col(k).setZero();
        f(0, k) = 1.0;
        w(k) = 0.0;
      }
    }
  }
  return CpTensor(std::move(w), std::move(factors));
}

CpTensor cp_hadamard(const CpTensor& a, const CpTensor& b) {
  require_same_dims(a.dims(), b.dims(), "cp_hadamard");
  const Index ra = a.rank();
  const Index rb = b.rank();
  VectorXd w(ra * rb);
  for (Index k = 0; k < ra; ++k) w.segment(k * rb, rb) = a.weights()(k) * b.weights();
  std::vector<MatrixXd> factors;
  for (int l = 0; l < a.order(); ++l) {
    MatrixXd f(a.dims()[static_cast<std::size_t>(l)], ra * rb);
    for (Index k = 0; k < ra; ++k) {
      f.middleCols(k * rb, rb) = b.factor(l).array().colwise() * a.factor(l).col(k).array();
    }
    factors.push_back(std::move(f));
  }
  if (ra * rb == 0) return CpTensor(a.dims());
  return CpTensor(std::move(w), std::move(factors));
}

DenseTensor cp_to_dense(const CpTensor& a, std::int64_t cap) {
  DenseTensor out(a.dims(), cap);
  if (a.rank() == 0) return out;
  // Khatri-Rao of modes 2..d times (mode-1 factor * weights)^T.
  const Index r = a.rank();
  MatrixXd kr = a.factor(a.order() - 1);
  for (int l = a.order() - 2; l >= 1; --l) {
    const MatrixXd& f = a.factor(l);
    MatrixXd next(kr.rows() * f.rows(), r);
    for (Index k = 0; k < r; ++k) {
      for (Index j = 0; j < kr.rows(); ++j) next.col(k).segment(j * f.rows(), f.rows()) = kr(j, k) * f.col(k);
    }
    kr = std::move(next);
  }
  const MatrixXd lead = a.factor(0) * a.weights().asDiagonal();
  Eigen::Map<MatrixXd>(out.data().data(), a.dims()[0], kr.rows()).noalias() = lead * kr.transpose();
  return out;
}

DenseTensor tucker_to_dense(const TuckerTensor& t, std::int64_t cap) {
  checked_numel(t.dims(), cap);
  std::vector<MatrixXd> mats;
  for (const auto& s : t.sides()) mats.push_back(s.transpose());
  return multilinear_transpose_product(t.core(), mats);
}

DenseTensor multilinear_transpose_product(const DenseTensor& t, const std::vector<MatrixXd>& mats) {
  if (static_cast<int>(mats.size()) != t.order()) throw InvalidArgument("multilinear product: one matrix per mode");
  DenseTensor cur = t;
  for (int l = 0; l < t.order(); ++l) {
    const MatrixXd& m = mats[static_cast<std::size_t>(l)];
    if (m.rows() != cur.dims()[static_cast<std::size_t>(l)]) {
      throw InvalidArgument("multilinear product: matrix rows do not match mode size");
    }
    cur = mode_product_transpose(cur, l, m);
  }
  return cur;
}

}  // namespace fraclap
