#include "linalg.hpp"

#include <algorithm>
#include <cmath>

namespace fraclap::detail {

void fix_signs(MatrixXd& u, MatrixXd* v) {
  for (Index j = 0; j < u.cols(); ++j) {
    const double scale = u.col(j).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > 1e-8 * scale) {
        if (u(i, j) < 0.0) {
          u.col(j) *= -1.0;
          if (v != nullptr && j < v->cols()) v->col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

ThinSvd thin_svd(const MatrixXd& m, bool want_v) {
  ThinSvd out;
  if (m.size() == 0) {
    out.u = MatrixXd(m.rows(), 0);
    out.v = MatrixXd(m.cols(), 0);
    return out;
  }
  const unsigned opts = want_v ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : Eigen::ComputeThinU;
  Eigen::BDCSVD<MatrixXd> svd(m, opts);
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  if (want_v) out.v = svd.matrixV();
  fix_signs(out.u, want_v ? &out.v : nullptr);
  return out;
}

MatrixXd orthonormalize(const MatrixXd& m) {
  Eigen::HouseholderQR<MatrixXd> qr(m);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m.rows(), std::min(m.rows(), m.cols()));
  return q;
}

MatrixXd leading_left_vectors(const MatrixXd& m, Index r, VectorXd* singular_values) {
  const Index n = m.rows();
  r = std::min(r, n);
  ThinSvd svd = thin_svd(m, false);
  if (singular_values != nullptr) *singular_values = svd.s;
  const Index have = std::min<Index>(svd.u.cols(), r);
  MatrixXd out(n, r);
  out.leftCols(have) = svd.u.leftCols(have);
  if (have == r) return out;

  // Complete with coordinate vectors orthogonalized against what we have.
  Index filled = have;
  for (Index e = 0; e < n && filled < r; ++e) {
    VectorXd c = VectorXd::Unit(n, e);
    for (int pass = 0; pass < 2; ++pass) c -= out.leftCols(filled) * (out.leftCols(filled).transpose() * c);
    const double nrm = c.norm();
    if (nrm > 1e-6) out.col(filled++) = c / nrm;
  }
  return out;
}

Index rank_for_tail(const VectorXd& s, double abs_tol) {
  const Index n = s.size();
  double tail2 = 0.0;
  const double tol2 = abs_tol * abs_tol;
  Index r = n;
  while (r > 0 && tail2 + s(r - 1) * s(r - 1) <= tol2) {
    tail2 += s(r - 1) * s(r - 1);
    --r;
  }
  return r;
}

double tail_norm(const VectorXd& s, Index r) {
  double t = 0.0;
  for (Index k = r; k < s.size(); ++k) t += s(k) * s(k);
  return std::sqrt(t);
}

Index numerical_rank(const VectorXd& s, double rel_tol) {
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index r = 0;
  while (r < s.size() && s(r) > rel_tol * s(0)) ++r;
  return r;
}

}  // namespace fraclap::detail
