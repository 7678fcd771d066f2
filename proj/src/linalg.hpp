#pragma once

// Internal dense linear-algebra helpers shared by the decomposition code.

#include <Eigen/Dense>

#include "fraclap/spectral.hpp"

namespace fraclap::detail {

struct ThinSvd {
  MatrixXd u;
  VectorXd s;
  MatrixXd v;
};

/// Thin SVD with deterministic signs: the first non-negligible entry of each
/// left singular vector is positive.
ThinSvd thin_svd(const MatrixXd& m, bool want_v = true);

/// Flips column signs of `u` (and the matching columns of `v`) so that the
/// first non-negligible entry of each column of `u` is positive.
void fix_signs(MatrixXd& u, MatrixXd* v = nullptr);

/// Leading `r` left singular vectors of `m`, always exactly `r` orthonormal
/// columns (completed when m has fewer than r nonzero singular values).
/// Optionally returns all singular values.
MatrixXd leading_left_vectors(const MatrixXd& m, Index r, VectorXd* singular_values = nullptr);

/// Orthonormal basis of the column span (thin Q of a Householder QR).
MatrixXd orthonormalize(const MatrixXd& m);

/// Smallest R with sqrt(sum_{k >= R} s_k^2) <= abs_tol (s sorted descending).
Index rank_for_tail(const VectorXd& s, double abs_tol);

/// sqrt(sum_{k >= r} s_k^2).
double tail_norm(const VectorXd& s, Index r);

/// Numerical rank relative to the largest singular value.
Index numerical_rank(const VectorXd& s, double rel_tol = 1e-13);

}  // namespace fraclap::detail
