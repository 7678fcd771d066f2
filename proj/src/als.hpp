#pragma once

// Tucker ALS over a tensor that is only available slice by slice.

#include <functional>
#include <vector>

#include "fraclap/decomp.hpp"

namespace fraclap::detail {

/// Produces mode-1 slices of a d = 2 or d = 3 tensor: slice i is the
/// n2 x n3 matrix t(i, :, :) (an n2 x 1 column for d = 2).
struct SliceSource {
  Dims dims;
  std::function<void(Index, MatrixXd&)> slice;
};

SliceSource dense_source(const DenseTensor& t);
SliceSource sampled_source(const GridSampler& sampler, int order, Index n, int level);
DenseTensor materialize(const GridSampler& sampler, int order, Index n, int level);

/// Runs ALS sweeps from the given side matrices (their column counts are
/// the ranks). Returns the Tucker tensor with the core of the final sweep.
TuckerTensor run_als(const SliceSource& source, std::vector<MatrixXd> sides, const AlsOptions& options,
                     AlsTrace* trace);

}  // namespace fraclap::detail
