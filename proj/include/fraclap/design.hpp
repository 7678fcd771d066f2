#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fraclap/decomp.hpp"

namespace fraclap {

/// Tracking targets on the unit cube, sampled at x_i = (i+1)/(n+1).
///
///   gaussian-bump     exp(-|x - c|^2 / (2 w^2)), rank 1
///   two-bumps         bump(1 - c2, w) - 0.7 bump(c2, w), rank 2
///   box-indicator     1 on [c - w, c + w]^d, 0 elsewhere, rank 1
///   custom-separable  sum over terms of products of 1D profiles
///   random            sum of `random_rank` products of Gaussian vectors
enum class DesignKind { GaussianBump, TwoBumps, BoxIndicator, CustomSeparable, Random };

using Profile = std::function<double(double)>;

struct DesignFunction {
  DesignKind kind = DesignKind::GaussianBump;
  double center = 0.5;
  double width = 0.1;
  double second_center = 0.7;
  /// terms[k][l]: profile of term k in mode l (CustomSeparable).
  std::vector<std::vector<Profile>> terms;
  Index random_rank = 3;
  std::uint64_t seed = 1;
};

std::string_view to_string(DesignKind kind);
DesignKind parse_design_kind(std::string_view tag);

/// Samples the design function on an n_1 x ... x n_d grid and compresses it
/// with trunc at relative tolerance `eps`. Throws ResourceLimit when the
/// compressed rank exceeds `rank_cap`.
CpTensor design_tensor(const DesignFunction& f, const Dims& dims, double eps = 1e-12, Index rank_cap = 64);

}  // namespace fraclap
