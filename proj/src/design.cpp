#include "fraclap/design.hpp"

#include <cmath>
#include <random>

#include "fraclap/errors.hpp"

namespace fraclap {

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::GaussianBump: return "gaussian-bump";
    case DesignKind::TwoBumps: return "two-bumps";
    case DesignKind::BoxIndicator: return "box-indicator";
    case DesignKind::CustomSeparable: return "custom-separable";
    case DesignKind::Random: return "random";
  }
  return "?";
}

DesignKind parse_design_kind(std::string_view tag) {
  for (DesignKind k : {DesignKind::GaussianBump, DesignKind::TwoBumps, DesignKind::BoxIndicator,
                       DesignKind::CustomSeparable, DesignKind::Random}) {
    if (to_string(k) == tag) return k;
  }
  throw InvalidArgument("unknown design function '" + std::string(tag) + "'");
}

namespace {

VectorXd sample(const Profile& p, Index n) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = p(static_cast<double>(i + 1) / static_cast<double>(n + 1));
  return v;
}

CpTensor from_terms(const std::vector<std::vector<Profile>>& terms, const VectorXd& weights, const Dims& dims) {
  std::vector<MatrixXd> f;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    MatrixXd m(dims[l], static_cast<Index>(terms.size()));
    for (std::size_t k = 0; k < terms.size(); ++k) m.col(static_cast<Index>(k)) = sample(terms[k][l], dims[l]);
    f.push_back(std::move(m));
  }
  return CpTensor(weights, std::move(f));
}

}  // namespace

CpTensor design_tensor(const DesignFunction& f, const Dims& dims, double eps, Index rank_cap) {
  if (dims.size() != 2 && dims.size() != 3) throw InvalidArgument("design_tensor: d must be 2 or 3");
  if (!(f.width > 0.0)) throw InvalidArgument("design_tensor: width must be positive");
  const auto d = dims.size();
  const double w = f.width;
  auto bump = [w](double c) { return Profile([c, w](double x) { return std::exp(-(x - c) * (x - c) / (2 * w * w)); }); };

  CpTensor raw;
  switch (f.kind) {
    case DesignKind::GaussianBump:
      raw = from_terms({std::vector<Profile>(d, bump(f.center))}, VectorXd::Ones(1), dims);
      break;
    case DesignKind::TwoBumps: {
      VectorXd wt(2);
      wt << 1.0, -0.7;
      raw = from_terms({std::vector<Profile>(d, bump(1.0 - f.second_center)), std::vector<Profile>(d, bump(f.second_center))},
                       wt, dims);
      break;
    }
    case DesignKind::BoxIndicator: {
      const double lo = f.center - w;
      const double hi = f.center + w;
      const Profile box = [lo, hi](double x) { return x >= lo && x <= hi ? 1.0 : 0.0; };
      raw = from_terms({std::vector<Profile>(d, box)}, VectorXd::Ones(1), dims);
      break;
    }
    case DesignKind::CustomSeparable: {
      if (f.terms.empty()) throw InvalidArgument("design_tensor: custom-separable needs at least one term");
      for (const auto& t : f.terms) {
        if (t.size() != d) throw InvalidArgument("design_tensor: every term needs one profile per mode");
      }
      raw = from_terms(f.terms, VectorXd::Ones(static_cast<Index>(f.terms.size())), dims);
      break;
    }
    case DesignKind::Random: {
      if (f.random_rank < 1) throw InvalidArgument("design_tensor: random rank must be >= 1");
      std::mt19937_64 rng(f.seed);
      std::normal_distribution<double> normal;
      std::vector<MatrixXd> fac;
      for (Index n : dims) {
        MatrixXd m(n, f.random_rank);
        for (Index j = 0; j < m.cols(); ++j) {
          for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
        }
        fac.push_back(std::move(m));
      }
      raw = CpTensor(VectorXd::Ones(f.random_rank), std::move(fac));
      break;
    }
  }
  if (cp_norm(raw) == 0.0) throw InvalidArgument("design_tensor: design function vanishes on the grid");
  CpTensor out = trunc(raw, TruncationSpec::relative(eps));
  if (out.rank() > rank_cap) {
    throw ResourceLimit("design_tensor: compressed rank " + std::to_string(out.rank()) + " exceeds the cap " +
                        std::to_string(rank_cap));
  }
  return out;
}

}  // namespace fraclap
