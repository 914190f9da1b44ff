#pragma once

#include <Eigen/Core>

namespace bilevel {

// ∞-norm, zero for empty vectors.
template <typename Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace bilevel
