#pragma once

#include <random>

#include "ctsf/tensor.hpp"

namespace ctsf {

/// Fills `weights` uniformly in +-sqrt(6 / (fan_in + fan_out)).
template <typename Derived>
void glorot_uniform(Eigen::DenseBase<Derived>& weights, Index fan_in, Index fan_out, std::mt19937_64& rng) {
  using Scalar = typename Derived::Scalar;
  const Scalar limit = std::sqrt(Scalar(6) / static_cast<Scalar>(fan_in + fan_out));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  for (Index i = 0; i < weights.rows(); ++i)
    for (Index j = 0; j < weights.cols(); ++j) weights(i, j) = dist(rng);
}

}  // namespace ctsf
