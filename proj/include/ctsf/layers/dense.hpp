#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

template <typename Scalar>
struct Dense {
  ConstMatrixMap<Scalar> weights;  // out x in
  ConstVectorMap<Scalar> bias;
};

template <typename Scalar>
struct DenseGrad {
  MatrixMap<Scalar> weights;
  VectorMap<Scalar> bias;
};

template <typename Scalar>
Vector<Scalar> dense_forward(const Dense<Scalar>& layer, const VectorArg<Scalar>& x) {
  if (x.size() != layer.weights.cols())
    throw DimensionError("dense: expected input of length " + std::to_string(layer.weights.cols()) + ", got " +
                         std::to_string(x.size()));
  return layer.weights * x + layer.bias;
}

template <typename Scalar>
Vector<Scalar> dense_backward(const Dense<Scalar>& layer, const VectorArg<Scalar>& x,
                              const VectorArg<Scalar>& grad_out, DenseGrad<Scalar>& grad) {
  if (grad_out.size() != layer.weights.rows() || x.size() != layer.weights.cols())
    throw DimensionError("dense_backward: shapes do not match the forward pass");
  grad.weights.noalias() += grad_out * x.transpose();
  grad.bias += grad_out;
  return layer.weights.transpose() * grad_out;
}

}  // namespace ctsf
