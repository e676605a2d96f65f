#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

/// Winning input column of every pooled output, kept for the backward pass.
struct PoolRecord {
  Index input_length = 0;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
};

template <typename Scalar>
struct PoolResult {
  RowMatrix<Scalar> output;
  PoolRecord record;
};

/// 1x2 max-pooling with stride 2. Ties go to the leftmost position.
template <typename Scalar>
PoolResult<Scalar> maxpool_forward(const MatrixArg<Scalar>& input) {
  const Index length = input.cols();
  if (length % 2 != 0 || length == 0)
    throw DimensionError("maxpool: input length must be even and positive, got " + std::to_string(length));
  PoolResult<Scalar> result;
  result.output.resize(input.rows(), length / 2);
  result.record.input_length = length;
  result.record.argmax.resize(input.rows(), length / 2);
  for (Index c = 0; c < input.rows(); ++c)
    for (Index i = 0; i < length / 2; ++i) {
      const Index left = 2 * i;
      const Index win = input(c, left + 1) > input(c, left) ? left + 1 : left;
      result.output(c, i) = input(c, win);
      result.record.argmax(c, i) = win;
    }
  return result;
}

template <typename Scalar>
RowMatrix<Scalar> maxpool_backward(const PoolRecord& record, const MatrixArg<Scalar>& grad_out) {
  if (grad_out.rows() != record.argmax.rows() || grad_out.cols() != record.argmax.cols())
    throw DimensionError("maxpool_backward: gradient does not match the pooling record");
  RowMatrix<Scalar> grad_input = RowMatrix<Scalar>::Zero(grad_out.rows(), record.input_length);
  for (Index c = 0; c < grad_out.rows(); ++c)
    for (Index i = 0; i < grad_out.cols(); ++i) grad_input(c, record.argmax(c, i)) += grad_out(c, i);
  return grad_input;
}

}  // namespace ctsf
