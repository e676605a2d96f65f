#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

/// Same-length 1-D cross-correlation.
///
/// Weights are stored filters x (channels * filter_size) with element
/// [f, c * filter_size + j]. Odd filters are padded symmetrically; even
/// filters take all their padding on the right, so out[t] sees x[t .. t+k-1].
template <typename Scalar>
struct Conv1D {
  Index filters;
  Index channels;
  Index filter_size;
  ConstMatrixMap<Scalar> weights;
  ConstVectorMap<Scalar> bias;

  Index pad_left() const { return filter_size % 2 == 1 ? (filter_size - 1) / 2 : 0; }
};

template <typename Scalar>
struct Conv1DGrad {
  MatrixMap<Scalar> weights;
  VectorMap<Scalar> bias;
};

namespace detail {

// (channels * k) x L matrix of zero-padded input taps.
template <typename Scalar>
RowMatrix<Scalar> conv_patches(const MatrixArg<Scalar>& input, Index k, Index pad) {
  const Index channels = input.rows(), length = input.cols();
  RowMatrix<Scalar> patches = RowMatrix<Scalar>::Zero(channels * k, length);
  for (Index c = 0; c < channels; ++c)
    for (Index j = 0; j < k; ++j) {
      const Index shift = j - pad;
      const Index lo = std::max<Index>(0, -shift), hi = std::min(length, length - shift);
      if (hi > lo) patches.row(c * k + j).segment(lo, hi - lo) = input.row(c).segment(lo + shift, hi - lo);
    }
  return patches;
}

template <typename Scalar>
void check_conv_input(const Conv1D<Scalar>& layer, Index channels) {
  if (channels != layer.channels)
    throw DimensionError("conv1d: expected " + std::to_string(layer.channels) + " input channels, got " +
                         std::to_string(channels));
}

}  // namespace detail

template <typename Scalar>
RowMatrix<Scalar> conv1d_forward(const Conv1D<Scalar>& layer, const MatrixArg<Scalar>& input) {
  detail::check_conv_input(layer, input.rows());
  if (input.cols() < 1) throw DimensionError("conv1d: empty input");
  RowMatrix<Scalar> out = layer.weights * detail::conv_patches<Scalar>(input, layer.filter_size, layer.pad_left());
  out.colwise() += layer.bias;
  return out;
}

/// Accumulates parameter gradients into `grad` and returns the input gradient.
template <typename Scalar>
RowMatrix<Scalar> conv1d_backward(const Conv1D<Scalar>& layer, const MatrixArg<Scalar>& input,
                                  const MatrixArg<Scalar>& grad_out, Conv1DGrad<Scalar>& grad) {
  detail::check_conv_input(layer, input.rows());
  if (grad_out.rows() != layer.filters || grad_out.cols() != input.cols())
    throw DimensionError("conv1d_backward: gradient shape does not match forward output");
  const Index k = layer.filter_size, pad = layer.pad_left(), length = input.cols();
  grad.weights.noalias() += grad_out * detail::conv_patches<Scalar>(input, k, pad).transpose();
  grad.bias += grad_out.rowwise().sum();

  const RowMatrix<Scalar> grad_patches = layer.weights.transpose() * grad_out;
  RowMatrix<Scalar> grad_input = RowMatrix<Scalar>::Zero(input.rows(), length);
  for (Index c = 0; c < input.rows(); ++c)
    for (Index j = 0; j < k; ++j) {
      const Index shift = j - pad;
      const Index lo = std::max<Index>(0, -shift), hi = std::min(length, length - shift);
      if (hi > lo) grad_input.row(c).segment(lo + shift, hi - lo) += grad_patches.row(c * k + j).segment(lo, hi - lo);
    }
  return grad_input;
}

}  // namespace ctsf
