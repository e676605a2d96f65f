#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

/// Stride-2 transposed convolution that exactly doubles the time axis.
///
/// Input column i scatters its filter response onto output columns
/// 2i .. 2i+k-1; taps past the end are cropped. Weights use the Conv1D
/// layout: filters x (channels * filter_size).
template <typename Scalar>
struct Deconv1D {
  Index filters;
  Index channels;
  Index filter_size;
  ConstMatrixMap<Scalar> weights;
  ConstVectorMap<Scalar> bias;
};

template <typename Scalar>
struct Deconv1DGrad {
  MatrixMap<Scalar> weights;
  VectorMap<Scalar> bias;
};

namespace detail {

// Rearranges weights into (filters * k) x channels so one product yields every tap.
template <typename Scalar>
RowMatrix<Scalar> tap_matrix(const Deconv1D<Scalar>& layer) {
  const Index k = layer.filter_size;
  RowMatrix<Scalar> taps(layer.filters * k, layer.channels);
  for (Index o = 0; o < layer.filters; ++o)
    for (Index c = 0; c < layer.channels; ++c)
      for (Index j = 0; j < k; ++j) taps(o * k + j, c) = layer.weights(o, c * k + j);
  return taps;
}

}  // namespace detail

template <typename Scalar>
RowMatrix<Scalar> deconv1d_forward(const Deconv1D<Scalar>& layer, const MatrixArg<Scalar>& input) {
  if (input.rows() != layer.channels)
    throw DimensionError("deconv1d: expected " + std::to_string(layer.channels) + " input channels, got " +
                         std::to_string(input.rows()));
  const Index k = layer.filter_size, in_len = input.cols(), out_len = 2 * in_len;
  const RowMatrix<Scalar> taps = detail::tap_matrix(layer) * input;
  RowMatrix<Scalar> out(layer.filters, out_len);
  out.colwise() = layer.bias;
  for (Index o = 0; o < layer.filters; ++o)
    for (Index i = 0; i < in_len; ++i)
      for (Index j = 0; j < k && 2 * i + j < out_len; ++j) out(o, 2 * i + j) += taps(o * k + j, i);
  return out;
}

template <typename Scalar>
RowMatrix<Scalar> deconv1d_backward(const Deconv1D<Scalar>& layer, const MatrixArg<Scalar>& input,
                                    const MatrixArg<Scalar>& grad_out, Deconv1DGrad<Scalar>& grad) {
  const Index k = layer.filter_size, in_len = input.cols(), out_len = 2 * in_len;
  if (input.rows() != layer.channels || grad_out.rows() != layer.filters || grad_out.cols() != out_len)
    throw DimensionError("deconv1d_backward: shapes do not match the forward pass");
  RowMatrix<Scalar> grad_taps = RowMatrix<Scalar>::Zero(layer.filters * k, in_len);
  for (Index o = 0; o < layer.filters; ++o)
    for (Index i = 0; i < in_len; ++i)
      for (Index j = 0; j < k && 2 * i + j < out_len; ++j) grad_taps(o * k + j, i) = grad_out(o, 2 * i + j);

  const RowMatrix<Scalar> grad_tap_weights = grad_taps * input.transpose();
  for (Index o = 0; o < layer.filters; ++o)
    for (Index c = 0; c < layer.channels; ++c)
      for (Index j = 0; j < k; ++j) grad.weights(o, c * k + j) += grad_tap_weights(o * k + j, c);
  grad.bias += grad_out.rowwise().sum();
  return detail::tap_matrix(layer).transpose() * grad_taps;
}

/// Learned 1x1 convolution collapsing channels to one row, then sigmoid.
template <typename Scalar>
struct ChannelMerge {
  ConstVectorMap<Scalar> weights;
  Scalar bias;
};

template <typename Scalar>
struct ChannelMergeGrad {
  VectorMap<Scalar> weights;
  Scalar& bias;
};

template <typename Scalar>
RowMatrix<Scalar> channel_merge_forward(const ChannelMerge<Scalar>& merge,
                                        const MatrixArg<Scalar>& group) {
  if (group.rows() != merge.weights.size() || group.rows() == 0)
    throw DimensionError("channel_merge: expected " + std::to_string(merge.weights.size()) + " channels, got " +
                         std::to_string(group.rows()));
  RowMatrix<Scalar> pre = merge.weights.transpose() * group;
  pre.array() += merge.bias;
  return pre.unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// `output` is the value returned by channel_merge_forward.
template <typename Scalar>
RowMatrix<Scalar> channel_merge_backward(const ChannelMerge<Scalar>& merge,
                                         const MatrixArg<Scalar>& group,
                                         const MatrixArg<Scalar>& output,
                                         const MatrixArg<Scalar>& grad_out,
                                         ChannelMergeGrad<Scalar>& grad) {
  if (grad_out.rows() != 1 || grad_out.cols() != group.cols() || output.cols() != group.cols())
    throw DimensionError("channel_merge_backward: shapes do not match the forward pass");
  const RowMatrix<Scalar> delta = grad_out.cwiseProduct(output.unaryExpr([](Scalar y) { return y * (Scalar(1) - y); }));
  grad.weights.noalias() += group * delta.transpose();
  grad.bias += delta.sum();
  return merge.weights * delta;
}

}  // namespace ctsf
