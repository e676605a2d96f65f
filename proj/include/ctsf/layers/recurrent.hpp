#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

/// Vanilla recurrent cell: h_t = tanh(W_xh x_t + W_hh h_{t-1} + b).
template <typename Scalar>
struct RNNCell {
  ConstMatrixMap<Scalar> input_weights;      // hidden x input
  ConstMatrixMap<Scalar> recurrent_weights;  // hidden x hidden
  ConstVectorMap<Scalar> bias;

  Index input_size() const { return input_weights.cols(); }
  Index hidden_size() const { return input_weights.rows(); }
};

template <typename Scalar>
struct RNNCellGrad {
  MatrixMap<Scalar> input_weights;
  MatrixMap<Scalar> recurrent_weights;
  VectorMap<Scalar> bias;
};

/// Inputs are stored one time step per row; hidden row 0 is h0.
template <typename Scalar>
struct RNNTrace {
  RowMatrix<Scalar> inputs;
  RowMatrix<Scalar> hidden;

  Vector<Scalar> final_state() const { return hidden.row(hidden.rows() - 1).transpose(); }
};

template <typename Scalar>
struct RecurrentInputGrad {
  RowMatrix<Scalar> inputs;
  Vector<Scalar> initial_state;
};

namespace detail {
template <typename Cell>
void check_sequence(const Cell& cell, Index step_length, Index steps) {
  if (step_length != cell.input_size())
    throw DimensionError("recurrent cell: expected steps of length " + std::to_string(cell.input_size()) + ", got " +
                         std::to_string(step_length));
  if (steps < 1) throw DimensionError("recurrent cell: empty sequence");
}
}  // namespace detail

template <typename Scalar>
RNNTrace<Scalar> rnn_forward(const RNNCell<Scalar>& cell, const MatrixArg<Scalar>& sequence,
                             const VectorArg<Scalar>& h0) {
  detail::check_sequence(cell, sequence.cols(), sequence.rows());
  const Index steps = sequence.rows(), h = cell.hidden_size();
  if (h0.size() != h) throw DimensionError("rnn: initial state has the wrong length");
  RNNTrace<Scalar> trace{sequence, RowMatrix<Scalar>(steps + 1, h)};
  trace.hidden.row(0) = h0.transpose();
  for (Index t = 0; t < steps; ++t) {
    Vector<Scalar> pre = cell.input_weights * sequence.row(t).transpose() +
                         cell.recurrent_weights * trace.hidden.row(t).transpose() + cell.bias;
    trace.hidden.row(t + 1) = pre.array().tanh().matrix().transpose();
  }
  return trace;
}

template <typename Scalar>
RNNTrace<Scalar> rnn_forward(const RNNCell<Scalar>& cell, const MatrixArg<Scalar>& sequence) {
  return rnn_forward(cell, sequence, Vector<Scalar>::Zero(cell.hidden_size()));
}

/// Backpropagation through time. `grad_hidden` row t is dJ/dh_{t+1}.
template <typename Scalar>
RecurrentInputGrad<Scalar> rnn_backward(const RNNCell<Scalar>& cell, const RNNTrace<Scalar>& trace,
                                        const MatrixArg<Scalar>& grad_hidden,
                                        RNNCellGrad<Scalar>& grad) {
  const Index steps = trace.inputs.rows(), h = cell.hidden_size();
  if (grad_hidden.rows() != steps || grad_hidden.cols() != h)
    throw DimensionError("rnn_backward: gradient does not match the trace");
  RecurrentInputGrad<Scalar> out{RowMatrix<Scalar>(steps, cell.input_size()), Vector<Scalar>::Zero(h)};
  Vector<Scalar> carry = Vector<Scalar>::Zero(h);
  for (Index t = steps - 1; t >= 0; --t) {
    const Vector<Scalar> ht = trace.hidden.row(t + 1).transpose();
    const Vector<Scalar> delta =
        (grad_hidden.row(t).transpose() + carry).cwiseProduct((Scalar(1) - ht.array().square()).matrix());
    grad.input_weights.noalias() += delta * trace.inputs.row(t);
    grad.recurrent_weights.noalias() += delta * trace.hidden.row(t);
    grad.bias += delta;
    out.inputs.row(t) = (cell.input_weights.transpose() * delta).transpose();
    carry = cell.recurrent_weights.transpose() * delta;
  }
  out.initial_state = carry;
  return out;
}

/// LSTM cell; gate blocks are stacked in the order input, forget, candidate, output.
template <typename Scalar>
struct LSTMCell {
  ConstMatrixMap<Scalar> input_weights;      // 4*hidden x input
  ConstMatrixMap<Scalar> recurrent_weights;  // 4*hidden x hidden
  ConstVectorMap<Scalar> bias;               // 4*hidden

  Index input_size() const { return input_weights.cols(); }
  Index hidden_size() const { return input_weights.rows() / 4; }
};

template <typename Scalar>
struct LSTMCellGrad {
  MatrixMap<Scalar> input_weights;
  MatrixMap<Scalar> recurrent_weights;
  VectorMap<Scalar> bias;
};

template <typename Scalar>
struct LSTMTrace {
  RowMatrix<Scalar> inputs;
  RowMatrix<Scalar> hidden;  // row 0 is h0
  RowMatrix<Scalar> cell;    // row 0 is c0
  RowMatrix<Scalar> gates;   // activated gates, 4*hidden per step

  Vector<Scalar> final_state() const { return hidden.row(hidden.rows() - 1).transpose(); }
};

template <typename Scalar>
LSTMTrace<Scalar> lstm_forward(const LSTMCell<Scalar>& cell, const MatrixArg<Scalar>& sequence,
                               const VectorArg<Scalar>& h0) {
  detail::check_sequence(cell, sequence.cols(), sequence.rows());
  const Index steps = sequence.rows(), h = cell.hidden_size();
  if (h0.size() != h) throw DimensionError("lstm: initial state has the wrong length");
  LSTMTrace<Scalar> trace{sequence, RowMatrix<Scalar>(steps + 1, h), RowMatrix<Scalar>(steps + 1, h),
                          RowMatrix<Scalar>(steps, 4 * h)};
  trace.hidden.row(0) = h0.transpose();
  trace.cell.row(0).setZero();
  for (Index t = 0; t < steps; ++t) {
    Vector<Scalar> a = cell.input_weights * sequence.row(t).transpose() +
                       cell.recurrent_weights * trace.hidden.row(t).transpose() + cell.bias;
    auto sig = [](Scalar x) { return sigmoid(x); };
    a.segment(0, h) = a.segment(0, h).unaryExpr(sig);
    a.segment(h, h) = a.segment(h, h).unaryExpr(sig);
    a.segment(2 * h, h) = a.segment(2 * h, h).array().tanh().matrix();
    a.segment(3 * h, h) = a.segment(3 * h, h).unaryExpr(sig);
    const Vector<Scalar> c = a.segment(h, h).cwiseProduct(trace.cell.row(t).transpose()) +
                             a.segment(0, h).cwiseProduct(a.segment(2 * h, h));
    trace.cell.row(t + 1) = c.transpose();
    trace.hidden.row(t + 1) = a.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix()).transpose();
    trace.gates.row(t) = a.transpose();
  }
  return trace;
}

template <typename Scalar>
LSTMTrace<Scalar> lstm_forward(const LSTMCell<Scalar>& cell, const MatrixArg<Scalar>& sequence) {
  return lstm_forward(cell, sequence, Vector<Scalar>::Zero(cell.hidden_size()));
}

template <typename Scalar>
RecurrentInputGrad<Scalar> lstm_backward(const LSTMCell<Scalar>& cell, const LSTMTrace<Scalar>& trace,
                                         const MatrixArg<Scalar>& grad_hidden,
                                         LSTMCellGrad<Scalar>& grad) {
  const Index steps = trace.inputs.rows(), h = cell.hidden_size();
  if (grad_hidden.rows() != steps || grad_hidden.cols() != h)
    throw DimensionError("lstm_backward: gradient does not match the trace");
  RecurrentInputGrad<Scalar> out{RowMatrix<Scalar>(steps, cell.input_size()), Vector<Scalar>::Zero(h)};
  Vector<Scalar> carry_h = Vector<Scalar>::Zero(h), carry_c = Vector<Scalar>::Zero(h);
  for (Index t = steps - 1; t >= 0; --t) {
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> gates = trace.gates.row(t).transpose().array();
    const auto in = gates.segment(0, h), forget = gates.segment(h, h), cand = gates.segment(2 * h, h),
               outg = gates.segment(3 * h, h);
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> tc = trace.cell.row(t + 1).transpose().array().tanh();
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> dh = grad_hidden.row(t).transpose().array() + carry_h.array();
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> dc = dh * outg * (Scalar(1) - tc.square()) + carry_c.array();

    Vector<Scalar> delta(4 * h);
    delta.segment(0, h) = (dc * cand * in * (Scalar(1) - in)).matrix();
    delta.segment(h, h) = (dc * trace.cell.row(t).transpose().array() * forget * (Scalar(1) - forget)).matrix();
    delta.segment(2 * h, h) = (dc * in * (Scalar(1) - cand.square())).matrix();
    delta.segment(3 * h, h) = (dh * tc * outg * (Scalar(1) - outg)).matrix();

    grad.input_weights.noalias() += delta * trace.inputs.row(t);
    grad.recurrent_weights.noalias() += delta * trace.hidden.row(t);
    grad.bias += delta;
    out.inputs.row(t) = (cell.input_weights.transpose() * delta).transpose();
    carry_h = cell.recurrent_weights.transpose() * delta;
    carry_c = (dc * forget).matrix();
  }
  out.initial_state = carry_h;
  return out;
}

}  // namespace ctsf
