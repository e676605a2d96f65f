#include <random>

#include "ctsf/layers.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace ctsf;
using oracle::Vec;
using Mat = RowMatrix<double>;

namespace {

constexpr double kFdTolerance = 1e-5;

Conv1D<double> conv_view(const Vec& theta, Index filters, Index channels, Index k) {
  return {filters, channels, k, ConstMatrixMap<double>(theta.data(), filters, channels * k),
          ConstVectorMap<double>(theta.data() + filters * channels * k, filters)};
}

Deconv1D<double> deconv_view(const Vec& theta, Index filters, Index channels, Index k) {
  return {filters, channels, k, ConstMatrixMap<double>(theta.data(), filters, channels * k),
          ConstVectorMap<double>(theta.data() + filters * channels * k, filters)};
}

double weighted_sum(const Mat& out, const Mat& probe) { return out.cwiseProduct(probe).sum(); }

Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

}  // namespace

TEST_CASE("conv1d worked examples") {
  Vec id(2);
  id << 1.0, 0.0;
  Mat x(1, 3);
  x << 5, -2, 3;
  CHECK(conv1d_forward(conv_view(id, 1, 1, 1), x) == x);

  Vec ones(3);
  ones << 1.0, 1.0, 0.0;
  Mat y(1, 3);
  y << 1, 2, 3;
  Mat expected(1, 3);
  expected << 3, 5, 3;
  CHECK(conv1d_forward(conv_view(ones, 1, 1, 2), y) == expected);

  std::mt19937_64 rng(1);
  const Vec theta = oracle::random_vector(3 * 3 + 3, rng);
  const Mat out = conv1d_forward(conv_view(theta, 3, 1, 3), oracle::random_matrix(1, 8, rng));
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 8);

  CHECK_THROWS_AS(conv1d_forward(conv_view(theta, 3, 1, 3), Mat::Zero(2, 8)), DimensionError);
}

TEST_CASE("conv1d odd filters pad symmetrically") {
  Vec theta(4);
  theta << 1.0, 10.0, 100.0, 0.0;
  Mat x(1, 3);
  x << 1, 2, 3;
  // out[t] = x[t-1] + 10 x[t] + 100 x[t+1]
  Mat expected(1, 3);
  expected << 210, 321, 32;
  CHECK(conv1d_forward(conv_view(theta, 1, 1, 3), x) == expected);
}

TEST_CASE("conv1d backward edge cases") {
  std::mt19937_64 rng(2);
  const Mat x = oracle::random_matrix(2, 6, rng);
  const Vec theta = oracle::random_vector(3 * 2 * 3 + 3, rng);
  const auto layer = conv_view(theta, 3, 2, 3);
  Vec g = Vec::Zero(theta.size());
  Conv1DGrad<double> grad{MatrixMap<double>(g.data(), 3, 6), VectorMap<double>(g.data() + 18, 3)};
  const Mat gin = conv1d_backward(layer, x, Mat::Zero(3, 6), grad);
  CHECK(gin.isZero(0));
  CHECK(g.isZero(0));

  Vec id(2);
  id << 1.0, 0.0;
  const Mat go = oracle::random_matrix(1, 5, rng);
  Vec gid = Vec::Zero(2);
  Conv1DGrad<double> grad_id{MatrixMap<double>(gid.data(), 1, 1), VectorMap<double>(gid.data() + 1, 1)};
  CHECK(conv1d_backward(conv_view(id, 1, 1, 1), oracle::random_matrix(1, 5, rng), go, grad_id) == go);

  CHECK_THROWS_AS(conv1d_backward(layer, x, Mat::Zero(3, 5), grad), DimensionError);
}

TEST_CASE("conv1d gradients match finite differences") {
  for (Index k : {1, 2, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(k));
      const Index filters = 3, channels = 2, length = 7;
      const Vec theta = oracle::random_vector(filters * channels * k + filters, rng);
      const Mat x = oracle::random_matrix(channels, length, rng);
      const Mat probe = oracle::random_matrix(filters, length, rng);

      Vec g = Vec::Zero(theta.size());
      Conv1DGrad<double> grad{MatrixMap<double>(g.data(), filters, channels * k),
                              VectorMap<double>(g.data() + filters * channels * k, filters)};
      const Mat gin = conv1d_backward(conv_view(theta, filters, channels, k), x, probe, grad);

      const Vec fd_theta = oracle::central_difference(
          [&](const Vec& t) { return weighted_sum(conv1d_forward(conv_view(t, filters, channels, k), x), probe); },
          theta);
      const Vec fd_x = oracle::central_difference(
          [&](const Vec& xv) {
            return weighted_sum(
                conv1d_forward(conv_view(theta, filters, channels, k), ConstMatrixMap<double>(xv.data(), channels, length)),
                probe);
          },
          flatten(x));
      CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
      CHECK(oracle::max_relative_error(flatten(gin), fd_x) < kFdTolerance);
    }
  }
}

TEST_CASE("conv1d is linear in its input apart from the bias") {
  std::mt19937_64 rng(9);
  const Vec theta = oracle::random_vector(2 * 1 * 3 + 2, rng);
  const auto layer = conv_view(theta, 2, 1, 3);
  const Mat x = oracle::random_matrix(1, 9, rng), y = oracle::random_matrix(1, 9, rng);
  const double a = 0.7, b = -1.9;
  Mat bias_only = Mat::Zero(2, 9);
  bias_only.colwise() += layer.bias;
  const Mat lhs = conv1d_forward(layer, Mat(a * x + b * y)) - bias_only;
  const Mat rhs = a * (conv1d_forward(layer, x) - bias_only) + b * (conv1d_forward(layer, y) - bias_only);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("maxpool worked examples") {
  Mat x(1, 4);
  x << 2, 5, 1, 3;
  auto r = maxpool_forward<double>(x);
  CHECK(r.output(0, 0) == 5.0);
  CHECK(r.output(0, 1) == 3.0);

  Mat ties(1, 4);
  ties << 7, 7, 0, 0;
  r = maxpool_forward<double>(ties);
  CHECK(r.output(0, 0) == 7.0);
  CHECK(r.output(0, 1) == 0.0);
  CHECK(r.record.argmax(0, 0) == 0);
  CHECK(r.record.argmax(0, 1) == 2);

  const Mat constant = Mat::Constant(2, 6, 1.25);
  r = maxpool_forward<double>(constant);
  CHECK(r.output == Mat::Constant(2, 3, 1.25));

  CHECK_THROWS_AS(maxpool_forward<double>(Mat::Zero(1, 5)), DimensionError);
}

TEST_CASE("maxpool backward routing") {
  Mat x(1, 4);
  x << 0, 1, 0, 1;
  const auto r = maxpool_forward<double>(x);
  CHECK(r.record.argmax(0, 0) == 1);
  CHECK(r.record.argmax(0, 1) == 3);
  Mat g(1, 2);
  g << 1, 1;
  Mat expected(1, 4);
  expected << 0, 1, 0, 1;
  CHECK(maxpool_backward<double>(r.record, g) == expected);
  CHECK(maxpool_backward<double>(r.record, Mat::Zero(1, 2)).isZero(0));
  CHECK_THROWS_AS(maxpool_backward<double>(r.record, Mat::Zero(1, 3)), DimensionError);
  CHECK_THROWS_AS(maxpool_backward<double>(r.record, Mat::Zero(2, 2)), DimensionError);
}

TEST_CASE("maxpool gradients match finite differences away from ties") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Mat x = oracle::random_matrix(3, 10, rng);
    const Mat probe = oracle::random_matrix(3, 5, rng);
    const auto r = maxpool_forward<double>(x);
    const Mat g = maxpool_backward<double>(r.record, probe);
    const Vec fd = oracle::central_difference(
        [&](const Vec& xv) {
          return weighted_sum(maxpool_forward<double>(ConstMatrixMap<double>(xv.data(), 3, 10)).output, probe);
        },
        flatten(x));
    CHECK(oracle::max_relative_error(flatten(g), fd) < kFdTolerance);
  }
}

TEST_CASE("stacked pooling quarters the length") {
  for (Index len : {4, 8, 12, 48}) {
    const auto once = maxpool_forward<double>(Mat::Ones(2, len));
    const auto twice = maxpool_forward<double>(once.output);
    CHECK(twice.output.cols() == len / 4);
  }
}

TEST_CASE("deconv1d worked examples") {
  std::mt19937_64 rng(4);
  const Vec theta = oracle::random_vector(2 * 2 * 3 + 2, rng);
  CHECK(deconv1d_forward(deconv_view(theta, 2, 2, 3), oracle::random_matrix(2, 4, rng)).cols() == 8);

  Vec unit(4);
  unit << 1.0, 2.0, 3.0, 0.0;
  Mat first(1, 2), second(1, 2);
  first << 1, 0;
  second << 0, 1;
  Mat e1(1, 4), e2(1, 4);
  e1 << 1, 2, 3, 0;
  e2 << 0, 0, 1, 2;
  CHECK(deconv1d_forward(deconv_view(unit, 1, 1, 3), first) == e1);
  CHECK(deconv1d_forward(deconv_view(unit, 1, 1, 3), second) == e2);

  Vec biased = theta;
  biased.tail(2) << 0.25, -0.5;
  const Mat out = deconv1d_forward(deconv_view(biased, 2, 2, 3), Mat::Zero(2, 3));
  CHECK(out.row(0).isConstant(0.25));
  CHECK(out.row(1).isConstant(-0.5));

  CHECK_THROWS_AS(deconv1d_forward(deconv_view(theta, 2, 2, 3), Mat::Zero(3, 4)), DimensionError);
}

TEST_CASE("deconv1d output always doubles the length") {
  std::mt19937_64 rng(8);
  for (Index k : {1, 2, 3, 5, 10})
    for (Index len : {1, 2, 3, 25}) {
      const Vec theta = oracle::random_vector(2 * 2 * k + 2, rng);
      CHECK(deconv1d_forward(deconv_view(theta, 2, 2, k), oracle::random_matrix(2, len, rng)).cols() == 2 * len);
    }
}

TEST_CASE("deconv1d gradients match finite differences") {
  for (Index k : {1, 2, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed * 17 + static_cast<std::uint64_t>(k));
      const Index filters = 2, channels = 3, length = 4;
      const Vec theta = oracle::random_vector(filters * channels * k + filters, rng);
      const Mat x = oracle::random_matrix(channels, length, rng);
      const Mat probe = oracle::random_matrix(filters, 2 * length, rng);
      Vec g = Vec::Zero(theta.size());
      Deconv1DGrad<double> grad{MatrixMap<double>(g.data(), filters, channels * k),
                                VectorMap<double>(g.data() + filters * channels * k, filters)};
      const Mat gin = deconv1d_backward(deconv_view(theta, filters, channels, k), x, probe, grad);
      const Vec fd_theta = oracle::central_difference(
          [&](const Vec& t) { return weighted_sum(deconv1d_forward(deconv_view(t, filters, channels, k), x), probe); },
          theta);
      const Vec fd_x = oracle::central_difference(
          [&](const Vec& xv) {
            return weighted_sum(deconv1d_forward(deconv_view(theta, filters, channels, k),
                                                 ConstMatrixMap<double>(xv.data(), channels, length)),
                                probe);
          },
          flatten(x));
      CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
      CHECK(oracle::max_relative_error(flatten(gin), fd_x) < kFdTolerance);
    }
  }
}

TEST_CASE("channel merge") {
  Vec w(1);
  w << 1.0;
  const ChannelMerge<double> unit{ConstVectorMap<double>(w.data(), 1), 0.0};
  const Mat out = channel_merge_forward(unit, Mat::Zero(1, 2));
  CHECK(out(0, 0) == 0.5);
  CHECK(out(0, 1) == 0.5);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec wr = oracle::random_vector(3, rng, 5.0);
    const Mat big = channel_merge_forward(ChannelMerge<double>{ConstVectorMap<double>(wr.data(), 3), 0.3},
                                          oracle::random_matrix(3, 20, rng, 4.0));
    CHECK(big.minCoeff() > 0.0);
    CHECK(big.maxCoeff() < 1.0);
  }
  CHECK_THROWS_AS(channel_merge_forward(unit, Mat::Zero(2, 3)), DimensionError);
}

TEST_CASE("channel merge gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const Vec theta = oracle::random_vector(4, rng);  // 3 weights + bias
    const Mat x = oracle::random_matrix(3, 6, rng);
    const Mat probe = oracle::random_matrix(1, 6, rng);
    auto view = [](const Vec& t) { return ChannelMerge<double>{ConstVectorMap<double>(t.data(), 3), t(3)}; };
    const Mat out = channel_merge_forward(view(theta), x);
    Vec g = Vec::Zero(4);
    ChannelMergeGrad<double> grad{VectorMap<double>(g.data(), 3), g(3)};
    const Mat gin = channel_merge_backward(view(theta), x, out, probe, grad);
    const Vec fd_theta = oracle::central_difference(
        [&](const Vec& t) { return weighted_sum(channel_merge_forward(view(t), x), probe); }, theta);
    const Vec fd_x = oracle::central_difference(
        [&](const Vec& xv) {
          return weighted_sum(channel_merge_forward(view(theta), ConstMatrixMap<double>(xv.data(), 3, 6)), probe);
        },
        flatten(x));
    CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
    CHECK(oracle::max_relative_error(flatten(gin), fd_x) < kFdTolerance);
  }
}

TEST_CASE("dense gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 200);
    const Vec theta = oracle::random_vector(3 * 4 + 3, rng);
    const Vec x = oracle::random_vector(4, rng), probe = oracle::random_vector(3, rng);
    auto view = [](const Vec& t) {
      return Dense<double>{ConstMatrixMap<double>(t.data(), 3, 4), ConstVectorMap<double>(t.data() + 12, 3)};
    };
    Vec g = Vec::Zero(theta.size());
    DenseGrad<double> grad{MatrixMap<double>(g.data(), 3, 4), VectorMap<double>(g.data() + 12, 3)};
    const Vec gin = dense_backward(view(theta), x, probe, grad);
    const Vec fd_theta =
        oracle::central_difference([&](const Vec& t) { return dense_forward(view(t), x).dot(probe); }, theta);
    const Vec fd_x =
        oracle::central_difference([&](const Vec& xv) { return dense_forward(view(theta), xv).dot(probe); }, x);
    CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
    CHECK(oracle::max_relative_error(gin, fd_x) < kFdTolerance);
  }
  Vec t = Vec::Zero(15);
  CHECK_THROWS_AS(dense_forward(Dense<double>{ConstMatrixMap<double>(t.data(), 3, 4),
                                              ConstVectorMap<double>(t.data() + 12, 3)},
                                Vec::Zero(5)),
                  DimensionError);
}

namespace {

struct CellShape {
  Index in, hidden, gates;
  Index size() const { return gates * in + gates * hidden + gates; }
};

RNNCell<double> rnn_view(const Vec& t, CellShape s) {
  return {ConstMatrixMap<double>(t.data(), s.hidden, s.in),
          ConstMatrixMap<double>(t.data() + s.hidden * s.in, s.hidden, s.hidden),
          ConstVectorMap<double>(t.data() + s.hidden * (s.in + s.hidden), s.hidden)};
}

LSTMCell<double> lstm_view(const Vec& t, CellShape s) {
  return {ConstMatrixMap<double>(t.data(), s.gates, s.in),
          ConstMatrixMap<double>(t.data() + s.gates * s.in, s.gates, s.hidden),
          ConstVectorMap<double>(t.data() + s.gates * (s.in + s.hidden), s.gates)};
}

template <typename Grad>
Grad cell_grad(Vec& g, CellShape s) {
  return {MatrixMap<double>(g.data(), s.gates, s.in), MatrixMap<double>(g.data() + s.gates * s.in, s.gates, s.hidden),
          VectorMap<double>(g.data() + s.gates * (s.in + s.hidden), s.gates)};
}

// Loss touching every hidden state so the full backward-through-time path is exercised.
double hidden_probe(const Mat& hidden, const Mat& probe) { return hidden.bottomRows(probe.rows()).cwiseProduct(probe).sum(); }

}  // namespace

TEST_CASE("rnn forward edge cases") {
  const CellShape s{2, 3, 3};
  const Vec zeros = Vec::Zero(s.size());
  const auto trace = rnn_forward(rnn_view(zeros, s), Mat::Zero(4, 2));
  CHECK(trace.hidden.isZero(0));

  std::mt19937_64 rng(21);
  const Vec theta = oracle::random_vector(s.size(), rng);
  const Mat x = oracle::random_matrix(1, 2, rng);
  const Vec h0 = oracle::random_vector(3, rng);
  const auto cell = rnn_view(theta, s);
  const Vec expected = (cell.input_weights * x.row(0).transpose() + cell.recurrent_weights * h0 + cell.bias)
                           .array()
                           .tanh()
                           .matrix();
  CHECK((rnn_forward(cell, x, h0).final_state() - expected).norm() == 0.0);

  CHECK_THROWS_AS(rnn_forward(cell, Mat::Zero(3, 5)), DimensionError);
}

TEST_CASE("rnn backward through time matches finite differences") {
  const CellShape s{2, 3, 3};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 300);
    const Vec theta = oracle::random_vector(s.size(), rng);
    const Mat x = oracle::random_matrix(3, 2, rng);
    const Mat probe = oracle::random_matrix(3, 3, rng);
    const auto trace = rnn_forward(rnn_view(theta, s), x);
    Vec g = Vec::Zero(theta.size());
    auto grad = cell_grad<RNNCellGrad<double>>(g, s);
    const auto gin = rnn_backward(rnn_view(theta, s), trace, probe, grad);
    const Vec fd_theta = oracle::central_difference(
        [&](const Vec& t) { return hidden_probe(rnn_forward(rnn_view(t, s), x).hidden, probe); }, theta);
    const Vec fd_x = oracle::central_difference(
        [&](const Vec& xv) {
          return hidden_probe(rnn_forward(rnn_view(theta, s), ConstMatrixMap<double>(xv.data(), 3, 2)).hidden, probe);
        },
        flatten(x));
    CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
    CHECK(oracle::max_relative_error(flatten(gin.inputs), fd_x) < kFdTolerance);
    CHECK(trace.hidden.cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("lstm forward edge cases") {
  const CellShape s{1, 1, 4};
  const Vec zeros = Vec::Zero(s.size());
  const auto trace = lstm_forward(lstm_view(zeros, s), Mat::Zero(3, 1));
  CHECK(trace.hidden.isZero(0));
  CHECK(trace.cell.isZero(0));
  CHECK((trace.gates.col(0).array() == 0.5).all());  // input gate
  CHECK((trace.gates.col(1).array() == 0.5).all());  // forget gate
  CHECK((trace.gates.col(2).array() == 0.0).all());  // candidate
  CHECK((trace.gates.col(3).array() == 0.5).all());  // output gate

  // One step with scalar weights, recomputed by hand.
  Vec theta(s.size());
  theta << 0.5, -0.3, 0.8, 1.1,    // input weights (i, f, g, o)
      0.2, 0.4, -0.6, 0.1,         // recurrent weights
      0.05, -0.1, 0.2, 0.0;        // biases
  Mat x(1, 1);
  x << 0.7;
  Vec h0(1);
  h0 << 0.3;
  const auto one = lstm_forward(lstm_view(theta, s), x, h0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(0.5 * 0.7 + 0.2 * 0.3 + 0.05);
  const double g = std::tanh(0.8 * 0.7 - 0.6 * 0.3 + 0.2);
  const double o = sig(1.1 * 0.7 + 0.1 * 0.3);
  const double c = i * g;  // c0 = 0
  CHECK(one.cell(1, 0) == doctest::Approx(c).epsilon(1e-15));
  CHECK(one.hidden(1, 0) == doctest::Approx(o * std::tanh(c)).epsilon(1e-15));
}

TEST_CASE("lstm backward through time matches finite differences") {
  const CellShape s{2, 3, 12};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 400);
    const Vec theta = oracle::random_vector(s.size(), rng);
    const Mat x = oracle::random_matrix(4, 2, rng);
    const Mat probe = oracle::random_matrix(4, 3, rng);
    const auto trace = lstm_forward(lstm_view(theta, s), x);
    Vec g = Vec::Zero(theta.size());
    auto grad = cell_grad<LSTMCellGrad<double>>(g, s);
    const auto gin = lstm_backward(lstm_view(theta, s), trace, probe, grad);
    const Vec fd_theta = oracle::central_difference(
        [&](const Vec& t) { return hidden_probe(lstm_forward(lstm_view(t, s), x).hidden, probe); }, theta);
    const Vec fd_x = oracle::central_difference(
        [&](const Vec& xv) {
          return hidden_probe(lstm_forward(lstm_view(theta, s), ConstMatrixMap<double>(xv.data(), 4, 2)).hidden,
                              probe);
        },
        flatten(x));
    CHECK(oracle::max_relative_error(g, fd_theta) < kFdTolerance);
    CHECK(oracle::max_relative_error(flatten(gin.inputs), fd_x) < kFdTolerance);
    CHECK(trace.gates.leftCols(6).minCoeff() > 0.0);
    CHECK(trace.gates.leftCols(6).maxCoeff() < 1.0);
  }
}
