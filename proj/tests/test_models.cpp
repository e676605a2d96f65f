#include <random>

#include "ctsf/model.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"
#include "model_fixtures.hpp"

using namespace ctsf;
using oracle::Vec;

namespace {

Vec gradient(const CrnnModel& model, const WindowSample& s, LossWeights w = {}) {
  Vec g = Vec::Zero(model.parameters().size());
  model.accumulate_gradient(s, g, w);
  return g;
}

Vec fd_gradient(const CrnnModel& model, const WindowSample& s) {
  return oracle::central_difference(
      [&](const Vec& theta) { return CrnnModel(model.config(), theta).loss(s).j; }, model.parameters());
}

}  // namespace

TEST_CASE("pooled feature vector length") {
  ModelConfig c;
  c.num_series = 3;
  c.filters = 3;
  c.input_length = 8;
  c.horizon = 2;
  const CrnnModel model(c);
  CHECK(c.feature_length() == 36);
  CHECK(model.forward(fixtures::random_sample(c, 1).input).features.shape() == Shape{36});
}

TEST_CASE("zero network forecasts the readout bias") {
  ModelConfig c = fixtures::small_config(ModelKind::crnn);
  CrnnModel model(c);
  model.parameters().setZero();
  const auto& bias = model.layout().slot(model.layout().find("readout.bias"));
  model.parameters()(bias.offset) = 0.3;
  model.parameters()(bias.offset + 1) = -1.2;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Forecast f = model.forecast(fixtures::random_sample(c, seed).input);
    CHECK(f.values(0) == 0.3);
    CHECK(f.values(1) == -1.2);
  }
}

TEST_CASE("forward is deterministic for a fixed seed") {
  for (auto kind : {ModelKind::crnn, ModelKind::aecrnn}) {
    ModelConfig c = fixtures::small_config(kind);
    c.seed = 42;
    const auto s = fixtures::random_sample(c, 3);
    const auto a = CrnnModel(c).forward(s.input);
    const auto b = CrnnModel(c).forward(s.input);
    CHECK(a.forecast.values == b.forecast.values);
    if (kind == ModelKind::aecrnn) CHECK(a.reconstruction->values == b.reconstruction->values);
  }
  ModelConfig c = fixtures::small_config(ModelKind::crnn);
  c.seed = 1;
  ModelConfig d = c;
  d.seed = 2;
  CHECK(CrnnModel(c).parameters() != CrnnModel(d).parameters());
}

TEST_CASE("crnn_loss worked examples") {
  Vec z(2), t(2);
  z << 1, 2;
  t << 1, 4;
  const LossBreakdown l = crnn_loss(Forecast{z}, t);
  CHECK(l.j1 == 2.0);
  CHECK(l.j2 == 0.0);
  CHECK(l.j == 2.0);
  CHECK(crnn_loss(Forecast{t}, t).j == 0.0);
  const double c = 3.5;
  CHECK(crnn_loss(Forecast{t + c * (z - t)}, t).j1 == doctest::Approx(c * c * 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(crnn_loss(Forecast{Vec::Zero(3)}, t), DimensionError);
}

TEST_CASE("aecrnn_loss worked examples") {
  Vec t(1);
  t << 0.4;
  const Tensor window({2, 2}, {0.0, 0.0, 0.0, 0.0});
  Reconstruction off{RowMatrix<double>::Constant(2, 2, 1.0)};
  const LossBreakdown l = aecrnn_loss(Forecast{t}, off, window, t);
  CHECK(l.j1 == 0.0);
  CHECK(l.j2 == 1.0);
  CHECK(l.j == 1.0);

  Reconstruction exact{window.matrix()};
  CHECK(aecrnn_loss(Forecast{t}, exact, window, t).j == 0.0);
  CHECK_THROWS_AS(aecrnn_loss(Forecast{t}, Reconstruction{RowMatrix<double>::Zero(2, 3)}, window, t), DimensionError);

  // Out-of-range inputs are clamped for the reconstruction term only.
  const Tensor wide({1, 2}, {1.5, -0.5});
  Reconstruction clamped{RowMatrix<double>(1, 2)};
  clamped.values << 1.0, 0.0;
  CHECK(aecrnn_loss(Forecast{t}, clamped, wide, t).j2 == 0.0);
}

TEST_CASE("aecrnn reconstruction contract") {
  ModelConfig c;
  c.kind = ModelKind::aecrnn;
  c.num_series = 2;
  c.input_length = 50;
  c.horizon = 25;
  c.filters = 2;
  CrnnModel model(c);
  const auto s = fixtures::random_sample(c, 9);
  const auto out = model.forward(s.input);
  REQUIRE(out.reconstruction);
  CHECK(out.reconstruction->values.rows() == 2);
  CHECK(out.reconstruction->values.cols() == 50);
  CHECK(out.reconstruction->values.minCoeff() > 0.0);
  CHECK(out.reconstruction->values.maxCoeff() < 1.0);

  for (const auto& slot : model.layout().slots())
    if (slot.name.rfind("dec.", 0) == 0) model.parameters().segment(slot.offset, slot.size).setZero();
  CHECK((model.forward(s.input).reconstruction->values.array() == 0.5).all());
  CHECK_FALSE(CrnnModel(fixtures::small_config(ModelKind::crnn)).forward(fixtures::random_sample(
      fixtures::small_config(ModelKind::crnn), 1).input).reconstruction);
}

TEST_CASE("multi-stage decoders restore the input length") {
  for (Index stages : {1, 2, 3}) {
    ModelConfig c;
    c.kind = ModelKind::aecrnn;
    c.num_series = 3;
    c.input_length = 24;
    c.stages = stages;
    c.horizon = 4;
    const auto out = CrnnModel(c).forward(fixtures::random_sample(c, 2).input);
    CHECK(out.reconstruction->values.cols() == 24);
    CHECK(out.features.size() == 3 * 3 * (24 >> stages));
  }
}

TEST_CASE("config validation") {
  ModelConfig c = fixtures::small_config(ModelKind::crnn);
  c.input_length = 51;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.input_length = 12;
  c.stages = 3;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = fixtures::small_config(ModelKind::crnn);
  c.filters = 7;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.off_grid = true;
  CHECK_NOTHROW(c.validate());
  c = fixtures::small_config(ModelKind::crnn);
  c.hidden = 9;
  CHECK_THROWS_AS(CrnnModel{c}, UsageError);

  const CrnnModel model(fixtures::small_config(ModelKind::crnn));
  CHECK_THROWS_AS(model.forecast(Tensor({3, 8})), DimensionError);
  CHECK_THROWS_AS(model.forecast(Tensor({2, 6})), DimensionError);
}

TEST_CASE("model gradients match finite differences") {
  struct Variant {
    ModelKind kind;
    CellKind cell;
    RnnLayout layout;
    ConvActivation act;
    Index stages, filter_size, input_length;
  };
  const std::vector<Variant> variants{
      {ModelKind::crnn, CellKind::rnn, RnnLayout::sequence, ConvActivation::linear, 1, 3, 8},
      {ModelKind::aecrnn, CellKind::rnn, RnnLayout::sequence, ConvActivation::linear, 1, 3, 8},
      {ModelKind::aecrnn, CellKind::lstm, RnnLayout::sequence, ConvActivation::tanh, 2, 2, 8},
      {ModelKind::aecrnn, CellKind::rnn, RnnLayout::single_step, ConvActivation::linear, 2, 5, 16},
      {ModelKind::crnn, CellKind::lstm, RnnLayout::single_step, ConvActivation::tanh, 3, 1, 16},
  };
  for (const auto& v : variants) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ModelConfig c = fixtures::small_config(v.kind);
      c.cell = v.cell;
      c.layout = v.layout;
      c.conv_activation = v.act;
      c.stages = v.stages;
      c.filter_size = v.filter_size;
      c.input_length = v.input_length;
      c.seed = seed;
      const CrnnModel model(c);
      const auto s = fixtures::random_sample(c, seed + 50);
      CAPTURE(to_string(v.kind));
      CAPTURE(v.stages);
      CHECK(oracle::max_relative_error(gradient(model, s), fd_gradient(model, s)) < 1e-5);
    }
  }
}

TEST_CASE("gradient sum rule over the two loss terms") {
  const ModelConfig c = fixtures::small_config(ModelKind::aecrnn);
  const CrnnModel model(c);
  const auto s = fixtures::random_sample(c, 5);
  const Vec both = gradient(model, s);
  const Vec split = gradient(model, s, {1.0, 0.0}) + gradient(model, s, {0.0, 1.0});
  CHECK((both - split).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero decoder contribution reduces aecrnn to crnn") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig ae = fixtures::small_config(ModelKind::aecrnn);
    ae.seed = seed;
    ModelConfig plain = ae;
    plain.kind = ModelKind::crnn;
    const CrnnModel aecrnn(ae);
    const CrnnModel shared(plain, aecrnn.parameters().head(CrnnModel(plain).parameters().size()));
    const auto s = fixtures::random_sample(ae, seed);
    const Vec g_ae = gradient(aecrnn, s, {1.0, 0.0});
    const Vec g_plain = gradient(shared, s);
    CHECK((g_ae.head(g_plain.size()) - g_plain).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(g_ae.tail(g_ae.size() - g_plain.size()).isZero(0));
  }
}

TEST_CASE("critical point gives a zero readout-bias gradient") {
  const ModelConfig c = fixtures::small_config(ModelKind::aecrnn);
  CrnnModel model(c);
  model.parameters().setZero();
  Vec target(2);
  target << 0.25, 0.75;
  const auto& bias = model.layout().slot(model.layout().find("readout.bias"));
  model.parameters().segment(bias.offset, 2) = target;
  const WindowSample s{0, Tensor({2, 8}, Vec::Constant(16, 0.5)), target};
  const LossBreakdown l = model.loss(s);
  CHECK(l.j == 0.0);
  const Vec g = gradient(model, s);
  CHECK(g.segment(bias.offset, 2).isZero(0));
}

TEST_CASE("feature length matches the shape formula on the full default grid") {
  Index cells = 0;
  for (Index stages : kStageGrid)
    for (Index filters : kFilterGrid)
      for (Index k : kFilterSizeGrid)
        for (Index h : kHiddenGrid) {
          ModelConfig c;
          c.num_series = 2;
          c.input_length = 16;
          c.horizon = 3;
          c.stages = stages;
          c.filters = filters;
          c.filter_size = k;
          c.hidden = h;
          const auto out = CrnnModel(c).forward(fixtures::random_sample(c, static_cast<std::uint64_t>(cells)).input);
          CHECK(out.features.size() == c.num_series * filters * (c.input_length >> stages));
          ++cells;
        }
  CHECK(cells == 420);
}

TEST_CASE("header fields round-trip the configuration") {
  ModelConfig c = fixtures::small_config(ModelKind::aecrnn);
  c.cell = CellKind::lstm;
  c.layout = RnnLayout::single_step;
  c.conv_activation = ConvActivation::tanh;
  c.seed = 77;
  const ModelConfig back = CrnnModel::config_from_header(CrnnModel(c).header_fields());
  CHECK(CrnnModel(back).header_fields() == CrnnModel(c).header_fields());
}
