#include "ctsf/baselines.hpp"

#include <random>

namespace ctsf {

namespace {

ConstVectorMap<double> target_row(const Tensor& window) {
  if (window.rank() != 2 || window.extent(1) < 1) throw DimensionError("baseline: window must be a non-empty matrix");
  return {window.flat().data(), window.extent(1)};
}

void check_horizon(Index horizon) {
  if (horizon < 1) throw UsageError("horizon must be >= 1");
}

}  // namespace

Forecast yesterday_forecast(const Tensor& window, Index horizon) {
  check_horizon(horizon);
  const auto row = target_row(window);
  return {Vector<double>::Constant(horizon, row(row.size() - 1))};
}

Forecast ewma_forecast(const Tensor& window, double alpha, Index horizon) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("ewma smoothing factor must lie in (0, 1]");
  check_horizon(horizon);
  const auto row = target_row(window);
  double s = row(0);
  for (Index t = 1; t < row.size(); ++t) s = alpha * row(t) + (1.0 - alpha) * s;
  return {Vector<double>::Constant(horizon, s)};
}

EwmaForecaster::EwmaForecaster(double alpha, Index horizon) : alpha_(alpha), horizon_(horizon) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("ewma smoothing factor must lie in (0, 1]");
}

BaselineInputs parse_baseline_inputs(const std::string& text) {
  if (text == "target") return BaselineInputs::target;
  if (text == "all") return BaselineInputs::all;
  throw UsageError("unknown baseline inputs '" + text + "' (expected target or all)");
}

std::string to_string(BaselineInputs inputs) { return inputs == BaselineInputs::target ? "target" : "all"; }

void RecurrentBaselineConfig::validate() const {
  if (num_series < 1 || input_length < 1 || horizon < 1 || hidden < 1)
    throw UsageError("recurrent baseline: series, l, p and hidden size must be positive");
}

RecurrentBaseline::RecurrentBaseline(RecurrentBaselineConfig config) : config_(config) {
  config_.validate();
  build_layout();
  params_ = Vector<double>::Zero(layout_.total_size());
  std::mt19937_64 rng(config_.seed);
  const Index h = config_.hidden;
  auto wx = matrix_view(params_, layout_.slot(input_weight_));
  glorot_uniform(wx, config_.features(), h, rng);
  auto wh = matrix_view(params_, layout_.slot(recurrent_weight_));
  glorot_uniform(wh, h, h, rng);
  auto ro = matrix_view(params_, layout_.slot(readout_weight_));
  glorot_uniform(ro, h, config_.horizon, rng);
}

RecurrentBaseline::RecurrentBaseline(RecurrentBaselineConfig config, Vector<double> parameters) : config_(config) {
  config_.validate();
  build_layout();
  if (parameters.size() != layout_.total_size()) throw DimensionError("parameter vector does not match baseline");
  params_ = std::move(parameters);
}

void RecurrentBaseline::build_layout() {
  const Index h = config_.hidden, gates = config_.cell == CellKind::lstm ? 4 * h : h;
  const std::string cell = to_string(config_.cell) + ".";
  input_weight_ = layout_.add(cell + "input_weight", {gates, config_.features()});
  recurrent_weight_ = layout_.add(cell + "recurrent_weight", {gates, h});
  bias_ = layout_.add(cell + "bias", {gates});
  readout_weight_ = layout_.add("readout.weight", {config_.horizon, h});
  readout_bias_ = layout_.add("readout.bias", {config_.horizon});
}

RowMatrix<double> RecurrentBaseline::steps(const Tensor& window) const {
  if (window.rank() != 2 || window.extent(0) != config_.num_series || window.extent(1) != config_.input_length)
    throw DimensionError("window shape " + shape_string(window.shape()) + " does not match baseline (" +
                         std::to_string(config_.num_series) + "x" + std::to_string(config_.input_length) + ")");
  return window.matrix().topRows(config_.features()).transpose();
}

Forecast RecurrentBaseline::forecast(const Tensor& window) const {
  const RowMatrix<double> x = steps(window);
  const auto& wx = layout_.slot(input_weight_);
  const auto& wh = layout_.slot(recurrent_weight_);
  const auto& b = layout_.slot(bias_);
  Vector<double> state;
  if (config_.cell == CellKind::rnn)
    state = rnn_forward(RNNCell<double>{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)}, x)
                .final_state();
  else
    state =
        lstm_forward(LSTMCell<double>{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)}, x)
            .final_state();
  Forecast f{dense_forward(Dense<double>{matrix_view(params_, layout_.slot(readout_weight_)),
                                         vector_view(params_, layout_.slot(readout_bias_))},
                           state)};
  require_finite(f.values, "recurrent baseline forward");
  return f;
}

LossBreakdown RecurrentBaseline::loss(const WindowSample& sample) const {
  return crnn_loss(forecast(sample.input), sample.target);
}

LossBreakdown RecurrentBaseline::accumulate_gradient(const WindowSample& sample, Eigen::Ref<Vector<double>> grad,
                                                     const LossWeights& weights) const {
  if (grad.size() != params_.size()) throw DimensionError("gradient buffer does not match parameter count");
  auto mview = [&](Index slot) {
    const auto& s = layout_.slot(slot);
    return MatrixMap<double>(grad.data() + s.offset, s.rows(), s.cols());
  };
  auto vview = [&](Index slot) {
    const auto& s = layout_.slot(slot);
    return VectorMap<double>(grad.data() + s.offset, s.size);
  };
  const RowMatrix<double> x = steps(sample.input);
  const auto& wx = layout_.slot(input_weight_);
  const auto& wh = layout_.slot(recurrent_weight_);
  const auto& b = layout_.slot(bias_);
  const Dense<double> readout{matrix_view(params_, layout_.slot(readout_weight_)),
                              vector_view(params_, layout_.slot(readout_bias_))};
  DenseGrad<double> readout_grad{mview(readout_weight_), vview(readout_bias_)};
  RowMatrix<double> grad_hidden = RowMatrix<double>::Zero(x.rows(), config_.hidden);
  LossBreakdown loss;

  auto head = [&](const Vector<double>& state) {
    Forecast f{dense_forward(readout, state)};
    loss = crnn_loss(f, sample.target);
    if (!std::isfinite(loss.j)) throw NumericError("non-finite loss");
    const Vector<double> gz =
        (2.0 * weights.forecast / static_cast<double>(config_.horizon)) * (f.values - sample.target);
    grad_hidden.row(x.rows() - 1) = dense_backward(readout, state, gz, readout_grad).transpose();
  };

  if (config_.cell == CellKind::rnn) {
    const RNNCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    const auto trace = rnn_forward(cell, x);
    head(trace.final_state());
    RNNCellGrad<double> g{mview(input_weight_), mview(recurrent_weight_), vview(bias_)};
    rnn_backward(cell, trace, grad_hidden, g);
  } else {
    const LSTMCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    const auto trace = lstm_forward(cell, x);
    head(trace.final_state());
    LSTMCellGrad<double> g{mview(input_weight_), mview(recurrent_weight_), vview(bias_)};
    lstm_backward(cell, trace, grad_hidden, g);
  }
  require_finite(grad, "recurrent baseline backward");
  return loss;
}

HeaderFields RecurrentBaseline::header_fields() const {
  const auto& c = config_;
  return {{"model", to_string(c.cell) + "-baseline"},
          {"inputs", to_string(c.inputs)},
          {"num_series", std::to_string(c.num_series)},
          {"input_length", std::to_string(c.input_length)},
          {"horizon", std::to_string(c.horizon)},
          {"hidden", std::to_string(c.hidden)},
          {"seed", std::to_string(c.seed)}};
}

RecurrentBaselineConfig RecurrentBaseline::config_from_header(const HeaderFields& fields) {
  auto get = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : fields)
      if (k == key) return v;
    throw DataError("checkpoint header is missing '" + key + "'");
  };
  auto num = [&](const std::string& key) {
    try {
      return static_cast<Index>(std::stoll(get(key)));
    } catch (const std::logic_error&) {
      throw DataError("checkpoint header field '" + key + "' is not an integer");
    }
  };
  RecurrentBaselineConfig c;
  const std::string& model = get("model");
  if (model == "rnn-baseline")
    c.cell = CellKind::rnn;
  else if (model == "lstm-baseline")
    c.cell = CellKind::lstm;
  else
    throw DataError("not a recurrent baseline checkpoint: " + model);
  c.inputs = parse_baseline_inputs(get("inputs"));
  c.num_series = num("num_series");
  c.input_length = num("input_length");
  c.horizon = num("horizon");
  c.hidden = num("hidden");
  c.seed = std::stoull(get("seed"));
  return c;
}

TrainedBaseline train_recurrent_baseline(const std::vector<WindowSample>& samples,
                                         const std::vector<WindowSample>& validation,
                                         const RecurrentBaselineConfig& config, const TrainConfig& train_config) {
  if (samples.empty()) throw UsageError("recurrent baseline: no training samples");
  TrainedBaseline out{std::make_unique<RecurrentBaseline>(config), {}};
  out.report = train(*out.model, samples, validation, train_config);
  return out;
}

}  // namespace ctsf
