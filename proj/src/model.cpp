#include "ctsf/model.hpp"

#include <random>
#include <variant>

namespace ctsf {

namespace {

template <typename Enum>
Enum parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, Enum>> options,
                const char* what) {
  for (const auto& [name, value] : options)
    if (text == name) return value;
  throw UsageError(std::string("unknown ") + what + " '" + text + "'");
}

bool in_grid(const std::vector<Index>& grid, Index value) {
  return std::find(grid.begin(), grid.end(), value) != grid.end();
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::crnn ? "crnn" : "aecrnn"; }
std::string to_string(CellKind kind) { return kind == CellKind::rnn ? "rnn" : "lstm"; }
std::string to_string(RnnLayout layout) { return layout == RnnLayout::sequence ? "sequence" : "single-step"; }
std::string to_string(ConvActivation a) { return a == ConvActivation::linear ? "linear" : "tanh"; }

ModelKind parse_model_kind(const std::string& text) {
  return parse_enum<ModelKind>(text, {{"crnn", ModelKind::crnn}, {"aecrnn", ModelKind::aecrnn}}, "model");
}
CellKind parse_cell_kind(const std::string& text) {
  return parse_enum<CellKind>(text, {{"rnn", CellKind::rnn}, {"lstm", CellKind::lstm}}, "cell");
}
RnnLayout parse_rnn_layout(const std::string& text) {
  return parse_enum<RnnLayout>(text, {{"sequence", RnnLayout::sequence}, {"single-step", RnnLayout::single_step}},
                               "rnn layout");
}
ConvActivation parse_conv_activation(const std::string& text) {
  return parse_enum<ConvActivation>(text, {{"linear", ConvActivation::linear}, {"tanh", ConvActivation::tanh}},
                                    "conv activation");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError(msg); };
  if (num_series < 1) fail("num_series must be >= 1");
  if (input_length < 2) fail("input length l must be >= 2");
  if (horizon < 1) fail("horizon p must be >= 1");
  if (stages < 1) fail("stages must be >= 1");
  if (filters < 1 || filter_size < 1 || hidden < 1) fail("filters, filter size and hidden size must be positive");
  if (stages > 30 || input_length % (Index{1} << stages) != 0)
    fail("input length l=" + std::to_string(input_length) + " must be divisible by 2^stages=" +
         std::to_string(Index{1} << std::min<Index>(stages, 30)));
  if (!off_grid) {
    if (!in_grid(kStageGrid, stages)) fail("stages must be one of 1, 2, 3");
    if (!in_grid(kFilterGrid, filters)) fail("filters must be one of 2, 3, 4, 5, 8, 10, 16");
    if (!in_grid(kFilterSizeGrid, filter_size)) fail("filter size must be one of 1, 2, 3, 5, 10");
    if (!in_grid(kHiddenGrid, hidden)) fail("hidden size must be one of 3, 4, 5, 6");
  }
}

LossBreakdown crnn_loss(const Forecast& forecast, const Eigen::Ref<const Vector<double>>& target) {
  if (forecast.values.size() != target.size() || target.size() == 0)
    throw DimensionError("crnn_loss: forecast length " + std::to_string(forecast.values.size()) +
                         " does not match target length " + std::to_string(target.size()));
  LossBreakdown out;
  out.j1 = (forecast.values - target).squaredNorm() / static_cast<double>(target.size());
  out.j = out.j1 + out.j2;
  return out;
}

LossBreakdown aecrnn_loss(const Forecast& forecast, const Reconstruction& reconstruction, const Tensor& window,
                          const Eigen::Ref<const Vector<double>>& target) {
  LossBreakdown out = crnn_loss(forecast, target);
  const auto x = window.matrix();
  if (reconstruction.values.rows() != x.rows() || reconstruction.values.cols() != x.cols())
    throw DimensionError("aecrnn_loss: reconstruction shape does not match the window");
  out.j2 = (reconstruction.values - x.unaryExpr(&clamp01)).squaredNorm() / static_cast<double>(x.size());
  out.j = out.j1 + out.j2;
  return out;
}

struct CrnnModel::Trace {
  struct Stage {
    RowMatrix<double> input;
    RowMatrix<double> activated;
    PoolRecord record;
  };
  std::vector<std::vector<Stage>> encoder;
  std::vector<RowMatrix<double>> pooled;
  std::variant<RNNTrace<double>, LSTMTrace<double>> recurrent;
  Vector<double> final_state;
  Forecast forecast;
  std::vector<std::vector<RowMatrix<double>>> decoder_inputs;  // [series][step]
  std::vector<RowMatrix<double>> merge_inputs;
  std::optional<Reconstruction> reconstruction;
};

CrnnModel::CrnnModel(ModelConfig config) : config_(config) {
  config_.validate();
  build_layout();
  initialize();
}

CrnnModel::CrnnModel(ModelConfig config, Vector<double> parameters) : config_(config) {
  config_.validate();
  build_layout();
  if (parameters.size() != layout_.total_size())
    throw DimensionError("parameter vector of length " + std::to_string(parameters.size()) + " does not match model (" +
                         std::to_string(layout_.total_size()) + ")");
  params_ = std::move(parameters);
}

void CrnnModel::build_layout() {
  const Index a = config_.filters, k = config_.filter_size, h = config_.hidden;
  series_.assign(static_cast<std::size_t>(config_.num_series), {});
  for (Index s = 0; s < config_.num_series; ++s) {
    auto& slots = series_[static_cast<std::size_t>(s)];
    for (Index st = 0; st < config_.stages; ++st) {
      const std::string prefix = "enc.k" + std::to_string(s) + ".s" + std::to_string(st) + ".conv.";
      const Index channels = st == 0 ? 1 : a;
      slots.conv.push_back({layout_.add(prefix + "weight", {a, channels, k}), layout_.add(prefix + "bias", {a})});
    }
  }
  const Index gates = config_.cell == CellKind::lstm ? 4 * h : h;
  const std::string cell = to_string(config_.cell) + ".";
  rnn_input_weight_ = layout_.add(cell + "input_weight", {gates, config_.rnn_input_size()});
  rnn_recurrent_weight_ = layout_.add(cell + "recurrent_weight", {gates, h});
  rnn_bias_ = layout_.add(cell + "bias", {gates});
  readout_weight_ = layout_.add("readout.weight", {config_.horizon, h});
  readout_bias_ = layout_.add("readout.bias", {config_.horizon});

  if (config_.kind == ModelKind::aecrnn) {
    for (Index s = 0; s < config_.num_series; ++s) {
      auto& slots = series_[static_cast<std::size_t>(s)];
      for (Index step = 0; step < config_.stages; ++step) {
        const std::string prefix = "dec.k" + std::to_string(s) + ".s" + std::to_string(config_.stages - 1 - step) +
                                   ".deconv.";
        slots.deconv.push_back({layout_.add(prefix + "weight", {a, a, k}), layout_.add(prefix + "bias", {a})});
      }
      const std::string prefix = "dec.k" + std::to_string(s) + ".merge.";
      slots.merge_weight = layout_.add(prefix + "weight", {a});
      slots.merge_bias = layout_.add(prefix + "bias", {1});
    }
  }
}

void CrnnModel::initialize() {
  params_ = Vector<double>::Zero(layout_.total_size());
  std::mt19937_64 rng(config_.seed);
  const Index a = config_.filters, k = config_.filter_size, h = config_.hidden;
  for (const auto& slots : series_) {
    for (std::size_t st = 0; st < slots.conv.size(); ++st) {
      auto w = matrix_view(params_, layout_.slot(slots.conv[st].weight));
      glorot_uniform(w, w.cols(), a * k, rng);
    }
  }
  auto wx = matrix_view(params_, layout_.slot(rnn_input_weight_));
  glorot_uniform(wx, wx.cols(), h, rng);
  auto wh = matrix_view(params_, layout_.slot(rnn_recurrent_weight_));
  glorot_uniform(wh, h, h, rng);
  auto ro = matrix_view(params_, layout_.slot(readout_weight_));
  glorot_uniform(ro, h, config_.horizon, rng);
  for (const auto& slots : series_) {
    for (const auto& d : slots.deconv) {
      auto w = matrix_view(params_, layout_.slot(d.weight));
      glorot_uniform(w, a * k, a * k, rng);
    }
    if (slots.merge_weight >= 0) {
      auto m = matrix_view(params_, layout_.slot(slots.merge_weight));
      glorot_uniform(m, a, 1, rng);
    }
  }
}

Conv1D<double> CrnnModel::conv_layer(Index series, Index stage) const {
  const auto& st = series_[static_cast<std::size_t>(series)].conv[static_cast<std::size_t>(stage)];
  const auto& ws = layout_.slot(st.weight);
  return {config_.filters, ws.shape[1], config_.filter_size, matrix_view(params_, ws),
          vector_view(params_, layout_.slot(st.bias))};
}

Deconv1D<double> CrnnModel::deconv_layer(Index series, Index step) const {
  const auto& st = series_[static_cast<std::size_t>(series)].deconv[static_cast<std::size_t>(step)];
  return {config_.filters, config_.filters, config_.filter_size, matrix_view(params_, layout_.slot(st.weight)),
          vector_view(params_, layout_.slot(st.bias))};
}

ChannelMerge<double> CrnnModel::merge_layer(Index series) const {
  const auto& slots = series_[static_cast<std::size_t>(series)];
  return {vector_view(params_, layout_.slot(slots.merge_weight)), params_(layout_.slot(slots.merge_bias).offset)};
}

Dense<double> CrnnModel::readout() const {
  return {matrix_view(params_, layout_.slot(readout_weight_)), vector_view(params_, layout_.slot(readout_bias_))};
}

void CrnnModel::check_window(const Tensor& window) const {
  if (window.rank() != 2 || window.extent(0) != config_.num_series || window.extent(1) != config_.input_length)
    throw DimensionError("window shape " + shape_string(window.shape()) + " does not match model (" +
                         std::to_string(config_.num_series) + "x" + std::to_string(config_.input_length) + ")");
}

CrnnModel::Trace CrnnModel::run(const Tensor& window) const {
  check_window(window);
  const Index a = config_.filters, pooled_len = config_.pooled_length();
  const auto x = window.matrix();
  Trace tr;
  tr.encoder.resize(static_cast<std::size_t>(config_.num_series));
  for (Index s = 0; s < config_.num_series; ++s) {
    RowMatrix<double> current = x.row(s);
    for (Index st = 0; st < config_.stages; ++st) {
      Trace::Stage stage;
      stage.input = std::move(current);
      stage.activated = conv1d_forward(conv_layer(s, st), stage.input);
      if (config_.conv_activation == ConvActivation::tanh) stage.activated = stage.activated.array().tanh().matrix();
      auto pooled = maxpool_forward<double>(stage.activated);
      stage.record = std::move(pooled.record);
      current = std::move(pooled.output);
      tr.encoder[static_cast<std::size_t>(s)].push_back(std::move(stage));
    }
    tr.pooled.push_back(std::move(current));
  }

  RowMatrix<double> steps(config_.rnn_steps(), config_.rnn_input_size());
  for (Index s = 0; s < config_.num_series; ++s) {
    const auto& p = tr.pooled[static_cast<std::size_t>(s)];
    for (Index c = 0; c < a; ++c)
      for (Index t = 0; t < pooled_len; ++t) {
        if (config_.layout == RnnLayout::sequence)
          steps(t, s * a + c) = p(c, t);
        else
          steps(0, (s * a + c) * pooled_len + t) = p(c, t);
      }
  }

  const auto& wx = layout_.slot(rnn_input_weight_);
  const auto& wh = layout_.slot(rnn_recurrent_weight_);
  const auto& b = layout_.slot(rnn_bias_);
  if (config_.cell == CellKind::rnn) {
    RNNCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    auto trace = rnn_forward(cell, steps);
    tr.final_state = trace.final_state();
    tr.recurrent = std::move(trace);
  } else {
    LSTMCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    auto trace = lstm_forward(cell, steps);
    tr.final_state = trace.final_state();
    tr.recurrent = std::move(trace);
  }
  tr.forecast.values = dense_forward(readout(), tr.final_state);
  require_finite(tr.forecast.values, "crnn forward");

  if (config_.kind == ModelKind::aecrnn) {
    Reconstruction rec{RowMatrix<double>(config_.num_series, config_.input_length)};
    tr.decoder_inputs.resize(static_cast<std::size_t>(config_.num_series));
    for (Index s = 0; s < config_.num_series; ++s) {
      RowMatrix<double> current = tr.pooled[static_cast<std::size_t>(s)];
      for (Index step = 0; step < config_.stages; ++step) {
        RowMatrix<double> next = deconv1d_forward(deconv_layer(s, step), current);
        tr.decoder_inputs[static_cast<std::size_t>(s)].push_back(std::move(current));
        current = std::move(next);
      }
      rec.values.row(s) = channel_merge_forward(merge_layer(s), current);
      tr.merge_inputs.push_back(std::move(current));
    }
    require_finite(rec.values, "aecrnn decoder");
    tr.reconstruction = std::move(rec);
  }
  return tr;
}

ForwardResult CrnnModel::forward(const Tensor& window) const {
  Trace tr = run(window);
  std::vector<Tensor> cubes;
  cubes.reserve(tr.pooled.size());
  for (const auto& p : tr.pooled) {
    Vector<double> flat(p.size());
    MatrixMap<double>(flat.data(), p.rows(), p.cols()) = p;
    cubes.emplace_back(Shape{p.rows(), 1, p.cols()}, std::move(flat));
  }
  return {std::move(tr.forecast), std::move(tr.reconstruction), concat_flatten(cubes)};
}

LossBreakdown CrnnModel::loss(const WindowSample& sample) const {
  Trace tr = run(sample.input);
  if (tr.reconstruction) return aecrnn_loss(tr.forecast, *tr.reconstruction, sample.input, sample.target);
  return crnn_loss(tr.forecast, sample.target);
}

LossBreakdown CrnnModel::accumulate_gradient(const WindowSample& sample, Eigen::Ref<Vector<double>> grad,
                                             const LossWeights& weights) const {
  if (grad.size() != params_.size()) throw DimensionError("gradient buffer does not match parameter count");
  Trace tr = run(sample.input);
  const LossBreakdown loss = tr.reconstruction
                                 ? aecrnn_loss(tr.forecast, *tr.reconstruction, sample.input, sample.target)
                                 : crnn_loss(tr.forecast, sample.target);
  if (!std::isfinite(loss.j)) throw NumericError("non-finite loss");

  auto mview = [&](Index slot) {
    const auto& s = layout_.slot(slot);
    return MatrixMap<double>(grad.data() + s.offset, s.rows(), s.cols());
  };
  auto vview = [&](Index slot) {
    const auto& s = layout_.slot(slot);
    return VectorMap<double>(grad.data() + s.offset, s.size);
  };

  const Index a = config_.filters, pooled_len = config_.pooled_length(), h = config_.hidden;
  const double p = static_cast<double>(config_.horizon);

  // Forecast path.
  const Vector<double> grad_forecast = (2.0 * weights.forecast / p) * (tr.forecast.values - sample.target);
  DenseGrad<double> dense_grad{mview(readout_weight_), vview(readout_bias_)};
  const Vector<double> grad_final = dense_backward(readout(), tr.final_state, grad_forecast, dense_grad);

  RowMatrix<double> grad_hidden = RowMatrix<double>::Zero(config_.rnn_steps(), h);
  grad_hidden.row(grad_hidden.rows() - 1) = grad_final.transpose();
  RowMatrix<double> grad_steps;
  const auto& wx = layout_.slot(rnn_input_weight_);
  const auto& wh = layout_.slot(rnn_recurrent_weight_);
  const auto& b = layout_.slot(rnn_bias_);
  if (config_.cell == CellKind::rnn) {
    RNNCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    RNNCellGrad<double> g{mview(rnn_input_weight_), mview(rnn_recurrent_weight_), vview(rnn_bias_)};
    grad_steps = rnn_backward(cell, std::get<RNNTrace<double>>(tr.recurrent), grad_hidden, g).inputs;
  } else {
    LSTMCell<double> cell{matrix_view(params_, wx), matrix_view(params_, wh), vector_view(params_, b)};
    LSTMCellGrad<double> g{mview(rnn_input_weight_), mview(rnn_recurrent_weight_), vview(rnn_bias_)};
    grad_steps = lstm_backward(cell, std::get<LSTMTrace<double>>(tr.recurrent), grad_hidden, g).inputs;
  }

  std::vector<RowMatrix<double>> grad_pooled(static_cast<std::size_t>(config_.num_series));
  for (Index s = 0; s < config_.num_series; ++s) {
    auto& gp = grad_pooled[static_cast<std::size_t>(s)];
    gp.resize(a, pooled_len);
    for (Index c = 0; c < a; ++c)
      for (Index t = 0; t < pooled_len; ++t)
        gp(c, t) = config_.layout == RnnLayout::sequence ? grad_steps(t, s * a + c)
                                                         : grad_steps(0, (s * a + c) * pooled_len + t);
  }

  // Reconstruction path.
  if (tr.reconstruction) {
    const auto x = sample.input.matrix();
    const double scale = 2.0 * weights.reconstruction / static_cast<double>(x.size());
    for (Index s = 0; s < config_.num_series; ++s) {
      const auto& slots = series_[static_cast<std::size_t>(s)];
      const RowMatrix<double> rec = tr.reconstruction->values.row(s);
      const RowMatrix<double> grad_rec = scale * (rec - x.row(s).unaryExpr(&clamp01));
      double& merge_bias_grad = grad(layout_.slot(slots.merge_bias).offset);
      ChannelMergeGrad<double> mg{vview(slots.merge_weight), merge_bias_grad};
      RowMatrix<double> g = channel_merge_backward(merge_layer(s), tr.merge_inputs[static_cast<std::size_t>(s)], rec,
                                                   grad_rec, mg);
      for (Index step = config_.stages - 1; step >= 0; --step) {
        Deconv1DGrad<double> dg{mview(slots.deconv[static_cast<std::size_t>(step)].weight),
                                vview(slots.deconv[static_cast<std::size_t>(step)].bias)};
        g = deconv1d_backward(deconv_layer(s, step),
                              tr.decoder_inputs[static_cast<std::size_t>(s)][static_cast<std::size_t>(step)], g, dg);
      }
      grad_pooled[static_cast<std::size_t>(s)] += g;
    }
  }

  // Shared encoder.
  for (Index s = 0; s < config_.num_series; ++s) {
    const auto& slots = series_[static_cast<std::size_t>(s)];
    RowMatrix<double> g = std::move(grad_pooled[static_cast<std::size_t>(s)]);
    for (Index st = config_.stages - 1; st >= 0; --st) {
      const auto& stage = tr.encoder[static_cast<std::size_t>(s)][static_cast<std::size_t>(st)];
      g = maxpool_backward<double>(stage.record, g);
      if (config_.conv_activation == ConvActivation::tanh)
        g.array() *= 1.0 - stage.activated.array().square();
      Conv1DGrad<double> cg{mview(slots.conv[static_cast<std::size_t>(st)].weight),
                            vview(slots.conv[static_cast<std::size_t>(st)].bias)};
      g = conv1d_backward(conv_layer(s, st), stage.input, g, cg);
    }
  }

  require_finite(grad, "model backward");
  return loss;
}

HeaderFields CrnnModel::header_fields() const {
  const auto& c = config_;
  return {{"model", to_string(c.kind)},
          {"num_series", std::to_string(c.num_series)},
          {"input_length", std::to_string(c.input_length)},
          {"horizon", std::to_string(c.horizon)},
          {"stages", std::to_string(c.stages)},
          {"filters", std::to_string(c.filters)},
          {"filter_size", std::to_string(c.filter_size)},
          {"hidden", std::to_string(c.hidden)},
          {"cell", to_string(c.cell)},
          {"layout", to_string(c.layout)},
          {"conv_activation", to_string(c.conv_activation)},
          {"seed", std::to_string(c.seed)},
          {"off_grid", c.off_grid ? "1" : "0"}};
}

ModelConfig CrnnModel::config_from_header(const HeaderFields& fields) {
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
  ModelConfig c;
  c.kind = parse_model_kind(get("model"));
  c.num_series = num("num_series");
  c.input_length = num("input_length");
  c.horizon = num("horizon");
  c.stages = num("stages");
  c.filters = num("filters");
  c.filter_size = num("filter_size");
  c.hidden = num("hidden");
  c.cell = parse_cell_kind(get("cell"));
  c.layout = parse_rnn_layout(get("layout"));
  c.conv_activation = parse_conv_activation(get("conv_activation"));
  c.seed = std::stoull(get("seed"));
  c.off_grid = get("off_grid") == "1";
  return c;
}

}  // namespace ctsf
