#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "ctsf/model.hpp"
#include "ctsf/training.hpp"

namespace ctsf {

/// Repeats the last observed target value (row 0 of the window).
Forecast yesterday_forecast(const Tensor& window, Index horizon);

/// Exponentially weighted moving average of the target row,
/// s_1 = x_1, s_t = alpha x_t + (1 - alpha) s_{t-1}, repeated over the horizon.
Forecast ewma_forecast(const Tensor& window, double alpha, Index horizon);

inline constexpr double kDefaultEwmaAlpha = 0.3;

class YesterdayForecaster final : public Forecaster {
 public:
  explicit YesterdayForecaster(Index horizon) : horizon_(horizon) {}
  Forecast forecast(const Tensor& window) const override { return yesterday_forecast(window, horizon_); }
  std::string method_name() const override { return "yesterday"; }

 private:
  Index horizon_;
};

class EwmaForecaster final : public Forecaster {
 public:
  EwmaForecaster(double alpha, Index horizon);
  Forecast forecast(const Tensor& window) const override { return ewma_forecast(window, alpha_, horizon_); }
  std::string method_name() const override { return "ewma"; }

 private:
  double alpha_;
  Index horizon_;
};

/// Which window rows a recurrent baseline reads.
enum class BaselineInputs { target, all };

BaselineInputs parse_baseline_inputs(const std::string& text);
std::string to_string(BaselineInputs inputs);

struct RecurrentBaselineConfig {
  CellKind cell = CellKind::rnn;
  BaselineInputs inputs = BaselineInputs::target;
  Index num_series = 1;  // rows in the windows it will be given
  Index input_length = 8;
  Index horizon = 1;
  Index hidden = 4;
  std::uint64_t seed = 0;

  void validate() const;
  Index features() const { return inputs == BaselineInputs::all ? num_series : 1; }
};

/// Plain RNN or LSTM over the raw window, one time step per column, with a
/// dense readout of the final state.
class RecurrentBaseline final : public TrainableModel {
 public:
  explicit RecurrentBaseline(RecurrentBaselineConfig config);
  RecurrentBaseline(RecurrentBaselineConfig config, Vector<double> parameters);

  const RecurrentBaselineConfig& config() const { return config_; }

  Forecast forecast(const Tensor& window) const override;
  std::string method_name() const override { return to_string(config_.cell); }

  const ParameterLayout& layout() const override { return layout_; }
  const Vector<double>& parameters() const override { return params_; }
  Vector<double>& parameters() override { return params_; }

  LossBreakdown loss(const WindowSample& sample) const override;
  LossBreakdown accumulate_gradient(const WindowSample& sample, Eigen::Ref<Vector<double>> grad,
                                    const LossWeights& weights = {}) const override;
  std::unique_ptr<TrainableModel> clone() const override { return std::make_unique<RecurrentBaseline>(*this); }
  HeaderFields header_fields() const override;

  static RecurrentBaselineConfig config_from_header(const HeaderFields& fields);

 private:
  void build_layout();
  RowMatrix<double> steps(const Tensor& window) const;

  RecurrentBaselineConfig config_;
  ParameterLayout layout_;
  Index input_weight_ = -1, recurrent_weight_ = -1, bias_ = -1, readout_weight_ = -1, readout_bias_ = -1;
  Vector<double> params_;
};

struct TrainedBaseline {
  std::unique_ptr<RecurrentBaseline> model;
  TrainReport report;
};

/// Builds and trains a recurrent baseline. Throws UsageError on empty samples.
TrainedBaseline train_recurrent_baseline(const std::vector<WindowSample>& samples,
                                         const std::vector<WindowSample>& validation,
                                         const RecurrentBaselineConfig& config, const TrainConfig& train_config);

}  // namespace ctsf
