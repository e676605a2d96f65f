#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctsf/layers.hpp"
#include "ctsf/trainable.hpp"

namespace ctsf {

enum class ModelKind { crnn, aecrnn };
enum class CellKind { rnn, lstm };
// How the flattened pooled features are presented to the recurrent cell.
enum class RnnLayout { sequence, single_step };
enum class ConvActivation { linear, tanh };

std::string to_string(ModelKind kind);
std::string to_string(CellKind kind);
std::string to_string(RnnLayout layout);
std::string to_string(ConvActivation activation);
ModelKind parse_model_kind(const std::string& text);
CellKind parse_cell_kind(const std::string& text);
RnnLayout parse_rnn_layout(const std::string& text);
ConvActivation parse_conv_activation(const std::string& text);

inline const std::vector<Index> kStageGrid{1, 2, 3};
inline const std::vector<Index> kFilterGrid{2, 3, 4, 5, 8, 10, 16};
inline const std::vector<Index> kFilterSizeGrid{1, 2, 3, 5, 10};
inline const std::vector<Index> kHiddenGrid{3, 4, 5, 6};

struct ModelConfig {
  ModelKind kind = ModelKind::crnn;
  Index num_series = 1;
  Index input_length = 8;
  Index horizon = 1;
  Index stages = 1;
  Index filters = 3;
  Index filter_size = 3;
  Index hidden = 4;
  CellKind cell = CellKind::rnn;
  RnnLayout layout = RnnLayout::sequence;
  ConvActivation conv_activation = ConvActivation::linear;
  std::uint64_t seed = 0;
  // Permits solution parameters outside the standard search grid.
  bool off_grid = false;

  /// Throws UsageError naming the first violated constraint.
  void validate() const;

  Index pooled_length() const { return input_length >> stages; }
  /// Length of the concatenated pooled-feature vector, |X| * filters * pooled_length.
  Index feature_length() const { return num_series * filters * pooled_length(); }
  Index rnn_steps() const { return layout == RnnLayout::sequence ? pooled_length() : 1; }
  Index rnn_input_size() const { return feature_length() / rnn_steps(); }
};

/// Per-series reconstructions, one row per input series, values in (0,1).
struct Reconstruction {
  RowMatrix<double> values;
};

struct ForwardResult {
  Forecast forecast;
  std::optional<Reconstruction> reconstruction;
  Tensor features;  // concatenated pooled cubes
};

LossBreakdown crnn_loss(const Forecast& forecast, const Eigen::Ref<const Vector<double>>& target);

/// Reconstruction targets are clamped to [0,1] to match the sigmoid range.
LossBreakdown aecrnn_loss(const Forecast& forecast, const Reconstruction& reconstruction, const Tensor& window,
                          const Eigen::Ref<const Vector<double>>& target);

/// Convolutional recurrent forecaster with optional per-series auto-encoders.
///
/// Each input series runs through its own stack of same-length convolution
/// and 1x2 max-pooling stages. The pooled cubes are concatenated and fed to a
/// recurrent cell whose final state is read out by a dense layer into the
/// p-step forecast. With ModelKind::aecrnn every pooled cube is also decoded
/// (one stride-2 deconvolution per stage, then a sigmoid channel merge) and
/// the reconstruction error joins the loss.
class CrnnModel final : public TrainableModel {
 public:
  explicit CrnnModel(ModelConfig config);
  CrnnModel(ModelConfig config, Vector<double> parameters);

  const ModelConfig& config() const { return config_; }

  ForwardResult forward(const Tensor& window) const;
  Forecast forecast(const Tensor& window) const override { return forward(window).forecast; }
  std::string method_name() const override { return to_string(config_.kind); }

  const ParameterLayout& layout() const override { return layout_; }
  const Vector<double>& parameters() const override { return params_; }
  Vector<double>& parameters() override { return params_; }

  LossBreakdown loss(const WindowSample& sample) const override;
  LossBreakdown accumulate_gradient(const WindowSample& sample, Eigen::Ref<Vector<double>> grad,
                                    const LossWeights& weights = {}) const override;
  std::unique_ptr<TrainableModel> clone() const override { return std::make_unique<CrnnModel>(*this); }
  HeaderFields header_fields() const override;

  /// Inverse of header_fields().
  static ModelConfig config_from_header(const HeaderFields& fields);

 private:
  struct StageSlots {
    Index weight, bias;
  };
  struct SeriesSlots {
    std::vector<StageSlots> conv;
    std::vector<StageSlots> deconv;  // decoder order: innermost stage first
    Index merge_weight = -1, merge_bias = -1;
  };
  struct Trace;

  void build_layout();
  void initialize();
  Conv1D<double> conv_layer(Index series, Index stage) const;
  Deconv1D<double> deconv_layer(Index series, Index step) const;
  ChannelMerge<double> merge_layer(Index series) const;
  Dense<double> readout() const;
  Trace run(const Tensor& window) const;
  void check_window(const Tensor& window) const;

  ModelConfig config_;
  ParameterLayout layout_;
  std::vector<SeriesSlots> series_;
  Index rnn_input_weight_ = -1, rnn_recurrent_weight_ = -1, rnn_bias_ = -1;
  Index readout_weight_ = -1, readout_bias_ = -1;
  Vector<double> params_;
};

}  // namespace ctsf
