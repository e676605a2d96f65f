#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctsf/trainable.hpp"

namespace ctsf {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& text);
std::string to_string(OptimizerKind kind);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batch_size = 32;
  Index max_epochs = 100;
  Index patience = 10;
  std::uint64_t seed = 0;
  // When false the shuffle order is drawn from std::random_device.
  bool deterministic = true;
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;
  LossBreakdown train;  // mean over training samples at the end of the epoch
  double val_j1 = 0.0;  // mean forecast loss on validation samples (train J1 if none)
};

enum class StopReason { max_epochs, early_stopping, diverged };
std::string to_string(StopReason reason);

struct TrainReport {
  std::vector<EpochRecord> epochs;
  Index best_epoch = 0;  // 0 means the initial parameters were kept
  double best_val_j1 = 0.0;
  StopReason stop = StopReason::max_epochs;
  std::string message;

  bool operator==(const TrainReport&) const = default;
};

inline bool operator==(const LossBreakdown& a, const LossBreakdown& b) {
  return a.j1 == b.j1 && a.j2 == b.j2 && a.j == b.j;
}
inline bool operator==(const EpochRecord& a, const EpochRecord& b) {
  return a.epoch == b.epoch && a.train == b.train && a.val_j1 == b.val_j1;
}

/// Mean loss over `samples`, summed in order.
LossBreakdown mean_loss(const TrainableModel& model, const std::vector<WindowSample>& samples);

/// Mini-batch gradient descent on J with validation-based early stopping.
///
/// The batch gradient is the mean of per-sample gradients accumulated in
/// sample order, and the final short batch is kept. After every epoch the
/// full training and validation losses are re-evaluated; the parameters with
/// the lowest validation J1 are restored on return. A non-finite loss or
/// parameter stops training with StopReason::diverged.
TrainReport train(TrainableModel& model, const std::vector<WindowSample>& samples,
                  const std::vector<WindowSample>& validation, const TrainConfig& config);

/// Delimited per-epoch table followed by a one-line summary.
void write_train_report(const TrainReport& report, std::ostream& out);

struct GradcheckReport {
  double tolerance = 0.0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index checked = 0;
  std::vector<std::string> failing;  // tensor names with an element above tolerance
  bool passed = true;
};

using LossFunction = std::function<double(const Vector<double>&)>;
using GradientFunction = std::function<Vector<double>(const Vector<double>&)>;

/// Compares `gradient` at `point` with central differences of `loss`.
/// Relative error is |a - n| / max(|a|, |n|, 1e-5).
GradcheckReport gradcheck(const ParameterLayout& layout, const Vector<double>& point, const LossFunction& loss,
                          const GradientFunction& gradient, double tolerance = 1e-5, double step = 1e-6);

/// Checks dJ/dtheta of `model` on one sample.
GradcheckReport gradcheck(const TrainableModel& model, const WindowSample& sample, double tolerance = 1e-5,
                          double step = 1e-6);

}  // namespace ctsf
