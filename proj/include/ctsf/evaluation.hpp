#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctsf/baselines.hpp"
#include "ctsf/data.hpp"
#include "ctsf/model.hpp"
#include "ctsf/training.hpp"

namespace ctsf {

double rmse(const Vector<double>& predicted, const Vector<double>& truth);

struct MapeResult {
  double percent = 0.0;  // over the terms that were used
  Index used = 0;
  Index skipped = 0;     // |truth| < epsilon
};

/// Mean absolute percentage error. Terms whose truth is smaller than
/// `epsilon` in magnitude are skipped and counted.
MapeResult mape(const Vector<double>& predicted, const Vector<double>& truth, double epsilon = 1e-8);

/// MAPE guard in normalized units; the harness scales it by the target span.
inline constexpr double kMapeEpsilon = 1e-8;

enum class Method { yesterday, ewma, rnn, lstm, crnn, aecrnn };

Method parse_method(const std::string& text);
std::string to_string(Method method);

struct ExperimentSpec {
  Method method = Method::crnn;
  Index num_series = 1;  // |X|
  Index input_length = 8;
  Index horizon = 1;
  std::vector<std::uint64_t> seeds{0};
  // Solution parameters for crnn/aecrnn; hidden and cell also drive rnn/lstm baselines.
  ModelConfig model;
  TrainConfig training;
  double ewma_alpha = kDefaultEwmaAlpha;
  BaselineInputs baseline_inputs = BaselineInputs::target;
  double train_fraction = 0.84;
  double validation_fraction = 0.15;
  // Stride-1 test windows instead of non-overlapping ones.
  bool overlapping_test_windows = false;

  /// Model configuration for one seed, with |X|, l and p filled in.
  ModelConfig model_config(std::uint64_t seed) const;
};

struct WindowError {
  std::uint64_t seed = 0;
  Index offset = 0;
  double rmse = 0.0;
  double mape = 0.0;
};

struct PredictionRecord {
  std::uint64_t seed = 0;
  Index offset = 0;  // absolute index of the window's first input step
  Index step = 0;    // 1..p
  double predicted = 0.0;
  double truth = 0.0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double rmse = 0.0;  // pooled over every test prediction of this seed
  double mape = 0.0;
  std::optional<TrainReport> training;
};

struct MetricReport {
  std::string method;
  Index num_series = 0, input_length = 0, horizon = 0;
  // Mean and sample standard deviation over windows x seeds.
  double rmse_mean = 0.0, rmse_std = 0.0, mape_mean = 0.0, mape_std = 0.0;
  // Mean and sample standard deviation of the per-seed pooled values.
  double seed_rmse_mean = 0.0, seed_rmse_std = 0.0, seed_mape_mean = 0.0, seed_mape_std = 0.0;
  Index mape_skipped = 0;
  bool single_seed = false;
  std::vector<SeedOutcome> seeds;
  std::vector<WindowError> windows;
  std::vector<PredictionRecord> predictions;
};

/// Trains (where applicable) and evaluates one method on the held-out tail of
/// `data`, once per seed. Only the first |X| series of `data` are used.
MetricReport run_experiment(const ExperimentSpec& spec, const CorrelatedSet& data);

/// Column header for write_report_row.
void write_report_header(std::ostream& out);
void write_report_row(const MetricReport& report, std::ostream& out);
void write_prediction_dump(const MetricReport& report, std::ostream& out);

struct RobustnessTable {
  static constexpr std::array<const char*, 3> kRows{"target_alone", "with_correlated", "with_uncorrelated"};
  static constexpr std::array<const char*, 2> kColumns{"crnn", "aecrnn"};
  std::array<std::array<double, 2>, 3> mape{};
  std::vector<MetricReport> reports;  // row-major over (row, column)

  /// MAPE increase from adding the uncorrelated series; column 0 crnn, 1 aecrnn.
  double degradation(std::size_t column) const { return mape[2][column] - mape[0][column]; }
};

/// CRNN and AECRNN MAPE for the target alone, with `correlated`, and with an
/// uncorrelated surrogate of the target. `base` supplies l, p, solution and
/// training parameters; its method, |X| and seeds are overridden.
RobustnessTable robustness_experiment(const TimeSeries& target, const TimeSeries& correlated, std::uint64_t seed,
                                      const ExperimentSpec& base);

void write_robustness_table(const RobustnessTable& table, std::ostream& out);

}  // namespace ctsf
