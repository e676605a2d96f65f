#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctsf/sample.hpp"

namespace ctsf {

/// Uniformly sampled measurements of one quantity.
struct TimeSeries {
  std::string id;
  double start_time = 0.0;
  double interval = 1.0;
  Vector<double> values;

  Index length() const { return values.size(); }
};

/// Aligned series; member 0 is the forecast target.
class CorrelatedSet {
 public:
  explicit CorrelatedSet(std::vector<TimeSeries> series);

  Index size() const { return static_cast<Index>(series_.size()); }
  Index length() const { return series_.front().length(); }
  const TimeSeries& series(Index i) const { return series_.at(static_cast<std::size_t>(i)); }
  const TimeSeries& target() const { return series_.front(); }
  const std::vector<TimeSeries>& all() const { return series_; }

  /// The first `count` members.
  CorrelatedSet first(Index count) const;
  /// All values as a size() x length() matrix.
  RowMatrix<double> matrix() const;

 private:
  std::vector<TimeSeries> series_;
};

/// Columns to read from a CSV file, target first. Entries are header names or
/// zero-based column indices.
struct LayoutDescriptor {
  std::vector<std::string> columns;
  std::optional<std::string> timestamp;

  /// Parses a comma-separated column list such as "nh4,no3" or "1,2".
  static LayoutDescriptor parse(const std::string& columns, const std::string& timestamp = "");
};

CorrelatedSet ingest_csv(const std::filesystem::path& path, const LayoutDescriptor& layout);

/// Header names of a CSV file, or "0", "1", ... when it has no header row.
std::vector<std::string> csv_columns(const std::filesystem::path& path);

/// Writes a header row ("time", then series ids) and one row per step.
void write_csv(const CorrelatedSet& set, const std::filesystem::path& path);

/// A contiguous time range of every series; `start` is the absolute index of column 0.
struct Segment {
  Index start = 0;
  RowMatrix<double> values;

  Index length() const { return values.cols(); }
  Index num_series() const { return values.rows(); }
};

Segment whole(const CorrelatedSet& set);

/// Chronological prefix/suffix split at floor(train_frac * m).
/// Each side must hold at least `min_side` steps.
std::pair<Segment, Segment> split(const CorrelatedSet& set, double train_frac = 0.84, Index min_side = 1);

/// Splits off the last `fraction` of a training segment as validation data.
std::pair<Segment, Segment> carve_validation(const Segment& train, double fraction = 0.15);

/// Sliding windows at offsets 0, stride, 2*stride, ... Each pairs l inputs
/// with the following p values of series 0. Too-short segments yield no
/// windows and a warning on std::clog.
std::vector<WindowSample> segment(const Segment& seg, Index l, Index p, Index stride = 1);

/// Per-series min-max scaling fitted on training data.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Vector<double> minimum, Vector<double> maximum);

  static Normalizer fit(const Segment& train);

  Index num_series() const { return minimum_.size(); }
  const Vector<double>& minimum() const { return minimum_; }
  const Vector<double>& maximum() const { return maximum_; }
  /// max - min, or 1 for a constant series.
  double span(Index series) const;

  double transform(Index series, double value) const { return (value - minimum_(series)) / span(series); }
  double inverse(Index series, double value) const { return value * span(series) + minimum_(series); }
  Segment transform(const Segment& seg) const;
  Vector<double> inverse(Index series, const Vector<double>& values) const;

 private:
  Vector<double> minimum_;
  Vector<double> maximum_;
};

/// Chronological split, validation carve-out, normalizer fitted on the whole
/// training segment, and the normalized fitting/validation windows.
struct PreparedSplit {
  Segment train;       // fit + validation, raw values
  Segment fit;
  Segment validation;
  Segment test;
  Normalizer normalizer;
  std::vector<WindowSample> fit_samples;
  std::vector<WindowSample> validation_samples;
};

PreparedSplit prepare_split(const CorrelatedSet& set, Index l, Index p, double train_frac = 0.84,
                            double validation_fraction = 0.15);

double pearson_correlation(const Vector<double>& a, const Vector<double>& b);

/// Temporally shuffled copy of `reference`: same length, mean and variance, no
/// serial structure. Reshuffles with the next seed until |corr| < 0.1.
TimeSeries make_uncorrelated(const TimeSeries& reference, std::uint64_t seed);

enum class SyntheticKind { lagged, independent };

SyntheticKind parse_synthetic_kind(const std::string& text);
std::string to_string(SyntheticKind kind);

struct SyntheticConfig {
  SyntheticKind kind = SyntheticKind::lagged;
  std::uint64_t seed = 0;
  Index length = 2000;
  Index num_series = 2;
  // Steps by which every driver leads the target (lagged kind).
  Index lag = 5;
  // Standard deviation of the observation noise added to every series.
  double noise = 0.05;
};

/// Deterministic correlated (or independent) series for experiments.
///
/// Drivers are stationary AR(1) processes around a positive level. For the
/// lagged kind the target copies driver 1 delayed by `lag` steps; further
/// drivers mix driver 1 with fresh AR components. Every series receives
/// independent Gaussian noise of standard deviation `noise`.
CorrelatedSet generate_synthetic(const SyntheticConfig& config);

}  // namespace ctsf
