#include "ctsf/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ctsf/errors.hpp"

namespace ctsf {

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

// Sample standard deviation; zero for fewer than two values.
Moments moments(const std::vector<double>& values) {
  Moments m;
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / (n - 1.0));
  }
  return m;
}

std::unique_ptr<Forecaster> fit_method(const ExperimentSpec& spec, std::uint64_t seed,
                                       const std::vector<WindowSample>& train_samples,
                                       const std::vector<WindowSample>& validation,
                                       std::optional<TrainReport>& report) {
  TrainConfig training = spec.training;
  training.seed = seed;
  switch (spec.method) {
    case Method::yesterday:
      return std::make_unique<YesterdayForecaster>(spec.horizon);
    case Method::ewma:
      return std::make_unique<EwmaForecaster>(spec.ewma_alpha, spec.horizon);
    case Method::rnn:
    case Method::lstm: {
      RecurrentBaselineConfig cfg;
      cfg.cell = spec.method == Method::rnn ? CellKind::rnn : CellKind::lstm;
      cfg.inputs = spec.baseline_inputs;
      cfg.num_series = spec.num_series;
      cfg.input_length = spec.input_length;
      cfg.horizon = spec.horizon;
      cfg.hidden = spec.model.hidden;
      cfg.seed = seed;
      auto trained = train_recurrent_baseline(train_samples, validation, cfg, training);
      report = std::move(trained.report);
      return std::move(trained.model);
    }
    case Method::crnn:
    case Method::aecrnn: {
      if (train_samples.empty()) throw UsageError("no training windows for " + to_string(spec.method));
      auto model = std::make_unique<CrnnModel>(spec.model_config(seed));
      report = train(*model, train_samples, validation, training);
      return model;
    }
  }
  throw UsageError("unknown method");
}

}  // namespace

double rmse(const Vector<double>& predicted, const Vector<double>& truth) {
  if (predicted.size() != truth.size() || predicted.size() == 0)
    throw DimensionError("rmse: sizes " + std::to_string(predicted.size()) + " and " + std::to_string(truth.size()));
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
}

MapeResult mape(const Vector<double>& predicted, const Vector<double>& truth, double epsilon) {
  if (predicted.size() != truth.size())
    throw DimensionError("mape: sizes " + std::to_string(predicted.size()) + " and " + std::to_string(truth.size()));
  MapeResult r;
  double sum = 0.0;
  for (Index i = 0; i < truth.size(); ++i) {
    if (std::abs(truth(i)) < epsilon) {
      ++r.skipped;
      continue;
    }
    sum += std::abs((truth(i) - predicted(i)) / truth(i));
    ++r.used;
  }
  r.percent = r.used > 0 ? 100.0 * sum / static_cast<double>(r.used) : 0.0;
  return r;
}

Method parse_method(const std::string& text) {
  if (text == "yesterday") return Method::yesterday;
  if (text == "ewma") return Method::ewma;
  if (text == "rnn") return Method::rnn;
  if (text == "lstm") return Method::lstm;
  if (text == "crnn") return Method::crnn;
  if (text == "aecrnn") return Method::aecrnn;
  throw UsageError("unknown method '" + text + "' (expected yesterday, ewma, rnn, lstm, crnn or aecrnn)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::yesterday: return "yesterday";
    case Method::ewma: return "ewma";
    case Method::rnn: return "rnn";
    case Method::lstm: return "lstm";
    case Method::crnn: return "crnn";
    case Method::aecrnn: return "aecrnn";
  }
  return "?";
}

ModelConfig ExperimentSpec::model_config(std::uint64_t seed) const {
  ModelConfig cfg = model;
  cfg.kind = method == Method::aecrnn ? ModelKind::aecrnn : ModelKind::crnn;
  cfg.num_series = num_series;
  cfg.input_length = input_length;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

MetricReport run_experiment(const ExperimentSpec& spec, const CorrelatedSet& data) {
  if (spec.seeds.empty()) throw UsageError("at least one seed is required");
  if (spec.num_series < 1 || spec.num_series > data.size())
    throw UsageError("|X| = " + std::to_string(spec.num_series) + " but the data holds " +
                     std::to_string(data.size()) + " series");
  if (spec.input_length < 1 || spec.horizon < 1) throw UsageError("l and p must be positive");
  if (spec.method == Method::crnn || spec.method == Method::aecrnn) spec.model_config(0).validate();

  const CorrelatedSet set = data.first(spec.num_series);
  const Index l = spec.input_length, p = spec.horizon;
  const PreparedSplit prepared = prepare_split(set, l, p, spec.train_fraction, spec.validation_fraction);
  const Normalizer& normalizer = prepared.normalizer;
  const Segment& test_seg = prepared.test;
  const auto& train_samples = prepared.fit_samples;
  const auto& validation = prepared.validation_samples;
  const Index stride = spec.overlapping_test_windows ? 1 : l + p;
  const auto test_samples = segment(normalizer.transform(test_seg), l, p, stride);
  if (test_samples.empty()) throw DataError("test segment too short for l + p = " + std::to_string(l + p));

  const double epsilon = kMapeEpsilon * normalizer.span(0);

  MetricReport report;
  report.method = to_string(spec.method);
  report.num_series = spec.num_series;
  report.input_length = l;
  report.horizon = p;
  report.single_seed = spec.seeds.size() == 1;

  std::vector<double> window_rmse, window_mape, seed_rmse, seed_mape;
  for (std::uint64_t seed : spec.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    auto forecaster = fit_method(spec, seed, train_samples, validation, outcome.training);

    Vector<double> all_pred(static_cast<Index>(test_samples.size()) * p);
    Vector<double> all_truth(all_pred.size());
    for (std::size_t w = 0; w < test_samples.size(); ++w) {
      const WindowSample& sample = test_samples[w];
      const Vector<double> predicted = normalizer.inverse(0, forecaster->forecast(sample.input).values);
      const Vector<double> truth = test_seg.values.row(0).segment(sample.offset - test_seg.start + l, p).transpose();
      const MapeResult m = mape(predicted, truth, epsilon);
      report.mape_skipped += m.skipped;
      const double r = rmse(predicted, truth);
      report.windows.push_back({seed, sample.offset, r, m.percent});
      window_rmse.push_back(r);
      if (m.used > 0) window_mape.push_back(m.percent);
      for (Index s = 0; s < p; ++s)
        report.predictions.push_back({seed, sample.offset, s + 1, predicted(s), truth(s)});
      all_pred.segment(static_cast<Index>(w) * p, p) = predicted;
      all_truth.segment(static_cast<Index>(w) * p, p) = truth;
    }
    outcome.rmse = rmse(all_pred, all_truth);
    outcome.mape = mape(all_pred, all_truth, epsilon).percent;
    seed_rmse.push_back(outcome.rmse);
    seed_mape.push_back(outcome.mape);
    report.seeds.push_back(std::move(outcome));
  }

  const Moments wr = moments(window_rmse), wm = moments(window_mape);
  const Moments sr = moments(seed_rmse), sm = moments(seed_mape);
  report.rmse_mean = wr.mean;
  report.rmse_std = wr.stddev;
  report.mape_mean = wm.mean;
  report.mape_std = wm.stddev;
  report.seed_rmse_mean = sr.mean;
  report.seed_rmse_std = sr.stddev;
  report.seed_mape_mean = sm.mean;
  report.seed_mape_std = sm.stddev;
  return report;
}

void write_report_header(std::ostream& out) {
  out << "method\t|X|\tl\tp\trmse_mean\trmse_std\tmape_mean\tmape_std\tseeds\tnotes\n";
}

void write_report_row(const MetricReport& report, std::ostream& out) {
  std::ostringstream notes;
  notes << std::setprecision(6) << "seed_rmse=" << report.seed_rmse_mean << "+-" << report.seed_rmse_std
        << ";seed_mape=" << report.seed_mape_mean << "+-" << report.seed_mape_std
        << ";windows=" << report.windows.size();
  if (report.mape_skipped > 0) notes << ";mape_skipped=" << report.mape_skipped;
  if (report.single_seed) notes << ";single_seed";
  out << std::setprecision(8) << report.method << '\t' << report.num_series << '\t' << report.input_length << '\t'
      << report.horizon << '\t' << report.rmse_mean << '\t' << report.rmse_std << '\t' << report.mape_mean << '\t'
      << report.mape_std << '\t' << report.seeds.size() << '\t' << notes.str() << '\n';
}

void write_prediction_dump(const MetricReport& report, std::ostream& out) {
  out << "seed\toffset\tstep\tpredicted\ttruth\n" << std::setprecision(17);
  for (const auto& r : report.predictions)
    out << r.seed << '\t' << r.offset << '\t' << r.step << '\t' << r.predicted << '\t' << r.truth << '\n';
}

RobustnessTable robustness_experiment(const TimeSeries& target, const TimeSeries& correlated, std::uint64_t seed,
                                      const ExperimentSpec& base) {
  const TimeSeries uncorrelated = make_uncorrelated(target, seed);
  const std::array<CorrelatedSet, 3> sets{CorrelatedSet({target}), CorrelatedSet({target, correlated}),
                                          CorrelatedSet({target, uncorrelated})};
  RobustnessTable table;
  for (std::size_t row = 0; row < sets.size(); ++row) {
    for (std::size_t col = 0; col < 2; ++col) {
      ExperimentSpec spec = base;
      spec.method = col == 0 ? Method::crnn : Method::aecrnn;
      spec.num_series = sets[row].size();
      spec.seeds = {seed};
      MetricReport report = run_experiment(spec, sets[row]);
      table.mape[row][col] = report.mape_mean;
      table.reports.push_back(std::move(report));
    }
  }
  return table;
}

void write_robustness_table(const RobustnessTable& table, std::ostream& out) {
  out << "condition";
  for (const char* c : RobustnessTable::kColumns) out << '\t' << c << "_mape";
  out << '\n' << std::setprecision(8);
  for (std::size_t row = 0; row < 3; ++row) {
    out << RobustnessTable::kRows[row];
    for (std::size_t col = 0; col < 2; ++col) out << '\t' << table.mape[row][col];
    out << '\n';
  }
}

}  // namespace ctsf
