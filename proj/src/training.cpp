#include "ctsf/training.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

namespace ctsf {

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw UsageError("unknown optimizer '" + text + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::early_stopping: return "early_stopping";
    case StopReason::diverged: return "diverged";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (max_epochs < 1) throw UsageError("max epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw UsageError("adam epsilon must be > 0");
}

LossBreakdown mean_loss(const TrainableModel& model, const std::vector<WindowSample>& samples) {
  LossBreakdown sum;
  for (const auto& s : samples) {
    const LossBreakdown l = model.loss(s);
    sum.j1 += l.j1;
    sum.j2 += l.j2;
  }
  if (samples.empty()) return sum;
  const double n = static_cast<double>(samples.size());
  sum.j1 /= n;
  sum.j2 /= n;
  sum.j = sum.j1 + sum.j2;
  return sum;
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, Index size)
      : config_(config), first_(Vector<double>::Zero(size)), second_(Vector<double>::Zero(size)) {}

  void step(Vector<double>& params, const Vector<double>& grad) {
    if (config_.optimizer == OptimizerKind::sgd) {
      params -= config_.learning_rate * grad;
      return;
    }
    ++steps_;
    first_ = config_.beta1 * first_ + (1.0 - config_.beta1) * grad;
    second_ = config_.beta2 * second_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    params.array() -=
        config_.learning_rate * (first_.array() / c1) / ((second_.array() / c2).sqrt() + config_.epsilon);
  }

 private:
  const TrainConfig& config_;
  Vector<double> first_, second_;
  long steps_ = 0;
};

}  // namespace

TrainReport train(TrainableModel& model, const std::vector<WindowSample>& samples,
                  const std::vector<WindowSample>& validation, const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw UsageError("train: no training samples");

  std::mt19937_64 rng(config.deterministic ? config.seed : std::random_device{}());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto monitored = [&](const LossBreakdown& train_loss) {
    return validation.empty() ? train_loss.j1 : mean_loss(model, validation).j1;
  };

  TrainReport report;
  Vector<double> best = model.parameters();
  report.best_val_j1 = std::numeric_limits<double>::infinity();
  try {
    report.best_val_j1 = monitored(mean_loss(model, samples));
  } catch (const NumericError&) {
  }

  Optimizer optimizer(config, model.parameters().size());
  Vector<double> grad(model.parameters().size());
  Index since_best = 0;
  report.stop = StopReason::max_epochs;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        grad.setZero();
        for (std::size_t i = start; i < end; ++i) model.accumulate_gradient(samples[order[i]], grad);
        grad /= static_cast<double>(end - start);
        optimizer.step(model.parameters(), grad);
        if (!all_finite(model.parameters())) throw NumericError("parameters became non-finite");
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.train = mean_loss(model, samples);
      rec.val_j1 = monitored(rec.train);
      if (!std::isfinite(rec.train.j) || !std::isfinite(rec.val_j1)) throw NumericError("loss became non-finite");
      report.epochs.push_back(rec);
      if (rec.val_j1 < report.best_val_j1) {
        report.best_val_j1 = rec.val_j1;
        report.best_epoch = epoch;
        best = model.parameters();
        since_best = 0;
      } else if (++since_best >= config.patience) {
        report.stop = StopReason::early_stopping;
        break;
      }
    } catch (const NumericError& e) {
      report.stop = StopReason::diverged;
      report.message = e.what();
      break;
    }
  }
  model.parameters() = best;
  return report;
}

void write_train_report(const TrainReport& report, std::ostream& out) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "epoch\tj\tj1\tj2\tval_j1\n" << std::setprecision(17);
  for (const auto& e : report.epochs)
    out << e.epoch << '\t' << e.train.j << '\t' << e.train.j1 << '\t' << e.train.j2 << '\t' << e.val_j1 << '\n';
  out << "# best_epoch=" << report.best_epoch << " best_val_j1=" << report.best_val_j1
      << " epochs=" << report.epochs.size() << " stop=" << to_string(report.stop);
  if (!report.message.empty()) out << " message=\"" << report.message << '"';
  out << '\n';
  out.flags(flags);
  out.precision(precision);
}

GradcheckReport gradcheck(const ParameterLayout& layout, const Vector<double>& point, const LossFunction& loss,
                          const GradientFunction& gradient, double tolerance, double step) {
  if (point.size() != layout.total_size()) throw DimensionError("gradcheck: point does not match layout");
  const Vector<double> analytic = gradient(point);
  if (analytic.size() != point.size()) throw DimensionError("gradcheck: gradient has the wrong length");
  GradcheckReport report;
  report.tolerance = tolerance;
  Vector<double> x = point;
  for (const auto& slot : layout.slots()) {
    bool failed = false;
    for (Index i = slot.offset; i < slot.offset + slot.size; ++i) {
      const double saved = x(i);
      x(i) = saved + step;
      const double plus = loss(x);
      x(i) = saved - step;
      const double minus = loss(x);
      x(i) = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-5});
      const double err = std::abs(analytic(i) - numeric) / denom;
      if (!(err <= report.max_relative_error)) {
        report.max_relative_error = err;
        report.worst_parameter = slot.name;
      }
      if (!(err <= tolerance)) failed = true;
      ++report.checked;
    }
    if (failed) report.failing.push_back(slot.name);
  }
  report.passed = report.failing.empty();
  return report;
}

GradcheckReport gradcheck(const TrainableModel& model, const WindowSample& sample, double tolerance, double step) {
  auto probe = model.clone();
  auto loss = [&](const Vector<double>& theta) {
    probe->parameters() = theta;
    return probe->loss(sample).j;
  };
  auto gradient = [&](const Vector<double>& theta) {
    probe->parameters() = theta;
    Vector<double> g = Vector<double>::Zero(theta.size());
    probe->accumulate_gradient(sample, g);
    return g;
  };
  return gradcheck(model.layout(), model.parameters(), loss, gradient, tolerance, step);
}

}  // namespace ctsf
