#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ctsf/parameters.hpp"
#include "ctsf/sample.hpp"

namespace ctsf {

using HeaderFields = std::vector<std::pair<std::string, std::string>>;

/// Anything that maps an input window to a p-step forecast.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual Forecast forecast(const Tensor& window) const = 0;
  virtual std::string method_name() const = 0;
};

/// A forecaster with a flat parameter vector and exact gradients.
class TrainableModel : public Forecaster {
 public:
  virtual const ParameterLayout& layout() const = 0;
  virtual const Vector<double>& parameters() const = 0;
  virtual Vector<double>& parameters() = 0;

  virtual LossBreakdown loss(const WindowSample& sample) const = 0;

  /// Adds dJ/dtheta for one sample to `grad` and returns the unweighted loss.
  virtual LossBreakdown accumulate_gradient(const WindowSample& sample, Eigen::Ref<Vector<double>> grad,
                                            const LossWeights& weights = {}) const = 0;

  virtual std::unique_ptr<TrainableModel> clone() const = 0;

  /// Configuration written into checkpoint headers, in a fixed order.
  virtual HeaderFields header_fields() const = 0;
};

}  // namespace ctsf
