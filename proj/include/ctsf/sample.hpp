#pragma once

#include "ctsf/tensor.hpp"

namespace ctsf {

/// One supervised case: |X| x l inputs and the p target values that follow.
struct WindowSample {
  Index offset = 0;  // absolute index of the first input column
  Tensor input;
  Vector<double> target;
};

struct Forecast {
  Vector<double> values;

  Index horizon() const { return values.size(); }
};

struct LossBreakdown {
  double j1 = 0.0;
  double j2 = 0.0;
  double j = 0.0;
};

/// Multipliers applied to each loss term during backpropagation only.
/// Reported losses are always unweighted.
struct LossWeights {
  double forecast = 1.0;
  double reconstruction = 1.0;
};

}  // namespace ctsf
