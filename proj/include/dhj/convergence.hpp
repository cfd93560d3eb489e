#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "dhj/core.hpp"

namespace dhj {

/// One line of a step-halving convergence table.
template <typename Scalar = double>
struct ConvergenceRow {
  Scalar h = Scalar(0);
  Scalar error = Scalar(0);
  /// log error ratio against the next (smaller) step; absent on the last row
  /// and on saturated rows.
  std::optional<Scalar> slope;
  bool saturated = false;  ///< error at or below the roundoff floor
  bool monotone = true;    ///< error decreased from this row to the next
};

/// Slope table for a sequence of step sizes and errors. Requires at least
/// three step sizes. Errors at the roundoff floor are reported as saturated;
/// non-monotone pairs are flagged but their slope is still reported.
template <typename Scalar>
std::vector<ConvergenceRow<Scalar>> report_convergence(const std::vector<Scalar>& steps,
                                                       const std::vector<Scalar>& errors,
                                                       Scalar saturation_floor = Scalar(1e-13)) {
  if (steps.size() != errors.size())
    throw InvalidArgument("report_convergence: steps and errors must have equal length");
  if (steps.size() < 3)
    throw InvalidArgument("report_convergence: at least three step sizes required");
  std::vector<ConvergenceRow<Scalar>> rows(steps.size());
  for (size_t i = 0; i < steps.size(); ++i) {
    rows[i].h = steps[i];
    rows[i].error = errors[i];
    rows[i].saturated = errors[i] <= saturation_floor;
  }
  for (size_t i = 0; i + 1 < steps.size(); ++i) {
    rows[i].monotone = errors[i + 1] < errors[i];
    if (rows[i].saturated || rows[i + 1].saturated) continue;
    if (errors[i] <= Scalar(0) || errors[i + 1] <= Scalar(0)) continue;
    rows[i].slope = std::log(errors[i] / errors[i + 1]) / std::log(steps[i] / steps[i + 1]);
  }
  return rows;
}

}  // namespace dhj
