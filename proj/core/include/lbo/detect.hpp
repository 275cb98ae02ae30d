#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::detect {

/// Metric value below the threshold means Unhealthy (RMSE of predictors
/// trained at blowout) or above it (translational error).
enum class Direction { BelowIsUnhealthy, AboveIsUnhealthy };

/// Per-record (phi_ratio, metric) pairs in ascending phi order.
struct MetricCurve {
  std::string detector_id;
  std::vector<std::pair<double, double>> points;

  void validate() const;
  const double* value_at(double phi_ratio) const;
};

struct TransitionThreshold {
  double value = 0.0;
  Direction direction = Direction::BelowIsUnhealthy;
  double source_ratio = 0.0;
};

/// 2x2 tallies with Unhealthy as the positive class.
struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const;
};

/// Threshold = the curve's metric at the annotated transition ratio.
TransitionThreshold calibrate(const MetricCurve& curve, double transition_ratio,
                              Direction direction);

/// Boundary values classify Healthy: the calibration record itself is the
/// first healthy state.
Label classify(double metric, const TransitionThreshold& threshold);

struct ProtocolEval {
  std::vector<Label> predicted;  // aligned with protocol.records
  ConfusionMatrix confusion;
};

ProtocolEval evaluate_protocol(const Protocol& protocol, const MetricCurve& curve,
                               const TransitionThreshold& threshold);

ConfusionMatrix aggregate_confusion(std::span<const ConfusionMatrix> matrices);

}  // namespace lbo::detect
