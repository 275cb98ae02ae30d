#include "lbo/detect.hpp"

#include <cmath>

namespace lbo::detect {

void MetricCurve::validate() const {
  if (points.empty()) throw EmptyError("MetricCurve: no points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].second))
      throw ConfigInvalidError("MetricCurve: non-finite metric value");
    if (i > 0 && !(points[i].first > points[i - 1].first))
      throw ConfigInvalidError("MetricCurve: phi_ratio must be strictly increasing");
  }
}

const double* MetricCurve::value_at(double phi_ratio) const {
  for (const auto& [phi, value] : points)
    if (phi == phi_ratio) return &value;
  return nullptr;
}

double ConfusionMatrix::accuracy() const {
  const long t = total();
  if (t == 0) return 0.0;
  return static_cast<double>(tp + tn) / static_cast<double>(t);
}

TransitionThreshold calibrate(const MetricCurve& curve, double transition_ratio,
                              Direction direction) {
  curve.validate();
  const double* v = curve.value_at(transition_ratio);
  if (v == nullptr)
    throw RatioNotFoundError("calibrate: transition ratio not present in the metric curve");
  return TransitionThreshold{*v, direction, transition_ratio};
}

Label classify(double metric, const TransitionThreshold& threshold) {
  if (!std::isfinite(metric)) throw ConfigInvalidError("classify: non-finite metric");
  if (threshold.direction == Direction::BelowIsUnhealthy)
    return metric < threshold.value ? Label::Unhealthy : Label::Healthy;
  return metric > threshold.value ? Label::Unhealthy : Label::Healthy;
}

ProtocolEval evaluate_protocol(const Protocol& protocol, const MetricCurve& curve,
                               const TransitionThreshold& threshold) {
  curve.validate();
  ProtocolEval eval;
  eval.predicted.reserve(protocol.records.size());
  for (const auto& record : protocol.records) {
    if (!record.label)
      throw LabelMissingError("evaluate_protocol: unlabeled record at phi_ratio " +
                              std::to_string(record.phi_ratio));
    const double* metric = curve.value_at(record.phi_ratio);
    if (metric == nullptr)
      throw RatioNotFoundError("evaluate_protocol: curve missing phi_ratio " +
                               std::to_string(record.phi_ratio));
    const Label predicted = classify(*metric, threshold);
    eval.predicted.push_back(predicted);
    const bool actual_positive = *record.label == Label::Unhealthy;
    const bool predicted_positive = predicted == Label::Unhealthy;
    if (actual_positive && predicted_positive) ++eval.confusion.tp;
    if (!actual_positive && predicted_positive) ++eval.confusion.fp;
    if (!actual_positive && !predicted_positive) ++eval.confusion.tn;
    if (actual_positive && !predicted_positive) ++eval.confusion.fn;
  }
  return eval;
}

ConfusionMatrix aggregate_confusion(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) throw EmptyError("aggregate_confusion: no matrices");
  ConfusionMatrix out;
  for (const auto& m : matrices) {
    out.tp += m.tp;
    out.fp += m.fp;
    out.tn += m.tn;
    out.fn += m.fn;
  }
  return out;
}

}  // namespace lbo::detect
