#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lbo/errors.hpp"

namespace lbo {

enum class Label { Healthy, Unhealthy };

/// A univariate pressure signal at a fixed sampling rate.
struct TimeSeries {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  /// Validating constructor helper: non-empty, all-finite, positive rate.
  static TimeSeries make(std::vector<double> samples, double sample_rate_hz);
  void validate() const;
  std::size_t size() const { return samples.size(); }
};

/// One quasi-static dataset: a signal tagged with its phi/phi_LBO ratio.
/// Blowout is phi_ratio == 1; values below 1 are rejected.
struct QuasiStaticRecord {
  double phi_ratio = 1.0;
  TimeSeries series;
  std::optional<Label> label;

  void validate() const;
};

/// Ordered family of quasi-static records for one air-flow setting.
/// Records ascend strictly in phi_ratio and start at exactly 1; the
/// transition_ratio must be one of the grid points. Records strictly below
/// the transition are Unhealthy, the transition record and above Healthy.
struct Protocol {
  std::string name;
  double air_flow_slpm = 0.0;
  double transition_ratio = 0.0;
  std::vector<QuasiStaticRecord> records;

  void validate() const;
  const QuasiStaticRecord* find_ratio(double phi_ratio) const;
};

/// Min/max of the scaling fit; max_val must exceed min_val.
struct ScalingParams {
  double min_val = 0.0;
  double max_val = 1.0;
};

/// Sliding-window supervised pairs: row k of inputs holds the scaled window
/// [x_k, ..., x_{k+t_x-1}], targets[k] the scaled x_{k+t_x}.
struct WindowSet {
  Eigen::MatrixXd inputs;   // (T - t_x) x t_x
  Eigen::VectorXd targets;  // T - t_x
  int t_x = 0;
  ScalingParams scaling;

  Eigen::Index count() const { return inputs.rows(); }
};

/// Fit a (0,1) min-max scaling on the series and return the scaled samples.
/// Throws ConstantSeriesError when max == min.
std::pair<std::vector<double>, ScalingParams> minmax_scale(const TimeSeries& series);

/// Apply previously fitted scaling; out-of-range inputs land outside [0,1].
std::vector<double> apply_scale(std::span<const double> samples, const ScalingParams& params);
std::vector<double> apply_scale(const TimeSeries& series, const ScalingParams& params);

/// Consecutive stride-1 windows with next-step targets. Requires
/// samples.size() >= t_x + 1, i.e. every window keeps an in-series target.
WindowSet make_windows(std::span<const double> scaled, int t_x, const ScalingParams& scaling);

/// Chronological split: first floor(train_frac * T) samples vs. the rest.
std::pair<TimeSeries, TimeSeries> chrono_split(const TimeSeries& series, double train_frac);

/// Seeded uniform partition of windows into train/val; |val| = floor(val_frac * N).
std::pair<WindowSet, WindowSet> random_split(const WindowSet& windows, double val_frac,
                                             std::uint64_t seed);

/// Root mean square error between equal-length non-empty vectors.
double rmse(std::span<const double> predictions, std::span<const double> targets);
double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

}  // namespace lbo
