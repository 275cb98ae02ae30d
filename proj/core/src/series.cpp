#include "lbo/series.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lbo/rng.hpp"

namespace lbo {

TimeSeries TimeSeries::make(std::vector<double> samples, double sample_rate_hz) {
  TimeSeries ts{std::move(samples), sample_rate_hz};
  ts.validate();
  return ts;
}

void TimeSeries::validate() const {
  if (samples.empty()) throw EmptyError("TimeSeries: no samples");
  if (!(sample_rate_hz > 0.0)) throw ConfigInvalidError("TimeSeries: sample_rate_hz must be > 0");
  for (double x : samples) {
    if (!std::isfinite(x)) throw ConfigInvalidError("TimeSeries: non-finite sample");
  }
}

void QuasiStaticRecord::validate() const {
  if (!(phi_ratio >= 1.0))
    throw ConfigInvalidError("QuasiStaticRecord: phi_ratio must be >= 1 (blowout is 1)");
  series.validate();
}

void Protocol::validate() const {
  if (records.empty()) throw EmptyError("Protocol: no records");
  if (!(air_flow_slpm > 0.0)) throw ConfigInvalidError("Protocol: air_flow_slpm must be > 0");
  if (records.front().phi_ratio != 1.0)
    throw ConfigInvalidError("Protocol: records must start at phi_ratio = 1 exactly");
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].validate();
    if (i > 0 && !(records[i].phi_ratio > records[i - 1].phi_ratio))
      throw ConfigInvalidError("Protocol: phi_ratio must be strictly increasing");
  }
  if (find_ratio(transition_ratio) == nullptr)
    throw ConfigInvalidError("Protocol: transition_ratio must be one of the grid points");
  for (const auto& r : records) {
    if (!r.label) continue;
    const Label expect = r.phi_ratio < transition_ratio ? Label::Unhealthy : Label::Healthy;
    if (*r.label != expect)
      throw ConfigInvalidError("Protocol: label inconsistent with transition_ratio");
  }
}

const QuasiStaticRecord* Protocol::find_ratio(double phi_ratio) const {
  for (const auto& r : records) {
    if (r.phi_ratio == phi_ratio) return &r;
  }
  return nullptr;
}

std::pair<std::vector<double>, ScalingParams> minmax_scale(const TimeSeries& series) {
  series.validate();
  const auto [mn, mx] = std::minmax_element(series.samples.begin(), series.samples.end());
  if (*mx == *mn) throw ConstantSeriesError("minmax_scale: constant series, scaling undefined");
  const ScalingParams params{*mn, *mx};
  return {apply_scale(series.samples, params), params};
}

std::vector<double> apply_scale(std::span<const double> samples, const ScalingParams& params) {
  if (!(params.max_val > params.min_val))
    throw ConfigInvalidError("apply_scale: max_val must exceed min_val");
  const double inv = 1.0 / (params.max_val - params.min_val);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = (samples[i] - params.min_val) * inv;
  return out;
}

std::vector<double> apply_scale(const TimeSeries& series, const ScalingParams& params) {
  return apply_scale(std::span<const double>(series.samples), params);
}

WindowSet make_windows(std::span<const double> scaled, int t_x, const ScalingParams& scaling) {
  if (t_x < 1) throw ConfigInvalidError("make_windows: t_x must be >= 1");
  const auto T = static_cast<std::ptrdiff_t>(scaled.size());
  const std::ptrdiff_t n = T - t_x;
  if (n < 1)
    throw SeriesTooShortError("make_windows: need at least t_x + 1 samples, got " +
                              std::to_string(T));
  WindowSet ws;
  ws.t_x = t_x;
  ws.scaling = scaling;
  ws.inputs.resize(n, t_x);
  ws.targets.resize(n);
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    for (int j = 0; j < t_x; ++j) ws.inputs(k, j) = scaled[static_cast<std::size_t>(k + j)];
    ws.targets(k) = scaled[static_cast<std::size_t>(k + t_x)];
  }
  return ws;
}

std::pair<TimeSeries, TimeSeries> chrono_split(const TimeSeries& series, double train_frac) {
  series.validate();
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigInvalidError("chrono_split: train_frac must be in (0, 1)");
  const auto T = series.samples.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(T)));
  if (n_train == 0 || n_train == T)
    throw EmptySplitError("chrono_split: a side of the split would be empty");
  TimeSeries train{std::vector<double>(series.samples.begin(),
                                       series.samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                   series.sample_rate_hz};
  TimeSeries test{std::vector<double>(series.samples.begin() + static_cast<std::ptrdiff_t>(n_train),
                                      series.samples.end()),
                  series.sample_rate_hz};
  return {std::move(train), std::move(test)};
}

namespace {

WindowSet take_rows(const WindowSet& ws, const std::vector<std::size_t>& rows) {
  WindowSet out;
  out.t_x = ws.t_x;
  out.scaling = ws.scaling;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), ws.inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = ws.inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.targets(static_cast<Eigen::Index>(i)) = ws.targets(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

std::pair<WindowSet, WindowSet> random_split(const WindowSet& windows, double val_frac,
                                             std::uint64_t seed) {
  if (!(val_frac > 0.0 && val_frac < 1.0))
    throw ConfigInvalidError("random_split: val_frac must be in (0, 1)");
  const auto n = static_cast<std::size_t>(windows.count());
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Engine eng(seed);
  rng::shuffle(idx, eng);
  std::vector<std::size_t> val_rows(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {take_rows(windows, train_rows), take_rows(windows, val_rows)};
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw LengthMismatchError("rmse: length mismatch " + std::to_string(predictions.size()) +
                              " vs " + std::to_string(targets.size()));
  if (predictions.empty()) throw EmptyError("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  return rmse(std::span<const double>(predictions.data(), static_cast<std::size_t>(predictions.size())),
              std::span<const double>(targets.data(), static_cast<std::size_t>(targets.size())));
}

}  // namespace lbo
