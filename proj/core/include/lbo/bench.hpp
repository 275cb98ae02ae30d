#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::bench {

/// A fully initialized detector: maps a record to its metric value.
/// Training/fitting happens before the handle is built and is never timed.
using DetectorFn = std::function<double(const QuasiStaticRecord&)>;

struct NamedDetector {
  std::string name;
  DetectorFn fn;
};

struct TimingStats {
  double median_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
  std::vector<double> per_repeat;
};

/// Times only the metric computation on one record with a monotonic clock;
/// one untimed warm-up repeat precedes the measured ones. repeats >= 3.
TimingStats time_detector(const DetectorFn& detector, const QuasiStaticRecord& record,
                          int repeats);

struct BenchRow {
  std::string detector;
  std::string protocol;
  double phi_ratio = 0.0;
  TimingStats stats;
};

/// Cross product of detectors x all protocol records, strictly serial.
std::vector<BenchRow> bench_suite(std::span<const NamedDetector> detectors,
                                  std::span<const Protocol> protocols, int repeats);

/// Timing CSV: "detector,protocol,phi_ratio,median_s".
void write_timings_csv(const std::filesystem::path& path, std::span<const BenchRow> rows);

}  // namespace lbo::bench
